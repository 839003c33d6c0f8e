#!/usr/bin/env python3
"""Run the full annotation pipeline over the bundled mini corpus.

Artifacts land in out/mini relative to the current directory. Useful as a
smoke check after changes and as a worked example of the pipeline config.
"""

import sys
from pathlib import Path

from intentree.cli import main

CONFIG = Path(__file__).resolve().parent.parent / "data" / "mini" / "pipeline.yaml"

if __name__ == "__main__":
    sys.exit(main(["pipeline", "--config", str(CONFIG)]))
