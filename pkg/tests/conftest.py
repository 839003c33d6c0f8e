from pathlib import Path

import pytest

from intentree.corpus import read_corpus
from intentree.taxonomy import canonical_taxonomy, load_frequencies
from intentree.treebuild import ScriptedSplitOracle

REPO = Path(__file__).resolve().parent.parent
DATA = REPO / "data" / "mini"

# filled by the @criterion decorator in test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def data_dir() -> Path:
    return DATA


@pytest.fixture
def mini_corpus():
    return read_corpus(DATA / "corpus.jsonl")


@pytest.fixture
def figure_oracle() -> ScriptedSplitOracle:
    """Scripted splits reproducing the bundled five-branch, depth-two tree."""
    return ScriptedSplitOracle.load(DATA / "split_script.yaml")


@pytest.fixture
def taxonomy11():
    return canonical_taxonomy()


@pytest.fixture
def taxonomy11_weighted():
    return canonical_taxonomy(frequencies=load_frequencies(DATA / "frequencies.yaml"))
