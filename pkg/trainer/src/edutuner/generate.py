"""Hypothesis generation from a trained adapter (or zero-shot base model).

Reads a prompts file in the exported dataset line format and writes one
hypothesis per prompt, same order, mirroring the input fields plus a
"hypothesis" key, so the annotation toolkit's evaluate-generation command
can score the file directly against the reference split.
"""

from __future__ import annotations

import json
import torch
from pathlib import Path
from typing import Optional

from .data import SchemaError, load_records
from .lora import attach_adapters, load_adapter_meta, load_adapter_state
from .model import build_model, init_seed
from .tokenizer import Tokenizer
from .train import greedy_generate

DEFAULT_MAX_NEW_TOKENS = 32


def _model_from_adapter(adapter_dir: Path):
    meta = load_adapter_meta(adapter_dir)
    tokenizer = Tokenizer.load(adapter_dir / "vocab.json")
    model_config = meta["model_config"]
    model = build_model(
        meta["model_id"], model_config["vocab_size"], model_config["max_positions"]
    )
    attach_adapters(model, meta["adapter_rank"], meta["adapter_scaling"])
    state = torch.load(adapter_dir / "adapter_weights.pt", weights_only=True)
    load_adapter_state(model, state)
    return model, tokenizer, model_config["max_positions"]


def _zero_shot_model(records, model_id: str, max_positions: int, seed: int):
    # zero-shot baseline harness: fresh base model, vocabulary from the
    # prompts file itself (documented stand-in behavior at toy scale)
    texts = [r["prompt"] for r in records] + [r.get("target", "") for r in records]
    tokenizer = Tokenizer.build(texts)
    init_seed(seed)
    model = build_model(model_id, tokenizer.vocab_size, max_positions)
    return model, tokenizer, max_positions


def generate(
    prompts_file: str | Path,
    out_file: str | Path,
    adapter_dir: Optional[str | Path] = None,
    model_id: str = "local-tiny",
    max_new_tokens: int = DEFAULT_MAX_NEW_TOKENS,
    max_positions: int = 1600,
    seed: int = 0,
) -> int:
    """Returns the number of hypotheses written (== number of prompts)."""
    records = load_records(prompts_file)
    if adapter_dir is not None:
        adapter_dir = Path(adapter_dir)
        if not (adapter_dir / "adapter_weights.pt").is_file():
            raise SchemaError(f"{adapter_dir}: not an adapter directory")
        model, tokenizer, max_positions = _model_from_adapter(adapter_dir)
    else:
        model, tokenizer, max_positions = _zero_shot_model(
            records, model_id, max_positions, seed
        )
    model.eval()

    out_file = Path(out_file)
    out_file.parent.mkdir(parents=True, exist_ok=True)
    with open(out_file, "w", encoding="utf-8") as fh:
        for record in records:
            hypothesis = greedy_generate(
                model, tokenizer, record["prompt"], max_positions, max_new_tokens
            )
            line = {
                "hypothesis": hypothesis,
                "intent": record.get("intent"),
                "dialog_id": record.get("dialog_id"),
                "edu_ref": record.get("edu_ref"),
            }
            fh.write(json.dumps(line, ensure_ascii=False, sort_keys=True) + "\n")
    return len(records)
