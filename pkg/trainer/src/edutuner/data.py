"""Reading the exported dataset directory.

The trainer's only coupling to the annotation toolkit is the file contract:
per-split JSONL files with {prompt, target, intent, dialog_id, edu_ref} and
a flat training_config.json. Anything else is rejected up front.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

REQUIRED_RECORD_KEYS = ("prompt", "target")
REQUIRED_CONFIG_KEYS = (
    "max_sequence_length",
    "adapter_rank",
    "adapter_scaling",
    "epochs",
    "learning_rate",
    "batch_size",
    "gradient_accumulation",
    "optimizer",
    "warmup_ratio",
    "weight_decay",
    "eval_every_steps",
    "eval_metric",
)


class SchemaError(ValueError):
    """Dataset or config files do not match the exporter's contract."""


@dataclass
class TrainingConfig:
    max_sequence_length: int
    adapter_rank: int
    adapter_scaling: int
    epochs: int
    learning_rate: float
    batch_size: int
    gradient_accumulation: int
    optimizer: str
    warmup_ratio: float
    weight_decay: float
    eval_every_steps: int
    eval_metric: str
    scheduler: str = "linear"
    model_id: str = "local-tiny"
    raw: dict = None  # verbatim copy of the exported file

    def validate(self) -> None:
        if self.epochs <= 0:
            raise SchemaError(f"epochs must be positive, got {self.epochs}")
        for name in ("max_sequence_length", "adapter_rank", "adapter_scaling",
                     "batch_size", "gradient_accumulation", "eval_every_steps"):
            if getattr(self, name) <= 0:
                raise SchemaError(f"{name} must be positive")
        if not 0 < self.warmup_ratio <= 1:
            raise SchemaError("warmup_ratio must lie in (0, 1]")
        if self.learning_rate <= 0:
            raise SchemaError("learning_rate must be positive")
        if self.optimizer.lower() not in ("adamw", "adam"):
            raise SchemaError(f"unsupported optimizer {self.optimizer!r}")


def load_config(path: str | Path) -> TrainingConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read training config {path}: {exc}") from exc
    missing = [k for k in REQUIRED_CONFIG_KEYS if k not in raw]
    if missing:
        raise SchemaError(f"{path}: training config missing keys {missing}")
    config = TrainingConfig(
        max_sequence_length=int(raw["max_sequence_length"]),
        adapter_rank=int(raw["adapter_rank"]),
        adapter_scaling=int(raw["adapter_scaling"]),
        epochs=int(raw["epochs"]),
        learning_rate=float(raw["learning_rate"]),
        batch_size=int(raw["batch_size"]),
        gradient_accumulation=int(raw["gradient_accumulation"]),
        optimizer=str(raw["optimizer"]),
        warmup_ratio=float(raw["warmup_ratio"]),
        weight_decay=float(raw["weight_decay"]),
        eval_every_steps=int(raw["eval_every_steps"]),
        eval_metric=str(raw["eval_metric"]),
        scheduler=str(raw.get("scheduler", "linear")),
        model_id=str(raw.get("model_id", "local-tiny")),
        raw=dict(raw),
    )
    config.validate()
    return config


def load_records(path: str | Path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}:{line_no}: invalid JSON: {exc}") from exc
            for key in REQUIRED_RECORD_KEYS:
                if key not in raw:
                    raise SchemaError(f"{path}:{line_no}: dataset lines need {key!r}")
            records.append(raw)
    return records


@dataclass
class Dataset:
    train: list[dict]
    validation: list[dict]
    test: list[dict]
    config: TrainingConfig
    source: Path

    def eval_records(self) -> list[dict]:
        """Validation records, falling back to train when the split is empty."""
        return self.validation if self.validation else self.train


def load_dataset(directory: str | Path) -> Dataset:
    directory = Path(directory)
    config = load_config(directory / "training_config.json")
    splits = {}
    for name in ("train", "validation", "test"):
        path = directory / f"{name}.jsonl"
        splits[name] = load_records(path) if path.is_file() else []
    if not splits["train"]:
        raise SchemaError(f"{directory}: train split is empty or missing")
    return Dataset(
        train=splits["train"],
        validation=splits["validation"],
        test=splits["test"],
        config=config,
        source=directory,
    )
