"""Intent-conditioned fine-tuning data: prompt/target pairs, splits, export.

One training sample is produced per annotated teacher EDU: the prompt holds
the task, solutions, dialog history (including earlier EDUs of the same
turn) and the intent of the target EDU; the target is the EDU text itself.
Swapping each fine intent for its parent category yields the coarse
(four-intent) variant of the same dataset.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .corpus import Dialog
from .errors import ValidationError
from .taxonomy import map_to_category

log = logging.getLogger(__name__)

TEMPLATE_VERSION = "prompt-template-v1"

DEFAULT_INSTRUCTION = (
    "You are a math tutor helping a student solve a word problem. Given the "
    "problem, its correct solution, the student's attempted solution, and "
    "the dialog so far, write the teacher's next utterance. The utterance "
    "must realize the requested teaching intent."
)


@dataclass
class PromptRecord:
    instruction: str
    task: str
    gold_solution: str
    student_solution: str
    history: list[tuple[str, str]]  # (speaker, text)
    intent: str
    target: str
    dialog_id: str
    edu_ref: str

    def to_dict(self) -> dict:
        return {
            "instruction": self.instruction,
            "task": self.task,
            "gold_solution": self.gold_solution,
            "student_solution": self.student_solution,
            "history": [[s, t] for s, t in self.history],
            "intent": self.intent,
            "target": self.target,
            "dialog_id": self.dialog_id,
            "edu_ref": self.edu_ref,
        }


@dataclass
class TrainingConfig:
    """Fine-tuning hyperparameters exported alongside the dataset."""

    max_sequence_length: int = 1600
    adapter_rank: int = 32
    adapter_scaling: int = 32
    epochs: int = 1
    learning_rate: float = 2e-5
    batch_size: int = 8
    gradient_accumulation: int = 4
    optimizer: str = "adamw"
    scheduler: str = "linear"
    warmup_ratio: float = 0.1
    weight_decay: float = 0.1
    eval_every_steps: int = 50
    eval_metric: str = "corpus_bleu"
    model_id: str = "mistral-7b-instruct-v0.3-bnb-4bit"

    def __post_init__(self):
        positive = (
            ("max_sequence_length", self.max_sequence_length),
            ("adapter_rank", self.adapter_rank),
            ("adapter_scaling", self.adapter_scaling),
            ("epochs", self.epochs),
            ("learning_rate", self.learning_rate),
            ("batch_size", self.batch_size),
            ("gradient_accumulation", self.gradient_accumulation),
            ("eval_every_steps", self.eval_every_steps),
        )
        for name, value in positive:
            if value <= 0:
                raise ValidationError(f"{name} must be positive, got {value}")
        for name, value in (("warmup_ratio", self.warmup_ratio),):
            if not 0 < value <= 1:
                raise ValidationError(f"{name} must lie in (0, 1], got {value}")
        if self.weight_decay < 0:
            raise ValidationError("weight_decay must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "TrainingConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ValidationError(f"unknown training-config fields: {sorted(unknown)}")
        return cls(**raw)


@dataclass
class SplitSpec:
    train: int = 500
    validation: int = 100
    test: int = 100
    seed: int = 0

    def __post_init__(self):
        if min(self.train, self.validation, self.test) < 0:
            raise ValidationError("split sizes must be non-negative")

    def total(self) -> int:
        return self.train + self.validation + self.test


def split_dialogs(
    dialogs: Sequence[Dialog], spec: SplitSpec
) -> tuple[list[Dialog], list[Dialog], list[Dialog]]:
    """Seeded sampling without replacement into train/validation/test.

    The assignment is stamped onto each sampled dialog's ``split`` field;
    identical seeds give identical splits.
    """
    if spec.total() > len(dialogs):
        raise ValidationError(
            f"corpus of {len(dialogs)} dialogs is too small for splits totalling {spec.total()}"
        )
    rng = random.Random(spec.seed)
    order = rng.sample(range(len(dialogs)), spec.total())
    train_idx = order[: spec.train]
    val_idx = order[spec.train : spec.train + spec.validation]
    test_idx = order[spec.train + spec.validation :]

    buckets: dict[str, list[Dialog]] = {"train": [], "validation": [], "test": []}
    for name, indices in (("train", train_idx), ("validation", val_idx), ("test", test_idx)):
        for i in sorted(indices):
            dialogs[i].split = name
            buckets[name].append(dialogs[i])
    return buckets["train"], buckets["validation"], buckets["test"]


def build_pairs(dialog: Dialog, instruction: str = DEFAULT_INSTRUCTION) -> list[PromptRecord]:
    """One record per annotated teacher EDU, in dialog order.

    The history holds all prior turns plus earlier EDUs of the same turn.
    Unannotated teacher EDUs are skipped with a warning.
    """
    records: list[PromptRecord] = []
    for turn_index, turn in enumerate(dialog.turns):
        if not turn.is_teacher() or turn.edus is None:
            continue
        prior_turns = [(t.speaker, t.text) for t in dialog.turns[:turn_index]]
        for edu in turn.edus:
            if edu.fine_intent is None:
                log.warning("skipping unannotated EDU %s", edu.ref)
                continue
            history = prior_turns + [
                ("teacher", prev.text) for prev in turn.edus[: edu.edu_index]
            ]
            records.append(
                PromptRecord(
                    instruction=instruction,
                    task=dialog.question,
                    gold_solution=dialog.gold_solution,
                    student_solution=dialog.student_solution,
                    history=history,
                    intent=edu.fine_intent,
                    target=edu.text,
                    dialog_id=dialog.id,
                    edu_ref=edu.ref,
                )
            )
    return records


def render_prompt(record: PromptRecord) -> str:
    """Byte-stable canonical prompt with labeled sections in fixed order."""
    history_lines = "\n".join(
        f"{speaker.capitalize()}: {text}" for speaker, text in record.history
    )
    sections = [
        f"# Instruction:\n{record.instruction}",
        f"# Math problem:\n{record.task}",
        f"# Correct solution:\n{record.gold_solution}",
        f"# Student solution:\n{record.student_solution}",
        f"# Dialog history:\n{history_lines}",
        f"# Intent of the next teacher utterance:\n{record.intent}",
        "# Teacher:",
    ]
    return "\n\n".join(sections) + "\n"


def coarse_variant(records: Sequence[PromptRecord]) -> list[PromptRecord]:
    """The same records with each intent replaced by its parent category."""
    coarse = []
    for record in records:
        coarse.append(
            PromptRecord(
                instruction=record.instruction,
                task=record.task,
                gold_solution=record.gold_solution,
                student_solution=record.student_solution,
                history=list(record.history),
                intent=map_to_category(record.intent),
                target=record.target,
                dialog_id=record.dialog_id,
                edu_ref=record.edu_ref,
            )
        )
    return coarse


def _sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def export_dataset(
    records_by_split: dict[str, list[PromptRecord]],
    config: TrainingConfig,
    destination: str | Path,
) -> dict:
    """Write one JSONL file per split plus the training config and a manifest.

    Dataset lines carry {prompt, target, intent, dialog_id, edu_ref}; the
    manifest records per-file line counts and sha256 hashes, so re-exports
    of identical inputs are hash-identical.
    """
    destination = Path(destination)
    destination.mkdir(parents=True, exist_ok=True)

    manifest: dict = {
        "template_version": TEMPLATE_VERSION,
        "files": {},
    }
    for split_name, records in records_by_split.items():
        file_path = destination / f"{split_name}.jsonl"
        with open(file_path, "w", encoding="utf-8") as fh:
            for record in records:
                line = {
                    "prompt": render_prompt(record),
                    "target": record.target,
                    "intent": record.intent,
                    "dialog_id": record.dialog_id,
                    "edu_ref": record.edu_ref,
                }
                fh.write(json.dumps(line, ensure_ascii=False, sort_keys=True) + "\n")
        manifest["files"][file_path.name] = {
            "count": len(records),
            "sha256": _sha256_file(file_path),
        }

    config_path = destination / "training_config.json"
    config_path.write_text(
        json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    manifest["files"][config_path.name] = {
        "count": 1,
        "sha256": _sha256_file(config_path),
    }

    manifest_path = destination / "manifest.json"
    manifest_path.write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return manifest


def load_dataset_file(path: str | Path) -> list[dict]:
    """Read an exported dataset JSONL file, validating the record shape."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            raw = json.loads(line)
            for key in ("prompt", "target", "intent"):
                if key not in raw:
                    raise ValidationError(f"{path}:{line_no}: dataset lines need {key!r}")
            records.append(raw)
    return records
