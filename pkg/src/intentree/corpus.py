"""Dialog corpus records and line-delimited JSON IO.

A corpus file holds one dialog per line:

    {"id": "...", "question": "...", "gold_solution": "...",
     "student_solution": "...", "split": "train"?, "turns": [...]}

Turn records carry {"speaker": "teacher"|"student", "text": "...",
"coarse_label": "Focus"|"Probing"|"Telling"|"Generic"?}. Segmentation adds
an "edus" list to teacher turns; annotation adds "fine_intent",
"annotation_path" and optionally "error" to each EDU record.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from .errors import DataFormatError

SPEAKERS = ("teacher", "student")
COARSE_LABELS = ("Focus", "Probing", "Telling", "Generic")
SPLITS = ("train", "validation", "test")


@dataclass
class EDU:
    """One elementary discourse unit of a teacher turn."""

    dialog_id: str
    turn_index: int
    edu_index: int
    text: str
    inherited_label: Optional[str] = None
    fine_intent: Optional[str] = None
    annotation_path: Optional[list[tuple[str, str]]] = None
    error: Optional[str] = None

    @property
    def ref(self) -> str:
        return f"{self.dialog_id}:{self.turn_index}:{self.edu_index}"

    def to_dict(self) -> dict:
        data = {"edu_index": self.edu_index, "text": self.text}
        if self.inherited_label is not None:
            data["inherited_label"] = self.inherited_label
        if self.fine_intent is not None:
            data["fine_intent"] = self.fine_intent
        if self.annotation_path is not None:
            data["annotation_path"] = [[q, a] for q, a in self.annotation_path]
        if self.error is not None:
            data["error"] = self.error
        return data


@dataclass
class Turn:
    speaker: str
    text: str
    coarse_label: Optional[str] = None
    edus: Optional[list[EDU]] = None

    def is_teacher(self) -> bool:
        return self.speaker == "teacher"

    def to_dict(self) -> dict:
        data: dict = {"speaker": self.speaker, "text": self.text}
        if self.coarse_label is not None:
            data["coarse_label"] = self.coarse_label
        if self.edus is not None:
            data["edus"] = [e.to_dict() for e in self.edus]
        return data


@dataclass
class Dialog:
    id: str
    question: str = ""
    gold_solution: str = ""
    student_solution: str = ""
    split: Optional[str] = None
    turns: list[Turn] = field(default_factory=list)

    def teacher_turns(self) -> list[tuple[int, Turn]]:
        return [(i, t) for i, t in enumerate(self.turns) if t.is_teacher()]

    def to_dict(self) -> dict:
        data = {
            "id": self.id,
            "question": self.question,
            "gold_solution": self.gold_solution,
            "student_solution": self.student_solution,
        }
        if self.split is not None:
            data["split"] = self.split
        data["turns"] = [t.to_dict() for t in self.turns]
        return data


def _parse_edu(raw: dict, dialog_id: str, turn_index: int, where: str) -> EDU:
    if not isinstance(raw, dict) or "text" not in raw or "edu_index" not in raw:
        raise DataFormatError(f"{where}: EDU records need 'edu_index' and 'text'")
    path = raw.get("annotation_path")
    if path is not None:
        path = [(str(q), str(a)) for q, a in path]
    return EDU(
        dialog_id=dialog_id,
        turn_index=turn_index,
        edu_index=int(raw["edu_index"]),
        text=str(raw["text"]),
        inherited_label=raw.get("inherited_label"),
        fine_intent=raw.get("fine_intent"),
        annotation_path=path,
        error=raw.get("error"),
    )


def dialog_from_dict(raw: dict, where: str = "corpus") -> Dialog:
    if not isinstance(raw, dict):
        raise DataFormatError(f"{where}: dialog record must be an object")
    if "id" not in raw or "turns" not in raw:
        raise DataFormatError(f"{where}: dialog records need 'id' and 'turns'")
    split = raw.get("split")
    if split is not None and split not in SPLITS:
        raise DataFormatError(f"{where}: unknown split {split!r}")
    dialog = Dialog(
        id=str(raw["id"]),
        question=str(raw.get("question", "")),
        gold_solution=str(raw.get("gold_solution", "")),
        student_solution=str(raw.get("student_solution", "")),
        split=split,
    )
    for t_idx, turn_raw in enumerate(raw["turns"]):
        where_t = f"{where}: dialog {dialog.id} turn {t_idx}"
        if not isinstance(turn_raw, dict) or "speaker" not in turn_raw or "text" not in turn_raw:
            raise DataFormatError(f"{where_t}: turns need 'speaker' and 'text'")
        speaker = turn_raw["speaker"]
        if speaker not in SPEAKERS:
            raise DataFormatError(f"{where_t}: unknown speaker {speaker!r}")
        label = turn_raw.get("coarse_label")
        if label is not None:
            if speaker != "teacher":
                raise DataFormatError(f"{where_t}: student turns cannot carry a coarse_label")
            if label not in COARSE_LABELS:
                raise DataFormatError(f"{where_t}: unknown coarse_label {label!r}")
        turn = Turn(speaker=speaker, text=str(turn_raw["text"]), coarse_label=label)
        if "edus" in turn_raw:
            turn.edus = [
                _parse_edu(e, dialog.id, t_idx, where_t) for e in turn_raw["edus"]
            ]
        dialog.turns.append(turn)
    return dialog


def read_corpus(path: str | Path) -> list[Dialog]:
    dialogs = []
    seen_ids = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"{path}:{line_no}: invalid JSON: {exc}") from exc
            dialog = dialog_from_dict(raw, where=f"{path}:{line_no}")
            if dialog.id in seen_ids:
                raise DataFormatError(f"{path}:{line_no}: duplicate dialog id {dialog.id!r}")
            seen_ids.add(dialog.id)
            dialogs.append(dialog)
    return dialogs


def write_corpus(dialogs: Iterable[Dialog], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for dialog in dialogs:
            fh.write(json.dumps(dialog.to_dict(), ensure_ascii=False, sort_keys=True))
            fh.write("\n")


def iter_teacher_edus(dialogs: Iterable[Dialog]) -> Iterable[EDU]:
    """All teacher EDUs in corpus order; requires a segmented corpus."""
    for dialog in dialogs:
        for _, turn in dialog.teacher_turns():
            for edu in turn.edus or []:
                yield edu
