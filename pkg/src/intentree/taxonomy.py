"""The teacher-move taxonomy: eleven fine-grained intents under four categories.

Intent names are canonicalized case-insensitively with hyphens and spaces
treated as equivalent, so "Seeking Self Correction" and
"Seeking Self-Correction" resolve to the same intent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from .errors import ValidationError

CATEGORIES = ("Focus", "Probing", "Telling", "Generic")

# Canonical intents: (name, category, example utterances).
CANONICAL_INTENTS: tuple[tuple[str, str, tuple[str, ...]], ...] = (
    ("Seek Strategy", "Focus", ("So what should you do next?",)),
    ("Guiding Student Focus", "Focus", ("Can you calculate ... ?",)),
    (
        "Recall Relevant Information",
        "Focus",
        ("Can you reread the question and tell me what is ... ?",),
    ),
    (
        "Asking for Explanation",
        "Probing",
        ("Why do you think you need to add these numbers?",),
    ),
    ("Seeking Self-Correction", "Probing", ("Are you sure you need to add here?",)),
    (
        "Perturbing the Question",
        "Probing",
        ("How would things change if they had ... items instead?",),
    ),
    (
        "Seeking World Knowledge",
        "Probing",
        ("How do you calculate the perimeter of a square?",),
    ),
    (
        "Revealing Strategy",
        "Telling",
        ("You need to add ... to ... to get your answer.",),
    ),
    ("Revealing Answer", "Telling", ("No, he had ... items.",)),
    (
        "Greeting/Farewell",
        "Generic",
        (
            "Hi ..., how are you doing with the word problem?",
            "Good Job!",
            "Is there anything else I can help with?",
        ),
    ),
    ("General Inquiry", "Generic", ("Can you go walk me through your solution?",)),
)


def _normalize(name: str) -> str:
    return name.strip().lower().replace("-", " ")


_CANONICAL_BY_KEY = {_normalize(name): (name, cat) for name, cat, _ in CANONICAL_INTENTS}


def canonical_intent_name(name: str) -> str:
    """Resolve a (possibly hyphen/case-variant) name to its canonical form."""
    key = _normalize(name)
    if key not in _CANONICAL_BY_KEY:
        raise ValidationError(f"unknown intent name: {name!r}")
    return _CANONICAL_BY_KEY[key][0]


def map_to_category(intent_name: str) -> str:
    """Parent category of a canonical intent name.

    Category names pass through unchanged, which keeps repeated
    coarse-mapping idempotent.
    """
    stripped = intent_name.strip()
    if stripped in CATEGORIES:
        return stripped
    key = _normalize(intent_name)
    if key not in _CANONICAL_BY_KEY:
        raise ValidationError(f"unknown intent name: {intent_name!r}")
    return _CANONICAL_BY_KEY[key][1]


@dataclass(frozen=True)
class Intent:
    name: str
    category: str
    examples: tuple[str, ...] = ()

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValidationError(f"unknown category: {self.category!r}")
        if not self.name.strip():
            raise ValidationError("intent name must be nonempty")


@dataclass
class Taxonomy:
    """A validated intent set plus optional class-frequency weights."""

    intents: list[Intent]
    frequencies: Optional[dict[str, float]] = None
    name: str = "taxonomy"
    _by_key: dict = field(init=False, repr=False, default_factory=dict)

    def __post_init__(self):
        if not self.intents:
            raise ValidationError("taxonomy must contain at least one intent")
        for intent in self.intents:
            key = _normalize(intent.name)
            if key in self._by_key:
                raise ValidationError(f"duplicate intent name: {intent.name!r}")
            self._by_key[key] = intent
        if self.frequencies is not None:
            freqs = {}
            for raw_name, weight in self.frequencies.items():
                intent = self.intent(raw_name)
                if weight < 0:
                    raise ValidationError(f"negative frequency for {raw_name!r}")
                freqs[intent.name] = float(weight)
            missing = [i.name for i in self.intents if i.name not in freqs]
            if missing:
                raise ValidationError(f"frequencies missing entries for: {missing}")
            if sum(freqs.values()) <= 0:
                raise ValidationError("frequency weights must sum to a positive value")
            self.frequencies = freqs

    def __len__(self) -> int:
        return len(self.intents)

    def intent(self, name: str) -> Intent:
        key = _normalize(name)
        if key not in self._by_key:
            raise ValidationError(f"intent not in taxonomy: {name!r}")
        return self._by_key[key]

    def intent_names(self) -> list[str]:
        return [i.name for i in self.intents]

    def categories(self) -> list[str]:
        seen = []
        for intent in self.intents:
            if intent.category not in seen:
                seen.append(intent.category)
        return seen

    def weight(self, name: str) -> float:
        """Frequency weight for an intent; uniform 1.0 when none were given."""
        intent = self.intent(name)
        if self.frequencies is None:
            return 1.0
        return self.frequencies[intent.name]

    def to_dict(self) -> dict:
        data: dict = {
            "name": self.name,
            "intents": [
                {
                    "name": i.name,
                    "category": i.category,
                    "examples": list(i.examples),
                }
                for i in self.intents
            ],
        }
        if self.frequencies is not None:
            data["frequencies"] = dict(self.frequencies)
        return data


def canonical_taxonomy(frequencies: Optional[dict[str, float]] = None) -> Taxonomy:
    """The built-in eleven-intent taxonomy."""
    intents = [Intent(name, cat, examples) for name, cat, examples in CANONICAL_INTENTS]
    return Taxonomy(intents=intents, frequencies=frequencies, name="teacher-moves-11")


def taxonomy_from_dict(raw: dict, where: str = "taxonomy") -> Taxonomy:
    if not isinstance(raw, dict) or "intents" not in raw:
        raise ValidationError(f"{where}: document needs a top-level 'intents' list")
    intents = []
    for idx, entry in enumerate(raw["intents"]):
        where_i = f"{where}: intents[{idx}]"
        if not isinstance(entry, dict):
            raise ValidationError(f"{where_i}: intent records must be objects")
        for field_name in ("name", "category"):
            if field_name not in entry:
                raise ValidationError(f"{where_i}: missing {field_name!r}")
        examples = entry.get("examples", [])
        if not isinstance(examples, list) or not examples:
            raise ValidationError(f"{where_i}: at least one example is required")
        intents.append(
            Intent(
                name=str(entry["name"]),
                category=str(entry["category"]),
                examples=tuple(str(e) for e in examples),
            )
        )
    return Taxonomy(
        intents=intents,
        frequencies=raw.get("frequencies"),
        name=str(raw.get("name", "taxonomy")),
    )


def load_taxonomy(path: str | Path) -> Taxonomy:
    """Load and validate a YAML taxonomy document."""
    with open(path, encoding="utf-8") as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ValidationError(f"{path}: malformed YAML: {exc}") from exc
    return taxonomy_from_dict(raw, where=str(path))


def load_frequencies(path: str | Path) -> dict[str, float]:
    """Load a flat intent-name -> weight YAML mapping."""
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ValidationError(f"{path}: frequencies must be a flat name -> weight map")
    return {str(k): float(v) for k, v in raw.items()}
