"""Split teacher utterances into elementary discourse units (EDUs).

The procedure: strip punctuation from the utterance, have a restoration
backend re-punctuate the bare token sequence, then align the two versions.
Sentence boundaries in the original always split; a comma whose restored
counterpart is a sentence-terminal mark becomes an additional split point.
Every EDU inherits the coarse label of its parent turn.

Joining a turn's EDU texts with single spaces always reconstructs the
original turn text up to whitespace normalization.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Optional, Protocol

import requests

from .corpus import Dialog, EDU, Turn
from .errors import BackendError, ValidationError

log = logging.getLogger(__name__)

# Stripped before restoration: ASCII sentence punctuation, straight/typographic
# quotes and ellipsis. Hyphens and apostrophes stay (intra-word).
PUNCT_CHARS = set('.,;:!?"') | set("“”‘’«»…")

TERMINALS = ".?!"

# a trailing "." after these tokens does not end a sentence
ABBREVIATIONS = {
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "vs", "etc",
    "e.g", "i.e", "eg", "ie", "fig", "eq", "approx",
}

_WS_RE = re.compile(r"\s+")


def normalize_ws(text: str) -> str:
    return _WS_RE.sub(" ", text).strip()


@dataclass(frozen=True)
class TokenSpan:
    token: str
    start: int  # first contributing character in the source text
    end: int  # one past the last contributing character


def strip_punctuation(text: str) -> tuple[str, list[TokenSpan]]:
    """Remove punctuation, returning the bare text plus per-token source spans.

    Punctuation characters separate tokens like whitespace does, so "a.b,c!"
    becomes "a b c". The stripped text is the spans' tokens joined by single
    spaces.
    """
    spans: list[TokenSpan] = []
    chars: list[str] = []
    start: Optional[int] = None
    end = 0

    def close():
        nonlocal start, chars
        if chars:
            spans.append(TokenSpan("".join(chars), start, end))
        chars = []
        start = None

    for idx, ch in enumerate(text):
        if ch.isspace() or ch in PUNCT_CHARS:
            close()
        else:
            if start is None:
                start = idx
            chars.append(ch)
            end = idx + 1
    close()
    return " ".join(s.token for s in spans), spans


def _has_punctuation(text: str) -> bool:
    return any(ch in PUNCT_CHARS for ch in text)


class Restorer(Protocol):
    kind: str

    def restore(self, stripped: str) -> str: ...


class FallbackRestorer:
    """Rule-based stand-in for a punctuation-restoration model.

    Appends a terminal mark to the bare text: a question mark when the
    leading token (after common discourse markers) is interrogative,
    otherwise a period. Never introduces internal punctuation, so it only
    ever yields sentence-level splits downstream.
    """

    kind = "rule-based-fallback"

    DISCOURSE_MARKERS = {
        "so", "well", "but", "and", "now", "then", "ok", "okay",
        "right", "oh", "hmm", "also", "alright",
    }
    INTERROGATIVES = {
        "what", "why", "how", "when", "where", "who", "whom", "whose", "which",
        "can", "could", "do", "does", "did", "is", "are", "was", "were",
        "will", "would", "should", "shall", "have", "has", "had", "am",
        "may", "might",
    }

    def restore(self, stripped: str) -> str:
        tokens = stripped.split()
        if not tokens:
            return stripped
        lead = None
        for token in tokens:
            if token.lower() in self.DISCOURSE_MARKERS:
                continue
            lead = token.lower()
            break
        mark = "?" if lead in self.INTERROGATIVES else "."
        return stripped + mark


class HttpRestorer:
    """Punctuation restoration via an external HTTP service.

    POSTs ``{"text": <stripped>}`` and expects ``{"text": <restored>}``
    (a "restored" key is also accepted).
    """

    kind = "external-service"

    def __init__(self, endpoint: str, timeout: float = 30.0, retries: int = 2):
        self.endpoint = endpoint
        self.timeout = timeout
        self.retries = retries
        self.session = requests.Session()

    def restore(self, stripped: str) -> str:
        last_error: Optional[Exception] = None
        for _ in range(self.retries + 1):
            try:
                reply = self.session.post(
                    self.endpoint, json={"text": stripped}, timeout=self.timeout
                )
            except (requests.Timeout, requests.ConnectionError) as exc:
                last_error = exc
                continue
            if reply.status_code != 200:
                raise BackendError(f"restorer returned HTTP {reply.status_code}")
            try:
                payload = reply.json()
            except ValueError as exc:
                raise BackendError(f"restorer returned non-JSON body: {exc}") from exc
            restored = payload.get("text", payload.get("restored"))
            if not isinstance(restored, str):
                raise BackendError("restorer reply lacks a 'text' field")
            return restored
        raise BackendError(f"restorer unreachable: {last_error}")


def make_restorer(kind: str, endpoint: Optional[str] = None) -> Restorer:
    if kind in ("fallback", "rule-based-fallback"):
        return FallbackRestorer()
    if kind in ("external", "external-service"):
        if not endpoint:
            raise ValidationError("external restorer needs --endpoint")
        return HttpRestorer(endpoint)
    raise ValidationError(f"unknown restorer kind {kind!r}")


def restore_punctuation(stripped: str, backend: Restorer) -> str:
    """Run the backend and enforce its token-preservation contract."""
    if _has_punctuation(stripped):
        raise ValidationError("restore_punctuation input must be punctuation-free")
    restored = backend.restore(stripped)
    restored_bare, _ = strip_punctuation(restored)
    if restored_bare.lower().split() != stripped.lower().split():
        raise BackendError(
            "restorer changed the token sequence "
            f"({stripped.lower().split()[:8]}... vs {restored_bare.lower().split()[:8]}...)"
        )
    return restored


# ---------------------------------------------------------------------------
# sentence splitting


def _is_abbreviation(text: str, dot_index: int) -> bool:
    """True when the '.' at dot_index closes a known abbreviation."""
    lowered = text[: dot_index + 1].lower()
    for abbr in ABBREVIATIONS:
        token = abbr + "."
        if lowered.endswith(token):
            before = dot_index - len(token)
            if before < 0 or not (text[before].isalnum() or text[before] == "."):
                return True
    return False


def sentence_split_offsets(text: str) -> list[int]:
    """Offsets (end-exclusive) after terminal punctuation runs."""
    offsets = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch in TERMINALS:
            run_start = i
            while i < n and text[i] in TERMINALS:
                i += 1
            run_end = i
            # allow closing quotes/brackets to ride along
            while i < n and text[i] in "\"'”’)]":
                i += 1
            at_boundary = i >= n or text[i].isspace()
            if not at_boundary:
                continue
            single_dot = run_end - run_start == 1 and text[run_start] == "."
            if single_dot and _is_abbreviation(text, run_start):
                continue
            if i < n:  # a split at end-of-string adds nothing
                offsets.append(i)
        else:
            i += 1
    return offsets


# ---------------------------------------------------------------------------
# alignment and segmentation


@dataclass
class SegmentationInfo:
    edus: list[str]
    aligned: bool = True
    comma_splits: int = 0
    warning: Optional[str] = None


def _segment_info(original: str, restored: str) -> SegmentationInfo:
    offsets = set(sentence_split_offsets(original))
    info = SegmentationInfo(edus=[])

    _, orig_spans = strip_punctuation(original)
    _, rest_spans = strip_punctuation(restored)
    orig_tokens = [s.token.lower() for s in orig_spans]
    rest_tokens = [s.token.lower() for s in rest_spans]

    if orig_tokens != rest_tokens:
        info.aligned = False
        info.warning = (
            "restored text does not align with the original; "
            "using sentence boundaries only"
        )
    else:
        for pos, ch in enumerate(original):
            if ch != ",":
                continue
            slot = _between_tokens(orig_spans, pos)
            if slot is None:
                continue
            gap_original = original[orig_spans[slot].end : orig_spans[slot + 1].start]
            if any(t in gap_original for t in TERMINALS):
                continue  # already a sentence boundary; not a replacement
            gap_restored = restored[rest_spans[slot].end : rest_spans[slot + 1].start]
            if any(t in gap_restored for t in TERMINALS):
                offsets.add(pos + 1)
                info.comma_splits += 1

    info.edus = _slice(original, sorted(offsets))
    return info


def _between_tokens(spans: list[TokenSpan], pos: int) -> Optional[int]:
    """Index i such that pos falls between tokens i and i+1, else None."""
    for i in range(len(spans) - 1):
        if spans[i].end <= pos < spans[i + 1].start:
            return i
    return None


def _slice(text: str, offsets: list[int]) -> list[str]:
    pieces = []
    last = 0
    for off in offsets:
        pieces.append(text[last:off])
        last = off
    pieces.append(text[last:])

    edus: list[str] = []
    for piece in pieces:
        trimmed = piece.strip()
        if not trimmed:
            continue
        edus.append(normalize_ws(trimmed))
    return edus


def segment_utterance(original: str, restored: str) -> list[str]:
    """EDU texts for one utterance given its restored counterpart."""
    return _segment_info(original, restored).edus


def inherit_labels(utterance: Turn, edu_texts: list[str], dialog_id: str, turn_index: int) -> list[EDU]:
    """Wrap EDU texts as records carrying the turn's coarse label."""
    if not utterance.is_teacher():
        raise ValidationError("only teacher turns are segmented and labeled")
    if utterance.coarse_label is None:
        raise ValidationError("cannot inherit from an unlabeled turn")
    return [
        EDU(
            dialog_id=dialog_id,
            turn_index=turn_index,
            edu_index=i,
            text=text,
            inherited_label=utterance.coarse_label,
        )
        for i, text in enumerate(edu_texts)
    ]


# ---------------------------------------------------------------------------
# corpus-level segmentation


@dataclass
class SegmentationReport:
    teacher_turns: int = 0
    total_edus: int = 0
    single_edu_turns: int = 0
    single_edu_turn_keys: list[tuple[str, int]] = field(default_factory=list)
    per_split: dict = field(default_factory=dict)
    comma_splits: int = 0
    warnings: list[str] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "teacher_turns": self.teacher_turns,
            "total_edus": self.total_edus,
            "single_edu_turns": self.single_edu_turns,
            "single_edu_turn_keys": [list(k) for k in self.single_edu_turn_keys],
            "per_split": dict(self.per_split),
            "comma_splits": self.comma_splits,
            "warnings": list(self.warnings),
            "errors": list(self.errors),
        }


def segment_turn(turn: Turn, dialog_id: str, turn_index: int, backend: Restorer) -> tuple[list[EDU], SegmentationInfo]:
    """Segment a single teacher turn, degrading to sentence-only splits when
    the restorer fails or drifts."""
    stripped, _ = strip_punctuation(turn.text)
    try:
        restored = restore_punctuation(stripped, backend)
    except BackendError as exc:
        info = _segment_info(turn.text, turn.text)
        info.aligned = False
        info.warning = f"restorer failed ({exc}); sentence boundaries only"
        texts = info.edus
    else:
        info = _segment_info(turn.text, restored)
        texts = info.edus

    if turn.coarse_label is not None:
        edus = inherit_labels(turn, texts, dialog_id, turn_index)
    else:
        edus = [
            EDU(dialog_id=dialog_id, turn_index=turn_index, edu_index=i, text=t)
            for i, t in enumerate(texts)
        ]
    return edus, info


def segment_corpus(dialogs: list[Dialog], backend: Restorer) -> tuple[list[Dialog], SegmentationReport]:
    """Segment every teacher turn in place; student turns are left alone."""
    report = SegmentationReport()
    for dialog in dialogs:
        split_key = dialog.split or "unassigned"
        for turn_index, turn in enumerate(dialog.turns):
            if not turn.is_teacher():
                continue
            report.teacher_turns += 1
            try:
                edus, info = segment_turn(turn, dialog.id, turn_index, backend)
            except ValidationError as exc:
                report.errors.append(f"{dialog.id}:{turn_index}: {exc}")
                continue
            turn.edus = edus
            report.total_edus += len(edus)
            report.comma_splits += info.comma_splits
            bucket = report.per_split.setdefault(
                split_key, {"teacher_turns": 0, "edus": 0}
            )
            bucket["teacher_turns"] += 1
            bucket["edus"] += len(edus)
            if len(edus) == 1:
                report.single_edu_turns += 1
                report.single_edu_turn_keys.append((dialog.id, turn_index))
            if info.warning:
                report.warnings.append(f"{dialog.id}:{turn_index}: {info.warning}")
    return dialogs, report
