"""Assign fine-grained intents to teacher EDUs by walking the decision tree.

Each internal node's question is posed to a chat backend together with the
EDU, a window of preceding dialog context and the node's answer options in
branch order. The parsed answer selects the branch; the walk ends at an
intent leaf. EDUs whose answers stay unparseable after the retry budget get
an error record instead of a silently defaulted intent.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .corpus import Dialog, EDU
from .errors import AnswerParseError, BackendError, ValidationError
from .llm import ChatBackend, ChatRequest
from .tree import DecisionNode, DecisionTree

DEFAULT_CONTEXT_WINDOW = 5
DEFAULT_RETRIES = 3

SYSTEM_PROMPT = (
    "You label segments of teacher utterances in math tutoring dialogs. "
    "Answer each question with exactly one of the offered options, and "
    "nothing else."
)

_PROMPT_TEMPLATE = """Dialog context:
{context_block}

Segment to label: "{edu_text}"

Question: {question}
Options:
{options_block}

Answer with exactly one option label.
"""

_RETRY_SUFFIX = (
    "\nYour previous reply did not match any option. "
    "Repeat exactly one option label from the list."
)


@dataclass
class AnnotationRequest:
    edu: EDU
    context: list[tuple[str, str]]  # (speaker, text), oldest first
    tree: DecisionTree


@dataclass
class AnnotationResult:
    fine_intent: str
    path: list[tuple[str, str]]  # (question, chosen answer label)
    attempts: int


def parse_answer(raw: str, options: Sequence[str]) -> str:
    """Map a backend reply onto one of the offered answer labels.

    Tries case-insensitive exact match, then unique prefix match (either
    direction), then unique substring match.
    """
    if not options:
        raise ValidationError("parse_answer needs a nonempty option list")
    if len(set(o.lower() for o in options)) != len(options):
        raise ValidationError("answer options must be distinct")

    cleaned = raw.strip().strip('"\'').rstrip(".!?").strip().lower()
    lowered_raw = raw.lower()

    exact = [o for o in options if o.lower() == cleaned]
    if len(exact) == 1:
        return exact[0]

    if cleaned:
        prefix = [
            o
            for o in options
            if o.lower().startswith(cleaned) or cleaned.startswith(o.lower())
        ]
        if len(prefix) == 1:
            return prefix[0]
        if len(prefix) > 1:
            raise AnswerParseError(f"ambiguous answer {raw!r}: prefix of {prefix}")

    substr = [o for o in options if o.lower() in lowered_raw]
    if len(substr) == 1:
        return substr[0]
    if len(substr) > 1:
        raise AnswerParseError(f"ambiguous answer {raw!r}: matches {substr}")
    raise AnswerParseError(f"answer {raw!r} matches none of {list(options)}")


def _format_context(context: list[tuple[str, str]]) -> str:
    if not context:
        return "(start of dialog)"
    return "\n".join(f"{speaker.capitalize()}: {text}" for speaker, text in context)


def build_node_prompt(edu_text: str, context: list[tuple[str, str]], node: DecisionNode) -> str:
    options_block = "\n".join(f"- {label}" for label, _ in node.branches)
    return _PROMPT_TEMPLATE.format(
        context_block=_format_context(context),
        edu_text=edu_text,
        question=node.question,
        options_block=options_block,
    )


def annotate_edu(
    request: AnnotationRequest,
    llm: ChatBackend,
    retries: int = DEFAULT_RETRIES,
    model_id: str = "default",
) -> AnnotationResult:
    """Walk the tree for one EDU. A single-leaf tree answers immediately
    without any backend calls."""
    node = request.tree.root
    path: list[tuple[str, str]] = []
    attempts = 0

    while not node.is_leaf():
        options = [label for label, _ in node.branches]
        prompt = build_node_prompt(request.edu.text, request.context, node)
        answer: Optional[str] = None
        last_error: Optional[Exception] = None
        for attempt in range(1 + retries):
            attempts += 1
            response = llm.complete(
                ChatRequest(
                    messages=(
                        ("system", SYSTEM_PROMPT),
                        ("user", prompt if attempt == 0 else prompt + _RETRY_SUFFIX),
                    ),
                    temperature=0.0,
                    max_tokens=64,
                    model_id=model_id,
                )
            )
            try:
                answer = parse_answer(response.content, options)
                break
            except AnswerParseError as exc:
                last_error = exc
        if answer is None:
            raise AnswerParseError(
                f"EDU {request.edu.ref}: no parseable answer after {retries} retries: {last_error}"
            )
        path.append((node.question, answer))
        node = dict(node.branches)[answer]

    return AnnotationResult(fine_intent=node.leaf_intent, path=path, attempts=attempts)


# ---------------------------------------------------------------------------
# corpus-level annotation


@dataclass
class AnnotationRunReport:
    annotated: int = 0
    failed: int = 0
    intent_counts: dict = field(default_factory=dict)
    failures: list[str] = field(default_factory=list)
    elapsed_seconds: float = 0.0
    backend_calls: int = 0

    def to_dict(self) -> dict:
        return {
            "annotated": self.annotated,
            "failed": self.failed,
            "intent_counts": dict(sorted(self.intent_counts.items())),
            "failures": list(self.failures),
            "elapsed_seconds": self.elapsed_seconds,
            "backend_calls": self.backend_calls,
        }


def _context_for(dialog: Dialog, turn_index: int, edu_index: int, window: int) -> list[tuple[str, str]]:
    """The last `window` turns before the target turn, plus any earlier EDUs
    of the same turn."""
    context: list[tuple[str, str]] = []
    for turn in dialog.turns[max(0, turn_index - window) : turn_index]:
        context.append((turn.speaker, turn.text))
    target_turn = dialog.turns[turn_index]
    for edu in (target_turn.edus or [])[:edu_index]:
        context.append((target_turn.speaker, edu.text))
    return context


def annotate_corpus(
    dialogs: list[Dialog],
    tree: DecisionTree,
    llm: ChatBackend,
    context_window: int = DEFAULT_CONTEXT_WINDOW,
    retries: int = DEFAULT_RETRIES,
    model_id: str = "default",
    max_inflight: int = 1,
) -> tuple[list[Dialog], AnnotationRunReport]:
    """Annotate every teacher EDU; results are merged in corpus order.

    Failures are recorded per EDU (fine_intent stays unset) and never abort
    the run. ``max_inflight`` bounds concurrent backend requests; with a
    deterministic prompt-keyed backend the output is identical at any
    concurrency level (ordered-queue scripts require max_inflight=1).
    """
    if max_inflight < 1:
        raise ValidationError("max_inflight must be at least 1")
    report = AnnotationRunReport()
    started = time.monotonic()

    pending: list[tuple[EDU, AnnotationRequest]] = []
    for dialog in dialogs:
        for turn_index, turn in dialog.teacher_turns():
            if turn.edus is None:
                raise ValidationError(
                    f"dialog {dialog.id} turn {turn_index} is not segmented; run segment first"
                )
            for edu in turn.edus:
                request = AnnotationRequest(
                    edu=edu,
                    context=_context_for(dialog, turn_index, edu.edu_index, context_window),
                    tree=tree,
                )
                pending.append((edu, request))

    def run(item):
        _, request = item
        try:
            return annotate_edu(request, llm, retries=retries, model_id=model_id)
        except (AnswerParseError, BackendError) as exc:
            return exc

    if max_inflight == 1:
        outcomes = map(run, pending)
    else:
        with ThreadPoolExecutor(max_workers=max_inflight) as pool:
            outcomes = list(pool.map(run, pending))

    for (edu, _), outcome in zip(pending, outcomes):
        if isinstance(outcome, Exception):
            edu.error = str(outcome)
            report.failed += 1
            report.failures.append(f"{edu.ref}: {outcome}")
            continue
        edu.fine_intent = outcome.fine_intent
        edu.annotation_path = outcome.path
        report.annotated += 1
        report.backend_calls += outcome.attempts
        report.intent_counts[outcome.fine_intent] = (
            report.intent_counts.get(outcome.fine_intent, 0) + 1
        )
    report.elapsed_seconds = time.monotonic() - started
    return dialogs, report
