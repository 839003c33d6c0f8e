"""Decision-tree construction from taxonomy metadata and a split-proposal oracle.

At every node holding two or more intents the oracle proposes up to K candidate
splits (a routing question plus a labeled partition of the intents). Candidates
are scored as

    score = w * balance + (1 - w) * frequency_bias

where balance is the normalized entropy of the partition sizes and
frequency_bias rewards placing high-frequency intents into small parts, which
makes them reachable in fewer questions. The builder recurses per branch and
backtracks to the next-ranked candidate when a subtree cannot be completed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol, Sequence

import yaml

from .errors import BackendError, TreeBuildError, ValidationError
from .llm import ChatBackend, ChatRequest
from .taxonomy import Taxonomy
from .tree import DecisionNode, DecisionTree, validate_tree


@dataclass(frozen=True)
class CandidateSplit:
    question: str
    branches: tuple[tuple[str, tuple[str, ...]], ...]  # (answer label, intents)


class SplitOracle(Protocol):
    def propose(self, intents: Sequence[str], k: int) -> list[CandidateSplit]:
        """Up to k candidate splits for the given intent subset."""


@dataclass
class BuildParams:
    max_candidates: int = 5
    max_depth: int = 6
    max_backtracks: int = 50
    balance_weight: float = 0.5

    def __post_init__(self):
        if self.max_candidates < 1 or self.max_depth < 1 or self.max_backtracks < 0:
            raise ValidationError("build parameters must be positive")
        if not 0.0 <= self.balance_weight <= 1.0:
            raise ValidationError("balance_weight must lie in [0, 1]")


class _NoViableSplit(Exception):
    pass


def _is_viable(candidate: CandidateSplit, intents: Sequence[str]) -> bool:
    """Every part nonempty and proper, parts disjoint, union covers the set."""
    if len(candidate.branches) < 2:
        return False
    labels = [label for label, _ in candidate.branches]
    if len(set(labels)) != len(labels):
        return False
    intent_set = set(intents)
    seen: set[str] = set()
    for _, part in candidate.branches:
        part_set = set(part)
        if not part_set or part_set == intent_set:
            return False
        if len(part_set) != len(part) or part_set & seen:
            return False
        if not part_set <= intent_set:
            return False
        seen |= part_set
    return seen == intent_set


def _balance(candidate: CandidateSplit) -> float:
    """Normalized entropy of part sizes; 1.0 for an even partition."""
    sizes = [len(part) for _, part in candidate.branches]
    total = sum(sizes)
    entropy = 0.0
    for size in sizes:
        p = size / total
        entropy -= p * math.log(p)
    max_entropy = math.log(len(sizes))
    if max_entropy == 0:
        return 1.0
    return entropy / max_entropy


def _frequency_bias(candidate: CandidateSplit, taxonomy: Taxonomy) -> float:
    """1 when all weight sits in singleton parts, lower as heavy intents land
    in large parts (which need more follow-up questions to resolve)."""
    n_intents = sum(len(part) for _, part in candidate.branches)
    worst = math.log2(n_intents - 1) if n_intents > 2 else 0.0
    if worst == 0:
        return 1.0
    total_weight = 0.0
    cost = 0.0
    for _, part in candidate.branches:
        part_weight = sum(taxonomy.weight(name) for name in part)
        total_weight += part_weight
        cost += part_weight * math.log2(len(part))
    if total_weight <= 0:
        return 1.0
    return 1.0 - (cost / total_weight) / worst


def score_candidate(candidate: CandidateSplit, taxonomy: Taxonomy, params: BuildParams) -> float:
    w = params.balance_weight
    return w * _balance(candidate) + (1.0 - w) * _frequency_bias(candidate, taxonomy)


@dataclass
class BuildReport:
    backtracks: int = 0
    oracle_calls: int = 0
    rejected_candidates: int = 0


def build_tree(
    taxonomy: Taxonomy,
    oracle: SplitOracle,
    params: Optional[BuildParams] = None,
) -> DecisionTree:
    """Construct a validated DecisionTree; raises TreeBuildError when the
    oracle cannot produce a viable tree within the backtrack/depth budget."""
    params = params or BuildParams()
    report = BuildReport()

    def build(intents: tuple[str, ...], depth: int) -> DecisionNode:
        if len(intents) == 1:
            return DecisionNode(leaf_intent=intents[0])
        if depth >= params.max_depth:
            raise _NoViableSplit(f"depth cap {params.max_depth} reached")

        report.oracle_calls += 1
        try:
            candidates = oracle.propose(intents, params.max_candidates)
        except BackendError:
            raise
        viable = []
        for cand in candidates[: params.max_candidates]:
            if _is_viable(cand, intents):
                viable.append(cand)
            else:
                report.rejected_candidates += 1
        # ties broken by question text for reproducible builds
        viable.sort(key=lambda c: (-score_candidate(c, taxonomy, params), c.question))

        for cand in viable:
            try:
                branches = tuple(
                    (label, build(tuple(part), depth + 1)) for label, part in cand.branches
                )
                return DecisionNode(question=cand.question, branches=branches)
            except _NoViableSplit:
                report.backtracks += 1
                if report.backtracks > params.max_backtracks:
                    raise TreeBuildError(
                        f"backtrack budget {params.max_backtracks} exhausted"
                    ) from None
                continue
        raise _NoViableSplit(f"no viable candidate for {sorted(intents)}")

    try:
        root = build(tuple(taxonomy.intent_names()), 0)
    except _NoViableSplit as exc:
        raise TreeBuildError(f"could not build a tree: {exc}") from exc

    tree = DecisionTree(
        root=root,
        taxonomy_ref=taxonomy.name,
        metadata={
            "max_candidates": params.max_candidates,
            "max_depth": params.max_depth,
            "max_backtracks": params.max_backtracks,
            "balance_weight": params.balance_weight,
            "backtracks": report.backtracks,
            "oracle_calls": report.oracle_calls,
        },
    )
    validation = validate_tree(tree, taxonomy)
    if not validation.valid:
        raise TreeBuildError(f"built tree failed validation: {validation.issues}")
    return tree


# ---------------------------------------------------------------------------
# oracles


class ScriptedSplitOracle:
    """Deterministic oracle backed by a table keyed on intent subsets."""

    def __init__(self, table: dict[frozenset, list[CandidateSplit]]):
        self.table = table

    def propose(self, intents: Sequence[str], k: int) -> list[CandidateSplit]:
        key = frozenset(intents)
        if key not in self.table:
            return []
        return self.table[key][:k]

    @classmethod
    def from_dict(cls, raw: dict) -> "ScriptedSplitOracle":
        if not isinstance(raw, dict) or "splits" not in raw:
            raise ValidationError("split script needs a top-level 'splits' list")
        table: dict[frozenset, list[CandidateSplit]] = {}
        for entry in raw["splits"]:
            key = frozenset(entry["intents"])
            candidates = []
            for cand in entry["candidates"]:
                branches = tuple(
                    (str(b["answer"]), tuple(str(i) for i in b["intents"]))
                    for b in cand["branches"]
                )
                candidates.append(
                    CandidateSplit(question=str(cand["question"]), branches=branches)
                )
            table[key] = candidates
        return cls(table)

    @classmethod
    def load(cls, path: str | Path) -> "ScriptedSplitOracle":
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
        return cls.from_dict(raw)


_SPLIT_PROMPT = """You are designing a decision tree that routes one segment of a teacher's \
utterance to exactly one intent label.

Intent labels to separate:
{intent_block}

Propose up to {k} candidate splits. Each split is one routing question plus a \
partition of the labels above into two or more groups, where each group gets a \
short answer phrase. Every label must appear in exactly one group and no group \
may contain all labels.

Reply with JSON only, shaped as:
{{"candidates": [{{"question": "...", "branches": [{{"answer": "...", "intents": ["...", "..."]}}]}}]}}
"""


@dataclass
class LlmSplitOracle:
    """Split proposals from a chat backend that replies with JSON candidates."""

    backend: ChatBackend
    model_id: str = "gpt-4o"
    max_tokens: int = 1024
    retries: int = 3
    system_prompt: str = "You design compact decision trees for dialog annotation."
    _examples: dict = field(default_factory=dict)

    def propose(self, intents: Sequence[str], k: int) -> list[CandidateSplit]:
        intent_block = "\n".join(f"- {name}" for name in intents)
        prompt = _SPLIT_PROMPT.format(intent_block=intent_block, k=k)
        last_error: Optional[Exception] = None
        for _ in range(self.retries):
            response = self.backend.complete(
                ChatRequest(
                    messages=(
                        ("system", self.system_prompt),
                        ("user", prompt),
                    ),
                    temperature=0.0,
                    max_tokens=self.max_tokens,
                    model_id=self.model_id,
                )
            )
            try:
                return _parse_candidates(response.content)
            except ValidationError as exc:
                last_error = exc
        raise BackendError(f"split oracle returned unparseable candidates: {last_error}")


def _parse_candidates(content: str) -> list[CandidateSplit]:
    start = content.find("{")
    end = content.rfind("}")
    if start < 0 or end <= start:
        raise ValidationError("no JSON object in oracle reply")
    try:
        raw = json.loads(content[start : end + 1])
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON in oracle reply: {exc}") from exc
    if not isinstance(raw, dict) or not isinstance(raw.get("candidates"), list):
        raise ValidationError("oracle reply lacks a 'candidates' list")
    candidates = []
    for cand in raw["candidates"]:
        if not isinstance(cand, dict) or "question" not in cand or "branches" not in cand:
            raise ValidationError("candidate records need 'question' and 'branches'")
        branches = []
        for branch in cand["branches"]:
            if not isinstance(branch, dict) or "answer" not in branch:
                raise ValidationError("branch records need 'answer' and 'intents'")
            branches.append(
                (str(branch["answer"]), tuple(str(i) for i in branch.get("intents", [])))
            )
        candidates.append(CandidateSplit(question=str(cand["question"]), branches=tuple(branches)))
    return candidates
