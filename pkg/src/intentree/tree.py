"""Annotation decision trees: question nodes with labeled branches, intent leaves."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional

import yaml

from .errors import ValidationError
from .taxonomy import Taxonomy


@dataclass(frozen=True)
class DecisionNode:
    """Either an internal question node (>= 2 labeled branches) or an intent leaf."""

    question: Optional[str] = None
    branches: tuple[tuple[str, "DecisionNode"], ...] = ()
    leaf_intent: Optional[str] = None

    def __post_init__(self):
        if self.leaf_intent is not None:
            if self.question is not None or self.branches:
                raise ValidationError("leaf nodes cannot carry a question or branches")
            return
        if not self.question or not self.question.strip():
            raise ValidationError("internal nodes need a question")
        if len(self.branches) < 2:
            raise ValidationError("internal nodes need at least two branches")
        labels = [label for label, _ in self.branches]
        if len(set(labels)) != len(labels):
            raise ValidationError(f"duplicate branch labels under {self.question!r}")

    def is_leaf(self) -> bool:
        return self.leaf_intent is not None


@dataclass
class DecisionTree:
    root: DecisionNode
    taxonomy_ref: str = "taxonomy"
    metadata: dict = field(default_factory=dict)

    def leaves(self) -> list[tuple[str, int]]:
        """(intent, depth) for every leaf, in traversal order."""
        found: list[tuple[str, int]] = []

        def walk(node: DecisionNode, depth: int):
            if node.is_leaf():
                found.append((node.leaf_intent, depth))
                return
            for _, child in node.branches:
                walk(child, depth + 1)

        walk(self.root, 0)
        return found

    def leaf_intents(self) -> list[str]:
        return [intent for intent, _ in self.leaves()]

    def nodes(self) -> Iterator[DecisionNode]:
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            if not node.is_leaf():
                stack.extend(child for _, child in reversed(node.branches))

    def max_depth(self) -> int:
        return max(d for _, d in self.leaves())

    def min_depth(self) -> int:
        return min(d for _, d in self.leaves())


@dataclass
class TreeValidation:
    valid: bool
    issues: list[str]
    min_depth: int
    max_depth: int
    leaf_count: int
    missing_intents: list[str]
    duplicate_leaves: list[str]
    unknown_leaves: list[str]


def validate_tree(tree: DecisionTree, taxonomy: Taxonomy) -> TreeValidation:
    """Check the leaf/intent bijection and per-node branch sanity."""
    issues: list[str] = []
    leaves = tree.leaves()
    leaf_names = [intent for intent, _ in leaves]

    seen: dict[str, int] = {}
    unknown = []
    for name in leaf_names:
        try:
            canonical = taxonomy.intent(name).name
        except ValidationError:
            unknown.append(name)
            continue
        seen[canonical] = seen.get(canonical, 0) + 1
    duplicates = sorted(name for name, count in seen.items() if count > 1)
    missing = [name for name in taxonomy.intent_names() if name not in seen]

    if unknown:
        issues.append(f"leaves not in taxonomy: {unknown}")
    if duplicates:
        issues.append(f"duplicate leaf intents: {duplicates}")
    if missing:
        issues.append(f"uncovered intents: {missing}")

    return TreeValidation(
        valid=not issues,
        issues=issues,
        min_depth=min(d for _, d in leaves),
        max_depth=max(d for _, d in leaves),
        leaf_count=len(leaves),
        missing_intents=missing,
        duplicate_leaves=duplicates,
        unknown_leaves=unknown,
    )


def expected_depth(tree: DecisionTree, frequencies: dict[str, float]) -> float:
    """Frequency-weighted mean leaf depth: sum f_i * depth_i / sum f_i."""
    total = 0.0
    weighted = 0.0
    for intent, depth in tree.leaves():
        if intent not in frequencies:
            raise ValidationError(f"no frequency entry for leaf intent {intent!r}")
        weight = frequencies[intent]
        total += weight
        weighted += weight * depth
    if total <= 0:
        raise ValidationError("frequencies must sum to a positive value")
    return weighted / total


# ---------------------------------------------------------------------------
# serialization: YAML documents with explicit node kinds


def _node_to_dict(node: DecisionNode) -> dict:
    if node.is_leaf():
        return {"kind": "leaf", "intent": node.leaf_intent}
    return {
        "kind": "question",
        "question": node.question,
        "branches": [
            {"answer": label, "child": _node_to_dict(child)}
            for label, child in node.branches
        ],
    }


def _node_from_dict(raw: dict, where: str) -> DecisionNode:
    if not isinstance(raw, dict) or "kind" not in raw:
        raise ValidationError(f"{where}: node records need a 'kind'")
    kind = raw["kind"]
    if kind == "leaf":
        if "intent" not in raw:
            raise ValidationError(f"{where}: leaf nodes need an 'intent'")
        return DecisionNode(leaf_intent=str(raw["intent"]))
    if kind == "question":
        if "question" not in raw or "branches" not in raw:
            raise ValidationError(f"{where}: question nodes need 'question' and 'branches'")
        branches = []
        for idx, branch in enumerate(raw["branches"]):
            where_b = f"{where}: branch[{idx}]"
            if not isinstance(branch, dict) or "answer" not in branch or "child" not in branch:
                raise ValidationError(f"{where_b}: branches need 'answer' and 'child'")
            branches.append(
                (str(branch["answer"]), _node_from_dict(branch["child"], where_b))
            )
        return DecisionNode(question=str(raw["question"]), branches=tuple(branches))
    raise ValidationError(f"{where}: unknown node kind {kind!r}")


def tree_to_dict(tree: DecisionTree) -> dict:
    return {
        "taxonomy": tree.taxonomy_ref,
        "metadata": dict(tree.metadata),
        "root": _node_to_dict(tree.root),
    }


def tree_from_dict(raw: dict, where: str = "tree") -> DecisionTree:
    if not isinstance(raw, dict) or "root" not in raw:
        raise ValidationError(f"{where}: tree documents need a 'root' node")
    return DecisionTree(
        root=_node_from_dict(raw["root"], f"{where}: root"),
        taxonomy_ref=str(raw.get("taxonomy", "taxonomy")),
        metadata=dict(raw.get("metadata", {})),
    )


def serialize_tree(tree: DecisionTree) -> str:
    return yaml.safe_dump(tree_to_dict(tree), sort_keys=False, allow_unicode=True)


def deserialize_tree(document: str) -> DecisionTree:
    try:
        raw = yaml.safe_load(document)
    except yaml.YAMLError as exc:
        raise ValidationError(f"malformed tree document: {exc}") from exc
    return tree_from_dict(raw)


def save_tree(tree: DecisionTree, path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(serialize_tree(tree), encoding="utf-8")


def load_tree(path: str | Path) -> DecisionTree:
    return deserialize_tree(Path(path).read_text(encoding="utf-8"))
