import pytest

from intentree.errors import BackendError, TreeBuildError
from intentree.llm import ScriptedMockBackend
from intentree.taxonomy import Intent, Taxonomy, canonical_taxonomy
from intentree.tree import expected_depth, validate_tree
from intentree.treebuild import (
    BuildParams,
    CandidateSplit,
    LlmSplitOracle,
    ScriptedSplitOracle,
    build_tree,
    score_candidate,
)


def mini_taxonomy(weights=None):
    intents = [Intent(n, "Focus", ("x",)) for n in ("A", "B", "C")]
    return Taxonomy(intents=intents, frequencies=weights, name="abc")


def oracle_from(mapping):
    table = {}
    for key, candidates in mapping.items():
        table[frozenset(key)] = [
            CandidateSplit(question=q, branches=tuple((l, tuple(p)) for l, p in branches))
            for q, branches in candidates
        ]
    return ScriptedSplitOracle(table)


def test_single_intent_is_a_leaf_without_oracle_calls():
    taxonomy = Taxonomy(intents=[Intent("A", "Focus", ("x",))])
    tree = build_tree(taxonomy, oracle_from({}))
    assert tree.root.is_leaf() and tree.root.leaf_intent == "A"


def test_figure_splits_reproduce_bundled_shape(figure_oracle, taxonomy11):
    tree = build_tree(taxonomy11, figure_oracle)
    assert len(tree.root.branches) == 5
    report = validate_tree(tree, taxonomy11)
    assert report.valid
    assert report.leaf_count == 11
    assert report.min_depth == report.max_depth == 2


def test_three_intent_build_and_leaf_bijection():
    taxonomy = mini_taxonomy()
    oracle = oracle_from(
        {
            ("A", "B", "C"): [("pick one?", [("yes", ["A"]), ("no", ["B", "C"])])],
            ("B", "C"): [("left or right?", [("left", ["B"]), ("right", ["C"])])],
        }
    )
    tree = build_tree(taxonomy, oracle)
    # brute-force path enumeration: every intent reachable exactly once
    paths = {}

    def walk(node, path):
        if node.is_leaf():
            paths[node.leaf_intent] = path
            return
        for label, child in node.branches:
            walk(child, path + [label])

    walk(tree.root, [])
    assert sorted(paths) == ["A", "B", "C"]
    assert expected_depth(tree, {"A": 1, "B": 1, "C": 1}) == pytest.approx(5 / 3)


def test_frequency_bias_prefers_shallow_heavy_intents():
    weights = {"A": 10.0, "B": 1.0, "C": 1.0}
    taxonomy = mini_taxonomy(weights)
    favoring = [("split off the heavy one?", [("yes", ["A"]), ("no", ["B", "C"])])]
    ignoring = [("split off a light one?", [("yes", ["B"]), ("no", ["A", "C"])])]
    oracle = oracle_from(
        {
            ("A", "B", "C"): favoring + ignoring,
            ("B", "C"): [("bc?", [("b", ["B"]), ("c", ["C"])])],
            ("A", "C"): [("ac?", [("a", ["A"]), ("c", ["C"])])],
        }
    )
    chosen = build_tree(taxonomy, oracle)

    ignoring_only = oracle_from(
        {
            ("A", "B", "C"): ignoring,
            ("A", "C"): [("ac?", [("a", ["A"]), ("c", ["C"])])],
        }
    )
    alternative = build_tree(taxonomy, ignoring_only)

    assert expected_depth(chosen, weights) <= expected_depth(alternative, weights)
    # and the chosen root really is the frequency-favoring split
    assert chosen.root.question == "split off the heavy one?"


def test_degenerate_full_set_split_never_used():
    taxonomy = mini_taxonomy()
    oracle = oracle_from(
        {
            ("A", "B", "C"): [
                ("degenerate?", [("all", ["A", "B", "C"]), ("none", [])]),
                ("proper?", [("one", ["A"]), ("rest", ["B", "C"])]),
            ],
            ("B", "C"): [("bc?", [("b", ["B"]), ("c", ["C"])])],
        }
    )
    tree = build_tree(taxonomy, oracle)
    assert tree.root.question == "proper?"


def test_backtracking_to_next_root_candidate():
    # first root candidate leads to a dead-end subset {B, C}; builder must
    # back out and take the second candidate
    taxonomy = mini_taxonomy()
    oracle = oracle_from(
        {
            ("A", "B", "C"): [
                ("dead end?", [("a", ["A"]), ("bc", ["B", "C"])]),
                ("works?", [("ab", ["A", "B"]), ("c", ["C"])]),
            ],
            ("B", "C"): [],  # no candidates: forces a backtrack
            ("A", "B"): [("ab?", [("a", ["A"]), ("b", ["B"])])],
        }
    )
    params = BuildParams(balance_weight=1.0)  # make "dead end?" rank first
    assert score_candidate(
        oracle.propose(("A", "B", "C"), 5)[0], taxonomy, params
    ) == pytest.approx(
        score_candidate(oracle.propose(("A", "B", "C"), 5)[1], taxonomy, params)
    )
    tree = build_tree(taxonomy, oracle, params)
    assert tree.root.question == "works?"
    assert tree.metadata["backtracks"] >= 1


def test_backtrack_budget_exhaustion():
    taxonomy = mini_taxonomy()
    oracle = oracle_from(
        {
            ("A", "B", "C"): [("dead end?", [("a", ["A"]), ("bc", ["B", "C"])])],
            ("B", "C"): [],
        }
    )
    with pytest.raises(TreeBuildError):
        build_tree(taxonomy, oracle, BuildParams(max_backtracks=0))


def test_depth_cap_blocks_nested_splits():
    taxonomy = mini_taxonomy()
    oracle = oracle_from(
        {
            ("A", "B", "C"): [("abc?", [("a", ["A"]), ("bc", ["B", "C"])])],
            ("B", "C"): [("bc?", [("b", ["B"]), ("c", ["C"])])],
        }
    )
    with pytest.raises(TreeBuildError):
        build_tree(taxonomy, oracle, BuildParams(max_depth=1))
    tree = build_tree(taxonomy, oracle, BuildParams(max_depth=2))
    assert tree.max_depth() == 2


def test_no_candidates_at_all():
    with pytest.raises(TreeBuildError):
        build_tree(mini_taxonomy(), oracle_from({}))


def test_tie_break_is_lexicographic_on_question():
    taxonomy = mini_taxonomy()
    # identical partitions, differing question text only
    oracle = oracle_from(
        {
            ("A", "B", "C"): [
                ("zeta?", [("a", ["A"]), ("bc", ["B", "C"])]),
                ("alpha?", [("a", ["A"]), ("bc", ["B", "C"])]),
            ],
            ("B", "C"): [("bc?", [("b", ["B"]), ("c", ["C"])])],
        }
    )
    tree = build_tree(taxonomy, oracle)
    assert tree.root.question == "alpha?"


def test_llm_split_oracle_parses_json_candidates():
    reply = (
        '{"candidates": [{"question": "pick?", "branches": ['
        '{"answer": "yes", "intents": ["A"]}, {"answer": "no", "intents": ["B", "C"]}]}]}'
    )
    backend = ScriptedMockBackend(queue=[reply, '{"candidates": []}'])
    oracle = LlmSplitOracle(backend=backend)
    candidates = oracle.propose(("A", "B", "C"), 5)
    assert candidates[0].question == "pick?"
    assert candidates[0].branches[1] == ("no", ("B", "C"))


def test_llm_split_oracle_rejects_garbage_after_retries():
    backend = ScriptedMockBackend(queue=["not json"] * 3)
    oracle = LlmSplitOracle(backend=backend, retries=3)
    with pytest.raises(BackendError):
        oracle.propose(("A", "B"), 3)


def test_builder_with_llm_oracle_end_to_end():
    reply_root = (
        '{"candidates": [{"question": "split?", "branches": ['
        '{"answer": "solo", "intents": ["Seek Strategy"]},'
        '{"answer": "rest", "intents": ["Revealing Answer"]}]}]}'
    )
    backend = ScriptedMockBackend(queue=[reply_root])
    taxonomy = Taxonomy(
        intents=[Intent("Seek Strategy", "Focus", ("x",)), Intent("Revealing Answer", "Telling", ("y",))]
    )
    tree = build_tree(taxonomy, LlmSplitOracle(backend=backend))
    assert validate_tree(tree, taxonomy).valid


def test_canonical_taxonomy_has_eleven(taxonomy11):
    assert len(canonical_taxonomy()) == len(taxonomy11) == 11
