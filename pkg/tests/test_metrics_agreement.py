import random

import pytest

from intentree.errors import UndefinedMetricError, ValidationError
from intentree.metrics import fleiss_kappa, majority_vote

from oracles import fleiss_kappa_oracle


def test_full_agreement_kappa_one():
    # every rater picks the same category per item, categories vary by item
    matrix = [[4, 0, 0], [0, 4, 0], [0, 0, 4], [4, 0, 0]]
    assert fleiss_kappa(matrix).kappa == 1.0


def test_two_item_perfect_split_kappa_one():
    report = fleiss_kappa([[2, 0], [0, 2]])
    assert report.kappa == 1.0
    assert report.per_category_marginals == [0.5, 0.5]


def test_frozen_direct_formula_case():
    # [[3,0],[2,1],[1,2]]: P_bar = 5/9 and P_e = 5/9 -> kappa = 0 exactly
    report = fleiss_kappa([[3, 0], [2, 1], [1, 2]])
    assert report.kappa == pytest.approx(0.0, abs=1e-12)
    assert report.n_items == 3
    assert report.n_raters == 3
    assert report.observed_agreement == pytest.approx(5 / 9)
    assert report.expected_agreement == pytest.approx(5 / 9)


@pytest.mark.parametrize(
    "matrix,expected",
    [
        ([[2, 1, 0], [0, 3, 0], [1, 1, 1]], 1 / 46),
        ([[1, 1, 1], [1, 1, 1]], -0.5),
        ([[2, 0], [2, 0], [2, 0], [0, 2]], 1.0),
        ([[3, 0], [2, 1], [1, 2]], 0.0),
        ([[2, 0], [0, 2]], 1.0),
    ],
)
def test_hand_computed_matrices(matrix, expected):
    assert fleiss_kappa(matrix).kappa == pytest.approx(expected, abs=1e-9)


def test_matches_exact_oracle_on_random_matrices():
    rng = random.Random(5)
    for _ in range(60):
        raters = rng.randint(2, 6)
        k = rng.randint(2, 5)
        matrix = []
        for _ in range(rng.randint(1, 8)):
            row = [0] * k
            for _ in range(raters):
                row[rng.randrange(k)] += 1
            matrix.append(row)
        expected = fleiss_kappa_oracle(matrix)
        if expected is None:
            with pytest.raises(UndefinedMetricError):
                fleiss_kappa(matrix)
        else:
            assert fleiss_kappa(matrix).kappa == pytest.approx(float(expected), abs=1e-9)


def test_category_permutation_invariance():
    rng = random.Random(11)
    for _ in range(30):
        raters = 4
        k = 4
        matrix = []
        for _ in range(6):
            row = [0] * k
            for _ in range(raters):
                row[rng.randrange(k)] += 1
            matrix.append(row)
        base = fleiss_kappa(matrix).kappa
        perm = list(range(k))
        rng.shuffle(perm)
        permuted = [[row[j] for j in perm] for row in matrix]
        assert fleiss_kappa(permuted).kappa == pytest.approx(base, abs=1e-12)


def test_degenerate_single_category_matrix():
    # expected agreement 1 forces every rating into one category, which also
    # forces observed agreement 1: kappa is defined as 1 there, and the
    # undefined branch (P_e == 1, observed < 1) is unreachable for valid
    # count matrices. UndefinedMetricError stays as a guard for that.
    matrix = [[3, 0], [3, 0]]
    assert fleiss_kappa(matrix).kappa == 1.0
    assert fleiss_kappa_oracle(matrix) == 1


def test_input_validation():
    with pytest.raises(ValidationError):
        fleiss_kappa([])
    with pytest.raises(ValidationError):
        fleiss_kappa([[1, 1], [1]])
    with pytest.raises(ValidationError):
        fleiss_kappa([[1, 1], [2, 1]])  # unequal rater counts
    with pytest.raises(ValidationError):
        fleiss_kappa([[1]])  # single rater
    with pytest.raises(ValidationError):
        fleiss_kappa([[2, -1], [1, 0]])


# -- majority voting ----------------------------------------------------------


def test_unanimous_choice():
    report = majority_vote([["A", "A", "A", "A"]])
    assert report.decisions == ["A"]
    assert report.preference_rate == 1.0
    assert report.ties == 0


def test_two_two_split_is_a_tie():
    report = majority_vote([["A", "A", "B", "B"]])
    assert report.decisions == [None]
    assert report.ties == 1
    assert report.preference_rate == 0.0


def test_paper_style_thirty_items():
    votes = []
    for _ in range(17):
        votes.append(["A", "A", "A", "B"])
    for _ in range(13):
        votes.append(["B", "B", "B", "both-good"])
    report = majority_vote(votes)
    assert report.ties == 0
    assert report.wins == {"A": 17, "B": 13}
    assert report.preference_rate == pytest.approx(17 / 30)
    assert round(100 * report.preference_rate, 1) == 56.7


def test_both_good_can_win():
    report = majority_vote([["both-good", "both-good", "A", "B"]])
    assert report.decisions == ["both-good"]
    assert report.preference_rate == 0.0  # decided, but not an A win


def test_vote_validation():
    with pytest.raises(ValidationError):
        majority_vote([])
    with pytest.raises(ValidationError):
        majority_vote([[]])
    with pytest.raises(ValidationError):
        majority_vote([["A", "C"]])


def test_bundled_votes_file(data_dir):
    import json

    votes = json.loads((data_dir / "votes.json").read_text())["votes"]
    report = majority_vote(votes)
    assert report.n_items == 30
    assert report.ties == 0
    assert report.preference_rate == pytest.approx(17 / 30)
