import random

import pytest

from intentree.errors import ValidationError
from intentree.metrics import ClassificationReport, ConfusionMatrix, consistency_report
from intentree.metrics.classification import filter_single_edu, report_from_confusion
from intentree.taxonomy import CATEGORIES

from oracles import classification_oracle


def test_identity_predictions_score_one():
    items = [
        ("Focus", "Seek Strategy"),
        ("Probing", "Asking for Explanation"),
        ("Telling", "Revealing Answer"),
        ("Generic", "General Inquiry"),
    ]
    report = consistency_report(items)
    assert report.weighted_precision == 1.0
    assert report.weighted_recall == 1.0
    assert report.weighted_f1 == 1.0
    assert report.macro_f1 == 1.0
    # identity mapping -> diagonal confusion matrix
    for i in range(4):
        for j in range(4):
            expected = 1 if i == j else 0
            assert report.confusion.counts[i][j] == expected


def test_four_item_hand_computed_case():
    # gold {F, F, P, T}, predicted categories {F, P, P, T}
    items = [
        ("Focus", "Seek Strategy"),          # -> Focus   (hit)
        ("Focus", "Perturbing the Question"),  # -> Probing (miss)
        ("Probing", "Seeking Self-Correction"),  # -> Probing (hit)
        ("Telling", "Revealing Answer"),     # -> Telling (hit)
    ]
    report = consistency_report(items)
    per = report.per_class
    assert per["Focus"] == pytest.approx((1.0, 0.5, 2 / 3))
    assert per["Probing"] == pytest.approx((0.5, 1.0, 2 / 3))
    assert per["Telling"] == pytest.approx((1.0, 1.0, 1.0))
    assert per["Generic"] == pytest.approx((0.0, 0.0, 0.0))
    # support-weighted aggregates over supports (2, 1, 1, 0)
    assert report.weighted_precision == pytest.approx(7 / 8)
    assert report.weighted_recall == pytest.approx(3 / 4)
    assert report.weighted_f1 == pytest.approx(3 / 4)
    # macro over the four fixed categories, zero-support Generic included
    assert report.macro_f1 == pytest.approx(7 / 12)
    assert report.warnings  # Generic had no gold items and no predictions


def test_unknown_intent_rejected():
    with pytest.raises(ValidationError):
        consistency_report([("Focus", "Quantum Leap")])


def test_unknown_gold_label_rejected():
    with pytest.raises(ValidationError):
        consistency_report([("Frobbing", "Seek Strategy")])


def test_empty_input_rejected():
    with pytest.raises(ValidationError):
        consistency_report([])


def test_aggregation_laws_on_randomized_confusions():
    rng = random.Random(99)
    for _ in range(100):
        counts = [[rng.randint(0, 8) for _ in range(4)] for _ in range(4)]
        if sum(map(sum, counts)) == 0:
            counts[0][0] = 1
        confusion = ConfusionMatrix(labels=list(CATEGORIES), counts=counts)
        report = report_from_confusion(confusion)
        oracle = classification_oracle(list(CATEGORIES), counts)
        assert report.weighted_precision == pytest.approx(
            float(oracle["weighted_precision"]), abs=1e-9
        )
        assert report.weighted_recall == pytest.approx(
            float(oracle["weighted_recall"]), abs=1e-9
        )
        assert report.weighted_f1 == pytest.approx(float(oracle["weighted_f1"]), abs=1e-9)
        assert report.macro_f1 == pytest.approx(float(oracle["macro_f1"]), abs=1e-9)
        # aggregation laws: macro is the plain mean, weighted the support mean
        mean_f1 = sum(f for _, _, f in report.per_class.values()) / 4
        assert report.macro_f1 == pytest.approx(mean_f1, abs=1e-9)
        total = report.n_items
        weighted_p = sum(
            confusion.support(label) / total * report.per_class[label][0]
            for label in CATEGORIES
        )
        assert report.weighted_precision == pytest.approx(weighted_p, abs=1e-9)


def test_confusion_matrix_shape_validation():
    with pytest.raises(ValidationError):
        ConfusionMatrix(labels=["a", "b"], counts=[[1, 2]])
    with pytest.raises(ValidationError):
        ConfusionMatrix(labels=["a"], counts=[[-1]])


def test_confusion_total_matches_items():
    items = [("Focus", "Seek Strategy")] * 3 + [("Telling", "Revealing Answer")] * 2
    report = consistency_report(items)
    assert report.confusion.total() == report.n_items == 5


def test_filter_single_edu():
    items = [
        (("d1", 0), ("Generic", "Greeting/Farewell")),
        (("d1", 2), ("Probing", "Seek Strategy")),
        (("d2", 0), ("Telling", "Revealing Answer")),
    ]
    singles = [("d1", 0), ("d2", 0)]
    assert filter_single_edu(items, singles) == [
        ("Generic", "Greeting/Farewell"),
        ("Telling", "Revealing Answer"),
    ]


def test_filter_single_edu_everything_split():
    items = [(("d1", 0), ("Generic", "Greeting/Farewell"))]
    assert filter_single_edu(items, []) == []


def test_filter_single_edu_on_mini_corpus(mini_corpus):
    from intentree.segmenter import FallbackRestorer, segment_corpus

    dialogs, report = segment_corpus(mini_corpus, FallbackRestorer())
    items = []
    for dialog in dialogs:
        for turn_index, turn in dialog.teacher_turns():
            for edu in turn.edus:
                items.append(((dialog.id, turn_index), (edu.inherited_label, "Seek Strategy")))
    kept = filter_single_edu(items, report.single_edu_turn_keys)
    # 14 single-EDU turns, each contributing its one EDU
    assert len(kept) == 14


def test_report_serialization_round_trip():
    report = consistency_report([("Focus", "Seek Strategy")])
    data = report.to_dict()
    assert isinstance(report, ClassificationReport)
    assert data["per_class"]["Focus"]["f1"] == 1.0
    assert data["confusion"]["labels"] == list(CATEGORIES)
