import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from intentree.corpus import Turn, read_corpus
from intentree.errors import BackendError, ValidationError
from intentree.segmenter import (
    FallbackRestorer,
    inherit_labels,
    normalize_ws,
    restore_punctuation,
    segment_corpus,
    segment_utterance,
    sentence_split_offsets,
    strip_punctuation,
)

PIES = (
    "I see. But we're dealing with individual pies here, rather than slices. "
    "If you had a birthday cake, and lots of guests at your party, you couldn't "
    "just keep producing slices of cake. Can you think of another way to figure "
    "out how everyone gets a piece?"
)

PIES_EDUS = [
    "I see.",
    "But we're dealing with individual pies here, rather than slices.",
    "If you had a birthday cake, and lots of guests at your party, you couldn't "
    "just keep producing slices of cake.",
    "Can you think of another way to figure out how everyone gets a piece?",
]


class ScriptedRestorer:
    kind = "external-service"

    def __init__(self, mapping):
        self.mapping = mapping

    def restore(self, stripped):
        return self.mapping[stripped]


# -- strip_punctuation --------------------------------------------------------


def test_strip_basic():
    stripped, spans = strip_punctuation("Hi, how are you?")
    assert stripped == "Hi how are you"
    assert [s.token for s in spans] == ["Hi", "how", "are", "you"]


def test_strip_empty():
    assert strip_punctuation("") == ("", [])


def test_strip_attached_punctuation_separates():
    stripped, spans = strip_punctuation("a.b,c!")
    assert stripped == "a b c"
    assert [(s.start, s.end) for s in spans] == [(0, 1), (2, 3), (4, 5)]


def test_strip_keeps_hyphens_and_apostrophes():
    stripped, _ = strip_punctuation("you couldn't re-do it!")
    assert stripped == "you couldn't re-do it"


def test_span_round_trip():
    text = "Well, okay. “Sure thing”, 3.5 pies!"
    _, spans = strip_punctuation(text)
    for span in spans:
        source = text[span.start : span.end]
        rebuilt = "".join(ch for ch in source if ch not in set('.,;:!?"“”‘’«»…'))
        assert rebuilt == span.token


# -- restore_punctuation ------------------------------------------------------


def test_scripted_restorer_round_trip():
    backend = ScriptedRestorer({"Hi how are you": "Hi, how are you?"})
    assert restore_punctuation("Hi how are you", backend) == "Hi, how are you?"


def test_fallback_marks_questions():
    assert FallbackRestorer().restore("So what should you do next") == "So what should you do next?"
    assert FallbackRestorer().restore("Add the boxes first") == "Add the boxes first."


def test_restore_rejects_punctuated_input():
    with pytest.raises(ValidationError):
        restore_punctuation("already, punctuated", FallbackRestorer())


def test_token_preservation_enforced():
    backend = ScriptedRestorer({"one two": "one two three."})
    with pytest.raises(BackendError, match="token"):
        restore_punctuation("one two", backend)


# -- sentence splitting -------------------------------------------------------


def test_sentence_offsets_ignore_abbreviations_and_decimals():
    assert sentence_split_offsets("Mr. Fox ate 3.5 pies. Then he left.") == [21]
    assert sentence_split_offsets("e.g. this stays joined") == []


def test_sentence_offsets_multi_terminal_runs():
    text = "Good job!! Next question?"
    assert sentence_split_offsets(text) == [10]


# -- segment_utterance --------------------------------------------------------


def test_paper_example_yields_four_edus():
    assert segment_utterance(PIES, PIES) == PIES_EDUS


def test_single_sentence_single_edu():
    assert segment_utterance("Good job!", "Good job!") == ["Good job!"]


def test_comma_promoted_when_restored_shows_terminal():
    original = "You need brackets, then recompute"
    restored = "You need brackets. Then recompute."
    assert segment_utterance(original, restored) == ["You need brackets,", "then recompute"]


def test_comma_not_promoted_when_restored_keeps_comma():
    original = "You need brackets, then recompute"
    restored = "You need brackets, then recompute."
    assert segment_utterance(original, restored) == [original]


def test_alignment_failure_degrades_to_sentences():
    original = "One two. Three four, five"
    restored = "Totally different words here."
    assert segment_utterance(original, restored) == ["One two.", "Three four, five"]


def test_determinism():
    original = "A, b. C d, e"
    restored = "A. B. C d, e."
    first = segment_utterance(original, restored)
    assert first == segment_utterance(original, restored)
    assert first == ["A,", "b.", "C d, e"]


# -- label inheritance --------------------------------------------------------


def test_inherit_labels_probing_four_edus():
    turn = Turn(speaker="teacher", text=PIES, coarse_label="Probing")
    edus = inherit_labels(turn, PIES_EDUS, "d1", 2)
    assert len(edus) == 4
    assert all(e.inherited_label == "Probing" for e in edus)
    assert [e.edu_index for e in edus] == [0, 1, 2, 3]


def test_inherit_labels_single_edu():
    turn = Turn(speaker="teacher", text="Good job!", coarse_label="Generic")
    (edu,) = inherit_labels(turn, ["Good job!"], "d1", 4)
    assert edu.inherited_label == "Generic"


def test_inherit_labels_rejects_student_turns():
    turn = Turn(speaker="student", text="hi")
    with pytest.raises(ValidationError):
        inherit_labels(turn, ["hi"], "d1", 0)


def test_inherit_labels_rejects_unlabeled_teacher():
    turn = Turn(speaker="teacher", text="hi")
    with pytest.raises(ValidationError):
        inherit_labels(turn, ["hi"], "d1", 0)


# -- corpus segmentation ------------------------------------------------------


def test_mini_corpus_golden_counts(mini_corpus):
    dialogs, report = segment_corpus(mini_corpus, FallbackRestorer())
    assert report.teacher_turns == 16
    assert report.total_edus == 20
    assert report.single_edu_turns == 14
    assert not report.errors
    pies_turn = dialogs[0].turns[2]
    assert [e.text for e in pies_turn.edus] == PIES_EDUS
    assert all(e.inherited_label == "Probing" for e in pies_turn.edus)


def test_no_split_corpus_edu_count_equals_turn_count(mini_corpus):
    single = [d for d in mini_corpus if d.id == "d5"]
    _, report = segment_corpus(single, FallbackRestorer())
    assert report.total_edus == report.teacher_turns == 3


def test_restorer_failure_records_warning_not_abort(mini_corpus):
    class Exploding:
        kind = "external-service"

        def restore(self, stripped):
            raise BackendError("boom")

    dialogs, report = segment_corpus(mini_corpus[:1], Exploding())
    assert report.total_edus > 0  # sentence-level fallback still segmented
    assert report.warnings


# -- invariants ---------------------------------------------------------------


def reconstructs(original, edus):
    return normalize_ws(" ".join(edus)) == normalize_ws(original)


def test_reconstruction_on_mini_corpus(mini_corpus):
    dialogs, _ = segment_corpus(mini_corpus, FallbackRestorer())
    for dialog in dialogs:
        for _, turn in dialog.teacher_turns():
            assert reconstructs(turn.text, [e.text for e in turn.edus])


def test_reconstruction_fuzz_seeded():
    rng = random.Random(0)
    words = ["pie", "cake", "Mr.", "3.5", "what", "couldn't", "so", "x"]
    punct = [".", "?", "!", ",", ";", '"', "…", ""]
    fallback = FallbackRestorer()
    for _ in range(1000):
        parts = []
        for _ in range(rng.randint(0, 12)):
            parts.append(rng.choice(words) + rng.choice(punct))
        original = (" " * rng.randint(1, 2)).join(parts)
        stripped, _ = strip_punctuation(original)
        restored = fallback.restore(stripped)
        try:
            edus = segment_utterance(original, restored)
        except Exception as exc:  # segmentation must never raise
            pytest.fail(f"segmenter raised on {original!r}: {exc}")
        assert reconstructs(original, edus)
        assert all(e.strip() for e in edus)


@settings(max_examples=200, deadline=None)
@given(st.text(max_size=120))
def test_reconstruction_property_arbitrary_text(original):
    edus = segment_utterance(original, original)
    assert reconstructs(original, edus)


@settings(max_examples=120, deadline=None)
@given(
    st.lists(
        st.sampled_from(["One two.", "Three four!", "Is it five?", "Six, seven."]),
        min_size=1,
        max_size=5,
    )
)
def test_identity_restoration_gives_sentence_splits(sentences):
    original = " ".join(sentences)
    edus = segment_utterance(original, original)
    assert len(edus) == len(sentences)
