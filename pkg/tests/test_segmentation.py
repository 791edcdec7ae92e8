import pytest
from hypothesis import given
from hypothesis import strategies as st

from bioace.segmentation import segment_sentences


def test_two_plain_sentences():
    assert segment_sentences("Aspirin reduces fever. It is cheap.") == [
        "Aspirin reduces fever.",
        "It is cheap.",
    ]


def test_abbreviation_vs_does_not_split():
    text = "Dose was 5 mg/kg vs. placebo. Outcomes improved."
    assert segment_sentences(text) == [
        "Dose was 5 mg/kg vs. placebo.",
        "Outcomes improved.",
    ]


@pytest.mark.parametrize(
    "text, expected_count",
    [
        ("See Fig. 3 for details. The trend is clear.", 2),
        ("Smith et al. Reported improved outcomes. A second trial agreed.", 2),
        ("Values rose by approx. 5 percent. The rest were stable.", 2),
        ("Samples e.g. Serum were frozen. Plasma was not.", 2),
    ],
)
def test_abbreviations_are_protected(text, expected_count):
    assert len(segment_sentences(text)) == expected_count


def test_empty_and_whitespace():
    assert segment_sentences("") == []
    assert segment_sentences("   \n\t ") == []


def test_no_terminal_yields_single_sentence():
    assert segment_sentences("no terminal punctuation here") == [
        "no terminal punctuation here"
    ]


def test_question_and_exclamation_terminals():
    assert segment_sentences("Does it work? Yes! It does.") == [
        "Does it work?",
        "Yes!",
        "It does.",
    ]


def test_lowercase_continuation_does_not_split():
    assert segment_sentences("The p. value was low. Results follow.") == [
        "The p. value was low.",
        "Results follow.",
    ]


def _squash(text):
    return "".join(text.split())


@given(st.text(max_size=300))
def test_character_conservation(text):
    joined = "".join(segment_sentences(text))
    assert _squash(joined) == _squash(text)


@given(st.text(max_size=300))
def test_join_reproduces_input_modulo_whitespace(text):
    sentences = segment_sentences(text)
    assert _squash(" ".join(sentences)) == _squash(text)
    # order-preserving, non-overlapping: each sentence appears in input order
    cursor = 0
    squashed = _squash(text)
    for sentence in sentences:
        piece = _squash(sentence)
        found = squashed.find(piece, cursor)
        assert found >= cursor
        cursor = found + len(piece)
