import numpy as np
import pytest

from playtrace import grammar
from playtrace.grammar import (
    AttrRef,
    MalformedSentenceError,
    Sentence,
    SentenceTooLongError,
    SpatialRef,
    UnknownTokenError,
)

EXPECTED_SIZES = {"basic": 152, "spatial": 156, "temporal": 648, "spatio_temporal": 1716}


def test_vocabulary():
    vocab = grammar.vocabulary()
    assert len(vocab) == 51
    assert len(set(vocab)) == 51
    for token in ("chameleon", "most", "of", "was", "thing", "living_thing", "grasp"):
        assert token in vocab
    # ids are dense and stable
    assert [grammar.TOKEN_IDS[t] for t in vocab] == list(range(51))


def test_vocabulary_file_roundtrip(tmp_path):
    path = tmp_path / "vocab.txt"
    grammar.write_vocabulary(path)
    lines = path.read_text().splitlines()
    assert tuple(lines) == grammar.vocabulary()


@pytest.mark.parametrize("category,size", EXPECTED_SIZES.items())
def test_category_sizes(category, size):
    sentences = grammar.enumerate_sentences(category)
    assert len(sentences) == size
    assert len(set(sentences)) == size


def test_universe_size_and_partition():
    universe = grammar.all_sentences()
    assert len(universe) == 2672
    assert len(set(universe)) == 2672
    for s in universe:
        assert grammar.categorize(s) == next(
            c for c in grammar.CONCEPT_CATEGORIES if s in set(grammar.enumerate_sentences(c))
        )


def test_growable_heads():
    assert len(grammar.GROWABLE_HEADS) == 24
    assert "thing" in grammar.GROWABLE_HEADS
    assert "living_thing" in grammar.GROWABLE_HEADS
    assert "door" not in grammar.GROWABLE_HEADS
    assert "water" not in grammar.GROWABLE_HEADS


def test_parse_examples():
    s = grammar.parse("was grasp red chameleon".split())
    assert s == Sentence("past", "grasp", AttrRef(head="chameleon", color="red"))
    assert grammar.categorize(s) == "temporal"

    s = grammar.parse("grasp thing was bottom of table".split())
    assert s == Sentence("present", "grasp", SpatialRef("past", "bottom", "table"))
    assert grammar.categorize(s) == "spatio_temporal"

    s = grammar.parse("grasp dog".split())
    assert grammar.categorize(s) == "basic"
    s = grammar.parse("grow algae".split())
    assert grammar.categorize(s) == "temporal"
    s = grammar.parse("grasp thing bottom of cat".split())
    assert grammar.categorize(s) == "spatial"


def test_render_examples():
    assert grammar.render(Sentence("present", "grasp", SpatialRef("present", "right", None))) == (
        "grasp", "thing", "right", "most",
    )
    assert grammar.render(Sentence("present", "shake", AttrRef("bush"))) == ("shake", "bush")
    longest = grammar.render(Sentence("past", "grasp", SpatialRef("past", "bottom", "table")))
    assert longest == ("was", "grasp", "thing", "was", "bottom", "of", "table")
    assert len(longest) == 7


def test_round_trip_both_directions():
    for s in grammar.all_sentences():
        tokens = grammar.render(s)
        assert len(tokens) <= grammar.MAX_SENTENCE_TOKENS
        assert grammar.parse(tokens) == s
        assert grammar.from_token_ids(grammar.token_ids(s)) == s


def test_parse_error_kinds():
    with pytest.raises(UnknownTokenError):
        grammar.parse(["grasp", "zebra"])
    with pytest.raises(MalformedSentenceError):
        grammar.parse(["grasp", "red"])
    with pytest.raises(MalformedSentenceError):
        grammar.parse(["thing", "grasp"])
    with pytest.raises(MalformedSentenceError):
        grammar.parse(["grow", "door"])
    with pytest.raises(MalformedSentenceError):
        grammar.parse(["grasp", "thing", "left", "of", "red", "cat"][:5] + ["cat", "cat"])
    with pytest.raises(SentenceTooLongError):
        grammar.parse(["was"] * 9)


def test_render_rejects_invalid_ast():
    with pytest.raises(MalformedSentenceError):
        grammar.render(Sentence("present", "grow", AttrRef("door")))
    with pytest.raises(MalformedSentenceError):
        grammar.render(Sentence("present", "poke", AttrRef("dog")))
    with pytest.raises(MalformedSentenceError):
        grammar.render(Sentence("present", "grasp", SpatialRef("present", "under", "dog")))


def test_encode_tokens():
    tokens = ("grasp", "red", "dog")
    onehot = grammar.encode_tokens(tokens)
    assert onehot.shape == (3, 51)
    assert np.all(onehot.sum(axis=1) == 1.0)
    assert grammar.decode_tokens(onehot) == tokens
    with pytest.raises(UnknownTokenError):
        grammar.encode_tokens(["sinstall"])


def test_bnf_document():
    doc = grammar.bnf_document()
    assert doc["category_sizes"] == EXPECTED_SIZES
    assert len(doc["vocabulary"]) == 51
    assert len(doc["rules"]["<head>"]) == 38
    # The enumerated universe in the document matches the in-process
    # enumeration, id for id.
    flat = [ids for c in doc["category_order"] for ids in doc["sentences"][c]]
    assert flat == [list(grammar.token_ids(s)) for s in grammar.all_sentences()]
