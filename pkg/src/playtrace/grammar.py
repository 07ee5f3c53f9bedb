"""Synthetic tensed grammar: vocabulary, enumeration, parsing, rendering.

Sentences pair a predicate (grasp, grow, shake) in present or past tense with
an object reference. References are either attribute-based (optional color +
head word) or spatial (always headed by 'thing', locating it relative to one
anchor object, e.g. 'left of table', or to all others, e.g. 'left most');
spatial references carry their own tense. The full universe has 2672
sentences split across four concept categories:

    basic            152     present grasp + attribute reference
    spatial          156     present grasp + present spatial reference
    temporal         648     attribute reference with grow/shake or past tense
    spatio_temporal  1716    every remaining spatial combination
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Optional, Union

import numpy as np

from .world import ANIMALS, CATEGORY_MEMBERS, COLOR_WORDS, OBJECT_TYPES, PLANTS

PREDICATES = ("grasp", "grow", "shake")
DIRECTIONS = ("left", "right", "top", "bottom")
CATEGORY_WORDS = ("animal", "plant", "furniture", "supply", "living_thing")
THING = "thing"
WAS = "was"
OF = "of"
MOST = "most"
TENSES = ("present", "past")

HEAD_WORDS = OBJECT_TYPES + CATEGORY_WORDS + (THING,)
GROWABLE_HEADS = frozenset(ANIMALS + PLANTS + ("animal", "plant", "living_thing", THING))

VOCABULARY: tuple[str, ...] = (
    PREDICATES + (WAS,) + DIRECTIONS + (OF, MOST) + COLOR_WORDS + (THING,) + CATEGORY_WORDS + OBJECT_TYPES
)
TOKEN_IDS = {tok: i for i, tok in enumerate(VOCABULARY)}
MAX_SENTENCE_TOKENS = 8

CONCEPT_CATEGORIES = ("basic", "spatial", "temporal", "spatio_temporal")


class GrammarError(ValueError):
    """Base class for parse/render rejections."""


class UnknownTokenError(GrammarError):
    pass


class MalformedSentenceError(GrammarError):
    pass


class SentenceTooLongError(GrammarError):
    pass


@dataclass(frozen=True)
class AttrRef:
    """Reference by head word, optionally narrowed by a color word."""

    head: str
    color: Optional[str] = None


@dataclass(frozen=True)
class SpatialRef:
    """Reference to 'thing' through a tensed spatial relation.

    anchor None means the one-to-all form ('<direction> most'); otherwise the
    relation is one-to-one against any object matching the anchor head word.
    """

    tense: str
    direction: str
    anchor: Optional[str] = None


Reference = Union[AttrRef, SpatialRef]


@dataclass(frozen=True)
class Sentence:
    tense: str
    predicate: str
    ref: Reference


def vocabulary() -> tuple[str, ...]:
    return VOCABULARY


def vocabulary_hash() -> str:
    return hashlib.sha256("\n".join(VOCABULARY).encode()).hexdigest()


def write_vocabulary(path) -> None:
    with open(path, "w") as fh:
        for token in VOCABULARY:
            fh.write(token + "\n")


def _check_valid(sentence: Sentence) -> None:
    if sentence.tense not in TENSES:
        raise MalformedSentenceError(f"bad tense {sentence.tense!r}")
    if sentence.predicate not in PREDICATES:
        raise MalformedSentenceError(f"bad predicate {sentence.predicate!r}")
    ref = sentence.ref
    if isinstance(ref, AttrRef):
        if ref.head not in HEAD_WORDS:
            raise MalformedSentenceError(f"bad head word {ref.head!r}")
        if ref.color is not None and ref.color not in COLOR_WORDS:
            raise MalformedSentenceError(f"bad color word {ref.color!r}")
        if sentence.predicate == "grow" and ref.head not in GROWABLE_HEADS:
            raise MalformedSentenceError(f"'grow' cannot take head {ref.head!r}")
    elif isinstance(ref, SpatialRef):
        if ref.tense not in TENSES:
            raise MalformedSentenceError(f"bad localizer tense {ref.tense!r}")
        if ref.direction not in DIRECTIONS:
            raise MalformedSentenceError(f"bad direction {ref.direction!r}")
        if ref.anchor is not None and ref.anchor not in HEAD_WORDS:
            raise MalformedSentenceError(f"bad anchor word {ref.anchor!r}")
    else:
        raise MalformedSentenceError(f"bad reference {ref!r}")


def render(sentence: Sentence) -> tuple[str, ...]:
    """Sentence -> token sequence (at most 8 tokens; the grammar peaks at 7)."""
    _check_valid(sentence)
    tokens: list[str] = []
    if sentence.tense == "past":
        tokens.append(WAS)
    tokens.append(sentence.predicate)
    ref = sentence.ref
    if isinstance(ref, AttrRef):
        if ref.color is not None:
            tokens.append(ref.color)
        tokens.append(ref.head)
    else:
        tokens.append(THING)
        if ref.tense == "past":
            tokens.append(WAS)
        tokens.append(ref.direction)
        if ref.anchor is None:
            tokens.append(MOST)
        else:
            tokens.append(OF)
            tokens.append(ref.anchor)
    return tuple(tokens)


def parse(tokens: Iterable[str]) -> Sentence:
    """Token sequence -> Sentence; rejects anything outside the grammar."""
    toks = list(tokens)
    if len(toks) > MAX_SENTENCE_TOKENS:
        raise SentenceTooLongError(f"{len(toks)} tokens exceeds {MAX_SENTENCE_TOKENS}")
    for tok in toks:
        if tok not in TOKEN_IDS:
            raise UnknownTokenError(f"unknown token {tok!r}")
    if not toks:
        raise MalformedSentenceError("empty sentence")

    tense = "present"
    if toks[0] == WAS:
        tense = "past"
        toks = toks[1:]
    if not toks or toks[0] not in PREDICATES:
        raise MalformedSentenceError("expected a predicate")
    predicate = toks[0]
    rest = toks[1:]

    ref: Reference
    if len(rest) == 1 and rest[0] in HEAD_WORDS:
        ref = AttrRef(head=rest[0])
    elif len(rest) == 2 and rest[0] in COLOR_WORDS and rest[1] in HEAD_WORDS:
        ref = AttrRef(head=rest[1], color=rest[0])
    elif rest and rest[0] == THING and len(rest) >= 3:
        body = rest[1:]
        loc_tense = "present"
        if body[0] == WAS:
            loc_tense = "past"
            body = body[1:]
        if not body or body[0] not in DIRECTIONS:
            raise MalformedSentenceError("expected a direction")
        direction = body[0]
        tail = body[1:]
        if tail == [MOST]:
            ref = SpatialRef(tense=loc_tense, direction=direction, anchor=None)
        elif len(tail) == 2 and tail[0] == OF and tail[1] in HEAD_WORDS:
            ref = SpatialRef(tense=loc_tense, direction=direction, anchor=tail[1])
        else:
            raise MalformedSentenceError(f"bad localizer tail {tail!r}")
    else:
        raise MalformedSentenceError(f"unparseable reference {rest!r}")

    sentence = Sentence(tense=tense, predicate=predicate, ref=ref)
    _check_valid(sentence)
    return sentence


def categorize(sentence: Sentence) -> str:
    if isinstance(sentence.ref, AttrRef):
        if sentence.tense == "present" and sentence.predicate == "grasp":
            return "basic"
        return "temporal"
    if (
        sentence.tense == "present"
        and sentence.predicate == "grasp"
        and sentence.ref.tense == "present"
    ):
        return "spatial"
    return "spatio_temporal"


def _attr_refs(predicate: str) -> list[AttrRef]:
    heads = [h for h in HEAD_WORDS if predicate != "grow" or h in GROWABLE_HEADS]
    return [AttrRef(head=h, color=c) for h in heads for c in (None,) + COLOR_WORDS]


def _spatial_refs(tense: str) -> list[SpatialRef]:
    refs = [SpatialRef(tense=tense, direction=d, anchor=a) for d in DIRECTIONS for a in HEAD_WORDS]
    refs += [SpatialRef(tense=tense, direction=d, anchor=None) for d in DIRECTIONS]
    return refs


@lru_cache(maxsize=None)
def enumerate_sentences(category: str) -> tuple[Sentence, ...]:
    """Exhaustive, duplicate-free, deterministic enumeration per category."""
    if category == "basic":
        return tuple(Sentence("present", "grasp", r) for r in _attr_refs("grasp"))
    if category == "spatial":
        return tuple(Sentence("present", "grasp", r) for r in _spatial_refs("present"))
    if category == "temporal":
        out = []
        for tense in TENSES:
            for pred in PREDICATES:
                if tense == "present" and pred == "grasp":
                    continue
                out.extend(Sentence(tense, pred, r) for r in _attr_refs(pred))
        return tuple(out)
    if category == "spatio_temporal":
        out = []
        for tense in TENSES:
            for pred in PREDICATES:
                for loc_tense in TENSES:
                    if tense == "present" and pred == "grasp" and loc_tense == "present":
                        continue
                    out.extend(Sentence(tense, pred, r) for r in _spatial_refs(loc_tense))
        return tuple(out)
    raise ValueError(f"unknown category {category!r}")


@lru_cache(maxsize=None)
def all_sentences() -> tuple[Sentence, ...]:
    out: list[Sentence] = []
    for category in CONCEPT_CATEGORIES:
        out.extend(enumerate_sentences(category))
    return tuple(out)


@lru_cache(maxsize=None)
def sentence_ids() -> dict[Sentence, int]:
    return {s: i for i, s in enumerate(all_sentences())}


def token_ids(sentence: Sentence) -> tuple[int, ...]:
    return tuple(TOKEN_IDS[t] for t in render(sentence))


def from_token_ids(ids: Iterable[int]) -> Sentence:
    return parse(VOCABULARY[i] for i in ids)


def encode_tokens(tokens: Iterable[str]) -> np.ndarray:
    """One-hot matrix (L, |vocabulary|), row l encoding token l."""
    toks = list(tokens)
    out = np.zeros((len(toks), len(VOCABULARY)), dtype=np.float32)
    for l, tok in enumerate(toks):
        if tok not in TOKEN_IDS:
            raise UnknownTokenError(f"unknown token {tok!r}")
        out[l, TOKEN_IDS[tok]] = 1.0
    return out


def decode_tokens(onehot: np.ndarray) -> tuple[str, ...]:
    if onehot.ndim != 2 or onehot.shape[1] != len(VOCABULARY):
        raise ValueError("expected (L, vocabulary) one-hot matrix")
    return tuple(VOCABULARY[int(i)] for i in onehot.argmax(axis=1))


def bnf_document() -> dict:
    """Machine-readable grammar description (for docs and tooling).

    The "sentences" field enumerates the full universe as token-id lists per
    category; global sentence ids are positions in the concatenation of the
    categories in "category_order". Split files reference those ids.
    """
    return {
        "vocabulary": list(VOCABULARY),
        "category_order": list(CONCEPT_CATEGORIES),
        "sentences": {
            c: [list(token_ids(s)) for s in enumerate_sentences(c)]
            for c in CONCEPT_CATEGORIES
        },
        "rules": {
            "<sentence>": ["<pred-phrase> <reference>"],
            "<pred-phrase>": ["<predicate>", "was <predicate>"],
            "<predicate>": list(PREDICATES),
            "<reference>": ["<attr-ref>", "<spatial-ref>"],
            "<attr-ref>": ["<head>", "<color> <head>"],
            "<spatial-ref>": ["thing <localizer>", "thing was <localizer>"],
            "<localizer>": ["<direction> of <head>", "<direction> most"],
            "<direction>": list(DIRECTIONS),
            "<color>": list(COLOR_WORDS),
            "<head>": list(HEAD_WORDS),
        },
        "constraints": {
            "grow_heads": sorted(GROWABLE_HEADS),
            "max_tokens": MAX_SENTENCE_TOKENS,
        },
        "category_sizes": {c: len(enumerate_sentences(c)) for c in CONCEPT_CATEGORIES},
    }
