"""Exact symbolic truth function over traces.

Truth of a sentence is decided compositionally at the end of a trace:

    NOW(phi) := phi holds at the final step T
    WAS(phi) := phi held at some step t < T and does not hold at T

A sentence is true iff some object matches its reference statically (head
word, color word) and its tensed predicate timeline satisfies the predicate
tense, and -- when the reference is spatial -- its tensed relation timeline
satisfies the localizer tense. Both tense operators are evaluated
independently at trace end.

A second, per-step generation pipeline (``describe_operational``) rebuilds
descriptions from instantaneous truth sets and lapse bookkeeping; it serves
as an independent cross-check of the compositional path. The two agree on
every sentence whose predicate and localizer tenses coincide; for a past
predicate with a present localizer the operational pipeline reads the
relation at the steps the predicate held rather than at trace end, and the
disagreement rate is measured rather than hidden.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from . import grammar, world
from .grammar import (
    AttrRef,
    DIRECTIONS,
    HEAD_WORDS,
    PREDICATES,
    Sentence,
    SpatialRef,
)

# Shake detector constants, co-designed with the scripted bot's shake motion:
# an object shakes at step t when it was held for the whole trailing window
# and its x displacement reversed direction at least SHAKE_MIN_REVERSALS
# times at amplitude >= SHAKE_AMPLITUDE.
SHAKE_WINDOW = 8
SHAKE_MIN_REVERSALS = 2
SHAKE_AMPLITUDE = 0.05

_DIR_INDEX = {d: i for i, d in enumerate(DIRECTIONS)}
_PRED_INDEX = {p: i for i, p in enumerate(PREDICATES)}
_HEAD_INDEX = {h: i for i, h in enumerate(HEAD_WORDS)}

TraceLike = Union[world.Trace, np.ndarray]


class NoHardNegativeError(RuntimeError):
    """Raised when a trace admits no false sentence sharing a word with the positive."""


def as_feature_array(trace: TraceLike) -> np.ndarray:
    if isinstance(trace, world.Trace):
        return trace.feature_tensor()
    arr = np.asarray(trace, dtype=np.float32)
    if arr.ndim != 3 or arr.shape[2] != world.OBJECT_FEATURES:
        raise ValueError(f"expected (T, 1+N, {world.OBJECT_FEATURES}) features, got {arr.shape}")
    return arr


def matches_static(type_name: str, rgb: Sequence[float], head: str, color: Optional[str] = None) -> bool:
    """Does an object of this type and color satisfy an attribute reference?"""
    if head == grammar.THING:
        head_ok = True
    elif head in world.CATEGORY_MEMBERS:
        head_ok = type_name in world.CATEGORY_MEMBERS[head]
    else:
        head_ok = type_name == head
    if not head_ok:
        return False
    return color is None or world.color_word_of(rgb) == color


class TraceView:
    """Per-trace cache of timelines and static matches.

    Everything downstream (sentence evaluation, full description, the
    operational cross-check) reads from these arrays.
    """

    def __init__(self, trace: TraceLike):
        feats = as_feature_array(trace)
        self.features = feats
        self.T = feats.shape[0]
        self.n_objects = feats.shape[1] - 1

        obj = feats[:, 1:, :]
        self.obj_pos = obj[:, :, 0:2].astype(np.float64)  # (T, N, 2)
        self.obj_size = obj[:, :, 2].astype(np.float64)  # (T, N)
        self.obj_rgb = obj[0, :, 3:6]  # static
        onehot = obj[0, :, 6:38]
        if not np.allclose(onehot.sum(axis=1), 1.0):
            raise ValueError("object type one-hot is malformed")
        self.type_names = [world.OBJECT_TYPES[int(i)] for i in onehot.argmax(axis=1)]
        self.grasped = obj[:, :, 38] > 0.5  # (T, N)

        n, t_steps = self.n_objects, self.T
        self.head_match = np.zeros((n, len(HEAD_WORDS)), dtype=bool)
        self.color_words: list[Optional[str]] = []
        for i in range(n):
            self.color_words.append(world.color_word_of(self.obj_rgb[i]))
            for h, head in enumerate(HEAD_WORDS):
                self.head_match[i, h] = matches_static(self.type_names[i], self.obj_rgb[i], head)

        # Predicate timelines, (n_preds, N, T).
        self.pred = np.zeros((len(PREDICATES), n, t_steps), dtype=bool)
        self.pred[_PRED_INDEX["grasp"]] = self.grasped.T
        growth = np.zeros((n, t_steps), dtype=bool)
        growth[:, 1:] = (self.obj_size[1:] > self.obj_size[:-1]).T
        self.pred[_PRED_INDEX["grow"]] = growth
        self.pred[_PRED_INDEX["shake"]] = self._shake_timeline()

        # One-to-one relations, (n_dirs, N, N, T); entry [d, i, j, t] says
        # object i is <d> of object j at step t. Strict comparisons; an
        # object is never in relation with itself.
        x = self.obj_pos[:, :, 0].T  # (N, T)
        y = self.obj_pos[:, :, 1].T
        rel = np.zeros((len(DIRECTIONS), n, n, t_steps), dtype=bool)
        rel[_DIR_INDEX["left"]] = x[:, None, :] < x[None, :, :]
        rel[_DIR_INDEX["right"]] = x[:, None, :] > x[None, :, :]
        rel[_DIR_INDEX["top"]] = y[:, None, :] > y[None, :, :]
        rel[_DIR_INDEX["bottom"]] = y[:, None, :] < y[None, :, :]
        eye = np.eye(n, dtype=bool)
        rel[:, eye, :] = False
        self.rel_pair = rel

        not_self = ~eye
        self.rel_all = np.all(rel | ~not_self[None, :, :, None], axis=2)  # (n_dirs, N, T)

        # Anchored one-to-one: [d, i, h, t] = referent i stands in relation d
        # to some anchor j != i matching head word h.
        self.rel_anchor = np.any(
            rel[:, :, :, None, :] & self.head_match[None, None, :, :, None], axis=2
        )  # (n_dirs, N, n_heads, T)

    def _shake_timeline(self) -> np.ndarray:
        n, t_steps = self.n_objects, self.T
        out = np.zeros((n, t_steps), dtype=bool)
        x = self.obj_pos[:, :, 0]  # (T, N)
        dx = np.diff(x, axis=0)  # (T-1, N); dx[t] = x[t+1] - x[t]
        for i in range(n):
            for t in range(SHAKE_WINDOW - 1, t_steps):
                lo = t - SHAKE_WINDOW + 1
                if not self.grasped[lo : t + 1, i].all():
                    continue
                deltas = dx[lo:t, i]  # displacements inside the window
                big = np.abs(deltas) >= SHAKE_AMPLITUDE
                flips = (deltas[1:] * deltas[:-1] < 0) & big[1:] & big[:-1]
                if int(flips.sum()) >= SHAKE_MIN_REVERSALS:
                    out[i, t] = True
        return out

    # Tense operators over (..., T) boolean timelines.
    def now(self, timeline: np.ndarray) -> np.ndarray:
        return timeline[..., -1]

    def was(self, timeline: np.ndarray) -> np.ndarray:
        return timeline[..., :-1].any(axis=-1) & ~timeline[..., -1]

    def tensed(self, timeline: np.ndarray, tense: str) -> np.ndarray:
        return self.now(timeline) if tense == "present" else self.was(timeline)

    def attr_mask(self, ref: AttrRef) -> np.ndarray:
        mask = self.head_match[:, _HEAD_INDEX[ref.head]].copy()
        if ref.color is not None:
            mask &= np.array([w == ref.color for w in self.color_words])
        return mask

    def rel_timeline(self, ref: SpatialRef) -> np.ndarray:
        d = _DIR_INDEX[ref.direction]
        if ref.anchor is None:
            return self.rel_all[d]  # (N, T)
        return self.rel_anchor[d, :, _HEAD_INDEX[ref.anchor], :]  # (N, T)


def instant_predicates(trace: TraceLike, t: int) -> dict[str, np.ndarray]:
    """Per-object predicate truth at step t (1-indexed, 1 <= t <= T)."""
    view = trace if isinstance(trace, TraceView) else TraceView(trace)
    if not 1 <= t <= view.T:
        raise ValueError(f"step {t} outside [1, {view.T}]")
    return {p: view.pred[_PRED_INDEX[p], :, t - 1].copy() for p in PREDICATES}


def instant_relations(trace: TraceLike, t: int) -> dict[str, np.ndarray]:
    """Pairwise and one-to-all relation truth at step t (1-indexed)."""
    view = trace if isinstance(trace, TraceView) else TraceView(trace)
    if not 1 <= t <= view.T:
        raise ValueError(f"step {t} outside [1, {view.T}]")
    out: dict[str, np.ndarray] = {}
    for d in DIRECTIONS:
        out[d] = view.rel_pair[_DIR_INDEX[d], :, :, t - 1].copy()
        out[d + "_most"] = view.rel_all[_DIR_INDEX[d], :, t - 1].copy()
    return out


def eval_sentence(trace: TraceLike, sentence: Sentence) -> bool:
    view = trace if isinstance(trace, TraceView) else TraceView(trace)
    return bool(_witness_mask(view, sentence).any())


def _witness_mask(view: TraceView, sentence: Sentence) -> np.ndarray:
    pred_tl = view.pred[_PRED_INDEX[sentence.predicate]]
    pred_ok = view.tensed(pred_tl, sentence.tense)
    ref = sentence.ref
    if isinstance(ref, AttrRef):
        return view.attr_mask(ref) & pred_ok
    loc_ok = view.tensed(view.rel_timeline(ref), ref.tense)
    return pred_ok & loc_ok


@dataclass(frozen=True)
class Explanation:
    verdict: bool
    witness: Optional[int]
    pred_steps: tuple[int, ...]
    loc_steps: tuple[int, ...]


def explain(trace: TraceLike, sentence: Sentence) -> Explanation:
    """Verdict plus a witnessing object index and the 1-indexed steps at
    which its predicate (and localizer, if any) held."""
    view = trace if isinstance(trace, TraceView) else TraceView(trace)
    mask = _witness_mask(view, sentence)
    if not mask.any():
        return Explanation(False, None, (), ())
    witness = int(np.argmax(mask))
    pred_tl = view.pred[_PRED_INDEX[sentence.predicate], witness]
    pred_steps = tuple(int(t) + 1 for t in np.flatnonzero(pred_tl))
    loc_steps: tuple[int, ...] = ()
    if isinstance(sentence.ref, SpatialRef):
        loc_tl = view.rel_timeline(sentence.ref)[witness]
        loc_steps = tuple(int(t) + 1 for t in np.flatnonzero(loc_tl))
    return Explanation(True, witness, pred_steps, loc_steps)


def describe(trace: TraceLike) -> frozenset[Sentence]:
    """All true sentences of the trace: the 2672-sentence universe filtered
    through eval_sentence."""
    view = trace if isinstance(trace, TraceView) else TraceView(trace)
    return frozenset(s for s in grammar.all_sentences() if _witness_mask(view, s).any())


def describe_operational(trace: TraceLike) -> frozenset[Sentence]:
    """Constructive per-step description pipeline (cross-check oracle).

    Per object, instantaneous predicate and relation truths are turned into
    now/lapsed sets; sentences are then assembled per object:

      * present predicate + matching attribute             -> 'p ref'
      * lapsed predicate + matching attribute              -> 'was p ref'
      * present predicate + present relation               -> 'p thing rel'
      * present predicate + lapsed relation                -> 'p thing was rel'
      * lapsed predicate + relation at the steps it held   -> 'was p thing rel'
      * lapsed predicate + lapsed relation                 -> 'was p thing was rel'
    """
    view = trace if isinstance(trace, TraceView) else TraceView(trace)
    n = view.n_objects
    out: set[Sentence] = set()

    pred_now = view.now(view.pred)  # (P, N)
    pred_was = view.was(view.pred)

    for i in range(n):
        attr_refs = [AttrRef(head=h) for h in HEAD_WORDS if view.head_match[i, _HEAD_INDEX[h]]]
        if view.color_words[i] is not None:
            attr_refs += [AttrRef(head=r.head, color=view.color_words[i]) for r in attr_refs]
        spatial_now: list[SpatialRef] = []
        spatial_was: list[SpatialRef] = []
        for d in DIRECTIONS:
            di = _DIR_INDEX[d]
            for anchor in (None,) + HEAD_WORDS:
                tl = view.rel_all[di, i] if anchor is None else view.rel_anchor[di, i, _HEAD_INDEX[anchor]]
                if tl[-1]:
                    spatial_now.append(SpatialRef("present", d, anchor))
                elif tl[:-1].any():
                    spatial_was.append(SpatialRef("past", d, anchor))

        for p_i, pred in enumerate(PREDICATES):
            if pred_now[p_i, i]:
                for ref in attr_refs:
                    out.add(Sentence("present", pred, ref))
                for ref in spatial_now:
                    out.add(Sentence("present", pred, ref))
                for ref in spatial_was:
                    out.add(Sentence("present", pred, ref))
            elif pred_was[p_i, i]:
                for ref in attr_refs:
                    out.add(Sentence("past", pred, ref))
                for ref in spatial_was:
                    out.add(Sentence("past", pred, ref))
                # Present-tense relation read at the steps the predicate held.
                held = view.pred[p_i, i]  # (T,)
                for d in DIRECTIONS:
                    di = _DIR_INDEX[d]
                    for anchor in (None,) + HEAD_WORDS:
                        tl = (
                            view.rel_all[di, i]
                            if anchor is None
                            else view.rel_anchor[di, i, _HEAD_INDEX[anchor]]
                        )
                        if (held & tl).any():
                            out.add(Sentence("past", pred, SpatialRef("present", d, anchor)))
    return frozenset(out)


def single_tense(sentence: Sentence) -> bool:
    """True when the sentence carries no conflicting tense pair: attribute
    sentences always, spatial sentences when predicate and localizer tenses
    agree."""
    if isinstance(sentence.ref, AttrRef):
        return True
    return sentence.tense == sentence.ref.tense


def hard_negative(trace: TraceLike, positive: Sentence, rng: np.random.Generator) -> Sentence:
    """A sentence false of the trace sharing the predicate or head word with
    the (true) positive."""
    view = trace if isinstance(trace, TraceView) else TraceView(trace)
    if not eval_sentence(view, positive):
        raise ValueError("the provided positive is not true of the trace")
    pos_head = positive.ref.head if isinstance(positive.ref, AttrRef) else grammar.THING
    candidates = []
    for s in grammar.all_sentences():
        if s == positive:
            continue
        head = s.ref.head if isinstance(s.ref, AttrRef) else grammar.THING
        if s.predicate != positive.predicate and head != pos_head:
            continue
        if not _witness_mask(view, s).any():
            candidates.append(s)
    if not candidates:
        raise NoHardNegativeError("no false sentence shares a word with the positive")
    return candidates[int(rng.integers(len(candidates)))]
