"""Corpus generation, generalization splits, batch sampling, serialization.

A corpus is a list of episode records, each holding the episode's feature
tensor and its exhaustive set of true sentences (token-id lists). Episodes
are generated against a round-robin schedule of scenario targets (kind x
type x color x tense) so that every reachable basic/temporal description
accumulates positives quickly; per-episode seeds derive from the master seed
by counter, which keeps generation deterministic and embarrassingly
parallel.

Corpus and split files are line-delimited JSON with a self-describing header
and a trailing sha256 checksum; features are decimal in text mode and
base64-packed little-endian float32 in binary mode.
"""

from __future__ import annotations

import base64
import hashlib
import json
import multiprocessing
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from . import bot, grammar, oracle, world

FORMAT_VERSION = 1
_NEW_OBS_STREAM = 0x6F627374  # distinct seed branch for held-out observation sets

SYSTEMATIC_SPLIT_NAMES = (
    "attr_object",
    "grow_plant",
    "right_of",
    "was_left_of",
    "was_grasp",
)


class CorpusFormatError(ValueError):
    """Version mismatch, corrupt record, or checksum failure on load."""


@dataclass(frozen=True)
class EpisodeRecord:
    episode_id: int
    seed: tuple[int, ...]
    features: np.ndarray  # (T, 1+N, f) float32
    true_sentences: tuple[tuple[int, ...], ...]  # token-id lists, sorted

    def true_set(self) -> frozenset[tuple[int, ...]]:
        return frozenset(self.true_sentences)


@dataclass
class Corpus:
    master_seed: int
    t_steps: int
    n_objects: int
    n_features: int
    vocab_hash: str
    records: list[EpisodeRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)


@dataclass(frozen=True)
class SplitSpec:
    """Declarative held-out sentence set.

    kind 'random_category_holdout' carries the holdout fraction; kind
    'forbidden_combination' carries token patterns, each either
    {"contiguous": [...tokens...]} or {"cooccur": [[group1], [group2]]}.
    held_out_ids index into grammar.all_sentences().
    """

    name: str
    kind: str
    payload: tuple
    held_out_ids: tuple[int, ...]

    def train_ids(self) -> tuple[int, ...]:
        held = set(self.held_out_ids)
        return tuple(i for i in range(len(grammar.all_sentences())) if i not in held)


@dataclass(frozen=True)
class Sample:
    features: np.ndarray
    token_ids: tuple[int, ...]
    label: int


def scenario_schedule() -> tuple[bot.ScenarioRequest, ...]:
    """All 504 realizable (kind, type, color, tense) targets, fixed order."""
    out = []
    for kind in ("grasp", "shake"):
        for type_name in world.OBJECT_TYPES:
            for color in world.COLOR_WORDS:
                for past in (False, True):
                    out.append(bot.ScenarioRequest(kind, type_name, color, past))
    for type_name in world.ANIMALS + world.PLANTS:
        for color in world.COLOR_WORDS:
            for past in (False, True):
                out.append(bot.ScenarioRequest("grow", type_name, color, past))
    return tuple(out)


_SCHEDULE = scenario_schedule()


def episode_seed(master_seed: int, index: int, stream: Optional[int] = None) -> tuple[int, ...]:
    if stream is None:
        return (master_seed, index)
    return (master_seed, stream, index)


def generate_episode(master_seed: int, index: int, stream: Optional[int] = None) -> EpisodeRecord:
    seed = episode_seed(master_seed, index, stream)
    rng = np.random.default_rng(np.random.SeedSequence(list(seed)))
    request = _SCHEDULE[index % len(_SCHEDULE)]
    trace, _ = bot.rollout_with_scenario(rng, request)
    view = oracle.TraceView(trace)
    true = sorted(grammar.token_ids(s) for s in oracle.describe(view))
    return EpisodeRecord(
        episode_id=index,
        seed=seed,
        features=view.features,
        true_sentences=tuple(true),
    )


def _gen_worker(args: tuple[int, int, Optional[int]]) -> EpisodeRecord:
    master_seed, index, stream = args
    return generate_episode(master_seed, index, stream)


def generate_corpus(
    n_episodes: int,
    master_seed: int,
    workers: int = 1,
    stream: Optional[int] = None,
) -> Corpus:
    corpus = Corpus(
        master_seed=master_seed,
        t_steps=world.T_STEPS,
        n_objects=world.N_OBJECTS,
        n_features=world.OBJECT_FEATURES,
        vocab_hash=grammar.vocabulary_hash(),
    )
    tasks = [(master_seed, i, stream) for i in range(n_episodes)]
    if workers <= 1:
        corpus.records = [_gen_worker(t) for t in tasks]
    else:
        chunk = max(1, n_episodes // (workers * 8))
        with multiprocessing.get_context("fork").Pool(workers) as pool:
            corpus.records = pool.map(_gen_worker, tasks, chunksize=chunk)
    return corpus


def new_observation_corpus(n_episodes: int, master_seed: int, workers: int = 1) -> Corpus:
    """Fresh rollouts from a seed stream disjoint from the training corpus."""
    return generate_corpus(n_episodes, master_seed, workers=workers, stream=_NEW_OBS_STREAM)


# -- coverage -----------------------------------------------------------------


@dataclass
class CoverageReport:
    min_per_description: int
    counts: np.ndarray  # positives per sentence id, length 2672
    category_of: tuple[str, ...]

    def shortfalls(self) -> list[int]:
        return [i for i, c in enumerate(self.counts) if c < self.min_per_description]

    def covered_fraction(self, categories: Optional[Sequence[str]] = None, at_least: int = 1) -> float:
        idx = [
            i
            for i, cat in enumerate(self.category_of)
            if categories is None or cat in categories
        ]
        hit = sum(1 for i in idx if self.counts[i] >= at_least)
        return hit / len(idx)

    def per_category_counts(self) -> dict[str, tuple[int, int]]:
        """category -> (n sentences with >= min positives, n sentences)."""
        out: dict[str, list[int]] = {c: [0, 0] for c in grammar.CONCEPT_CATEGORIES}
        for i, cat in enumerate(self.category_of):
            out[cat][1] += 1
            if self.counts[i] >= self.min_per_description:
                out[cat][0] += 1
        return {c: (v[0], v[1]) for c, v in out.items()}


def coverage_report(corpus: Corpus, min_per_description: int) -> CoverageReport:
    ids = grammar.sentence_ids()
    counts = np.zeros(len(ids), dtype=np.int64)
    by_tokens = {grammar.token_ids(s): i for s, i in ids.items()}
    for record in corpus.records:
        for toks in record.true_sentences:
            counts[by_tokens[toks]] += 1
    cats = tuple(grammar.categorize(s) for s in grammar.all_sentences())
    return CoverageReport(min_per_description=min_per_description, counts=counts, category_of=cats)


# -- splits -------------------------------------------------------------------


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def random_split(holdout_frac: float, rng: np.random.Generator) -> SplitSpec:
    """Per-category uniform holdout of round(frac * size) sentences."""
    if not 0.0 < holdout_frac < 1.0:
        raise ValueError("holdout_frac must be in (0, 1)")
    ids = grammar.sentence_ids()
    held: list[int] = []
    for category in grammar.CONCEPT_CATEGORIES:
        members = [ids[s] for s in grammar.enumerate_sentences(category)]
        k = _round_half_up(holdout_frac * len(members))
        picks = rng.choice(len(members), size=k, replace=False)
        held.extend(members[int(i)] for i in picks)
    return SplitSpec(
        name="random_holdout",
        kind="random_category_holdout",
        payload=(holdout_frac,),
        held_out_ids=tuple(sorted(held)),
    )


def _contiguous(tokens: Sequence[str], pattern: Sequence[str]) -> bool:
    k = len(pattern)
    return any(tuple(tokens[i : i + k]) == tuple(pattern) for i in range(len(tokens) - k + 1))


def sentence_matches_pattern(sentence: grammar.Sentence, pattern: dict) -> bool:
    tokens = grammar.render(sentence)
    if "contiguous" in pattern:
        return _contiguous(tokens, pattern["contiguous"])
    if "cooccur" in pattern:
        group_a, group_b = pattern["cooccur"]
        return any(t in tokens for t in group_a) and any(t in tokens for t in group_b)
    raise ValueError(f"unknown pattern {pattern!r}")


def _forbidden_split(name: str, patterns: list[dict]) -> SplitSpec:
    ids = grammar.sentence_ids()
    held = sorted(
        ids[s]
        for s in grammar.all_sentences()
        if any(sentence_matches_pattern(s, p) for p in patterns)
    )
    return SplitSpec(
        name=name,
        kind="forbidden_combination",
        payload=tuple(json.dumps(p, sort_keys=True) for p in patterns),
        held_out_ids=tuple(held),
    )


def systematic_splits() -> list[SplitSpec]:
    """The five forbidden-combination splits, in canonical order:

    1. attr_object   object-attribute pairs 'red cat', 'blue door', 'green cactus'
    2. grow_plant    'grow' together with any plant word
    3. right_of      the one-to-one relation 'right of'
    4. was_left_of   the past spatial relation 'was left of'
    5. was_grasp     the past predicate 'was grasp'
    """
    plant_words = list(world.PLANTS) + ["plant"]
    return [
        _forbidden_split(
            "attr_object",
            [
                {"contiguous": ["red", "cat"]},
                {"contiguous": ["blue", "door"]},
                {"contiguous": ["green", "cactus"]},
            ],
        ),
        _forbidden_split("grow_plant", [{"cooccur": [["grow"], plant_words]}]),
        _forbidden_split("right_of", [{"contiguous": ["right", "of"]}]),
        _forbidden_split("was_left_of", [{"contiguous": ["was", "left", "of"]}]),
        _forbidden_split("was_grasp", [{"contiguous": ["was", "grasp"]}]),
    ]


def combined_systematic_train_ids(splits: Optional[Sequence[SplitSpec]] = None) -> tuple[int, ...]:
    """One train set with every forbidden sentence removed."""
    splits = list(splits) if splits is not None else systematic_splits()
    held = set()
    for s in splits:
        held.update(s.held_out_ids)
    return tuple(i for i in range(len(grammar.all_sentences())) if i not in held)


# -- batch sampling -----------------------------------------------------------


class BufferIndex:
    """Modular buffer: description id -> episode indices where it is true."""

    def __init__(self, corpus: Corpus, train_ids: Sequence[int]):
        all_s = grammar.all_sentences()
        self.corpus = corpus
        self.train_ids = tuple(train_ids)
        self.tokens_of = {i: grammar.token_ids(all_s[i]) for i in self.train_ids}
        id_by_tokens = {v: k for k, v in self.tokens_of.items()}
        episodes: dict[int, list[int]] = {}
        for e, record in enumerate(corpus.records):
            for toks in record.true_sentences:
                sid = id_by_tokens.get(toks)
                if sid is not None:
                    episodes.setdefault(sid, []).append(e)
        self.positive_episodes = episodes
        self.sampleable = sorted(episodes)
        dropped = len(self.train_ids) - len(self.sampleable)
        self.descriptions_without_positives = dropped


def sample_batch(
    index: BufferIndex,
    batch_size: int,
    pos_ratio: float,
    rng: np.random.Generator,
    hard_negatives: bool = False,
) -> list[Sample]:
    """A batch with an enforced fraction of positive pairs.

    Positive pairs spread uniformly over train descriptions that have at
    least one positive episode; negatives pair a uniform episode with a
    uniform false train sentence (optionally a hard negative sharing the
    predicate or head word with a true sentence of that episode).
    """
    if not index.sampleable:
        raise ValueError("corpus has no positive episode for any train description")
    n_pos = int(round(batch_size * pos_ratio))
    out: list[Sample] = []

    desc_pool = index.sampleable
    picks = rng.choice(len(desc_pool), size=n_pos, replace=n_pos > len(desc_pool))
    for p in picks:
        sid = desc_pool[int(p)]
        eps = index.positive_episodes[sid]
        record = index.corpus.records[eps[int(rng.integers(len(eps)))]]
        out.append(Sample(record.features, index.tokens_of[sid], 1))

    train_list = list(index.train_ids)
    while len(out) < batch_size:
        record = index.corpus.records[int(rng.integers(len(index.corpus.records)))]
        true = record.true_set()
        if hard_negatives:
            token_ids = _hard_negative_tokens(record, true, train_list, index, rng)
        else:
            token_ids = None
            for _ in range(64):
                cand = index.tokens_of[train_list[int(rng.integers(len(train_list)))]]
                if cand not in true:
                    token_ids = cand
                    break
        if token_ids is None:
            continue
        out.append(Sample(record.features, token_ids, 0))
    return out


def _hard_negative_tokens(
    record: EpisodeRecord,
    true: frozenset,
    train_list: list[int],
    index: BufferIndex,
    rng: np.random.Generator,
) -> Optional[tuple[int, ...]]:
    """False train sentence sharing the predicate or head word with some true
    sentence of the episode (the record-level mirror of oracle.hard_negative)."""
    positives = [grammar.from_token_ids(t) for t in record.true_sentences]
    if not positives:
        return None
    pos = positives[int(rng.integers(len(positives)))]
    pos_head = pos.ref.head if isinstance(pos.ref, grammar.AttrRef) else grammar.THING
    candidates = []
    for sid in train_list:
        toks = index.tokens_of[sid]
        if toks in true:
            continue
        s = grammar.all_sentences()[sid]
        head = s.ref.head if isinstance(s.ref, grammar.AttrRef) else grammar.THING
        if s.predicate == pos.predicate or head == pos_head:
            candidates.append(toks)
    if not candidates:
        return None
    return candidates[int(rng.integers(len(candidates)))]


# -- serialization ------------------------------------------------------------


def _checksummed_write(path, lines: Iterable[str]) -> str:
    digest = hashlib.sha256()
    with open(path, "w") as fh:
        for line in lines:
            data = line + "\n"
            digest.update(data.encode())
            fh.write(data)
        checksum = digest.hexdigest()
        fh.write(json.dumps({"sha256": checksum}) + "\n")
    return checksum


def _checksummed_read(path) -> list[str]:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise CorpusFormatError(f"{path}: empty file")
    try:
        trailer = json.loads(lines[-1])
    except json.JSONDecodeError as err:
        raise CorpusFormatError(f"{path}: bad checksum trailer") from err
    if "sha256" not in trailer:
        raise CorpusFormatError(f"{path}: missing checksum trailer (truncated file?)")
    digest = hashlib.sha256()
    for line in lines[:-1]:
        digest.update((line + "\n").encode())
    if digest.hexdigest() != trailer["sha256"]:
        raise CorpusFormatError(f"{path}: checksum mismatch")
    return lines[:-1]


def serialize(corpus: Corpus, path, mode: str = "text", config: Optional[dict] = None) -> str:
    """Write the corpus; returns the content checksum."""
    if mode not in ("text", "binary"):
        raise ValueError("mode must be 'text' or 'binary'")

    def lines():
        header = {
            "format_version": FORMAT_VERSION,
            "kind": "corpus",
            "mode": mode,
            "master_seed": corpus.master_seed,
            "episodes": len(corpus.records),
            "T": corpus.t_steps,
            "N": corpus.n_objects,
            "f": corpus.n_features,
            "vocab_sha256": corpus.vocab_hash,
        }
        if config is not None:
            header["config"] = config
        yield json.dumps(header, sort_keys=True)
        for record in corpus.records:
            feats = np.ascontiguousarray(record.features, dtype=np.float32)
            if mode == "binary":
                payload = base64.b64encode(feats.astype("<f4").tobytes()).decode("ascii")
            else:
                payload = [[[float(v) for v in row] for row in step] for step in feats]
            yield json.dumps(
                {
                    "episode_id": record.episode_id,
                    "seed": list(record.seed),
                    "features": payload,
                    "true_sentences": [list(t) for t in record.true_sentences],
                },
                sort_keys=True,
            )

    return _checksummed_write(path, lines())


def load(path) -> Corpus:
    lines = _checksummed_read(path)
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as err:
        raise CorpusFormatError(f"{path}: bad header") from err
    if header.get("format_version") != FORMAT_VERSION:
        raise CorpusFormatError(
            f"{path}: format version {header.get('format_version')} != {FORMAT_VERSION}"
        )
    if header.get("kind") != "corpus":
        raise CorpusFormatError(f"{path}: not a corpus file")
    shape = (header["T"], header["N"] + 1, header["f"])
    corpus = Corpus(
        master_seed=header["master_seed"],
        t_steps=header["T"],
        n_objects=header["N"],
        n_features=header["f"],
        vocab_hash=header["vocab_sha256"],
    )
    for line in lines[1:]:
        try:
            obj = json.loads(line)
            if header["mode"] == "binary":
                feats = np.frombuffer(base64.b64decode(obj["features"]), dtype="<f4").reshape(shape).copy()
            else:
                feats = np.asarray(obj["features"], dtype=np.float32)
                if feats.shape != shape:
                    raise ValueError(f"feature shape {feats.shape} != {shape}")
            record = EpisodeRecord(
                episode_id=int(obj["episode_id"]),
                seed=tuple(int(s) for s in obj["seed"]),
                features=feats,
                true_sentences=tuple(tuple(int(i) for i in t) for t in obj["true_sentences"]),
            )
        except (KeyError, ValueError, TypeError) as err:
            raise CorpusFormatError(f"{path}: corrupt record ({err})") from err
        corpus.records.append(record)
    if len(corpus.records) != header["episodes"]:
        raise CorpusFormatError(
            f"{path}: {len(corpus.records)} records but header says {header['episodes']}"
        )
    return corpus


def write_splits(splits: Sequence[SplitSpec], path, config: Optional[dict] = None) -> str:
    def lines():
        header = {
            "format_version": FORMAT_VERSION,
            "kind": "splits",
            "vocab_sha256": grammar.vocabulary_hash(),
            "n_sentences": len(grammar.all_sentences()),
            "splits": len(splits),
        }
        if config is not None:
            header["config"] = config
        yield json.dumps(header, sort_keys=True)
        for s in splits:
            yield json.dumps(
                {
                    "name": s.name,
                    "kind": s.kind,
                    "payload": list(s.payload),
                    "held_out_ids": list(s.held_out_ids),
                },
                sort_keys=True,
            )

    return _checksummed_write(path, lines())


def load_splits(path) -> list[SplitSpec]:
    lines = _checksummed_read(path)
    header = json.loads(lines[0])
    if header.get("format_version") != FORMAT_VERSION:
        raise CorpusFormatError(f"{path}: unsupported format version")
    if header.get("kind") != "splits":
        raise CorpusFormatError(f"{path}: not a splits file")
    out = []
    for line in lines[1:]:
        obj = json.loads(line)
        out.append(
            SplitSpec(
                name=obj["name"],
                kind=obj["kind"],
                payload=tuple(obj["payload"]),
                held_out_ids=tuple(int(i) for i in obj["held_out_ids"]),
            )
        )
    return out


def corpus_file_hash(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()
