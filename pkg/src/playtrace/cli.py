"""Command-line entry point.

Subcommands: generate, describe, eval, split, stats, enumerate,
export-grammar. Every command is deterministic given its flags; generated
artifacts embed the configuration and carry content checksums.

Exit codes: 0 ok, 1 usage, 2 I/O failure, 3 infeasible configuration.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import bot, dataset, grammar, oracle, reporting, world

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_INFEASIBLE = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with 2; we reserve that for I/O
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)


class UsageError(ValueError):
    pass


@dataclass
class Config:
    seed: int = 0
    episodes: int = 2000
    min_per_description: int = 1
    workers: int = 1
    holdout_frac: float = 0.15
    pos_ratio: float = 0.1
    batch_size: int = 512
    format: str = "text"
    out: str = "out"
    # Environment constants are echoed for provenance; the world module owns
    # the authoritative values.
    t_steps: int = world.T_STEPS
    n_objects: int = world.N_OBJECTS
    growth_rate: float = world.GROWTH_RATE
    max_size: float = world.MAX_SIZE
    shake_window: int = oracle.SHAKE_WINDOW
    shake_min_reversals: int = oracle.SHAKE_MIN_REVERSALS
    shake_amplitude: float = oracle.SHAKE_AMPLITUDE

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "Config":
        cfg = cls()
        if getattr(args, "config", None):
            try:
                with open(args.config) as fh:
                    data = json.load(fh)
            except OSError as err:
                raise OSError(f"cannot read config: {err}") from err
            except json.JSONDecodeError as err:
                raise UsageError(f"bad config file: {err}") from err
            known = {f.name for f in dataclasses.fields(cls)}
            unknown = set(data) - known
            if unknown:
                raise UsageError(f"unknown config keys: {sorted(unknown)}")
            cfg = dataclasses.replace(cfg, **data)
        overrides = ("seed", "episodes", "min_per_description", "workers", "format", "out", "holdout_frac")
        for name in overrides:
            value = getattr(args, name, None)
            if value is not None:
                cfg = dataclasses.replace(cfg, **{name: value})
        return cfg

    def echo(self) -> dict:
        return dataclasses.asdict(self)

    def content_echo(self) -> dict:
        """Config echo embedded in generated artifacts: everything that shapes
        the content, nothing that does not (paths, worker count), so that one
        master seed yields one checksum."""
        out = dataclasses.asdict(self)
        for volatile in ("out", "workers"):
            out.pop(volatile)
        return out


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--seed", type=int, default=None, help="master seed")
    p.add_argument("--out", default=None, help="output directory")


def build_parser() -> _Parser:
    parser = _Parser(prog="playtrace", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a corpus with coverage report")
    _add_common(p)
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--min-per-description", dest="min_per_description", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--format", choices=("text", "binary"), default=None)

    p = sub.add_parser("describe", help="print every true sentence of a trace")
    _add_common(p)
    p.add_argument("--trace", help="corpus file to read the trace from")
    p.add_argument("--episode", type=int, default=0, help="episode id within --trace")

    p = sub.add_parser("eval", help="evaluate one sentence against a trace")
    _add_common(p)
    p.add_argument("--trace", help="corpus file to read the trace from")
    p.add_argument("--episode", type=int, default=0)
    p.add_argument("--sentence", required=True, help="space-separated tokens")

    p = sub.add_parser("split", help="write random + systematic split files")
    _add_common(p)
    p.add_argument("--holdout-frac", dest="holdout_frac", type=float, default=None)

    p = sub.add_parser("stats", help="summarize a corpus file")
    _add_common(p)
    p.add_argument("--corpus", required=True)

    p = sub.add_parser("enumerate", help="list sentences of a concept category")
    _add_common(p)
    p.add_argument(
        "--category",
        required=True,
        choices=grammar.CONCEPT_CATEGORIES + ("all",),
    )

    p = sub.add_parser("export-grammar", help="write vocabulary and grammar files")
    _add_common(p)
    return parser


def _trace_from_args(args, cfg: Config):
    if getattr(args, "trace", None):
        corpus = dataset.load(args.trace)
        for record in corpus.records:
            if record.episode_id == args.episode:
                return record.features
        raise UsageError(f"episode {args.episode} not in {args.trace}")
    rng = np.random.default_rng(cfg.seed)
    return bot.rollout(rng)


def cmd_generate(args) -> int:
    cfg = Config.from_args(args)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    corpus = dataset.generate_corpus(cfg.episodes, cfg.seed, workers=cfg.workers)
    checksum = dataset.serialize(corpus, out_dir / "corpus.jsonl", mode=cfg.format, config=cfg.content_echo())
    report = dataset.coverage_report(corpus, cfg.min_per_description)
    paths = reporting.write_coverage_report(report, out_dir)
    with open(out_dir / "config.json", "w") as fh:
        json.dump({"config": cfg.echo(), "corpus_sha256": checksum}, fh, indent=2, sort_keys=True)
    per_cat = report.per_category_counts()
    print(f"wrote {len(corpus)} episodes to {out_dir / 'corpus.jsonl'} (sha256 {checksum[:12]}...)")
    print(f"coverage report: {paths['csv']} / {paths['figure']}")
    for cat, (covered, total) in per_cat.items():
        print(f"  {cat:16s} {covered}/{total} descriptions with >= {cfg.min_per_description} positives")
    shortfalls = report.shortfalls()
    print(f"  {len(shortfalls)} of {len(grammar.all_sentences())} descriptions below target")
    return EXIT_OK


def cmd_describe(args) -> int:
    cfg = Config.from_args(args)
    feats = _trace_from_args(args, cfg)
    sentences = oracle.describe(feats)
    by_cat: dict[str, list[str]] = {c: [] for c in grammar.CONCEPT_CATEGORIES}
    for s in sentences:
        by_cat[grammar.categorize(s)].append(" ".join(grammar.render(s)))
    for cat in grammar.CONCEPT_CATEGORIES:
        print(f"[{cat}] ({len(by_cat[cat])})")
        for line in sorted(by_cat[cat]):
            print(f"  {line}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = Config.from_args(args)
    feats = _trace_from_args(args, cfg)
    try:
        sentence = grammar.parse(args.sentence.split())
    except grammar.GrammarError as err:
        print(f"unparseable sentence: {err}", file=sys.stderr)
        return EXIT_USAGE
    result = oracle.explain(feats, sentence)
    print(f"sentence: {args.sentence}")
    print(f"verdict: {result.verdict}")
    if result.verdict:
        print(f"witness object: {result.witness}")
        print(f"predicate holds at steps: {list(result.pred_steps)}")
        if result.loc_steps:
            print(f"localizer holds at steps: {list(result.loc_steps)}")
    return EXIT_OK


def cmd_split(args) -> int:
    cfg = Config.from_args(args)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(cfg.seed)
    splits = [dataset.random_split(cfg.holdout_frac, rng)] + dataset.systematic_splits()
    checksum = dataset.write_splits(splits, out_dir / "splits.jsonl", config=cfg.content_echo())
    combined = dataset.combined_systematic_train_ids(splits[1:])
    print(f"wrote {len(splits)} splits to {out_dir / 'splits.jsonl'} (sha256 {checksum[:12]}...)")
    for s in splits:
        print(f"  {s.name:16s} kind={s.kind:24s} held_out={len(s.held_out_ids)}")
    print(f"  combined systematic train set: {len(combined)} sentences")
    return EXIT_OK


def cmd_stats(args) -> int:
    cfg = Config.from_args(args)
    corpus = dataset.load(args.corpus)
    paths = reporting.write_stats_report(corpus, Path(cfg.out))
    print(f"stats written to {paths['csv']} / {paths['figure']}")
    with open(paths["csv"]) as fh:
        print(fh.read().rstrip())
    return EXIT_OK


def cmd_enumerate(args) -> int:
    cats = grammar.CONCEPT_CATEGORIES if args.category == "all" else (args.category,)
    for cat in cats:
        for s in grammar.enumerate_sentences(cat):
            print(" ".join(grammar.render(s)))
    return EXIT_OK


def cmd_export_grammar(args) -> int:
    cfg = Config.from_args(args)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    grammar.write_vocabulary(out_dir / "vocabulary.txt")
    with open(out_dir / "grammar_bnf.json", "w") as fh:
        json.dump(grammar.bnf_document(), fh, indent=2, sort_keys=True)
    print(f"wrote {out_dir / 'vocabulary.txt'} ({len(grammar.VOCABULARY)} tokens)")
    print(f"wrote {out_dir / 'grammar_bnf.json'}")
    return EXIT_OK


_COMMANDS = {
    "generate": cmd_generate,
    "describe": cmd_describe,
    "eval": cmd_eval,
    "split": cmd_split,
    "stats": cmd_stats,
    "enumerate": cmd_enumerate,
    "export-grammar": cmd_export_grammar,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return int(err.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (dataset.CorpusFormatError, OSError) as err:
        print(f"I/O error: {err}", file=sys.stderr)
        return EXIT_IO
    except (bot.RolloutBudgetError, bot.InfeasibleWorldError, world.PlacementError) as err:
        print(f"infeasible configuration: {err}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
