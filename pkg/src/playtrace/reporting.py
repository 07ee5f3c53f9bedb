"""Report rendering: delimited tables plus matplotlib figures.

Every report path writes a CSV (the machine-readable artifact) and a PNG
figure next to it.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from . import grammar
from .dataset import Corpus, CoverageReport


def write_coverage_report(report: CoverageReport, out_dir: Path) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "coverage.csv"
    fig_path = out_dir / "coverage.png"

    sentences = grammar.all_sentences()
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sentence_id", "category", "sentence", "positives", "shortfall"])
        for i, s in enumerate(sentences):
            count = int(report.counts[i])
            writer.writerow(
                [
                    i,
                    report.category_of[i],
                    " ".join(grammar.render(s)),
                    count,
                    int(count < report.min_per_description),
                ]
            )

    fig, axes = plt.subplots(1, 2, figsize=(11, 4))
    cats = list(grammar.CONCEPT_CATEGORIES)
    fractions = [report.covered_fraction([c], at_least=report.min_per_description) for c in cats]
    axes[0].bar(cats, fractions, color="tab:blue")
    axes[0].set_ylim(0, 1.05)
    axes[0].set_ylabel(f"fraction with >= {report.min_per_description} positives")
    axes[0].set_title("description coverage by category")
    axes[0].tick_params(axis="x", rotation=20)

    counts = report.counts
    axes[1].hist(counts, bins=min(50, int(counts.max()) + 1 or 1), color="tab:orange")
    axes[1].set_xlabel("positive traces per description")
    axes[1].set_ylabel("descriptions")
    axes[1].set_title("positives histogram")
    fig.tight_layout()
    fig.savefig(fig_path, dpi=120)
    plt.close(fig)
    return {"csv": csv_path, "figure": fig_path}


def write_stats_report(corpus: Corpus, out_dir: Path) -> dict[str, Path]:
    """Per-category positive-pair counts, label balance, and the histogram of
    true sentences per episode."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "stats.csv"
    fig_path = out_dir / "stats.png"

    ids_by_tokens = {grammar.token_ids(s): i for s, i in grammar.sentence_ids().items()}
    cats = [grammar.categorize(s) for s in grammar.all_sentences()]
    per_cat = {c: 0 for c in grammar.CONCEPT_CATEGORIES}
    per_episode = []
    for record in corpus.records:
        per_episode.append(len(record.true_sentences))
        for toks in record.true_sentences:
            per_cat[cats[ids_by_tokens[toks]]] += 1

    n_pairs = len(corpus.records) * len(grammar.all_sentences())
    n_true = int(sum(per_episode))
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        writer.writerow(["episodes", len(corpus.records)])
        writer.writerow(["trace_length", corpus.t_steps])
        writer.writerow(["true_pairs", n_true])
        writer.writerow(["pair_universe", n_pairs])
        writer.writerow(["label_balance", n_true / n_pairs if n_pairs else 0.0])
        for c in grammar.CONCEPT_CATEGORIES:
            writer.writerow([f"true_pairs_{c}", per_cat[c]])
        writer.writerow(["mean_true_per_episode", float(np.mean(per_episode)) if per_episode else 0.0])

    fig, axes = plt.subplots(1, 2, figsize=(11, 4))
    axes[0].bar(list(per_cat), [per_cat[c] for c in per_cat], color="tab:green")
    axes[0].set_ylabel("true (episode, sentence) pairs")
    axes[0].set_title("positives by category")
    axes[0].tick_params(axis="x", rotation=20)
    axes[1].hist(per_episode, bins=30, color="tab:purple")
    axes[1].set_xlabel("true sentences per episode")
    axes[1].set_ylabel("episodes")
    axes[1].set_title("description density")
    fig.tight_layout()
    fig.savefig(fig_path, dpi=120)
    plt.close(fig)
    return {"csv": csv_path, "figure": fig_path}
