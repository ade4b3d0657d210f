#!/usr/bin/env python3
"""Full benchmark pass on the synthetic fixture corpus.

Generates the corpus, trains the assessor on the demonstration pool,
then writes every report the pipeline produces: training trace, category
stats, full-mode predictions and metrics, the four-mode ablation, the
30-pair label sweep, and the reference baselines. Mock backends keep the
whole run offline and deterministic for a given seed.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from ekicl.assessor import TrainConfig, classification_accuracy, save_checkpoint, train
from ekicl.embeddings import make_synthetic_corpus, write_ingest
from ekicl.gateway import BACKENDS, GatewayConfig
from ekicl.pipeline import (
    Components,
    ModeFlags,
    category_stats,
    compute_metrics,
    gold_map,
    predict,
    prepare,
    run_ablation,
    run_baseline,
    run_label_sweep,
    training_standard,
    write_metrics_csv,
    write_predictions,
    write_stats_csv,
)
from ekicl.prompts import DEFAULT_PAIR, label_sweep_pairs


@click.command()
@click.option("--out-dir", default="results", show_default=True)
@click.option("--n-transcripts", type=int, default=200, show_default=True)
@click.option("--dim", type=int, default=16, show_default=True)
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--epochs", type=int, default=200, show_default=True)
@click.option(
    "--backend",
    type=click.Choice([b for b in BACKENDS if b != "http"]),
    default="mock-threshold",
    show_default=True,
    help="offline completion backend for every prediction stage",
)
def main(out_dir, n_transcripts, dim, seed, epochs, backend):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    corpus = make_synthetic_corpus(n_transcripts=n_transcripts, dim=dim, seed=seed)
    pool_split = corpus[: n_transcripts // 2]
    eval_split = corpus[n_transcripts // 2 : (3 * n_transcripts) // 4]
    write_ingest(pool_split, out / "pool.jsonl")
    write_ingest(eval_split, out / "eval.jsonl")
    click.echo(f"corpus: {len(pool_split)} pool / {len(eval_split)} eval transcripts")

    result = train(pool_split, TrainConfig(epochs=epochs, seed=seed))
    save_checkpoint(result.params, out / "checkpoint.json")
    trace = ["epoch,loss"] + [
        f"{i},{loss:.6f}" for i, loss in enumerate(result.epoch_losses, start=1)
    ]
    (out / "train_trace.csv").write_text("\n".join(trace) + "\n", encoding="utf-8")
    train_acc = classification_accuracy(pool_split, result.params)
    click.echo(f"assessor: {train_acc:.2f}% train accuracy after {epochs} epochs")

    write_stats_csv(category_stats(corpus, "synthetic"), out / "corpus_stats.csv")

    pool = prepare(pool_split, result.params)
    queries = prepare(eval_split, result.params)
    components = Components(
        gateway=GatewayConfig(backend=backend),
        label_pair=DEFAULT_PAIR,
        standard=training_standard(pool),
        seed=seed,
    )
    golds = gold_map(queries)

    records = predict(queries, pool, components, ModeFlags())
    write_predictions(records, out / "predictions_full.jsonl")
    report = compute_metrics(records, golds)
    write_metrics_csv([("full", report)], out / "metrics_full.csv")
    click.echo(f"full pipeline: acc {report.accuracy:.2f} f1 {_fmt(report.f1)}")

    rows = run_ablation(queries, pool, components)
    write_metrics_csv([(mode, rep) for mode, _, rep in rows], out / "ablation.csv")
    pred_dir = out / "predictions"
    pred_dir.mkdir(exist_ok=True)
    for mode, mode_records, rep in rows:
        slug = mode.replace("w/o ", "wo-").replace(" ", "-")
        write_predictions(mode_records, pred_dir / f"{slug}.jsonl")
        click.echo(f"ablation {mode}: acc {rep.accuracy:.2f}")

    sweep = run_label_sweep(queries, pool, components, label_sweep_pairs())
    write_metrics_csv(sweep, out / "label_sweep.csv")
    best = max(sweep, key=lambda row: row[1].accuracy)
    click.echo(f"label sweep: best {best[0]} at acc {best[1].accuracy:.2f}")

    baseline_rows = []
    for method in ("vanilla", "semantic", "logits", "ensemble"):
        _, rep = run_baseline(queries, pool, components, method, shots=1)
        baseline_rows.append((f"{method} shot=1", rep))
        click.echo(f"baseline {method}: acc {rep.accuracy:.2f}")
    write_metrics_csv(baseline_rows, out / "baselines.csv")

    click.echo(f"reports written to {out}/")


def _fmt(value) -> str:
    return "-" if value is None else f"{value:.2f}"


if __name__ == "__main__":
    main()
