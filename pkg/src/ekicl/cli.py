"""Command-line interface.

Subcommands cover the full workflow: ingest transcripts into the embedded
JSONL format, train the assessor, summarize category distributions, score
and retrieve, predict with the learner ensemble, and run the evaluation
drivers (metrics, ablation, label sweep, baselines).

Global flags: --config (key=value file of defaults), --seed, --backend,
--out. Key=value settings lose to explicit flags and win over built-in
defaults. Exit codes: 0 success, 1 usage, 2 data error, 3 transport error.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import click

from .assessor import (
    TrainConfig,
    classification_accuracy,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .chat import load_corpus
from .embeddings import (
    EmbeddedTranscript,
    embed_transcripts,
    make_synthetic_corpus,
    read_ingest,
    write_ingest,
)
from .errors import DataError, TransportError
from .gateway import BACKENDS, GatewayConfig
from .pipeline import (
    Components,
    ModeFlags,
    category_stats,
    compute_metrics,
    predict as run_predict,
    prepare,
    read_predictions,
    run_ablation,
    run_baseline,
    run_label_sweep,
    training_standard,
    write_metrics_csv,
    write_predictions,
    write_stats_csv,
)
from .profiles import feature_score
from .prompts import DEFAULT_PAIR, LabelPair, label_sweep_pairs
from .retrieval import cosine, score_pool, top_k

_INT_KEYS = frozenset(
    {"seed", "dim", "epochs", "batch", "hidden", "k", "max_tokens",
     "max_retries", "max_in_flight", "retry_seed", "shots"}
)
_FLOAT_KEYS = frozenset(
    {"lr", "temp", "temperature", "threshold", "timeout_ms"}
)


def _load_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read config file: {exc}") from exc
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataError(f"{path}:{line_no}: expected key=value")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


@dataclass
class Settings:
    config: dict[str, str] = field(default_factory=dict)
    seed_flag: Optional[int] = None
    backend_flag: Optional[str] = None
    out_flag: Optional[str] = None

    def _cast(self, key: str, raw: str):
        try:
            if key in _INT_KEYS:
                return int(raw)
            if key in _FLOAT_KEYS:
                return float(raw)
        except ValueError as exc:
            raise DataError(f"config: invalid value for {key}: {raw!r}") from exc
        return raw

    def value(self, key: str, flag=None, default=None):
        if flag is not None:
            return flag
        if key in self.config:
            return self._cast(key, self.config[key])
        return default

    @property
    def seed(self) -> int:
        return self.value("seed", self.seed_flag, 0)

    @property
    def backend(self) -> str:
        return self.value("backend", self.backend_flag, "mock-echo")

    def resolve_out(self, flag: Optional[str]) -> str:
        out = flag or self.out_flag or self.config.get("out")
        if not out:
            raise click.UsageError("an output path is required (--out)")
        return out

    def gateway(self) -> GatewayConfig:
        return GatewayConfig(
            backend=self.backend,
            base_url=self.value("base_url", default=""),
            api_key_env_var=self.value("api_key_env_var", default=""),
            model_name=self.value("model_name", default=""),
            temperature=self.value("temperature", default=0.0),
            max_tokens=self.value("max_tokens", default=8),
            timeout_ms=self.value("timeout_ms", default=30_000.0),
            max_retries=self.value("max_retries", default=2),
            max_in_flight=self.value("max_in_flight", default=4),
            fixed_reply=self.value("fixed_reply", default="unknown"),
            retry_seed=self.value("retry_seed", default=self.seed),
        )

    def label_pair(self, ad_flag: Optional[str], hc_flag: Optional[str]) -> LabelPair:
        ad = self.value("ad_word", ad_flag, DEFAULT_PAIR.ad_word)
        hc = self.value("hc_word", hc_flag, DEFAULT_PAIR.hc_word)
        if (ad, hc) == (DEFAULT_PAIR.ad_word, DEFAULT_PAIR.hc_word):
            return DEFAULT_PAIR
        return LabelPair(ad_word=ad, hc_word=hc, config_class="Custom")


@click.group()
@click.option("--config", "config_path", default=None, help="key=value defaults file")
@click.option("--seed", type=int, default=None, help="master random seed")
@click.option("--backend", type=click.Choice(BACKENDS), default=None)
@click.option("--out", "out_path", default=None, help="default output path")
@click.pass_context
def cli(ctx, config_path, seed, backend, out_path):
    """Explicit-knowledge in-context learning for screening picture descriptions."""
    ctx.obj = Settings(
        config=_load_config_file(config_path) if config_path else {},
        seed_flag=seed,
        backend_flag=backend,
        out_flag=out_path,
    )


def _read_corpus(path: str) -> list[EmbeddedTranscript]:
    try:
        return read_ingest(path)
    except OSError as exc:
        raise DataError(f"cannot read corpus: {exc}") from exc


def _load_params(ckpt: Optional[str]):
    if ckpt is None:
        return None
    try:
        return load_checkpoint(ckpt)
    except OSError as exc:
        raise DataError(f"cannot read checkpoint: {exc}") from exc


def _export_corpus_json(records: Sequence[EmbeddedTranscript], path: str) -> None:
    doc = [
        {
            "transcript_id": r.transcript_id,
            "label": r.gold_label,
            "tokens": list(r.tokens),
        }
        for r in records
    ]
    Path(path).write_text(
        json.dumps(doc, ensure_ascii=False, indent=1) + "\n", encoding="utf-8"
    )


@cli.command()
@click.option("--cha-dir", default=None, help="directory of .cha transcripts")
@click.option("--manifest", default=None, help="id,label CSV for --cha-dir")
@click.option("--synthetic", type=int, default=None, help="generate N fixture transcripts")
@click.option("--dim", type=int, default=None, help="embedding dimension (default 16)")
@click.option("--export-corpus", default=None, help="also write tokens-only corpus JSON")
@click.option("--out", "out_path", default=None)
@click.pass_obj
def ingest(settings: Settings, cha_dir, manifest, synthetic, dim, export_corpus, out_path):
    """Produce the embedded-corpus JSONL from .cha files or the synthetic fixture."""
    out = settings.resolve_out(out_path)
    dim = settings.value("dim", dim, 16)
    if (cha_dir is None) == (synthetic is None):
        raise click.UsageError("exactly one of --cha-dir or --synthetic is required")
    if synthetic is not None:
        records = make_synthetic_corpus(
            n_transcripts=synthetic, dim=dim, seed=settings.seed
        )
    else:
        if manifest is None:
            raise click.UsageError("--manifest is required with --cha-dir")
        corpus = load_corpus(cha_dir, manifest)
        records = embed_transcripts(corpus, dim=dim, seed=settings.seed)
    write_ingest(records, out)
    if export_corpus:
        _export_corpus_json(records, export_corpus)
    click.echo(f"wrote {len(records)} transcripts to {out}")


@cli.command("train-slm")
@click.option("--data", required=True, help="training corpus JSONL")
@click.option("--epochs", type=int, default=None)
@click.option("--lr", type=float, default=None)
@click.option("--batch", type=int, default=None)
@click.option("--hidden", type=int, default=None)
@click.option("--temp", type=float, default=None)
@click.option("--trace", default=None, help="write epoch,loss CSV here")
@click.option("--out", "out_path", default=None)
@click.pass_obj
def train_slm(settings: Settings, data, epochs, lr, batch, hidden, temp, trace, out_path):
    """Train the assessor and save a JSON checkpoint."""
    out = settings.resolve_out(out_path)
    corpus = _read_corpus(data)
    config = TrainConfig(
        lr=settings.value("lr", lr, 1e-3),
        epochs=settings.value("epochs", epochs, 200),
        batch=settings.value("batch", batch, 16),
        temp=settings.value("temp", temp, 1.0),
        seed=settings.seed,
        hidden=settings.value("hidden", hidden, 64),
    )
    result = train(corpus, config)
    save_checkpoint(result.params, out)
    if trace:
        lines = ["epoch,loss"] + [
            f"{i},{loss:.6f}" for i, loss in enumerate(result.epoch_losses, start=1)
        ]
        Path(trace).write_text("\n".join(lines) + "\n", encoding="utf-8")
    accuracy = classification_accuracy(corpus, result.params)
    final = result.epoch_losses[-1] if result.epoch_losses else float("nan")
    click.echo(
        f"trained {config.epochs} epochs; final loss {final:.6f}; "
        f"train accuracy {accuracy:.2f}%; checkpoint at {out}"
    )


@cli.command()
@click.option("--data", required=True)
@click.option("--dataset-name", default="corpus")
@click.option("--out", "out_path", default=None)
@click.pass_obj
def stats(settings: Settings, data, dataset_name, out_path):
    """Mean parsing-category frequencies, overall and per class."""
    out = settings.resolve_out(out_path)
    corpus = _read_corpus(data)
    write_stats_csv(category_stats(corpus, dataset_name), out)
    click.echo(f"wrote category stats for {len(corpus)} transcripts to {out}")


@cli.command()
@click.option("--data", required=True)
@click.option("--ckpt", default=None, help="assessor checkpoint (for s_conf)")
@click.option("--ref-data", default=None, help="corpus defining the standard profile")
@click.option("--out", "out_path", default=None)
@click.pass_obj
def score(settings: Settings, data, ckpt, ref_data, out_path):
    """Per-transcript confidence and structural-typicality scores."""
    out = settings.resolve_out(out_path)
    params = _load_params(ckpt)
    prepared = prepare(_read_corpus(data), params)
    standard = None
    if ref_data:
        standard = training_standard(prepare(_read_corpus(ref_data), params))
    lines = ["transcript_id,s_conf,s_feat"]
    for item in prepared:
        conf = "-" if item.s_conf is None else f"{item.s_conf:.6f}"
        feat = (
            "-"
            if standard is None
            else f"{feature_score(item.profile, standard):.6f}"
        )
        lines.append(f"{item.transcript_id},{conf},{feat}")
    Path(out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    click.echo(f"scored {len(prepared)} transcripts to {out}")


@cli.command()
@click.option("--data", required=True, help="query corpus JSONL")
@click.option("--pool", required=True, help="demonstration pool JSONL")
@click.option("--ckpt", default=None)
@click.option("--k", type=int, default=None)
@click.option(
    "--strategy",
    type=click.Choice(["parsing", "semantic", "random"]),
    default="parsing",
)
@click.option("--out", "out_path", default=None)
@click.pass_obj
def retrieve(settings: Settings, data, pool, ckpt, k, strategy, out_path):
    """Top-k demonstration retrieval for every query."""
    out = settings.resolve_out(out_path)
    k = settings.value("k", k, 3)
    params = _load_params(ckpt)
    queries = prepare(_read_corpus(data), params)
    candidates = prepare(_read_corpus(pool), params)
    pool_cands = [p.candidate for p in candidates]
    lines = ["query_id,rank,demo_id,sim"]
    for query in sorted(queries, key=lambda q: q.transcript_id):
        ids = top_k(
            query.candidate, pool_cands, k, strategy=strategy, seed=settings.seed
        )
        sims: dict[str, float] = {}
        if strategy == "parsing":
            sims = {
                cand.transcript_id: breakdown.sim
                for cand, breakdown in score_pool(query.candidate, pool_cands)
            }
        elif strategy == "semantic":
            sims = {
                c.transcript_id: cosine(query.candidate.mean_embedding, c.mean_embedding)
                for c in pool_cands
            }
        for rank, demo_id in enumerate(ids, start=1):
            sim = f"{sims[demo_id]:.6f}" if demo_id in sims else "-"
            lines.append(f"{query.transcript_id},{rank},{demo_id},{sim}")
    Path(out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    click.echo(f"retrieved top-{k} for {len(queries)} queries to {out}")


def _components(
    settings: Settings,
    pool_prepared,
    ad_word: Optional[str],
    hc_word: Optional[str],
    k: Optional[int],
    threshold: Optional[float],
) -> Components:
    return Components(
        gateway=settings.gateway(),
        label_pair=settings.label_pair(ad_word, hc_word),
        standard=training_standard(pool_prepared),
        k=settings.value("k", k, 3),
        threshold=settings.value("threshold", threshold, 0.5),
        seed=settings.seed,
    )


def _prepare_split(settings: Settings, data, pool, ckpt, need_ckpt: bool):
    params = _load_params(ckpt)
    if need_ckpt and params is None:
        raise click.UsageError("--ckpt is required unless confidence is disabled")
    queries = prepare(_read_corpus(data), params)
    pool_prepared = prepare(_read_corpus(pool), params)
    return queries, pool_prepared


@cli.command("predict")
@click.option("--data", required=True, help="query corpus JSONL")
@click.option("--pool", required=True, help="labeled demonstration pool JSONL")
@click.option("--ckpt", default=None)
@click.option("--ad-word", default=None)
@click.option("--hc-word", default=None)
@click.option("--k", type=int, default=None)
@click.option("--threshold", type=float, default=None)
@click.option("--no-confidence", is_flag=True, help="drop the confidence hint")
@click.option("--no-feature", is_flag=True, help="drop the structural-score hint")
@click.option("--no-parsing", is_flag=True, help="random instead of parsing retrieval")
@click.option("--out", "out_path", default=None)
@click.pass_obj
def predict_cmd(
    settings: Settings, data, pool, ckpt, ad_word, hc_word, k, threshold,
    no_confidence, no_feature, no_parsing, out_path,
):
    """Ensemble predictions for a query split, one JSONL record per query."""
    out = settings.resolve_out(out_path)
    flags = ModeFlags(
        confidence=not no_confidence,
        feature=not no_feature,
        parsing_search=not no_parsing,
    )
    queries, pool_prepared = _prepare_split(
        settings, data, pool, ckpt, need_ckpt=flags.confidence
    )
    components = _components(settings, pool_prepared, ad_word, hc_word, k, threshold)
    records = run_predict(queries, pool_prepared, components, flags)
    write_predictions(records, out)
    click.echo(f"predicted {len(records)} queries to {out}")


@cli.command()
@click.option("--pred", required=True, help="predictions JSONL")
@click.option("--data", required=True, help="corpus JSONL with gold labels")
@click.option("--name", default="full", help="row label in the metrics CSV")
@click.option("--out", "out_path", default=None)
@click.pass_obj
def evaluate(settings: Settings, pred, data, name, out_path):
    """Score a predictions file against gold labels."""
    out = settings.resolve_out(out_path)
    records = read_predictions(pred)
    golds = {}
    for rec in _read_corpus(data):
        if rec.gold_label is not None:
            golds[rec.transcript_id] = rec.gold_label
    report = compute_metrics(records, golds)
    write_metrics_csv([(name, report)], out)
    click.echo(
        f"{name}: acc {report.accuracy:.2f} "
        f"(tp={report.tp} fp={report.fp} fn={report.fn} tn={report.tn}) -> {out}"
    )


@cli.command()
@click.option("--data", required=True)
@click.option("--pool", required=True)
@click.option("--ckpt", required=True)
@click.option("--ad-word", default=None)
@click.option("--hc-word", default=None)
@click.option("--k", type=int, default=None)
@click.option("--threshold", type=float, default=None)
@click.option("--pred-dir", default=None, help="also dump per-mode predictions here")
@click.option("--out", "out_path", default=None)
@click.pass_obj
def ablate(
    settings: Settings, data, pool, ckpt, ad_word, hc_word, k, threshold,
    pred_dir, out_path,
):
    """Metrics for the four hint/retrieval modes."""
    out = settings.resolve_out(out_path)
    queries, pool_prepared = _prepare_split(settings, data, pool, ckpt, need_ckpt=True)
    components = _components(settings, pool_prepared, ad_word, hc_word, k, threshold)
    rows = run_ablation(queries, pool_prepared, components)
    write_metrics_csv([(mode, report) for mode, _, report in rows], out)
    if pred_dir:
        directory = Path(pred_dir)
        directory.mkdir(parents=True, exist_ok=True)
        for mode, records, _ in rows:
            slug = mode.replace("w/o ", "wo-").replace(" ", "-")
            write_predictions(records, directory / f"{slug}.jsonl")
    click.echo(f"wrote {len(rows)} ablation rows to {out}")


@cli.command("sweep-labels")
@click.option("--data", required=True)
@click.option("--pool", required=True)
@click.option("--ckpt", required=True)
@click.option("--pairs", default=None, help="label-pair CSV (default: bundled 30)")
@click.option("--k", type=int, default=None)
@click.option("--threshold", type=float, default=None)
@click.option("--out", "out_path", default=None)
@click.pass_obj
def sweep_labels(settings: Settings, data, pool, ckpt, pairs, k, threshold, out_path):
    """Repeat prediction across every label-word pair and report metrics."""
    out = settings.resolve_out(out_path)
    pair_list = label_sweep_pairs(pairs)
    queries, pool_prepared = _prepare_split(settings, data, pool, ckpt, need_ckpt=True)
    components = _components(settings, pool_prepared, None, None, k, threshold)
    rows = run_label_sweep(queries, pool_prepared, components, pair_list)
    write_metrics_csv(rows, out)
    click.echo(f"swept {len(rows)} label pairs to {out}")


@cli.command()
@click.option("--data", required=True)
@click.option("--pool", required=True)
@click.option(
    "--method",
    type=click.Choice(["vanilla", "semantic", "logits", "ensemble"]),
    required=True,
)
@click.option("--shots", type=int, default=None)
@click.option("--ckpt", default=None, help="assessor checkpoint (required for logits)")
@click.option("--ad-word", default=None)
@click.option("--hc-word", default=None)
@click.option("--pred", "pred_path", default=None, help="also write predictions JSONL")
@click.option("--out", "out_path", default=None)
@click.pass_obj
def baseline(
    settings: Settings, data, pool, method, shots, ckpt, ad_word, hc_word,
    pred_path, out_path,
):
    """Reference ICL strategies for comparison."""
    out = settings.resolve_out(out_path)
    shots = settings.value("shots", shots, 1)
    if method == "logits" and ckpt is None:
        raise click.UsageError("--ckpt is required for the logits baseline")
    queries, pool_prepared = _prepare_split(settings, data, pool, ckpt, need_ckpt=False)
    components = _components(settings, pool_prepared, ad_word, hc_word, None, None)
    records, report = run_baseline(queries, pool_prepared, components, method, shots)
    name = f"{method} shot={shots}"
    write_metrics_csv([(name, report)], out)
    if pred_path:
        write_predictions(records, pred_path)
    click.echo(f"{name}: acc {report.accuracy:.2f} -> {out}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False, prog_name="ekicl")
        return 0
    except click.UsageError as exc:
        exc.show()
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except TransportError as exc:
        click.echo(f"transport error: {exc}", err=True)
        return 3
    except DataError as exc:
        click.echo(f"data error: {exc}", err=True)
        return 2
    except OSError as exc:
        click.echo(f"data error: {exc}", err=True)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
