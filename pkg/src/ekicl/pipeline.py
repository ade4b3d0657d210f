"""End-to-end prediction: ensemble of one-demo learners plus evaluation drivers.

Each query retrieves k=3 demonstrations, builds one prompt per learner
(single demo each, shared hint lines), collects completions through the
gateway, and aggregates votes by strict majority with a confidence-threshold
fallback for ties. On top of the per-query path sit the evaluation drivers:
metrics with AD as the positive class, the four-mode ablation, the
label-word sweep, and the reference baselines (random / semantic retrieval,
confidence-hint-only, plain ensemble).

Report artifacts are deterministic byte-for-byte under mock backends and
fixed seeds: records carry prompt hashes rather than wall-clock fields,
and every random draw is derived from explicit seeds.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .assessor import AssessorParams, forward
from .categories import CATEGORIES, Category, categorize, category_frequencies
from .embeddings import EmbeddedTranscript
from .errors import DataError, TransportError
from .gateway import Completion, GatewayConfig, complete_batch
from .profiles import (
    ContributionProfile,
    StandardProfile,
    contribution_weights,
    feature_score,
    rank_profile,
    standard_profile,
)
from .prompts import ABSTAIN, AD, HC, LabelPair, PromptSpec, build_prompt, parse_completion
from .retrieval import DemoCandidate, top_k

logger = logging.getLogger(__name__)

ABLATION_MODES = ("full", "w/o confidence", "w/o feature scores", "w/o parsing search")

_METRICS_HEADER = "mode_or_pair,acc,pre,rec,f1,tp,fp,fn,tn"


@dataclass(frozen=True)
class ModeFlags:
    confidence: bool = True
    feature: bool = True
    parsing_search: bool = True


def flags_for_mode(mode: str) -> ModeFlags:
    if mode == "full":
        return ModeFlags()
    if mode == "w/o confidence":
        return ModeFlags(confidence=False)
    if mode == "w/o feature scores":
        return ModeFlags(feature=False)
    if mode == "w/o parsing search":
        return ModeFlags(parsing_search=False)
    raise DataError(f"unknown ablation mode {mode!r}")


@dataclass(frozen=True)
class PreparedTranscript:
    """A transcript with everything the learners need precomputed."""

    candidate: DemoCandidate
    text: str
    s_conf: Optional[float]

    @property
    def transcript_id(self) -> str:
        return self.candidate.transcript_id

    @property
    def gold_label(self) -> Optional[str]:
        return self.candidate.gold_label

    @property
    def profile(self) -> ContributionProfile:
        return self.candidate.profile


@dataclass(frozen=True)
class LearnerRecord:
    demo_ids: tuple[str, ...]
    prompt_bytes_hash: str
    completion: str
    vote: str  # AD | HC | Abstain


@dataclass(frozen=True)
class PredictionRecord:
    query_id: str
    learners: tuple[LearnerRecord, ...]
    final_label: str
    used_fallback: bool
    s_conf: Optional[float]
    s_feat: Optional[float]
    config_fingerprint: str


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: Optional[float]
    recall: Optional[float]
    f1: Optional[float]
    tp: int
    fp: int
    fn: int
    tn: int


@dataclass(frozen=True)
class Components:
    """Immutable bundle shared by every per-query prediction."""

    gateway: GatewayConfig
    label_pair: LabelPair
    standard: Optional[StandardProfile] = None
    k: int = 3
    threshold: float = 0.5
    seed: int = 0
    template_id: str = "ekicl-v1"


def prepare(
    corpus: Sequence[EmbeddedTranscript], params: Optional[AssessorParams]
) -> list[PreparedTranscript]:
    """Categorize, weight, and score every transcript once, up front.

    Without assessor parameters, contribution weights degrade to plain
    category counts (every token weighted 1) and confidence is absent.
    """
    prepared = []
    for rec in corpus:
        cats = categorize(list(rec.tokens), rec.pos_tags)
        if params is not None:
            out = forward(rec, params, mode="eval-clean")
            p = out.p
            s_conf: Optional[float] = out.s_conf
        else:
            p = np.ones(len(rec.tokens))
            s_conf = None
        profile = rank_profile(contribution_weights(cats, p))
        prepared.append(
            PreparedTranscript(
                candidate=DemoCandidate(
                    transcript_id=rec.transcript_id,
                    profile=profile,
                    mean_embedding=rec.mean_vector(),
                    gold_label=rec.gold_label,
                ),
                text=" ".join(rec.tokens),
                s_conf=s_conf,
            )
        )
    return prepared


def training_standard(pool: Sequence[PreparedTranscript]) -> StandardProfile:
    """Standard profile over the training pool only (no evaluation leakage)."""
    return standard_profile([p.profile for p in pool])


def majority_vote(
    votes: Sequence[str], s_conf: float, threshold: float = 0.5
) -> tuple[str, bool]:
    """Strict majority among non-abstaining votes; ties go to the confidence rule."""
    ad = sum(1 for v in votes if v == AD)
    hc = sum(1 for v in votes if v == HC)
    if ad > hc:
        return AD, False
    if hc > ad:
        return HC, False
    return (AD if s_conf >= threshold else HC), True


def _derived_seed(seed: int, query_id: str) -> int:
    digest = hashlib.sha256(f"{seed}:{query_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def _fingerprint(components: Components, flags: ModeFlags) -> str:
    doc = {
        "backend": components.gateway.backend,
        "model": components.gateway.model_name,
        "temperature": components.gateway.temperature,
        "max_tokens": components.gateway.max_tokens,
        "fixed_reply": components.gateway.fixed_reply,
        "ad_word": components.label_pair.ad_word,
        "hc_word": components.label_pair.hc_word,
        "confidence": flags.confidence,
        "feature": flags.feature,
        "parsing_search": flags.parsing_search,
        "k": components.k,
        "threshold": components.threshold,
        "seed": components.seed,
        "template": components.template_id,
    }
    raw = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(raw).hexdigest()[:16]


def _clamp_unit(value: float) -> float:
    return min(max(value, 1e-9), 1.0 - 1e-9)


def _hints(
    query: PreparedTranscript,
    demo: Optional[PreparedTranscript],
    components: Components,
    flags: ModeFlags,
) -> tuple[Optional[float], Optional[tuple[float, tuple[float, ...]]]]:
    conf_hint = None
    if flags.confidence and query.s_conf is not None:
        conf_hint = _clamp_unit(query.s_conf)
    feat_hint = None
    if flags.feature and components.standard is not None:
        query_feat = feature_score(query.profile, components.standard)
        demo_feats: tuple[float, ...] = ()
        if demo is not None:
            demo_feats = (feature_score(demo.profile, components.standard),)
        feat_hint = (query_feat, demo_feats)
    return conf_hint, feat_hint


def _demo_entry(
    demo: PreparedTranscript, pair: LabelPair
) -> tuple[str, str]:
    if demo.gold_label is None:
        raise DataError(f"{demo.transcript_id}: demonstration lacks a gold label")
    return demo.text, pair.word_for(demo.gold_label)


def _fallback_confidence(query: PreparedTranscript, flags: ModeFlags) -> float:
    """Arbiter for tied votes: the assessor's confidence, or 0 when disabled."""
    if flags.confidence and query.s_conf is not None:
        return query.s_conf
    return 0.0


def _dispatch(
    specs: Sequence[tuple[PromptSpec, tuple[str, ...]]],
    components: Components,
    query_id: str,
) -> tuple[list[LearnerRecord], list[str]]:
    """Render, send, and parse one prompt per (spec, demo ids) learner entry."""
    prompts = [build_prompt(spec) for spec, _ in specs]
    results = complete_batch(
        [(prompt, spec) for prompt, (spec, _) in zip(prompts, specs)],
        components.gateway,
    )
    if results and all(isinstance(r, TransportError) for r in results):
        # Partial failures degrade to abstentions below, but a query whose
        # every learner failed means the backend is down, not undecided.
        raise TransportError(
            f"{query_id}: all {len(results)} learner requests failed: {results[0]}"
        )
    learners: list[LearnerRecord] = []
    votes: list[str] = []
    for i, ((spec, demo_ids), prompt, result) in enumerate(
        zip(specs, prompts, results)
    ):
        if isinstance(result, TransportError):
            logger.warning("%s: learner %d transport failure: %s", query_id, i, result)
            completion_text, vote = "", ABSTAIN
        else:
            completion_text = result.text
            vote = parse_completion(result.text, spec.label_pair)
        learners.append(
            LearnerRecord(
                demo_ids=demo_ids,
                prompt_bytes_hash=hashlib.sha256(prompt.encode("utf-8")).hexdigest(),
                completion=completion_text,
                vote=vote,
            )
        )
        votes.append(vote)
    return learners, votes


def predict_one(
    query: PreparedTranscript,
    pool: Sequence[PreparedTranscript],
    components: Components,
    flags: ModeFlags = ModeFlags(),
) -> PredictionRecord:
    """Ensemble prediction for one query: k one-demo learners, majority vote."""
    if not pool:
        raise DataError("empty demonstration pool")
    strategy = "parsing" if flags.parsing_search else "random"
    demo_ids = top_k(
        query.candidate,
        [p.candidate for p in pool],
        components.k,
        strategy=strategy,
        seed=_derived_seed(components.seed, query.transcript_id),
    )
    by_id = {p.transcript_id: p for p in pool}
    specs = []
    for demo_id in demo_ids:
        demo = by_id[demo_id]
        conf_hint, feat_hint = _hints(query, demo, components, flags)
        spec = PromptSpec(
            demos=(_demo_entry(demo, components.label_pair),),
            query_text=query.text,
            label_pair=components.label_pair,
            conf_hint=conf_hint,
            feat_hint=feat_hint,
            template_id=components.template_id,
        )
        specs.append((spec, (demo_id,)))
    learners, votes = _dispatch(specs, components, query.transcript_id)
    final, used_fallback = majority_vote(
        votes, _fallback_confidence(query, flags), components.threshold
    )
    s_feat = (
        feature_score(query.profile, components.standard)
        if components.standard is not None
        else None
    )
    return PredictionRecord(
        query_id=query.transcript_id,
        learners=tuple(learners),
        final_label=final,
        used_fallback=used_fallback,
        s_conf=query.s_conf,
        s_feat=s_feat,
        config_fingerprint=_fingerprint(components, flags),
    )


def predict(
    queries: Sequence[PreparedTranscript],
    pool: Sequence[PreparedTranscript],
    components: Components,
    flags: ModeFlags = ModeFlags(),
) -> list[PredictionRecord]:
    """Predictions for a whole split, in deterministic query-id order."""
    ordered = sorted(queries, key=lambda q: q.transcript_id)
    return [predict_one(q, pool, components, flags) for q in ordered]


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def compute_metrics(
    records: Sequence[PredictionRecord], golds: Mapping[str, str]
) -> MetricsReport:
    """Binary metrics as percentages, AD positive; undefined ratios are absent."""
    if not records:
        raise DataError("no prediction records to score")
    tp = fp = fn = tn = 0
    for rec in records:
        gold = golds.get(rec.query_id)
        if gold is None:
            raise DataError(f"{rec.query_id}: missing gold label")
        if gold not in (AD, HC):
            raise DataError(f"{rec.query_id}: invalid gold label {gold!r}")
        if rec.final_label == AD:
            tp += gold == AD
            fp += gold == HC
        else:
            fn += gold == AD
            tn += gold == HC
    total = tp + fp + fn + tn
    accuracy = 100.0 * (tp + tn) / total
    precision = 100.0 * tp / (tp + fp) if tp + fp else None
    recall = 100.0 * tp / (tp + fn) if tp + fn else None
    f1 = None
    if precision is not None and recall is not None and precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)
    return MetricsReport(
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        f1=f1,
        tp=tp,
        fp=fp,
        fn=fn,
        tn=tn,
    )


def gold_map(queries: Sequence[PreparedTranscript]) -> dict[str, str]:
    golds = {}
    for q in queries:
        if q.gold_label is None:
            raise DataError(f"{q.transcript_id}: evaluation requires a gold label")
        golds[q.transcript_id] = q.gold_label
    return golds


# ---------------------------------------------------------------------------
# Drivers: ablation, label sweep, baselines
# ---------------------------------------------------------------------------


def run_ablation(
    queries: Sequence[PreparedTranscript],
    pool: Sequence[PreparedTranscript],
    components: Components,
) -> list[tuple[str, list[PredictionRecord], MetricsReport]]:
    golds = gold_map(queries)
    out = []
    for mode in ABLATION_MODES:
        records = predict(queries, pool, components, flags_for_mode(mode))
        out.append((mode, records, compute_metrics(records, golds)))
    return out


def run_label_sweep(
    queries: Sequence[PreparedTranscript],
    pool: Sequence[PreparedTranscript],
    components: Components,
    pairs: Sequence[LabelPair],
) -> list[tuple[str, MetricsReport]]:
    if not pairs:
        raise DataError("empty label-pair list")
    golds = gold_map(queries)
    rows = []
    for pair in pairs:
        tagged = f"{pair.config_class}:{pair.ad_word}/{pair.hc_word}"
        records = predict(queries, pool, replace(components, label_pair=pair))
        rows.append((tagged, compute_metrics(records, golds)))
    return rows


BASELINES = ("vanilla", "semantic", "logits", "ensemble")


def _baseline_spec(
    query: PreparedTranscript,
    demos: Sequence[PreparedTranscript],
    components: Components,
    with_conf: bool,
) -> tuple[PromptSpec, tuple[str, ...]]:
    conf_hint = None
    if with_conf and query.s_conf is not None:
        conf_hint = _clamp_unit(query.s_conf)
    spec = PromptSpec(
        demos=tuple(_demo_entry(d, components.label_pair) for d in demos),
        query_text=query.text,
        label_pair=components.label_pair,
        conf_hint=conf_hint,
        feat_hint=None,
        template_id=components.template_id,
    )
    return spec, tuple(d.transcript_id for d in demos)


def run_baseline(
    queries: Sequence[PreparedTranscript],
    pool: Sequence[PreparedTranscript],
    components: Components,
    baseline: str,
    shots: int = 1,
) -> tuple[list[PredictionRecord], MetricsReport]:
    """Reference strategies: vanilla / semantic retrieval, logits hint, ensemble.

    vanilla, semantic, and logits use a single learner with ``shots`` demos
    (random, cosine-similar, and random-plus-confidence-hint respectively);
    ensemble uses three learners with ``shots`` random demos each and no hints.
    """
    if baseline not in BASELINES:
        raise DataError(f"unknown baseline {baseline!r}")
    if shots < 0:
        raise DataError("shots must be non-negative")
    if not pool:
        raise DataError("empty demonstration pool")
    golds = gold_map(queries)
    by_id = {p.transcript_id: p for p in pool}
    n_learners = 3 if baseline == "ensemble" else 1
    want = n_learners * shots
    flags = ModeFlags(
        confidence=baseline == "logits", feature=False, parsing_search=False
    )

    records = []
    for query in sorted(queries, key=lambda q: q.transcript_id):
        if want:
            strategy = "semantic" if baseline == "semantic" else "random"
            ids = top_k(
                query.candidate,
                [p.candidate for p in pool],
                want,
                strategy=strategy,
                seed=_derived_seed(components.seed, query.transcript_id),
            )
            demos = [by_id[i] for i in ids]
        else:
            demos = []
        specs = [
            _baseline_spec(
                query,
                demos[i * shots : (i + 1) * shots],
                components,
                with_conf=baseline == "logits",
            )
            for i in range(n_learners)
        ]
        learners, votes = _dispatch(specs, components, query.transcript_id)
        final, used_fallback = majority_vote(
            votes, _fallback_confidence(query, flags), components.threshold
        )
        records.append(
            PredictionRecord(
                query_id=query.transcript_id,
                learners=tuple(learners),
                final_label=final,
                used_fallback=used_fallback,
                s_conf=query.s_conf,
                s_feat=None,
                config_fingerprint=_fingerprint(components, flags),
            )
        )
    return records, compute_metrics(records, golds)


# ---------------------------------------------------------------------------
# Report emission
# ---------------------------------------------------------------------------


def record_to_json(record: PredictionRecord) -> str:
    doc = {
        "query_id": record.query_id,
        "learners": [
            {
                "demo_ids": list(l.demo_ids),
                "prompt_bytes_hash": l.prompt_bytes_hash,
                "completion": l.completion,
                "vote": l.vote,
            }
            for l in record.learners
        ],
        "final_label": record.final_label,
        "used_fallback": record.used_fallback,
        "s_conf": record.s_conf,
        "s_feat": record.s_feat,
        "config_fingerprint": record.config_fingerprint,
    }
    return json.dumps(doc, separators=(",", ":"))


def write_predictions(records: Iterable[PredictionRecord], path: str | Path) -> None:
    lines = [record_to_json(r) for r in records]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def read_predictions(path: str | Path) -> list[PredictionRecord]:
    records = []
    text = Path(path).read_text(encoding="utf-8")
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
            records.append(
                PredictionRecord(
                    query_id=doc["query_id"],
                    learners=tuple(
                        LearnerRecord(
                            demo_ids=tuple(l["demo_ids"]),
                            prompt_bytes_hash=l["prompt_bytes_hash"],
                            completion=l["completion"],
                            vote=l["vote"],
                        )
                        for l in doc["learners"]
                    ),
                    final_label=doc["final_label"],
                    used_fallback=doc["used_fallback"],
                    s_conf=doc["s_conf"],
                    s_feat=doc["s_feat"],
                    config_fingerprint=doc["config_fingerprint"],
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DataError(f"{path}:{line_no}: invalid prediction record: {exc}") from exc
    return records


def _fmt(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.2f}"


def write_metrics_csv(
    rows: Sequence[tuple[str, MetricsReport]], path: str | Path
) -> None:
    out = [_METRICS_HEADER]
    for name, rep in rows:
        out.append(
            ",".join(
                [
                    name,
                    _fmt(rep.accuracy),
                    _fmt(rep.precision),
                    _fmt(rep.recall),
                    _fmt(rep.f1),
                    str(rep.tp),
                    str(rep.fp),
                    str(rep.fn),
                    str(rep.tn),
                ]
            )
        )
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Corpus statistics (category distribution CSV)
# ---------------------------------------------------------------------------


def category_stats(
    corpus: Sequence[EmbeddedTranscript], dataset_name: str
) -> list[tuple[str, str, float]]:
    """Mean per-transcript category counts, overall and per class."""
    if not corpus:
        raise DataError("no transcripts to summarize")
    groups: list[tuple[str, list[EmbeddedTranscript]]] = [(dataset_name, list(corpus))]
    for label in (AD, HC):
        members = [r for r in corpus if r.gold_label == label]
        if members:
            groups.append((f"{dataset_name}/{label}", members))
    rows = []
    for name, members in groups:
        counts = np.array(
            [
                category_frequencies(categorize(list(r.tokens), r.pos_tags))
                for r in members
            ],
            dtype=np.float64,
        )
        means = counts.mean(axis=0)
        for cat, mean in zip(CATEGORIES, means):
            rows.append((name, str(cat), float(mean)))
    return rows


def write_stats_csv(rows: Sequence[tuple[str, str, float]], path: str | Path) -> None:
    out = ["dataset,category,mean_frequency"]
    for dataset, category, mean in rows:
        out.append(f"{dataset},{category},{mean:.4f}")
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")
