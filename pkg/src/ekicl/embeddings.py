"""Per-token embedding storage: ingest JSONL, synthetic vectors, corpus join.

The ingest format is one JSON object per line::

    {"transcript_id": str, "label": "AD"|"HC"|null, "tokens": [str],
     "pos_tags": [str]|null, "vectors": [[float x D]]}

Vectors are float64 on load; the embedding dimension must be uniform
across a file. ``synth_embed`` supplies deterministic stand-in vectors
(SHA-256 of seed and token bytes keys a PCG64 stream; components are
uniform in [-1, 1]) so the whole pipeline runs without a real encoder.
"""

from __future__ import annotations

import hashlib
import json
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .chat import VALID_LABELS, Transcript
from .errors import DataError

logger = logging.getLogger(__name__)


class IngestError(DataError):
    """An ingest JSONL record failed schema validation."""


@dataclass(frozen=True)
class EmbeddedTranscript:
    transcript_id: str
    gold_label: Optional[str]
    tokens: tuple[str, ...]
    vectors: np.ndarray  # (n, D) float64, one row per token
    pos_tags: Optional[tuple[str, ...]] = None

    def __post_init__(self) -> None:
        vectors = np.asarray(self.vectors, dtype=np.float64)
        object.__setattr__(self, "vectors", vectors)
        if vectors.ndim != 2:
            raise IngestError(f"{self.transcript_id}: vectors must be 2-D")
        if vectors.shape[0] != len(self.tokens):
            raise IngestError(
                f"{self.transcript_id}: {len(self.tokens)} tokens but "
                f"{vectors.shape[0]} vector rows"
            )
        if self.pos_tags is not None and len(self.pos_tags) != len(self.tokens):
            raise IngestError(
                f"{self.transcript_id}: pos_tags length != token count"
            )
        if not np.all(np.isfinite(vectors)):
            raise IngestError(f"{self.transcript_id}: non-finite vector component")

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def mean_vector(self) -> np.ndarray:
        return self.vectors.mean(axis=0)


def _reject_constant(name: str) -> float:
    raise IngestError(f"non-finite number {name!r} in ingest file")


def _parse_record(line: str, line_no: int, path: str) -> EmbeddedTranscript:
    try:
        obj = json.loads(line, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise IngestError(f"{path}: line {line_no}: invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise IngestError(f"{path}: line {line_no}: record must be an object")
    try:
        tid = obj["transcript_id"]
        tokens = obj["tokens"]
        vectors = obj["vectors"]
    except KeyError as exc:
        raise IngestError(f"{path}: line {line_no}: missing field {exc}") from exc
    label = obj.get("label")
    if label is not None and label not in VALID_LABELS:
        raise IngestError(f"{tid}: label {label!r} not in {VALID_LABELS}")
    if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
        raise IngestError(f"{tid}: tokens must be a list of strings")
    if not isinstance(vectors, list):
        raise IngestError(f"{tid}: vectors must be a list of rows")
    widths = {len(row) for row in vectors if isinstance(row, list)}
    if len(vectors) != len(tokens):
        raise IngestError(
            f"{tid}: {len(tokens)} tokens but {len(vectors)} vector rows"
        )
    if len(widths) > 1:
        raise IngestError(f"{tid}: ragged vector rows {sorted(widths)}")
    pos_tags = obj.get("pos_tags")
    if pos_tags is not None:
        if not isinstance(pos_tags, list) or not all(
            isinstance(t, str) for t in pos_tags
        ):
            raise IngestError(f"{tid}: pos_tags must be a list of strings or null")
        pos_tags = tuple(pos_tags)
    array = np.asarray(vectors, dtype=np.float64)
    if array.size and array.ndim != 2:
        raise IngestError(f"{tid}: vectors must be a rectangular matrix")
    if array.size == 0:
        array = array.reshape(0, 0)
    return EmbeddedTranscript(
        transcript_id=tid,
        gold_label=label,
        tokens=tuple(tokens),
        vectors=array,
        pos_tags=pos_tags,
    )


def read_ingest(path: str | Path) -> list[EmbeddedTranscript]:
    """Load and validate an ingest JSONL file; dimension must be uniform."""
    records: list[EmbeddedTranscript] = []
    dim: Optional[int] = None
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            rec = _parse_record(line, line_no, str(path))
            if rec.tokens:
                if dim is None:
                    dim = rec.dim
                elif rec.dim != dim:
                    raise IngestError(
                        f"{rec.transcript_id}: inconsistent dimension "
                        f"{rec.dim} != {dim}"
                    )
            records.append(rec)
    return records


def write_ingest(records: Iterable[EmbeddedTranscript], path: str | Path) -> None:
    """Write records to ingest JSONL; floats use shortest round-trip form."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            obj = {
                "transcript_id": rec.transcript_id,
                "label": rec.gold_label,
                "tokens": list(rec.tokens),
                "pos_tags": list(rec.pos_tags) if rec.pos_tags is not None else None,
                "vectors": [[float(x) for x in row] for row in rec.vectors],
            }
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def synth_embed(token: str, dim: int, seed: int) -> np.ndarray:
    """Deterministic synthetic embedding for one token.

    SHA-256 over the little-endian 64-bit seed followed by the token's
    UTF-8 bytes keys a PCG64 generator; the vector is ``dim`` uniform
    draws from [-1, 1].
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    digest = hashlib.sha256(
        struct.pack("<q", seed) + token.encode("utf-8")
    ).digest()
    rng = np.random.Generator(np.random.PCG64(int.from_bytes(digest[:16], "little")))
    return rng.uniform(-1.0, 1.0, size=dim)


def attach(
    corpus: Sequence[Transcript], records: Sequence[EmbeddedTranscript]
) -> list[EmbeddedTranscript]:
    """Join embedded records to corpus transcripts 1:1 by id.

    Token sequences must match exactly; gold labels from the corpus are
    carried onto the joined records when present.
    """
    by_id = {tr.id: tr for tr in corpus}
    seen = set()
    joined: list[EmbeddedTranscript] = []
    for rec in records:
        tr = by_id.get(rec.transcript_id)
        if tr is None:
            raise DataError(f"unknown transcript {rec.transcript_id!r}")
        seen.add(rec.transcript_id)
        if tr.tokens != rec.tokens:
            divergence = next(
                (
                    i
                    for i, (a, b) in enumerate(zip(tr.tokens, rec.tokens))
                    if a != b
                ),
                min(len(tr.tokens), len(rec.tokens)),
            )
            raise DataError(
                f"{rec.transcript_id}: token mismatch at {divergence}"
            )
        label = tr.gold_label if tr.gold_label is not None else rec.gold_label
        joined.append(
            EmbeddedTranscript(
                transcript_id=rec.transcript_id,
                gold_label=label,
                tokens=rec.tokens,
                vectors=rec.vectors,
                pos_tags=rec.pos_tags,
            )
        )
    missing = sorted(set(by_id) - seen)
    if missing:
        raise DataError(f"no embeddings for transcript {missing[0]!r}")
    return joined


def embed_transcripts(
    corpus: Sequence[Transcript], dim: int, seed: int
) -> list[EmbeddedTranscript]:
    """Give every corpus transcript synthetic per-token vectors."""
    out = []
    for tr in corpus:
        vectors = (
            np.stack([synth_embed(tok, dim, seed) for tok in tr.tokens])
            if tr.tokens
            else np.zeros((0, 0))
        )
        out.append(
            EmbeddedTranscript(
                transcript_id=tr.id,
                gold_label=tr.gold_label,
                tokens=tr.tokens,
                vectors=vectors,
            )
        )
    return out


# ---------------------------------------------------------------------------
# Synthetic fixture corpus
# ---------------------------------------------------------------------------

# Candidate vocabularies for two speaking styles: disfluent, pronoun-heavy
# hedging versus dense scene description. The generator curates a subset of
# each per (dim, seed) so the fixture stays separable whatever embeddings
# the seed produces.
_CANDIDATES_DISFLUENT = (
    "um", "uh", "er", "ah", "eh", "hm", "hmm", "mhm", "oh", "well", "like",
    "okay", "yeah",
    "he", "she", "it", "they", "them", "this", "that", "these", "those",
    "something", "anything", "thing", "things", "stuff", "place", "whatever",
    "someone", "somebody",
    "is", "was", "are", "were", "goes", "gets", "got", "know", "see",
    "guess", "mean", "say", "says",
    "sort", "kind", "really", "maybe", "just",
)
_CANDIDATES_SCENE = (
    "boy", "girl", "mother", "woman", "child", "children", "cookie",
    "cookies", "jar", "lid", "stool", "counter", "kitchen", "cupboard",
    "sink", "water", "dishes", "dish", "plate", "cup", "window", "curtains",
    "curtain", "floor", "garden", "yard", "apron", "towel",
    "taking", "reaching", "falling", "washing", "drying", "spilling",
    "overflowing", "standing", "climbing", "wobbling", "running", "holding",
    "on", "in", "under", "by", "near", "the", "a", "and",
)


def _select_pools(
    dim: int, seed: int, pool_size: int = 24
) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Curate one pool per style whose embedding means are far apart.

    Projections onto the candidate-mean difference direction pick the
    most style-extreme tokens, planting a location shift between the two
    pools that survives pooling and convex token mixing.
    """
    emb_d = np.stack([synth_embed(t, dim, seed) for t in _CANDIDATES_DISFLUENT])
    emb_s = np.stack([synth_embed(t, dim, seed) for t in _CANDIDATES_SCENE])
    direction = emb_d.mean(axis=0) - emb_s.mean(axis=0)
    direction /= np.linalg.norm(direction)
    top_d = sorted(np.argsort(emb_d @ direction)[::-1][:pool_size])
    top_s = sorted(np.argsort(emb_s @ direction)[:pool_size])
    return (
        tuple(_CANDIDATES_DISFLUENT[i] for i in top_d),
        tuple(_CANDIDATES_SCENE[i] for i in top_s),
    )


def make_synthetic_corpus(
    n_transcripts: int = 200,
    dim: int = 16,
    seed: int = 7,
    min_len: int = 18,
    max_len: int = 40,
    mix: float = 1.0,
) -> list[EmbeddedTranscript]:
    """Build the planted-rule fixture corpus.

    Transcripts alternate between two speaking styles and sample their
    tokens from the style's curated pool (``mix`` is the probability of
    staying in-pool; lowering it adds cross-style contamination). The
    gold label is the generating style — disfluent speech is labeled AD —
    so the classes are separable by construction: the curated pools
    differ strongly in embedding-space location, which both mean and
    max pooling preserve.
    """
    pool_disfluent, pool_scene = _select_pools(dim, seed)
    rng = np.random.Generator(np.random.PCG64(seed))
    records = []
    for idx in range(n_transcripts):
        style_disfluent = idx % 2 == 0
        main, other = (
            (pool_disfluent, pool_scene)
            if style_disfluent
            else (pool_scene, pool_disfluent)
        )
        length = int(rng.integers(min_len, max_len + 1))
        tokens = tuple(
            str(rng.choice(main) if rng.random() < mix else rng.choice(other))
            for _ in range(length)
        )
        records.append(
            EmbeddedTranscript(
                transcript_id=f"syn{idx:04d}",
                gold_label="AD" if style_disfluent else "HC",
                tokens=tokens,
                vectors=np.stack([synth_embed(t, dim, seed) for t in tokens]),
            )
        )
    return records
