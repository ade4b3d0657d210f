"""Demonstration retrieval by rank-based parsing similarity.

The rank distance between two category permutations weights each
disagreement by the inverse of its position in the candidate's rank,
so mismatches among the dominant categories cost the most. Raw
distances are scaled into [0, 1] by ``ND_MAX``, the exhaustively
enumerated maximum over all 720 permutations against a fixed reference
(attained uniquely by the position pattern (6, 5, 4, 1, 2, 3)).
Similarity blends the complement of that distance with the cosine of
the two contribution arrays expressed in the query's rank order.

Cosine and random strategies are provided as retrieval baselines.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Literal, Optional, Sequence

import numpy as np

from .categories import CATEGORIES, Category
from .errors import DataError
from .profiles import ContributionProfile

# Max of sum(|t_i - i| / i) over all permutations t of 1..6; verified by
# enumeration in the acceptance suite. Any drift fails the build.
ND_MAX_FRACTION = Fraction(521, 60)
ND_MAX = float(ND_MAX_FRACTION)

Strategy = Literal["parsing", "semantic", "random"]


@dataclass(frozen=True)
class SimilarityBreakdown:
    nd_raw: float
    nd_normalized: float
    cosine_term: float
    sim: float
    lambda1: float
    lambda2: float


@dataclass(frozen=True)
class DemoCandidate:
    """One pool entry: everything the three retrieval strategies can use."""

    transcript_id: str
    profile: ContributionProfile
    mean_embedding: np.ndarray
    gold_label: Optional[str] = None


def _check_permutation(rank: Sequence[Category], name: str) -> None:
    if len(rank) != len(CATEGORIES) or set(rank) != set(CATEGORIES):
        raise DataError(f"{name} is not a permutation of the six categories")


def position_distance(
    rank_query: Sequence[Category], rank_candidate: Sequence[Category]
) -> tuple[float, float]:
    """Raw and normalized position distance between two category ranks.

    Asymmetric: the divisor indexes positions in the candidate's rank, so
    the query must always be the first argument.
    """
    _check_permutation(rank_query, "rank_query")
    _check_permutation(rank_candidate, "rank_candidate")
    query_pos = {cat: i for i, cat in enumerate(rank_query, start=1)}
    raw = 0.0
    for i, cat in enumerate(rank_candidate, start=1):
        raw += abs(query_pos[cat] - i) / i
    return raw, raw / ND_MAX


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    norm_a = np.linalg.norm(a)
    norm_b = np.linalg.norm(b)
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    return float(a @ b / (norm_a * norm_b))


def parsing_similarity(
    query: ContributionProfile,
    candidate: ContributionProfile,
    lambda1: float = 0.5,
    lambda2: float = 0.5,
) -> SimilarityBreakdown:
    """Blend rank distance and cosine of the query-rank-ordered weight arrays."""
    nd_raw, nd_normalized = position_distance(query.rank_C, candidate.rank_C)
    candidate_in_query_order = np.array(
        [candidate.omega[cat] for cat in query.rank_C], dtype=np.float64
    )
    cosine_term = cosine(query.array_R, candidate_in_query_order)
    sim = lambda1 * (1.0 - nd_normalized) + lambda2 * cosine_term
    return SimilarityBreakdown(
        nd_raw=nd_raw,
        nd_normalized=nd_normalized,
        cosine_term=cosine_term,
        sim=sim,
        lambda1=lambda1,
        lambda2=lambda2,
    )


def score_pool(
    query: DemoCandidate,
    pool: Sequence[DemoCandidate],
    lambda1: float = 0.5,
    lambda2: float = 0.5,
) -> list[tuple[DemoCandidate, SimilarityBreakdown]]:
    """Parsing-similarity breakdown for every candidate, in pool order."""
    return [
        (cand, parsing_similarity(query.profile, cand.profile, lambda1, lambda2))
        for cand in pool
    ]


def top_k(
    query: DemoCandidate,
    pool: Sequence[DemoCandidate],
    k: int,
    strategy: Strategy = "parsing",
    seed: int = 0,
    lambda1: float = 0.5,
    lambda2: float = 0.5,
) -> list[str]:
    """Ordered ids of the k best demonstrations under the chosen strategy.

    parsing: descending similarity; semantic: descending cosine over
    mean-pooled embeddings; random: prefix of a seeded shuffle. Score
    ties break toward the lexicographically smaller id. The query must
    not be in the pool.
    """
    if not pool:
        raise DataError("empty demonstration pool")
    if k > len(pool):
        raise DataError(f"k={k} exceeds pool size {len(pool)}")
    if any(c.transcript_id == query.transcript_id for c in pool):
        raise DataError("query transcript present in demonstration pool")

    if strategy == "parsing":
        scored = score_pool(query, pool, lambda1, lambda2)
        ranked = sorted(scored, key=lambda cb: (-cb[1].sim, cb[0].transcript_id))
        return [cand.transcript_id for cand, _ in ranked[:k]]
    if strategy == "semantic":
        query_mean = query.mean_embedding
        ranked = sorted(
            pool,
            key=lambda c: (-cosine(query_mean, c.mean_embedding), c.transcript_id),
        )
        return [c.transcript_id for c in ranked[:k]]
    if strategy == "random":
        rng = np.random.Generator(np.random.PCG64(seed))
        ids = sorted(c.transcript_id for c in pool)
        return [ids[i] for i in rng.permutation(len(ids))[:k]]
    raise DataError(f"unknown retrieval strategy {strategy!r}")
