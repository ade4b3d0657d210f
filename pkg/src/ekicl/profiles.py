"""Category contribution profiles and structural feature scores.

A transcript's per-token contribution weights are summed per parsing
category, sorted descending into a contribution array with its category
rank, and compared against the training-set standard profile to yield a
scalar feature score (the transcript's weights in standard-rank order,
dotted with the softmax of the standard array).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .categories import CANONICAL_INDEX, CATEGORIES, Category
from .errors import DataError

OmegaMap = Mapping[Category, float]


@dataclass(frozen=True)
class ContributionProfile:
    omega: dict[Category, float]
    array_R: np.ndarray  # 6 weights, nonincreasing
    rank_C: tuple[Category, ...]  # permutation matching array_R order


@dataclass(frozen=True)
class StandardProfile:
    mean_omega: dict[Category, float]
    array_Rstd: np.ndarray
    rank_Cstd: tuple[Category, ...]
    softmax_Rstd: np.ndarray


def contribution_weights(
    categories: Sequence[Category], p: Sequence[float]
) -> dict[Category, float]:
    """Sum token contributions into the six categories; NONE contributes nowhere."""
    if len(categories) != len(p):
        raise DataError(
            f"categories length {len(categories)} != contributions length {len(p)}"
        )
    omega = {cat: 0.0 for cat in CATEGORIES}
    for cat, weight in zip(categories, p):
        if cat is not Category.NONE:
            omega[cat] += float(weight)
    return omega


def _ranked(omega: OmegaMap) -> tuple[np.ndarray, tuple[Category, ...]]:
    missing = [c for c in CATEGORIES if c not in omega]
    if missing:
        raise DataError(f"omega map missing categories {missing}")
    order = sorted(CATEGORIES, key=lambda c: (-omega[c], CANONICAL_INDEX[c]))
    values = np.array([omega[c] for c in order], dtype=np.float64)
    return values, tuple(order)


def rank_profile(omega: OmegaMap) -> ContributionProfile:
    """Sort weights descending; ties broken by canonical category order."""
    values, order = _ranked(omega)
    return ContributionProfile(
        omega={c: float(omega[c]) for c in CATEGORIES},
        array_R=values,
        rank_C=order,
    )


def _stable_softmax(values: np.ndarray) -> np.ndarray:
    shifted = values - values.max()
    exp = np.exp(shifted)
    return exp / exp.sum()


def standard_profile(profiles: Iterable[ContributionProfile]) -> StandardProfile:
    """Mean the training profiles elementwise and derive rank and softmax."""
    profiles = list(profiles)
    if not profiles:
        raise DataError("cannot build a standard profile from an empty corpus")
    mean_omega = {
        cat: float(np.mean([p.omega[cat] for p in profiles])) for cat in CATEGORIES
    }
    values, order = _ranked(mean_omega)
    return StandardProfile(
        mean_omega=mean_omega,
        array_Rstd=values,
        rank_Cstd=order,
        softmax_Rstd=_stable_softmax(values),
    )


def feature_score(profile: ContributionProfile, standard: StandardProfile) -> float:
    """Dot the transcript's weights, reordered to the standard rank, with softmax(R_std)."""
    reordered = np.array(
        [profile.omega[cat] for cat in standard.rank_Cstd], dtype=np.float64
    )
    return float(reordered @ standard.softmax_Rstd)


def profile_rows(
    transcript_id: str, profile: ContributionProfile, s_feat: float
) -> list[tuple[str, str, float, int, float]]:
    """Audit-dump rows: (transcript_id, category, omega, rank_position, s_feat)."""
    position = {cat: i + 1 for i, cat in enumerate(profile.rank_C)}
    return [
        (transcript_id, str(cat), profile.omega[cat], position[cat], s_feat)
        for cat in CATEGORIES
    ]
