"""Contribution profiles, standard profile, and the structural feature score."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ekicl.categories import CATEGORIES, Category
from ekicl.errors import DataError
from ekicl.profiles import (
    contribution_weights,
    feature_score,
    profile_rows,
    rank_profile,
    standard_profile,
)

C = Category


def _omega(**kwargs):
    base = {cat: 0.0 for cat in CATEGORIES}
    for name, value in kwargs.items():
        base[Category[name.upper()]] = value
    return base


omega_maps = st.builds(
    lambda vals: dict(zip(CATEGORIES, vals)),
    st.lists(
        st.floats(min_value=0.0, max_value=50.0, allow_nan=False),
        min_size=6,
        max_size=6,
    ),
)


# ---------------------------------------------------------------------------
# contribution_weights
# ---------------------------------------------------------------------------


def test_weights_sum_per_category():
    omega = contribution_weights(
        [C.SUBJECT, C.ACTION, C.FILLER], [0.8, 0.6, 0.1]
    )
    assert omega == _omega(subject=0.8, action=0.6, filler=0.1)


def test_weights_accumulate_repeated_categories():
    omega = contribution_weights([C.ACTION, C.ACTION], [0.3, 0.4])
    assert omega[C.ACTION] == pytest.approx(0.7)


def test_weights_ignore_none():
    assert contribution_weights([C.NONE, C.NONE], [0.9, 0.9]) == _omega()


def test_weights_length_mismatch():
    with pytest.raises(DataError, match="categories length 2"):
        contribution_weights([C.NONE, C.NONE], [0.9])


@settings(max_examples=100, deadline=None)
@given(
    st.lists(
        st.tuples(
            st.sampled_from(list(CATEGORIES) + [C.NONE]),
            st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
        ),
        max_size=30,
    )
)
def test_weights_conserve_total_contribution(pairs):
    cats = [c for c, _ in pairs]
    p = [w for _, w in pairs]
    omega = contribution_weights(cats, p)
    counted = sum(w for c, w in pairs if c is not C.NONE)
    assert sum(omega.values()) == pytest.approx(counted, abs=1e-12)


# ---------------------------------------------------------------------------
# rank_profile
# ---------------------------------------------------------------------------


def test_rank_descending_with_canonical_tiebreak():
    prof = rank_profile(_omega(subject=0.8, action=0.6, filler=0.1))
    assert prof.rank_C == (
        C.SUBJECT, C.ACTION, C.FILLER, C.OBJECT, C.LOCATION, C.PRONOUN,
    )
    assert np.array_equal(prof.array_R, [0.8, 0.6, 0.1, 0.0, 0.0, 0.0])


def test_rank_all_equal_is_canonical():
    prof = rank_profile({cat: 2.5 for cat in CATEGORIES})
    assert prof.rank_C == CATEGORIES


def test_rank_single_nonzero_first():
    prof = rank_profile(_omega(pronoun=1.0))
    assert prof.rank_C[0] is C.PRONOUN


def test_rank_requires_all_categories():
    with pytest.raises(DataError, match="missing categories"):
        rank_profile({C.SUBJECT: 1.0})


@settings(max_examples=100, deadline=None)
@given(omega_maps)
def test_rank_array_nonincreasing_and_consistent(omega):
    prof = rank_profile(omega)
    assert all(a >= b for a, b in zip(prof.array_R, prof.array_R[1:]))
    assert sorted(prof.rank_C, key=lambda c: c.value) == sorted(
        CATEGORIES, key=lambda c: c.value
    )
    for cat, value in zip(prof.rank_C, prof.array_R):
        assert omega[cat] == value


def test_rank_is_input_order_independent():
    # Profiles derive from an omega map: building the same map from tokens
    # in any order yields the identical profile.
    cats = [C.SUBJECT, C.ACTION, C.OBJECT, C.ACTION]
    p = [0.5, 0.25, 0.75, 0.25]
    forward = rank_profile(contribution_weights(cats, p))
    backward = rank_profile(contribution_weights(cats[::-1], p[::-1]))
    assert forward.rank_C == backward.rank_C
    assert np.array_equal(forward.array_R, backward.array_R)


# ---------------------------------------------------------------------------
# standard_profile
# ---------------------------------------------------------------------------


def test_standard_of_one_is_itself():
    prof = rank_profile(_omega(subject=0.8, action=0.6))
    std = standard_profile([prof])
    assert std.mean_omega == prof.omega
    assert std.rank_Cstd == prof.rank_C


def test_standard_means_elementwise():
    std = standard_profile(
        [rank_profile(_omega(action=0.2)), rank_profile(_omega(action=0.4))]
    )
    assert std.mean_omega[C.ACTION] == pytest.approx(0.3)


def test_standard_all_zero_softmax_uniform():
    std = standard_profile([rank_profile(_omega())])
    assert np.allclose(std.softmax_Rstd, np.full(6, 1 / 6), atol=1e-15)


def test_standard_empty_corpus_rejected():
    with pytest.raises(DataError, match="empty corpus"):
        standard_profile([])


def test_standard_softmax_sums_to_one():
    std = standard_profile([rank_profile(_omega(subject=3.0, object=1.0))])
    assert std.softmax_Rstd.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(std.softmax_Rstd > 0)


# ---------------------------------------------------------------------------
# feature_score
# ---------------------------------------------------------------------------


def test_feature_score_zero_omega_is_zero(fixture_standard_profile):
    assert feature_score(rank_profile(_omega()), fixture_standard_profile) == 0.0


def test_feature_score_uniform_softmax_times_six():
    std = standard_profile([rank_profile(_omega())])  # softmax uniform
    query = rank_profile(_omega(subject=6.0))
    assert feature_score(query, std) == pytest.approx(1.0, abs=1e-12)


def test_feature_score_of_mean_profile():
    a = rank_profile(_omega(subject=1.0, action=3.0))
    b = rank_profile(_omega(subject=3.0, action=1.0))
    std = standard_profile([a, b])
    query = rank_profile(std.mean_omega)
    expected = sum(
        std.mean_omega[cat] * w for cat, w in zip(std.rank_Cstd, std.softmax_Rstd)
    )
    assert feature_score(query, std) == pytest.approx(expected, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(omega_maps, omega_maps)
def test_feature_score_nonnegative_and_conserving(q_omega, std_omega):
    std = standard_profile([rank_profile(std_omega)])
    score = feature_score(rank_profile(q_omega), std)
    assert score >= 0.0
    # Upper bound: softmax weights are a convex combination.
    assert score <= max(q_omega.values()) + 1e-9


# Standard weights kept in a narrow band so every softmax component stays
# well above float resolution and the strict inequality is meaningful.
narrow_omega_maps = st.builds(
    lambda vals: dict(zip(CATEGORIES, vals)),
    st.lists(
        st.floats(min_value=0.0, max_value=5.0, allow_nan=False),
        min_size=6,
        max_size=6,
    ),
)


@settings(max_examples=60, deadline=None)
@given(
    narrow_omega_maps,
    narrow_omega_maps,
    st.sampled_from(list(CATEGORIES)),
    st.floats(min_value=0.01, max_value=10.0, allow_nan=False),
)
def test_feature_score_monotone_in_each_omega(q_omega, std_omega, cat, delta):
    std = standard_profile([rank_profile(std_omega)])
    bumped = dict(q_omega)
    bumped[cat] = bumped[cat] + delta
    low = feature_score(rank_profile(q_omega), std)
    high = feature_score(rank_profile(bumped), std)
    assert high > low


# ---------------------------------------------------------------------------
# profile_rows
# ---------------------------------------------------------------------------


def test_profile_rows_shape_and_positions():
    prof = rank_profile(_omega(subject=0.8, action=0.6, filler=0.1))
    rows = profile_rows("t1", prof, 0.5)
    assert len(rows) == 6
    by_cat = {row[1]: row for row in rows}
    assert by_cat["Subject"] == ("t1", "Subject", 0.8, 1, 0.5)
    assert by_cat["Action"][3] == 2
    assert by_cat["Pronoun"][3] == 6


@pytest.fixture()
def fixture_standard_profile():
    return standard_profile(
        [rank_profile(_omega(subject=1.0, object=2.0, action=3.0))]
    )
