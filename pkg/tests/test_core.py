import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fastdpc.core import (
    INFINITE,
    ContractError,
    DensityProfile,
    DpcParams,
    Point,
    distance,
    jitter,
    jitter_counts,
    rand_index,
)

coords = st.lists(st.floats(-1e4, 1e4), min_size=3, max_size=3)


def pair_agreement(a, b):
    pairs = list(itertools.combinations(range(len(a)), 2))
    if not pairs:
        return 1.0
    agree = sum((a[i] == a[j]) == (b[i] == b[j]) for i, j in pairs)
    return agree / len(pairs)


@pytest.mark.parametrize(
    "a, b, expected",
    [((0, 0), (3, 4), 5.0), ((1, 1), (1, 1), 0.0), ((0, 0, 0), (1, 1, 1), math.sqrt(3))],
)
def test_distance_examples(a, b, expected):
    assert distance(a, b) == pytest.approx(expected, rel=1e-15)


def test_distance_accepts_points():
    assert distance(Point(0, (0.0, 0.0)), Point(1, (3.0, 4.0))) == 5.0


def test_distance_dimension_mismatch():
    with pytest.raises(ContractError):
        distance((0, 0), (0, 0, 0))


@settings(max_examples=200, deadline=None)
@given(coords, coords, coords)
def test_distance_is_a_metric(a, b, c):
    assert distance(a, b) == distance(b, a)
    assert distance(a, b) >= 0
    assert distance(a, a) == 0
    assert distance(a, c) <= distance(a, b) + distance(b, c) + 1e-9


@pytest.mark.parametrize("base, idx, n, expected", [(2, 0, 3, 2.25), (2, 1, 3, 2.5), (1, 2, 3, 1.75)])
def test_jitter_examples(base, idx, n, expected):
    assert jitter(base, idx, n) == expected


@pytest.mark.parametrize("idx", [-1, 3])
def test_jitter_rejects_bad_id(idx):
    with pytest.raises(ContractError):
        jitter(1, idx, 3)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 10**6), st.data())
def test_jitter_breaks_ties_without_reordering_counts(n, data):
    i = data.draw(st.integers(0, n - 1))
    j = data.draw(st.integers(0, n - 1))
    base = data.draw(st.integers(0, 10**6))
    assert base < jitter(base, i, n) < base + 1
    if i < j:
        assert jitter(base, i, n) < jitter(base, j, n)
    assert jitter(base, i, n) < jitter(base + 1, j, n)


def test_jitter_counts_distinct():
    rho = jitter_counts(np.array([3, 3, 3, 1, 1]))
    assert len(set(rho.tolist())) == 5
    assert rho.tolist() == [jitter(c, i, 5) for i, c in enumerate([3, 3, 3, 1, 1])]


@pytest.mark.parametrize(
    "a, b, expected",
    [([0, 0, 1, 1], [0, 0, 1, 1], 1.0), ([0, 0, 1, 1], [1, 1, 0, 0], 1.0), ([0, 0, 1, 1], [0, 1, 0, 1], 1 / 3)],
)
def test_rand_index_examples(a, b, expected):
    assert rand_index(a, b) == pytest.approx(expected, abs=1e-15)


def test_rand_index_length_mismatch():
    with pytest.raises(ContractError):
        rand_index([0, 1], [0])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(-2, 4), min_size=0, max_size=40), st.data())
def test_rand_index_matches_pair_enumeration(a, data):
    b = data.draw(st.lists(st.integers(-2, 4), min_size=len(a), max_size=len(a)))
    assert rand_index(a, b) == pytest.approx(pair_agreement(a, b), abs=1e-12)
    assert rand_index(a, b) == pytest.approx(rand_index(b, a), abs=1e-12)
    relabel = {v: 10 - v for v in set(b)}
    assert rand_index(a, [relabel[v] for v in b]) == pytest.approx(rand_index(a, b), abs=1e-12)


@pytest.mark.parametrize(
    "kwargs",
    [dict(d_cut=0.0), dict(d_cut=1.0, delta_min=1.0), dict(d_cut=1.0, epsilon=0.0), dict(d_cut=1.0, threads=0)],
)
def test_params_contracts(kwargs):
    with pytest.raises(ContractError):
        DpcParams(**kwargs)


def test_profile_defaults():
    p = DensityProfile(rho=np.array([1.5, 2.5]))
    assert p.dep.tolist() == [-1, -1]
    assert np.isnan(p.delta).all()
    assert INFINITE == np.finfo(np.float64).max
