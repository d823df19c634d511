import numpy as np
import pytest

from fastdpc.core import ContractError
from fastdpc.kdtree import KdTree


def scan_range(X, ids, q, r):
    d = np.sqrt(((X[ids] - q) ** 2).sum(axis=1))
    return np.sort(ids[d < r])


def scan_nearest(X, ids, q):
    d2 = ((X[ids] - q) ** 2).sum(axis=1)
    return int(ids[d2 == d2.min()].min())


def test_empty_tree():
    t = KdTree(np.empty((0, 2)))
    assert len(t) == 0
    assert t.nearest_neighbor((0.0, 0.0)) is None
    assert t.range_search((0.0, 0.0), 10.0).size == 0


def test_single_point_is_a_leaf():
    t = KdTree(np.array([[5.0, 5.0]]))
    assert len(t) == 1 and t.depth() == 1
    assert t.range_search((5, 5), 0.1).tolist() == [0]


def test_range_examples():
    t = KdTree(np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]))
    assert t.range_search((0, 0), 1.5).tolist() == [0, 1]
    assert t.range_search((0, 0), 0.0).size == 0
    # strict inequality: a point exactly at the radius is excluded
    assert t.range_search((0, 0), 1.0).tolist() == [0]


def test_nearest_example_and_ties():
    t = KdTree(np.array([[0.0, 0.0], [10.0, 0.0]]))
    assert t.nearest_neighbor((1.0, 0.0)) == 0
    assert t.nearest_neighbor((5.0, 0.0)) == 0
    t = KdTree(np.array([[10.0, 0.0], [0.0, 0.0], [0.0, 0.0]]))
    assert t.nearest_neighbor((0.0, 0.0)) == 1


def test_build_keeps_multiset():
    X = np.random.default_rng(0).random((1000, 2))
    assert np.array_equal(np.sort(KdTree(X).ids()), np.arange(1000))


@pytest.mark.parametrize("d", [2, 3, 5, 8])
def test_queries_match_linear_scan(d):
    rng = np.random.default_rng(d)
    X = rng.uniform(0, 100, (3000, d))
    X[:50] = X[50:100]  # duplicate coordinates
    t = KdTree(X)
    ids = np.arange(len(X))
    for _ in range(200):
        q = rng.uniform(-10, 110, d)
        r = rng.uniform(0, 60)
        assert np.array_equal(t.range_search(q, r), scan_range(X, ids, q, r))
        assert t.range_count(q, r) == len(scan_range(X, ids, q, r))
        assert t.nearest_neighbor(q) == scan_nearest(X, ids, q)


def test_incremental_matches_prefix_scan():
    rng = np.random.default_rng(3)
    X = rng.integers(0, 20, (400, 2)).astype(float)  # many exact ties
    t = KdTree.empty(X)
    for i in range(len(X)):
        t.insert(i)
        q = rng.uniform(0, 20, 2)
        ids = np.arange(i + 1)
        assert t.nearest_neighbor(q) == scan_nearest(X, ids, q)
        assert np.array_equal(t.range_search(q, 4.0), scan_range(X, ids, q, 4.0))
    assert len(t) == len(X)


def test_incremental_equals_bulk():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(2000, 3))
    bulk = KdTree(X)
    inc = KdTree.empty(X)
    for i in rng.permutation(len(X)):
        inc.insert(int(i))
    for _ in range(200):
        q = rng.normal(size=3)
        assert np.array_equal(inc.range_search(q, 0.5), bulk.range_search(q, 0.5))
        assert inc.nearest_neighbor(q) == bulk.nearest_neighbor(q)


def test_insert_then_query_same_coords():
    X = np.array([[1.0, 2.0], [3.0, 4.0]])
    t = KdTree.empty(X)
    t.insert(1)
    assert t.nearest_neighbor((3.0, 4.0)) == 1


def test_sequential_inserts_stay_shallow():
    X = np.arange(20000, dtype=float).reshape(-1, 1)  # sorted input, the worst case
    t = KdTree.empty(X)
    for i in range(len(X)):
        t.insert(i)
    assert t.depth() <= 4 * np.log2(len(X))


def test_insert_errors():
    X = np.zeros((3, 2))
    t = KdTree(X, ids=[0, 1])
    with pytest.raises(ContractError):
        t.insert(1)
    with pytest.raises(ContractError):
        t.insert(3)


def test_dimension_and_radius_errors():
    t = KdTree(np.zeros((3, 2)))
    with pytest.raises(ContractError):
        t.range_search((0.0, 0.0, 0.0), 1.0)
    with pytest.raises(ContractError):
        t.nearest_neighbor((0.0,))
    with pytest.raises(ContractError):
        t.range_search((0.0, 0.0), -1.0)
