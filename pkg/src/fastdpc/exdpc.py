"""Exact DPC: parallel kd-tree range counts, then an incremental-tree pass
for dependent points."""

from __future__ import annotations

import time

import numba
import numpy as np

from . import kdtree
from .core import INFINITE, NO_DEP, DensityProfile, DpcParams, as_dataset, jitter_counts
from .scan import assign_labels
from .scheduler import run_dynamic
from .result import DpcResult


@numba.njit(nogil=True, cache=True)
def _count_block(t, coords, root, ids, r, out):
    for i in range(ids.shape[0]):
        pid = ids[i]
        out[pid] = kdtree.range_count(t, coords, root, coords[pid], r)


def exdpc_densities(points, tree: kdtree.KdTree, d_cut: float, threads: int = 1, chunk: int = 256) -> DensityProfile:
    """Jittered local density of every point via one range count each.

    Workers pull the next ``chunk`` of points whenever they go idle.
    """
    X = as_dataset(points)
    n = X.shape[0]
    counts = np.zeros(n, dtype=np.int64)
    ids = np.arange(n, dtype=np.int64)
    t, root = tree._t, tree.root

    def work(a, b):
        _count_block(t, X, root, ids[a:b], float(d_cut), counts)

    run_dynamic(work, n, threads, chunk)
    return DensityProfile(rho=jitter_counts(counts))


@numba.njit(nogil=True, cache=True)
def _incremental(coords, order, leaf_size, dep, delta, sizes):
    t, root = kdtree.empty_tree(coords.shape[1], leaf_size, order.shape[0])
    for r in range(order.shape[0]):
        pid = order[r]
        sizes[r] = t.size[root]
        if r == 0:
            delta[pid] = INFINITE
        else:
            d2, best = kdtree.nearest(t, coords, root, coords[pid], np.inf, -1)
            dep[pid] = best
            delta[pid] = np.sqrt(d2)
        t, root = kdtree._insert(t, coords, root, pid)


def exdpc_dependencies(points, profile: DensityProfile, leaf_size: int = kdtree.LEAF_SIZE, trace=None) -> DensityProfile:
    """Visit points by descending density; each one queries a tree holding
    exactly the denser points, then joins it.

    ``trace``, when given, receives the tree size seen before each query.
    """
    X = as_dataset(points)
    rho = profile.rho
    n = len(rho)
    order = np.argsort(-rho, kind="stable").astype(np.int64)
    dep = np.full(n, NO_DEP, dtype=np.int64)
    delta = np.full(n, np.nan)
    sizes = np.zeros(n, dtype=np.int64)
    if n:
        _incremental(X, order, leaf_size, dep, delta, sizes)
    if trace is not None:
        trace.extend(sizes.tolist())
    return DensityProfile(rho=rho.copy(), dep=dep, delta=delta)


def exdpc_run(points, params: DpcParams) -> DpcResult:
    X = as_dataset(points)
    t0 = time.perf_counter()
    tree = kdtree.KdTree(X)
    profile = exdpc_densities(X, tree, params.d_cut, params.threads)
    del tree
    t1 = time.perf_counter()
    profile = exdpc_dependencies(X, profile)
    t2 = time.perf_counter()
    clustering = assign_labels(profile, params.rho_min, params.delta_min)
    t3 = time.perf_counter()
    return DpcResult(profile, clustering, {"density": t1 - t0, "dependency": t2 - t1, "labeling": t3 - t2})
