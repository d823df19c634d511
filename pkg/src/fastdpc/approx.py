"""Approx-DPC: exact densities from one joint range search per grid cell.

Most dependent points come straight from cell metadata. Cell peaks that no
neighbor cell can settle fall back to an exact search over density-sorted
partitions.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numba
import numpy as np

from . import kdtree
from .core import INFINITE, NO_DEP, DensityProfile, DpcParams, as_dataset, jitter_counts
from .grid import Grid, approx_side, build_grid
from .result import DpcResult
from .scan import assign_labels
from .scheduler import cost_dep, greedy_partition_array, run_static, split_even

# Joint-search radius slack; guards the ball-containment argument against
# rounding. Member densities are re-checked exactly, so this only costs a few
# extra candidates.
_RADIUS_SLACK = 1e-9


@dataclass
class JointSearchResult:
    key: tuple
    center: np.ndarray
    radius_extension: float
    result: np.ndarray


@dataclass
class PartitionSet:
    """Density-ascending subsets, each with its own kd-tree.

    Subset ``j`` holds ``order[offsets[j]:offsets[j + 1]]``. All trees share
    one ``TreeArrays`` forest; ``roots[j]`` is subset ``j``'s root.
    """

    s: int
    d: int
    order: np.ndarray
    offsets: np.ndarray
    rho_lo: np.ndarray
    rho_hi: np.ndarray
    forest: kdtree.TreeArrays
    roots: np.ndarray

    @property
    def n(self) -> int:
        return len(self.order)

    def subset(self, j: int) -> np.ndarray:
        return self.order[self.offsets[j] : self.offsets[j + 1]]


def partition_count(n: int, d: int) -> int:
    """Smallest ``s >= 2`` with ``n <= s * (s - 1) ** d``."""
    s = 2
    while n > s * (s - 1) ** d:
        s += 1
    if n < s:
        s = max(2, n)
    return s


# ---------------------------------------------------------------- kernels


@numba.njit(nogil=True, cache=True)
def _cell_center_ext(coords, keys, side, starts, members, c):
    d = coords.shape[1]
    center = np.empty(d)
    for k in range(d):
        center[k] = (keys[c, k] + 0.5) * side
    ext = 0.0
    for e in range(starts[c], starts[c + 1]):
        dd = np.sqrt(kdtree._dist2(coords, members[e], center))
        if dd > ext:
            ext = dd
    return center, ext


@numba.njit(nogil=True, cache=True)
def _joint_range(t, coords, root, keys, side, starts, members, cells, d_cut, slack):
    buf = np.empty(1024, np.int64)
    offs = np.empty(cells.shape[0] + 1, np.int64)
    k = 0
    for i in range(cells.shape[0]):
        c = cells[i]
        offs[i] = k
        center, ext = _cell_center_ext(coords, keys, side, starts, members, c)
        buf, k = kdtree.range_collect(t, coords, root, center, (d_cut + ext) * (1.0 + slack), buf, k)
    offs[cells.shape[0]] = k
    return buf[:k], offs


@numba.njit(nogil=True, cache=True)
def _joint_scan(coords, cells, starts, members, cell_of, r_all, r_start, r_len, d_cut, counts, pstar, min_rho):
    n = coords.shape[0]
    pairs = np.empty((64, 2), np.int64)
    k = 0
    for i in range(cells.shape[0]):
        c = cells[i]
        a = r_start[c]
        b = a + r_len[c]
        best_rho = -np.inf
        best = -1
        low = np.inf
        for e in range(starts[c], starts[c + 1]):
            p = members[e]
            q = coords[p]
            cnt = 0
            for f in range(a, b):
                if np.sqrt(kdtree._dist2(coords, r_all[f], q)) < d_cut:
                    cnt += 1
            counts[p] = cnt
            rho = cnt + (p + 1) / (n + 1)
            if rho > best_rho:
                best_rho = rho
                best = p
            if rho < low:
                low = rho
        pstar[c] = best
        min_rho[c] = low
        # neighbor cells seen from the densest member's d_cut-ball
        q = coords[best]
        found = np.empty(b - a, np.int64)
        m = 0
        for f in range(a, b):
            x = r_all[f]
            if cell_of[x] != c and np.sqrt(kdtree._dist2(coords, x, q)) < d_cut:
                found[m] = cell_of[x]
                m += 1
        if m:
            uniq = np.unique(found[:m])
            if k + uniq.shape[0] > pairs.shape[0]:
                grown = np.empty((max(2 * pairs.shape[0], k + uniq.shape[0]), 2), np.int64)
                grown[:k] = pairs[:k]
                pairs = grown
            for u in uniq:
                pairs[k, 0] = c
                pairs[k, 1] = u
                k += 1
    return pairs[:k]


@numba.njit(nogil=True, cache=True)
def _approx_block(a, b, rho, cell_of, pstar, min_rho, nb_starts, nb, d_cut, dep, delta, unresolved):
    for p in range(a, b):
        c = cell_of[p]
        if p != pstar[c]:
            dep[p] = pstar[c]
            delta[p] = d_cut
            continue
        unresolved[p] = True
        for e in range(nb_starts[c], nb_starts[c + 1]):
            other = nb[e]
            if min_rho[other] > rho[p]:
                dep[p] = pstar[other]
                delta[p] = d_cut
                unresolved[p] = False
                break


@numba.njit(nogil=True, cache=True)
def _exact_block(coords, rho, pts, t, roots, order, offsets, rho_lo, rho_hi, dep, delta):
    s = roots.shape[0]
    for i in range(pts.shape[0]):
        p = pts[i]
        rp = rho[p]
        q = coords[p]
        best_d2 = np.inf
        best = -1
        for j in range(s):
            if not rho_hi[j] > rp:
                continue  # every point of the subset is sparser
            if rho_lo[j] > rp:
                best_d2, best = kdtree.nearest(t, coords, roots[j], q, best_d2, best)
            else:
                for e in range(offsets[j], offsets[j + 1]):
                    x = order[e]
                    if rho[x] > rp:
                        d2 = kdtree._dist2(coords, x, q)
                        if d2 < best_d2 or (d2 == best_d2 and x < best):
                            best_d2 = d2
                            best = x
        if best < 0:
            dep[p] = -1
            delta[p] = INFINITE
        else:
            dep[p] = best
            delta[p] = np.sqrt(best_d2)


# ------------------------------------------------------------- operations


def joint_search(points, tree: kdtree.KdTree, grid: Grid, c: int, d_cut: float) -> JointSearchResult:
    """One enlarged range search covering every member's ``d_cut``-ball."""
    X = as_dataset(points)
    center, ext = _cell_center_ext(X, grid.keys, grid.side, grid.starts, grid.members, c)
    res = tree.range_search(center, (d_cut + ext) * (1.0 + _RADIUS_SLACK))
    return JointSearchResult(tuple(int(v) for v in grid.keys[c]), center, float(ext), res)


def joint_densities(points, tree: kdtree.KdTree, grid: Grid, d_cut: float, threads: int = 1) -> DensityProfile:
    """Exact jittered densities via one joint search per cell.

    Also fills ``grid.pstar``, ``grid.min_rho`` and the neighbor lists.
    Cells go to threads twice by greedy cost: first on member count for the
    range searches, then on members x result size for the scans.
    """
    X = as_dataset(points)
    n = X.shape[0]
    m = len(grid)
    counts = np.zeros(n, dtype=np.int64)
    if n == 0:
        return DensityProfile(rho=np.empty(0))
    sizes = grid.sizes
    t, root = tree._t, tree.root

    parts = greedy_partition_array(sizes, threads)
    searched = run_static(
        lambda cells: _joint_range(t, X, root, grid.keys, grid.side, grid.starts, grid.members, cells, float(d_cut), _RADIUS_SLACK),
        parts,
        threads,
    )
    r_len = np.zeros(m, dtype=np.int64)
    r_start = np.zeros(m, dtype=np.int64)
    base = 0
    for cells, (buf, offs) in zip(parts, searched):
        r_start[cells] = offs[:-1] + base
        r_len[cells] = np.diff(offs)
        base += len(buf)
    r_all = np.concatenate([buf for buf, _ in searched]) if searched else np.empty(0, np.int64)

    parts = greedy_partition_array(sizes * r_len, threads)
    pair_lists = run_static(
        lambda cells: _joint_scan(
            X, cells, grid.starts, grid.members, grid.cell_of, r_all, r_start, r_len,
            float(d_cut), counts, grid.pstar, grid.min_rho,
        ),
        parts,
        threads,
    )
    grid.set_neighbors(np.concatenate(pair_lists) if pair_lists else np.empty((0, 2), np.int64))
    return DensityProfile(rho=jitter_counts(counts))


def approx_dependents(grid: Grid, profile: DensityProfile, d_cut: float, threads: int = 1):
    """Constant-time approximate dependent points from cell metadata.

    Returns ``(profile, unresolved_ids)``; the unresolved points (cell peaks
    with no denser neighbor cell) still have ``dep == NO_DEP``.
    """
    rho = profile.rho
    n = len(rho)
    dep = np.full(n, NO_DEP, dtype=np.int64)
    delta = np.full(n, np.nan)
    unresolved = np.zeros(n, dtype=bool)
    run_static(
        lambda ab: _approx_block(
            ab[0], ab[1], rho, grid.cell_of, grid.pstar, grid.min_rho,
            grid.nb_starts, grid.nb, float(d_cut), dep, delta, unresolved,
        ),
        split_even(n, threads),
        threads,
    )
    return DensityProfile(rho=rho.copy(), dep=dep, delta=delta), np.nonzero(unresolved)[0]


def build_partitions(points, rho: np.ndarray, ids=None, leaf_size: int = kdtree.LEAF_SIZE) -> PartitionSet:
    """Sort ``ids`` (default: all points) by ascending density and cut them
    into ``s`` near-equal subsets with one kd-tree each."""
    X = as_dataset(points)
    if ids is None:
        ids = np.arange(X.shape[0], dtype=np.int64)
    ids = np.asarray(ids, dtype=np.int64)
    n = len(ids)
    d = X.shape[1] if X.shape[0] else 1
    s = partition_count(n, d)
    order = ids[np.argsort(rho[ids], kind="stable")]
    sizes = [len(c) for c in np.array_split(np.arange(n), s)]
    offsets = np.concatenate(([0], np.cumsum(sizes))).astype(np.int64)
    rho_lo = np.full(s, np.inf)
    rho_hi = np.full(s, -np.inf)
    for j in range(s):
        sub = order[offsets[j] : offsets[j + 1]]
        if len(sub):
            rho_lo[j] = rho[sub[0]]
            rho_hi[j] = rho[sub[-1]]
    forest, roots = kdtree.build_forest(X, order.copy(), offsets, leaf_size)
    return PartitionSet(s, d, order, offsets, rho_lo, rho_hi, forest, roots)


def dep_costs(partitions: PartitionSet, rho_values: np.ndarray) -> np.ndarray:
    """``cost_dep`` for each density value against the partition set."""
    rho_values = np.asarray(rho_values, dtype=np.float64)
    hi = partitions.rho_hi[None, :] > rho_values[:, None]
    lo = partitions.rho_lo[None, :] > rho_values[:, None]
    m = hi.sum(axis=1)
    mixed = (hi & ~lo).any(axis=1)
    n, s, d = max(partitions.n, 1), partitions.s, partitions.d
    return np.array([cost_dep(int(mi), bool(mx), n, s, d) for mi, mx in zip(m, mixed)])


def exact_dependents(points, unresolved, partitions: PartitionSet, rho: np.ndarray, threads: int = 1, out=None):
    """True nearest denser point for each unresolved id.

    For each subset: skip it if no member is denser, nearest-neighbor search
    its tree if every member is denser, scan it otherwise. ``out`` is an
    optional ``(dep, delta)`` pair written in place.
    """
    X = as_dataset(points)
    unresolved = np.asarray(unresolved, dtype=np.int64)
    n = X.shape[0]
    if out is None:
        dep = np.full(n, NO_DEP, dtype=np.int64)
        delta = np.full(n, np.nan)
    else:
        dep, delta = out
    if len(unresolved) == 0:
        return dep, delta
    if threads > 1:
        costs = dep_costs(partitions, rho[unresolved])
        parts = [unresolved[p] for p in greedy_partition_array(costs, threads)]
    else:
        parts = [unresolved]
    run_static(
        lambda pts: _exact_block(
            X, rho, pts, partitions.forest, partitions.roots, partitions.order,
            partitions.offsets, partitions.rho_lo, partitions.rho_hi, dep, delta,
        ),
        parts,
        threads,
    )
    return dep, delta


def approx_dpc_run(points, params: DpcParams) -> DpcResult:
    X = as_dataset(points)
    n = X.shape[0]
    d = X.shape[1] if n else 1
    t0 = time.perf_counter()
    tree = kdtree.KdTree(X)
    grid = build_grid(X, approx_side(params.d_cut, d))
    profile = joint_densities(X, tree, grid, params.d_cut, params.threads)
    t1 = time.perf_counter()
    profile, unresolved = approx_dependents(grid, profile, params.d_cut, params.threads)
    partitions = build_partitions(X, profile.rho)
    exact_dependents(X, unresolved, partitions, profile.rho, params.threads, out=(profile.dep, profile.delta))
    t2 = time.perf_counter()
    clustering = assign_labels(profile, params.rho_min, params.delta_min)
    t3 = time.perf_counter()
    stats = {"cells": len(grid), "unresolved": len(unresolved), "partitions": partitions.s}
    return DpcResult(profile, clustering, {"density": t1 - t0, "dependency": t2 - t1, "labeling": t3 - t2}, stats)
