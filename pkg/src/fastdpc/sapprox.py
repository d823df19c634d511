"""S-Approx-DPC: one sampled point per fine grid cell stands in for the
whole cell, turning point clustering into cell clustering."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numba
import numpy as np

from . import kdtree
from .approx import build_partitions, exact_dependents
from .core import INFINITE, NO_DEP, DensityProfile, DpcParams, as_dataset
from .grid import Grid, build_grid, sampled_side
from .result import DpcResult
from .scan import assign_labels
from .scheduler import run_dynamic, run_static, split_even


@dataclass
class TemporaryCluster:
    center: int
    members: np.ndarray
    radius: float


@numba.njit(nogil=True, cache=True)
def _sample_block(t, coords, root, a, b, starts, members, cell_of, n_cells, d_cut, counts):
    buf = np.empty(256, np.int64)
    pairs = np.empty((64, 2), np.int64)
    seen = np.full(n_cells, -1, np.int64)
    k = 0
    for c in range(a, b):
        p = members[starts[c]]
        buf, m = kdtree.range_collect(t, coords, root, coords[p], d_cut, buf, 0)
        counts[p] = m
        seen[c] = c
        for e in range(m):
            other = cell_of[buf[e]]
            if seen[other] != c:
                seen[other] = c
                if k == pairs.shape[0]:
                    grown = np.empty((2 * k, 2), np.int64)
                    grown[:k] = pairs[:k]
                    pairs = grown
                pairs[k, 0] = c
                pairs[k, 1] = other
                k += 1
    return pairs[:k]


@numba.njit(nogil=True, cache=True)
def _first_phase_block(coords, a, b, rho, starts, members, pstar, nb_starts, nb, cell_delta, dep, delta, unresolved):
    for c in range(a, b):
        p = pstar[c]
        best = -1
        for e in range(nb_starts[c], nb_starts[c + 1]):
            q = pstar[nb[e]]
            if rho[q] > rho[p] and (best < 0 or q < best):
                best = q
        if best >= 0:
            dep[p] = best
            delta[p] = np.sqrt(kdtree._dist2(coords, best, coords[p]))
        else:
            unresolved[p] = True
        for e in range(starts[c], starts[c + 1]):
            x = members[e]
            if x != p:
                dep[x] = p
                delta[x] = cell_delta


@numba.njit(nogil=True, cache=True)
def _second_phase_block(coords, rho, pts, heads, tc_starts, tc_members, radius, dep, delta, scanned):
    h = heads.shape[0]
    for i in range(pts.shape[0]):
        p = pts[i]
        rp = rho[p]
        q = coords[p]
        # nearest denser point among the unresolved heads
        best_d2 = np.inf
        best = -1
        for j in range(h):
            x = heads[j]
            if rho[x] > rp:
                d2 = kdtree._dist2(coords, x, q)
                if d2 < best_d2 or (d2 == best_d2 and x < best):
                    best_d2 = d2
                    best = x
        if best < 0:
            dep[p] = -1
            delta[p] = INFINITE
            continue
        bound = np.sqrt(best_d2)
        for j in range(h):
            x = heads[j]
            if not rho[x] > rp:
                continue
            if np.sqrt(kdtree._dist2(coords, x, q)) - radius[j] > bound:
                continue
            scanned[i] += 1
            for e in range(tc_starts[j], tc_starts[j + 1]):
                y = tc_members[e]
                if rho[y] > rp:
                    d2 = kdtree._dist2(coords, y, q)
                    if d2 < best_d2 or (d2 == best_d2 and y < best):
                        best_d2 = d2
                        best = y
        dep[p] = best
        delta[p] = np.sqrt(best_d2)


def picked_points(grid: Grid) -> np.ndarray:
    """The representative of each cell: its smallest member id."""
    return grid.members[grid.starts[:-1]].copy()


def sampled_densities(points, tree: kdtree.KdTree, grid: Grid, d_cut: float, threads: int = 1, chunk: int = 512) -> np.ndarray:
    """Exact jittered density of each cell's picked point; NaN elsewhere.

    Fills ``grid.pstar`` with the picked points and the neighbor lists from
    their ``d_cut``-balls.
    """
    X = as_dataset(points)
    n = X.shape[0]
    counts = np.full(n, -1, dtype=np.int64)
    t, root = tree._t, tree.root
    grid.pstar = picked_points(grid)
    pair_lists = run_dynamic(
        lambda a, b: _sample_block(t, X, root, a, b, grid.starts, grid.members, grid.cell_of, len(grid), float(d_cut), counts),
        len(grid),
        threads,
        chunk,
    )
    grid.set_neighbors(np.concatenate(pair_lists) if pair_lists else np.empty((0, 2), np.int64))
    rho = np.full(n, np.nan)
    picked = grid.pstar
    rho[picked] = counts[picked] + (picked + 1) / (n + 1)
    return rho


def first_phase_dependents(points, grid: Grid, rho: np.ndarray, d_cut: float, epsilon: float, threads: int = 1):
    """Dependent points that the neighbor lists can settle.

    A picked point depends on the smallest-id denser picked point of a
    neighbor cell (distance measured). Other members depend on their cell's
    picked point at the assigned distance ``epsilon * d_cut``. Returns
    ``(profile, unresolved picked ids)``.
    """
    X = as_dataset(points)
    n = X.shape[0]
    dep = np.full(n, NO_DEP, dtype=np.int64)
    delta = np.full(n, np.nan)
    unresolved = np.zeros(n, dtype=bool)
    run_static(
        lambda ab: _first_phase_block(
            X, ab[0], ab[1], rho, grid.starts, grid.members, grid.pstar,
            grid.nb_starts, grid.nb, float(epsilon * d_cut), dep, delta, unresolved,
        ),
        split_even(len(grid), threads),
        threads,
    )
    return DensityProfile(rho=rho.copy(), dep=dep, delta=delta), np.nonzero(unresolved)[0]


def temporary_clusters(points, picked: np.ndarray, heads: np.ndarray, profile: DensityProfile):
    """Group picked points under the unresolved head their dependencies reach.

    Returns ``(heads, starts, members, radius)`` in CSR form, heads ascending.
    """
    X = as_dataset(points)
    rho, dep = profile.rho, profile.dep
    heads = np.sort(np.asarray(heads, dtype=np.int64))
    slot = np.full(X.shape[0], -1, dtype=np.int64)
    slot[heads] = np.arange(len(heads))
    order = picked[np.argsort(-rho[picked], kind="stable")]
    owner = np.full(X.shape[0], -1, dtype=np.int64)
    for p in order.tolist():
        owner[p] = slot[p] if slot[p] >= 0 else owner[dep[p]]
    own = owner[picked]
    by = np.argsort(own, kind="stable")
    members = picked[by]
    starts = np.concatenate(([0], np.cumsum(np.bincount(own, minlength=len(heads))))).astype(np.int64)
    diff = X[members] - X[heads[own[by]]]
    dist = np.sqrt(np.sum(diff * diff, axis=1)) if len(members) else np.empty(0)
    radius = np.zeros(len(heads))
    if len(members):
        np.maximum.at(radius, own[by], dist)
    return heads, starts, members, radius


def second_phase_dependents(points, picked, heads, profile: DensityProfile, threads: int = 1):
    """Nearest denser picked point for each unresolved head, pruning
    temporary clusters by the triangle inequality.

    Writes into ``profile`` and returns the per-head count of scanned
    clusters (aligned with the sorted heads).
    """
    X = as_dataset(points)
    heads, starts, members, radius = temporary_clusters(X, picked, heads, profile)
    scanned = np.zeros(len(heads), dtype=np.int64)
    rho = profile.rho

    def work(ab):
        a, b = ab
        _second_phase_block(X, rho, heads[a:b], heads, starts, members, radius, profile.dep, profile.delta, scanned[a:b])

    run_static(work, split_even(len(heads), threads), threads)
    return heads, scanned


def s_approx_run(points, params: DpcParams) -> DpcResult:
    X = as_dataset(points)
    n = X.shape[0]
    d = X.shape[1] if n else 1
    t0 = time.perf_counter()
    tree = kdtree.KdTree(X)
    grid = build_grid(X, sampled_side(params.d_cut, d, params.epsilon))
    rho = sampled_densities(X, tree, grid, params.d_cut, params.threads)
    t1 = time.perf_counter()
    profile, heads = first_phase_dependents(X, grid, rho, params.d_cut, params.epsilon, params.threads)
    picked = grid.pstar
    fallback = len(heads) > math.ceil(math.sqrt(n))
    if fallback:
        partitions = build_partitions(X, rho, ids=picked)
        exact_dependents(X, heads, partitions, rho, params.threads, out=(profile.dep, profile.delta))
    elif len(heads):
        second_phase_dependents(X, picked, heads, profile, params.threads)
    t2 = time.perf_counter()
    clustering = assign_labels(profile, params.rho_min, params.delta_min)
    t3 = time.perf_counter()
    stats = {"cells": len(grid), "unresolved": len(heads), "fallback": fallback}
    return DpcResult(profile, clustering, {"density": t1 - t0, "dependency": t2 - t1, "labeling": t3 - t2}, stats)
