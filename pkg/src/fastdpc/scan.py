"""Quadratic reference implementation, plus the label propagation all
algorithms share.

Everything here favours obviousness over speed; the other algorithms are
tested against it.
"""

from __future__ import annotations

import time

import numba
import numpy as np

from .core import INFINITE, NO_DEP, NOISE, UNASSIGNED, Clustering, DensityProfile, as_dataset, jitter_counts
from .result import DpcResult

_BLOCK = 256


def pairwise_dist_block(X: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Distances from ``X[rows]`` to every point, summed dimension by dimension."""
    d2 = np.zeros((len(rows), X.shape[0]))
    for k in range(X.shape[1]):
        diff = X[None, :, k] - X[rows, k][:, None]
        d2 += diff * diff
    return d2


def scan_densities(points, d_cut: float) -> DensityProfile:
    X = as_dataset(points)
    n = X.shape[0]
    counts = np.zeros(n, dtype=np.int64)
    for a in range(0, n, _BLOCK):
        rows = np.arange(a, min(a + _BLOCK, n))
        counts[rows] = np.count_nonzero(np.sqrt(pairwise_dist_block(X, rows)) < d_cut, axis=1)
    return DensityProfile(rho=jitter_counts(counts))


def scan_dependencies(points, profile: DensityProfile) -> DensityProfile:
    """Nearest strictly-denser point of every point, by linear scan.

    Points are visited in descending density and each scans only the points
    before it in that order. Ties on distance go to the smaller id.
    """
    X = as_dataset(points)
    rho = profile.rho
    n = len(rho)
    order = np.argsort(-rho, kind="stable")
    dep = np.full(n, NO_DEP, dtype=np.int64)
    delta = np.full(n, np.nan)
    if n == 0:
        return DensityProfile(rho=rho.copy(), dep=dep, delta=delta)
    delta[order[0]] = INFINITE
    for r in range(1, n):
        i = order[r]
        higher = order[:r]
        d2 = np.zeros(r)
        for k in range(X.shape[1]):
            diff = X[higher, k] - X[i, k]
            d2 += diff * diff
        best = d2.min()
        j = higher[d2 == best].min()
        dep[i] = j
        delta[i] = np.sqrt(best)
    return DensityProfile(rho=rho.copy(), dep=dep, delta=delta)


@numba.njit(nogil=True, cache=True)
def _propagate(dep, is_noise, centers, labels):
    n = dep.shape[0]
    # reverse dependency edges as CSR
    counts = np.zeros(n + 1, np.int64)
    for i in range(n):
        if dep[i] >= 0:
            counts[dep[i] + 1] += 1
    for i in range(n):
        counts[i + 1] += counts[i]
    children = np.empty(counts[n], np.int64)
    fill = counts[:n].copy()
    for i in range(n):
        if dep[i] >= 0:
            children[fill[dep[i]]] = i
            fill[dep[i]] += 1
    is_center = np.zeros(n, np.bool_)
    for c in centers:
        is_center[c] = True
    stack = np.empty(n, np.int64)
    for k in range(centers.shape[0]):
        c = centers[k]
        labels[c] = k
        stack[0] = c
        sp = 1
        while sp > 0:
            sp -= 1
            node = stack[sp]
            for e in range(counts[node], counts[node + 1]):
                child = children[e]
                if is_noise[child] or is_center[child]:
                    continue
                labels[child] = k
                stack[sp] = child
                sp += 1
    return labels


def assign_labels(profile: DensityProfile, rho_min: float, delta_min: float) -> Clustering:
    """Pick noise and centers, then spread center labels down dependency edges.

    A point is noise when ``rho < rho_min`` and a center when it is not noise
    and ``delta >= delta_min``. Points with no density (NaN ``rho``) are
    never noise or centers. Propagation stops at noise points, so anything
    only reachable through noise stays ``UNASSIGNED``. Cluster ``k`` is rooted
    at ``centers[k]``; centers are listed in descending density.
    """
    rho = np.asarray(profile.rho, dtype=np.float64)
    delta = np.asarray(profile.delta, dtype=np.float64)
    n = len(rho)
    has_rho = ~np.isnan(rho)
    is_noise = has_rho & (rho < rho_min)
    is_center = has_rho & ~is_noise & (delta >= delta_min)
    centers = np.nonzero(is_center)[0]
    centers = centers[np.argsort(-rho[centers], kind="stable")].astype(np.int64)
    labels = np.full(n, UNASSIGNED, dtype=np.int64)
    labels[is_noise] = NOISE
    if n:
        _propagate(np.asarray(profile.dep, dtype=np.int64), is_noise, centers, labels)
    return Clustering(labels=labels, centers=centers)


def scan_run(points, params) -> DpcResult:
    """Densities, dependencies and labels by brute force."""
    t0 = time.perf_counter()
    profile = scan_densities(points, params.d_cut)
    t1 = time.perf_counter()
    profile = scan_dependencies(points, profile)
    t2 = time.perf_counter()
    clustering = assign_labels(profile, params.rho_min, params.delta_min)
    t3 = time.perf_counter()
    return DpcResult(profile, clustering, {"density": t1 - t0, "dependency": t2 - t1, "labeling": t3 - t2})
