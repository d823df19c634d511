"""Shared domain types, distance, density jitter and clustering comparison."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

# Sentinel dependent distance of the global density maximum.
INFINITE = float(np.finfo(np.float64).max)

NOISE = -1
UNASSIGNED = -2
NO_DEP = -1


class ContractError(ValueError):
    """Raised when a caller violates an operation's preconditions."""


class Point(NamedTuple):
    id: int
    coords: tuple[float, ...]


def as_dataset(points) -> np.ndarray:
    """Return ``points`` as a C-contiguous ``(n, d)`` float64 array.

    Row ``i`` is the point with id ``i``.
    """
    X = np.ascontiguousarray(points, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1) if X.size else X.reshape(0, 0)
    if X.ndim != 2:
        raise ContractError(f"dataset must be 2-d, got shape {X.shape}")
    if X.shape[0] and X.shape[1] < 1:
        raise ContractError("points need at least one dimension")
    return X


def distance(a, b) -> float:
    """Euclidean distance between two coordinate vectors (or ``Point``\\ s)."""
    if isinstance(a, Point):
        a = a.coords
    if isinstance(b, Point):
        b = b.coords
    if len(a) != len(b):
        raise ContractError(f"dimension mismatch: {len(a)} vs {len(b)}")
    s = 0.0
    for x, y in zip(a, b):
        diff = float(x) - float(y)
        s += diff * diff
    return math.sqrt(s)


def jitter(base_count, idx, n):
    """Tie-breaking density: ``base_count + (idx + 1) / (n + 1)``.

    Works elementwise on arrays. The offset lies strictly inside (0, 1), so
    densities become pairwise distinct while integer counts still dominate.
    """
    if np.isscalar(idx):
        if not 0 <= idx < n:
            raise ContractError(f"id {idx} outside [0, {n})")
        return base_count + (idx + 1) / (n + 1)
    idx = np.asarray(idx, dtype=np.int64)
    return np.asarray(base_count, dtype=np.float64) + (idx + 1) / (n + 1)


def jitter_counts(counts: np.ndarray) -> np.ndarray:
    """Jitter a full per-point count array (ids are the array positions)."""
    n = len(counts)
    return counts.astype(np.float64) + (np.arange(n, dtype=np.int64) + 1) / (n + 1)


@dataclass(frozen=True)
class DpcParams:
    """Clustering parameters.

    ``delta_min`` must exceed ``d_cut``; ``epsilon`` is only read by
    S-Approx-DPC.
    """

    d_cut: float
    rho_min: float = 0.0
    delta_min: float = math.inf
    epsilon: float = 1.0
    threads: int = 1
    seed: int = 0

    def __post_init__(self):
        if not self.d_cut > 0:
            raise ContractError(f"d_cut must be > 0, got {self.d_cut}")
        if not self.delta_min > self.d_cut:
            raise ContractError(
                f"delta_min ({self.delta_min}) must be greater than d_cut ({self.d_cut})"
            )
        if not self.epsilon > 0:
            raise ContractError(f"epsilon must be > 0, got {self.epsilon}")
        if self.threads < 1:
            raise ContractError(f"threads must be >= 1, got {self.threads}")


@dataclass
class DensityProfile:
    """Per-point local density, dependent point and dependent distance.

    ``rho`` is NaN for points that carry no density (unpicked S-Approx-DPC
    points), ``dep`` is ``NO_DEP`` where undecided or for the global peak, and
    ``delta`` is ``INFINITE`` for the global peak.
    """

    rho: np.ndarray
    dep: np.ndarray = field(default=None)
    delta: np.ndarray = field(default=None)

    def __post_init__(self):
        n = len(self.rho)
        if self.dep is None:
            self.dep = np.full(n, NO_DEP, dtype=np.int64)
        if self.delta is None:
            self.delta = np.full(n, np.nan)

    def __len__(self):
        return len(self.rho)


@dataclass
class Clustering:
    labels: np.ndarray
    centers: np.ndarray

    @property
    def n_clusters(self) -> int:
        return len(self.centers)

    @property
    def n_noise(self) -> int:
        return int(np.count_nonzero(self.labels == NOISE))


def rand_index(a: Sequence[int], b: Sequence[int]) -> float:
    """Fraction of point pairs on which two labelings agree.

    A pair agrees when both labelings put it in the same group or both put it
    in different groups. Every label value, including ``NOISE`` and
    ``UNASSIGNED``, is an ordinary group.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ContractError(f"label length mismatch: {a.shape} vs {b.shape}")
    n = a.size
    if n < 2:
        return 1.0
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    joint = ia.astype(np.int64) * (ib.max() + 1) + ib
    _, nij = np.unique(joint, return_counts=True)
    ai = np.bincount(ia)
    bj = np.bincount(ib)

    def pairs(c):
        c = c.astype(np.float64)
        return float(np.sum(c * (c - 1) / 2))

    total = n * (n - 1) / 2
    same_both = pairs(nij)
    agree = total + 2 * same_both - pairs(ai) - pairs(bj)
    return agree / total
