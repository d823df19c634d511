"""Uniform grid of non-empty cells over a point set."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import ContractError, as_dataset


@dataclass
class Cell:
    key: tuple
    members: list
    pstar: Optional[int] = None
    min_rho: Optional[float] = None
    neighbors: list = field(default_factory=list)


class Grid:
    """Cells of side ``side`` keyed by ``floor(coord / side)``.

    Cells are numbered in lexicographic key order, so "the smallest
    qualifying cell" is simply the smallest cell index. Membership is stored
    CSR-style: cell ``c`` holds ``members[starts[c]:starts[c + 1]]``, ids
    ascending.

    Per-cell metadata (``pstar``, ``min_rho``, neighbor lists) is filled in by
    the clustering algorithms: ``pstar`` is either the densest member or, for
    sampled grids, the picked representative.
    """

    def __init__(self, side: float, keys, cell_of, starts, members):
        self.side = side
        self.keys = keys
        self.cell_of = cell_of
        self.starts = starts
        self.members = members
        m = len(keys)
        self.pstar = np.full(m, -1, dtype=np.int64)
        self.min_rho = np.full(m, np.nan)
        self.nb_starts = np.zeros(m + 1, dtype=np.int64)
        self.nb = np.empty(0, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.keys)

    @property
    def sizes(self) -> np.ndarray:
        return np.diff(self.starts)

    def cell_members(self, c: int) -> np.ndarray:
        return self.members[self.starts[c] : self.starts[c + 1]]

    def neighbors(self, c: int) -> np.ndarray:
        return self.nb[self.nb_starts[c] : self.nb_starts[c + 1]]

    def centers(self) -> np.ndarray:
        return (self.keys + 0.5) * self.side

    def index_of(self, key) -> int:
        key = np.asarray(key, dtype=np.int64)
        lo, hi = 0, len(self.keys)
        # binary search on lexicographically sorted keys
        while lo < hi:
            mid = (lo + hi) // 2
            if tuple(self.keys[mid]) < tuple(key):
                lo = mid + 1
            else:
                hi = mid
        if lo < len(self.keys) and np.array_equal(self.keys[lo], key):
            return lo
        raise KeyError(tuple(key.tolist()))

    def set_neighbors(self, pairs: np.ndarray) -> None:
        """Install neighbor lists from ``(cell, neighbor)`` rows (duplicates ok)."""
        m = len(self.keys)
        if len(pairs):
            code = np.unique(pairs[:, 0].astype(np.int64) * m + pairs[:, 1])
            self.nb = code % m
            self.nb_starts = np.concatenate(([0], np.cumsum(np.bincount(code // m, minlength=m)))).astype(np.int64)
        else:
            self.nb = np.empty(0, dtype=np.int64)
            self.nb_starts = np.zeros(m + 1, dtype=np.int64)

    def cell(self, c: int) -> Cell:
        return Cell(
            key=tuple(int(v) for v in self.keys[c]),
            members=self.cell_members(c).tolist(),
            pstar=None if self.pstar[c] < 0 else int(self.pstar[c]),
            min_rho=None if np.isnan(self.min_rho[c]) else float(self.min_rho[c]),
            neighbors=[tuple(int(v) for v in self.keys[j]) for j in self.neighbors(c)],
        )

    @property
    def cells(self) -> dict:
        return {tuple(int(v) for v in self.keys[c]): self.cell(c) for c in range(len(self))}


def build_grid(points, side: float) -> Grid:
    if not side > 0:
        raise ContractError(f"cell side must be > 0, got {side}")
    X = as_dataset(points)
    n = X.shape[0]
    d = X.shape[1] if n else 0
    if n == 0:
        return Grid(side, np.empty((0, d), np.int64), np.empty(0, np.int64), np.zeros(1, np.int64), np.empty(0, np.int64))
    raw = np.floor(X / side).astype(np.int64)
    keys, cell_of = _unique_rows(raw)
    members = np.argsort(cell_of, kind="stable").astype(np.int64)
    starts = np.concatenate(([0], np.cumsum(np.bincount(cell_of, minlength=len(keys))))).astype(np.int64)
    return Grid(side, keys.astype(np.int64), cell_of, starts, members)


def _unique_rows(raw: np.ndarray):
    """Lexicographically sorted distinct rows and each row's position."""
    low = raw.min(axis=0)
    span = raw.max(axis=0) - low + 1
    if np.prod(span.astype(np.float64)) < 2.0**62:
        # mixed-radix code, first dimension most significant
        code = np.zeros(len(raw), dtype=np.int64)
        for k in range(raw.shape[1]):
            code = code * span[k] + (raw[:, k] - low[k])
        uniq, first, inverse = np.unique(code, return_index=True, return_inverse=True)
        return raw[first], inverse.reshape(-1).astype(np.int64)
    keys, inverse = np.unique(raw, axis=0, return_inverse=True)
    return keys, inverse.reshape(-1).astype(np.int64)


def approx_side(d_cut: float, d: int) -> float:
    """Cell side whose diagonal equals ``d_cut``."""
    return d_cut / math.sqrt(d)


def sampled_side(d_cut: float, d: int, epsilon: float) -> float:
    """Cell side whose diagonal equals ``epsilon * d_cut``."""
    return epsilon * d_cut / math.sqrt(d)


def neighbor_cells_from_result(grid: Grid, c: int, result) -> list:
    """Keys of the cells, other than ``c``, that contain points of ``result``.

    ``result`` is the ``d_cut`` range-search result around the cell's
    representative. Keys come back in lexicographic order.
    """
    result = np.asarray(result, dtype=np.int64)
    cells = np.unique(grid.cell_of[result]) if len(result) else np.empty(0, np.int64)
    return [tuple(int(v) for v in grid.keys[j]) for j in cells if j != c]


def max_neighbor_cells(d: int) -> int:
    """Upper bound on cells a ``d_cut``-ball can touch when side = d_cut/sqrt(d)."""
    return math.ceil(2 * math.sqrt(d) + 1) ** d
