"""Synthetic dataset generators and plain-text point/label IO."""

from __future__ import annotations

import math
import re

import numpy as np

from .core import INFINITE, ContractError, DensityProfile

DOMAIN = 1e5

_SPLIT = re.compile(r"[,\s]+")


class DatasetParseError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


def generate_gaussian(k: int, n: int, d: int, spread: float, seed: int = 0, min_separation: float = 0.0):
    """Isotropic Gaussian blobs around ``k`` random centers in ``[0, 1e5]^d``.

    Points are split as evenly as possible (earlier clusters get the
    remainder). With ``min_separation`` > 0, centers are redrawn until every
    pair is at least that far apart.

    Returns ``(points, labels, centers)``.
    """
    if k < 1 or n < k:
        raise ContractError(f"need k >= 1 and n >= k, got k={k}, n={n}")
    rng = np.random.default_rng(seed)
    centers = np.empty((k, d))
    placed = 0
    attempts = 0
    while placed < k:
        c = rng.uniform(0.0, DOMAIN, d)
        attempts += 1
        if placed and min_separation > 0:
            if np.min(np.linalg.norm(centers[:placed] - c, axis=1)) < min_separation:
                if attempts > 10000 * k:
                    raise ContractError("could not place centers at the requested separation")
                continue
        centers[placed] = c
        placed += 1
    sizes = np.full(k, n // k)
    sizes[: n % k] += 1
    labels = np.repeat(np.arange(k), sizes)
    points = centers[labels] + rng.normal(0.0, spread, (n, d))
    return points, labels, centers


def generate_random_walk(
    n: int,
    d: int,
    seed: int = 0,
    points_per_step: int = 100,
    step: float = 100.0,
    radius: float = 200.0,
    restarts: float = 10.0,
    noise_rate: float = 0.001,
) -> np.ndarray:
    """Points scattered around a random walker, clipped to ``[0, 1e5]^d``.

    The walker emits ``points_per_step`` points uniformly in a ball of
    ``radius`` around itself, then moves ``step`` in a random direction. It
    jumps to a uniform random location ``restarts`` times on average over the
    whole walk, which separates the trajectory into dense strands. A
    ``noise_rate`` fraction of points is uniform over the domain.
    """
    if n < 1:
        raise ContractError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    n_noise = int(round(noise_rate * n)) if n > 1 else 0
    n_walk = n - n_noise
    moves = max(1, math.ceil(n_walk / points_per_step))
    pos = rng.uniform(0.0, DOMAIN, d)
    anchors = np.empty((moves, d))
    jump_p = min(1.0, restarts / moves)
    for i in range(moves):
        anchors[i] = pos
        if rng.random() < jump_p:
            pos = rng.uniform(0.0, DOMAIN, d)
        else:
            v = rng.normal(size=d)
            pos = np.clip(pos + step * v / np.linalg.norm(v), 0.0, DOMAIN)
    owner = np.arange(n_walk) // points_per_step
    direction = rng.normal(size=(n_walk, d))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    r = radius * rng.random(n_walk) ** (1.0 / d)
    walk = anchors[owner] + direction * r[:, None]
    noise = rng.uniform(0.0, DOMAIN, (n_noise, d))
    points = np.clip(np.concatenate([walk, noise]), 0.0, DOMAIN)
    return points[rng.permutation(n)]


def load_dataset(path) -> np.ndarray:
    """Read one point per line (comma- or whitespace-separated floats).

    A first line whose leading token is not a number is taken as a header.
    Blank lines are skipped. Ids follow line order.
    """
    rows = []
    dim = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            tokens = [t for t in _SPLIT.split(text) if t]
            try:
                values = [float(t) for t in tokens]
            except ValueError:
                if not rows and dim is None:
                    dim = -1  # header seen
                    continue
                raise DatasetParseError(lineno, f"non-numeric value in {text!r}") from None
            if dim is None or dim == -1:
                dim = len(values)
            elif len(values) != dim:
                raise DatasetParseError(lineno, f"expected {dim} values, got {len(values)}")
            rows.append(values)
    if not rows:
        return np.empty((0, 0))
    return np.array(rows, dtype=np.float64)


def save_dataset(points, path) -> None:
    np.savetxt(path, np.asarray(points, dtype=np.float64), fmt="%.17g", delimiter=",")


def _fmt(x: float) -> str:
    if np.isnan(x):
        return ""
    if x >= INFINITE:
        return "inf"
    return repr(float(x))


def export_decision_graph(profile: DensityProfile, path) -> None:
    """Write ``id,rho,delta`` rows; the global peak's delta is ``inf`` and
    points without a density have an empty rho field."""
    with open(path, "w") as fh:
        fh.write("id,rho,delta\n")
        for i, (r, dl) in enumerate(zip(profile.rho.tolist(), profile.delta.tolist())):
            fh.write(f"{i},{_fmt(r)},{_fmt(dl)}\n")


def save_labels(labels, path) -> None:
    with open(path, "w") as fh:
        fh.write("id,label\n")
        fh.writelines(f"{i},{int(v)}\n" for i, v in enumerate(labels))


def load_labels(path) -> np.ndarray:
    data = load_dataset(path)
    if data.size == 0:
        return np.empty(0, dtype=np.int64)
    if data.shape[1] == 1:
        return data[:, 0].astype(np.int64)
    ids = data[:, 0].astype(np.int64)
    labels = np.empty(len(ids), dtype=np.int64)
    if not np.array_equal(np.sort(ids), np.arange(len(ids))):
        raise ContractError("label file ids must be 0..n-1")
    labels[ids] = data[:, 1].astype(np.int64)
    return labels
