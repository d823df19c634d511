"""Static and dynamic work distribution over a pool of threads.

The heavy kernels release the GIL, so plain threads give real parallelism.
"""

from __future__ import annotations

import heapq
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .core import ContractError


class CostedTask(NamedTuple):
    id: int
    cost: float


def greedy_partition(tasks: Sequence[CostedTask], t: int) -> list[list[int]]:
    """Longest-processing-time-first list scheduling.

    Tasks are taken in descending cost (ties by id) and each goes to the
    currently least-loaded thread (ties to the lowest thread index).
    """
    if t < 1:
        raise ContractError(f"thread count must be >= 1, got {t}")
    ordered = sorted(tasks, key=lambda task: (-task.cost, task.id))
    parts: list[list[int]] = [[] for _ in range(t)]
    heap = [(0.0, i) for i in range(t)]
    for task in ordered:
        if task.cost < 0:
            raise ContractError(f"task {task.id} has negative cost")
        load, i = heapq.heappop(heap)
        parts[i].append(task.id)
        heapq.heappush(heap, (load + task.cost, i))
    return parts


def greedy_partition_array(costs: np.ndarray, t: int) -> list[np.ndarray]:
    """``greedy_partition`` over ``range(len(costs))``, returning id arrays."""
    if t < 1:
        raise ContractError(f"thread count must be >= 1, got {t}")
    costs = np.asarray(costs, dtype=np.float64)
    if t == 1:
        return [np.arange(len(costs), dtype=np.int64)]
    order = np.lexsort((np.arange(len(costs)), -costs))
    parts: list[list[int]] = [[] for _ in range(t)]
    heap = [(0.0, i) for i in range(t)]
    for task in order.tolist():
        load, i = heapq.heappop(heap)
        parts[i].append(task)
        heapq.heappush(heap, (load + costs[task], i))
    return [np.sort(np.array(p, dtype=np.int64)) for p in parts]


def makespan(parts: Sequence[Sequence[int]], costs) -> float:
    costs = np.asarray(costs, dtype=np.float64)
    return max((float(costs[list(p)].sum()) if len(p) else 0.0) for p in parts)


def cost_dep(m: int, has_mixed: bool, n: int, s: int, d: int) -> float:
    """Estimated cost of an exact dependent-point search.

    ``m`` is the number of density-sorted subsets that may hold the dependent
    point and ``has_mixed`` says whether one of them straddles the point's
    density (and must be scanned in full).
    """
    if m <= 0:
        return 0.0
    per = n / s
    tree_cost = per ** (1.0 - 1.0 / d)
    if has_mixed:
        return per + (m - 1) * tree_cost
    return m * tree_cost


def run_static(fn: Callable, parts: Sequence, threads: int) -> list:
    """Call ``fn(part)`` for each part, one part per thread."""
    if threads <= 1 or len(parts) <= 1:
        return [fn(p) for p in parts]
    with ThreadPoolExecutor(max_workers=min(threads, len(parts))) as pool:
        return list(pool.map(fn, parts))


def run_dynamic(fn: Callable[[int, int], object], n_items: int, threads: int, chunk: int = 256) -> list:
    """Dynamic pull: idle workers claim the next ``chunk`` items.

    ``fn(start, stop)`` processes items ``[start, stop)``. Results are
    returned in item order.
    """
    starts = list(range(0, n_items, chunk))
    if threads <= 1 or len(starts) <= 1:
        return [fn(a, min(a + chunk, n_items)) for a in starts]
    results: list = [None] * len(starts)
    cursor = [0]
    lock = threading.Lock()

    def worker():
        while True:
            with lock:
                j = cursor[0]
                cursor[0] += 1
            if j >= len(starts):
                return
            a = starts[j]
            results[j] = fn(a, min(a + chunk, n_items))

    with ThreadPoolExecutor(max_workers=threads) as pool:
        for f in [pool.submit(worker) for _ in range(threads)]:
            f.result()
    return results


def split_even(n_items: int, threads: int) -> list[tuple[int, int]]:
    bounds = np.linspace(0, n_items, max(threads, 1) + 1).astype(np.int64)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
