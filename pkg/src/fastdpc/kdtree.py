"""Array-backed kd-tree with range search, nearest neighbor and insertion.

The tree stores point ids; coordinates live in a caller-owned ``(n, d)``
array. All node data sits in flat arrays bundled in the ``TreeArrays``
namedtuple so that the search and insert kernels can run under numba without
the GIL. Several independent trees may share one ``TreeArrays`` (a forest),
each addressed by its root node.

Every node keeps a bounding box of the points below it; searches prune on
box distance, which stays correct after insertions without touching split
values. Insertions go to a leaf bucket; a full bucket is split, and a subtree
that has grown to more than twice the size it had when last built is rebuilt
balanced.
"""

from __future__ import annotations

from collections import namedtuple

import numba
import numpy as np

from .core import ContractError, as_dataset

LEAF_SIZE = 16

TreeArrays = namedtuple(
    "TreeArrays",
    [
        "dim",  # split dimension, -1 for leaves
        "val",  # split value
        "left",
        "right",
        "bucket",  # leaf -> bucket row
        "size",  # points currently below the node
        "built",  # points below the node when it was last (re)built
        "lo",  # (nodes, d) bounding box
        "hi",
        "bucket_ids",  # (buckets, leaf_size)
        "bucket_n",
        "meta",  # [n_nodes, n_buckets]
    ],
)

_jit = dict(nogil=True, cache=True)


@numba.njit(**_jit)
def _alloc(d, leaf_size, node_cap, bucket_cap):
    return TreeArrays(
        np.full(node_cap, -1, np.int64),
        np.zeros(node_cap),
        np.full(node_cap, -1, np.int64),
        np.full(node_cap, -1, np.int64),
        np.full(node_cap, -1, np.int64),
        np.zeros(node_cap, np.int64),
        np.zeros(node_cap, np.int64),
        np.full((node_cap, d), np.inf),
        np.full((node_cap, d), -np.inf),
        np.full((bucket_cap, leaf_size), -1, np.int64),
        np.zeros(bucket_cap, np.int64),
        np.zeros(2, np.int64),
    )


@numba.njit(**_jit)
def _reserve(t, extra_nodes, extra_buckets):
    n_nodes = t.meta[0]
    n_buckets = t.meta[1]
    node_cap = t.dim.shape[0]
    bucket_cap = t.bucket_n.shape[0]
    if n_nodes + extra_nodes <= node_cap and n_buckets + extra_buckets <= bucket_cap:
        return t
    new_nodes = max(node_cap, 1)
    while new_nodes < n_nodes + extra_nodes:
        new_nodes *= 2
    new_buckets = max(bucket_cap, 1)
    while new_buckets < n_buckets + extra_buckets:
        new_buckets *= 2
    g = _alloc(t.lo.shape[1], t.bucket_ids.shape[1], new_nodes, new_buckets)
    g.dim[:n_nodes] = t.dim[:n_nodes]
    g.val[:n_nodes] = t.val[:n_nodes]
    g.left[:n_nodes] = t.left[:n_nodes]
    g.right[:n_nodes] = t.right[:n_nodes]
    g.bucket[:n_nodes] = t.bucket[:n_nodes]
    g.size[:n_nodes] = t.size[:n_nodes]
    g.built[:n_nodes] = t.built[:n_nodes]
    g.lo[:n_nodes] = t.lo[:n_nodes]
    g.hi[:n_nodes] = t.hi[:n_nodes]
    g.bucket_ids[:n_buckets] = t.bucket_ids[:n_buckets]
    g.bucket_n[:n_buckets] = t.bucket_n[:n_buckets]
    g.meta[0] = n_nodes
    g.meta[1] = n_buckets
    return g


@numba.njit(**_jit)
def _new_leaf(t):
    node = t.meta[0]
    t.meta[0] += 1
    bk = t.meta[1]
    t.meta[1] += 1
    t.dim[node] = -1
    t.left[node] = -1
    t.right[node] = -1
    t.bucket[node] = bk
    t.bucket_n[bk] = 0
    t.size[node] = 0
    t.built[node] = 0
    t.lo[node, :] = np.inf
    t.hi[node, :] = -np.inf
    return node


@numba.njit(**_jit)
def _build(t, coords, ids):
    """Bulk-build a balanced subtree over ``ids`` (reordered in place).

    Returns ``(t, root)``; ``t`` may be reallocated.
    """
    m = ids.shape[0]
    d = coords.shape[1]
    leaf_size = t.bucket_ids.shape[1]
    t = _reserve(t, 2 * m + 1, m + 1)
    root = t.meta[0]
    t.meta[0] += 1
    st_node = np.empty(64, np.int64)
    st_a = np.empty(64, np.int64)
    st_b = np.empty(64, np.int64)
    sp = 0
    st_node[0] = root
    st_a[0] = 0
    st_b[0] = m
    sp = 1
    while sp > 0:
        sp -= 1
        node = st_node[sp]
        a = st_a[sp]
        b = st_b[sp]
        for k in range(d):
            lo = np.inf
            hi = -np.inf
            for i in range(a, b):
                x = coords[ids[i], k]
                if x < lo:
                    lo = x
                if x > hi:
                    hi = x
            t.lo[node, k] = lo
            t.hi[node, k] = hi
        t.size[node] = b - a
        t.built[node] = b - a
        if b - a <= leaf_size:
            bk = t.meta[1]
            t.meta[1] += 1
            t.dim[node] = -1
            t.left[node] = -1
            t.right[node] = -1
            t.bucket[node] = bk
            for i in range(a, b):
                t.bucket_ids[bk, i - a] = ids[i]
            t.bucket_n[bk] = b - a
            continue
        # widest-spread dimension
        best_k = 0
        best_w = -1.0
        for k in range(d):
            w = t.hi[node, k] - t.lo[node, k]
            if w > best_w:
                best_w = w
                best_k = k
        seg = ids[a:b].copy()
        vals = np.empty(b - a)
        for i in range(b - a):
            vals[i] = coords[seg[i], best_k]
        order = np.argsort(vals, kind="mergesort")
        for i in range(b - a):
            ids[a + i] = seg[order[i]]
        half = (b - a) // 2
        split = vals[order[half - 1]]
        # equal coordinates go left when that keeps both sides non-empty
        cut = a + half
        while cut < b and coords[ids[cut], best_k] == split:
            cut += 1
        if cut == b:
            cut = a + half
        t.dim[node] = best_k
        t.val[node] = split
        t.bucket[node] = -1
        left = t.meta[0]
        right = left + 1
        t.meta[0] += 2
        t.left[node] = left
        t.right[node] = right
        if sp + 2 > st_node.shape[0]:
            st_node = np.concatenate((st_node, np.empty(st_node.shape[0], np.int64)))
            st_a = np.concatenate((st_a, np.empty(st_a.shape[0], np.int64)))
            st_b = np.concatenate((st_b, np.empty(st_b.shape[0], np.int64)))
        st_node[sp] = left
        st_a[sp] = a
        st_b[sp] = cut
        st_node[sp + 1] = right
        st_a[sp + 1] = cut
        st_b[sp + 1] = b
        sp += 2
    return t, root


@numba.njit(**_jit)
def _collect(t, root):
    out = np.empty(t.size[root], np.int64)
    k = 0
    stack = [root]
    while len(stack) > 0:
        node = stack.pop()
        if t.dim[node] == -1:
            bk = t.bucket[node]
            for i in range(t.bucket_n[bk]):
                out[k] = t.bucket_ids[bk, i]
                k += 1
        else:
            stack.append(t.left[node])
            stack.append(t.right[node])
    return out[:k]


@numba.njit(**_jit)
def _insert(t, coords, root, pid):
    """Insert point ``pid`` below ``root``; returns ``(t, new_root)``."""
    leaf_size = t.bucket_ids.shape[1]
    d = coords.shape[1]
    path = [root]
    node = root
    while True:
        t.size[node] += 1
        for k in range(d):
            x = coords[pid, k]
            if x < t.lo[node, k]:
                t.lo[node, k] = x
            if x > t.hi[node, k]:
                t.hi[node, k] = x
        if t.dim[node] == -1:
            break
        if coords[pid, t.dim[node]] <= t.val[node]:
            node = t.left[node]
        else:
            node = t.right[node]
        path.append(node)
    bk = t.bucket[node]
    if t.bucket_n[bk] < leaf_size:
        t.bucket_ids[bk, t.bucket_n[bk]] = pid
        t.bucket_n[bk] += 1
    else:
        ids = np.empty(leaf_size + 1, np.int64)
        ids[:leaf_size] = t.bucket_ids[bk]
        ids[leaf_size] = pid
        t, sub = _build(t, coords, ids)
        _replace(t, path, len(path) - 1, sub)
        path[len(path) - 1] = sub
    # rebuild the highest subtree that doubled since its last build
    for i in range(len(path)):
        node = path[i]
        if t.size[node] > 2 * t.built[node] and t.size[node] > leaf_size:
            ids = _collect(t, node)
            t, sub = _build(t, coords, ids)
            _replace(t, path, i, sub)
            path[i] = sub
            break
    return t, path[0]


@numba.njit(**_jit)
def _replace(t, path, i, sub):
    if i > 0:
        parent = path[i - 1]
        if t.left[parent] == path[i]:
            t.left[parent] = sub
        else:
            t.right[parent] = sub


@numba.njit(inline="always", **_jit)
def _dist2(coords, pid, q):
    s = 0.0
    for k in range(q.shape[0]):
        diff = coords[pid, k] - q[k]
        s += diff * diff
    return s


@numba.njit(inline="always", **_jit)
def _box_min2(t, node, q):
    s = 0.0
    for k in range(q.shape[0]):
        lo = t.lo[node, k]
        hi = t.hi[node, k]
        x = q[k]
        if x < lo:
            diff = lo - x
        elif x > hi:
            diff = x - hi
        else:
            diff = 0.0
        s += diff * diff
    return s


@numba.njit(inline="always", **_jit)
def _box_max2(t, node, q):
    s = 0.0
    for k in range(q.shape[0]):
        a = q[k] - t.lo[node, k]
        b = t.hi[node, k] - q[k]
        if a < 0:
            a = -a
        if b < 0:
            b = -b
        diff = a if a > b else b
        s += diff * diff
    return s


@numba.njit(**_jit)
def range_count(t, coords, root, q, r):
    """Number of stored points ``p`` with ``dist(q, p) < r``."""
    count = 0
    stack = np.empty(128, np.int64)
    stack[0] = root
    sp = 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        if t.size[node] == 0 or np.sqrt(_box_min2(t, node, q)) >= r:
            continue
        if np.sqrt(_box_max2(t, node, q)) < r:
            count += t.size[node]
            continue
        if t.dim[node] == -1:
            bk = t.bucket[node]
            for i in range(t.bucket_n[bk]):
                if np.sqrt(_dist2(coords, t.bucket_ids[bk, i], q)) < r:
                    count += 1
        else:
            if sp + 2 > stack.shape[0]:
                stack = np.concatenate((stack, np.empty(stack.shape[0], np.int64)))
            stack[sp] = t.left[node]
            stack[sp + 1] = t.right[node]
            sp += 2
    return count


@numba.njit(**_jit)
def range_collect(t, coords, root, q, r, out, k):
    """Append ids of stored points within ``r`` (strict) to ``out[k:]``.

    Returns ``(out, k)``; ``out`` grows as needed.
    """
    stack = np.empty(128, np.int64)
    stack[0] = root
    sp = 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        if t.size[node] == 0 or np.sqrt(_box_min2(t, node, q)) >= r:
            continue
        if t.dim[node] == -1:
            bk = t.bucket[node]
            need = k + t.bucket_n[bk]
            if need > out.shape[0]:
                grown = np.empty(max(2 * out.shape[0], need), np.int64)
                grown[:k] = out[:k]
                out = grown
            inside = np.sqrt(_box_max2(t, node, q)) < r
            for i in range(t.bucket_n[bk]):
                pid = t.bucket_ids[bk, i]
                if inside or np.sqrt(_dist2(coords, pid, q)) < r:
                    out[k] = pid
                    k += 1
        else:
            if sp + 2 > stack.shape[0]:
                stack = np.concatenate((stack, np.empty(stack.shape[0], np.int64)))
            stack[sp] = t.left[node]
            stack[sp + 1] = t.right[node]
            sp += 2
    return out, k


@numba.njit(**_jit)
def nearest(t, coords, root, q, best_d2, best_id):
    """Nearest stored point to ``q``, ties to the smaller id.

    Starts from the incumbent ``(best_d2, best_id)`` so several trees can be
    searched in sequence with a shrinking bound. Returns the updated pair.
    """
    stack = np.empty(128, np.int64)
    stack[0] = root
    sp = 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        if t.size[node] == 0 or _box_min2(t, node, q) > best_d2:
            continue
        if t.dim[node] == -1:
            bk = t.bucket[node]
            for i in range(t.bucket_n[bk]):
                pid = t.bucket_ids[bk, i]
                d2 = _dist2(coords, pid, q)
                if d2 < best_d2 or (d2 == best_d2 and pid < best_id):
                    best_d2 = d2
                    best_id = pid
        else:
            if sp + 2 > stack.shape[0]:
                stack = np.concatenate((stack, np.empty(stack.shape[0], np.int64)))
            if q[t.dim[node]] <= t.val[node]:
                near, far = t.left[node], t.right[node]
            else:
                near, far = t.right[node], t.left[node]
            stack[sp] = far
            stack[sp + 1] = near
            sp += 2
    return best_d2, best_id


@numba.njit(**_jit)
def build_forest(coords, groups, offsets, leaf_size):
    """Bulk-build one tree per id group ``groups[offsets[j]:offsets[j+1]]``.

    Returns the shared arrays and the root of each tree.
    """
    n_groups = offsets.shape[0] - 1
    m = groups.shape[0]
    t = _alloc(coords.shape[1], leaf_size, 2 * m + 2 * n_groups + 1, m + n_groups + 1)
    roots = np.empty(n_groups, np.int64)
    for j in range(n_groups):
        ids = groups[offsets[j] : offsets[j + 1]].copy()
        if ids.shape[0] == 0:
            t = _reserve(t, 1, 1)
            roots[j] = _new_leaf(t)
        else:
            t, roots[j] = _build(t, coords, ids)
    return t, roots


@numba.njit(**_jit)
def empty_tree(d, leaf_size, capacity):
    t = _alloc(d, leaf_size, max(2 * capacity // leaf_size + 4, 4), max(capacity // leaf_size + 4, 4))
    root = _new_leaf(t)
    return t, root


class KdTree:
    """kd-tree over rows of a coordinate array.

    Build over all rows (or a subset of ids) with ``KdTree(coords)``, or
    start empty and ``insert`` ids one at a time.

    >>> X = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    >>> t = KdTree(X)
    >>> t.range_search([0.0, 0.0], 1.5).tolist()
    [0, 1]
    >>> t.nearest_neighbor([1.8, 0.1])
    2
    """

    def __init__(self, coords, ids=None, leaf_size: int = LEAF_SIZE):
        self.coords = as_dataset(coords)
        if leaf_size < 1:
            raise ContractError("leaf_size must be >= 1")
        self.leaf_size = leaf_size
        n = self.coords.shape[0]
        self.d = self.coords.shape[1] if n else max(self.coords.shape[1], 1)
        self._present = np.zeros(n, dtype=bool)
        if ids is None:
            ids = np.arange(n, dtype=np.int64)
        ids = np.asarray(ids, dtype=np.int64)
        if len(np.unique(ids)) != len(ids):
            raise ContractError("duplicate ids")
        if len(ids) == 0:
            self._t, self.root = empty_tree(self.d, leaf_size, max(n, 1))
        else:
            self._t, roots = build_forest(
                self.coords, ids, np.array([0, len(ids)], np.int64), leaf_size
            )
            self.root = int(roots[0])
        self._present[ids] = True

    @classmethod
    def empty(cls, coords, leaf_size: int = LEAF_SIZE) -> "KdTree":
        return cls(coords, ids=np.empty(0, np.int64), leaf_size=leaf_size)

    def __len__(self) -> int:
        return int(self._t.size[self.root])

    def _query(self, q) -> np.ndarray:
        q = np.ascontiguousarray(q, dtype=np.float64).ravel()
        if q.shape[0] != self.d:
            raise ContractError(f"query has {q.shape[0]} dims, tree has {self.d}")
        return q

    def range_search(self, q, r: float) -> np.ndarray:
        """Sorted ids of stored points strictly closer than ``r`` to ``q``."""
        q = self._query(q)
        if r < 0:
            raise ContractError("radius must be >= 0")
        out, k = range_collect(self._t, self.coords, self.root, q, float(r), np.empty(16, np.int64), 0)
        return np.sort(out[:k])

    def range_count(self, q, r: float) -> int:
        q = self._query(q)
        if r < 0:
            raise ContractError("radius must be >= 0")
        return int(range_count(self._t, self.coords, self.root, q, float(r)))

    def nearest_neighbor(self, q):
        """Id of the closest stored point (smallest id on ties); None if empty."""
        q = self._query(q)
        _, best = nearest(self._t, self.coords, self.root, q, np.inf, -1)
        return None if best < 0 else int(best)

    def insert(self, pid: int) -> None:
        """Add row ``pid`` of the coordinate array to the tree."""
        pid = int(pid)
        if not 0 <= pid < len(self._present):
            raise ContractError(f"id {pid} outside the coordinate array")
        if self._present[pid]:
            raise ContractError(f"id {pid} already stored")
        self._t, root = _insert(self._t, self.coords, self.root, pid)
        self.root = int(root)
        self._present[pid] = True

    def ids(self) -> np.ndarray:
        """All stored ids, sorted."""
        return np.sort(_collect(self._t, self.root))

    def depth(self) -> int:
        t = self._t
        best = 0
        stack = [(self.root, 1)]
        while stack:
            node, depth = stack.pop()
            best = max(best, depth)
            if t.dim[node] != -1:
                stack.append((int(t.left[node]), depth + 1))
                stack.append((int(t.right[node]), depth + 1))
        return best
