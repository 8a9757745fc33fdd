"""Median-split KD-tree with exact nearest-neighbor queries.

Each internal node splits its cell along the axis of longest extent so the
two children hold ``floor(n/2)`` and ``ceil(n/2)`` points; leaves hold one
point. Queries descend to a leaf and backtrack into any sibling whose
splitting plane is not farther than the current best, so results are exact.
Ties are broken toward the lower point index.
"""
from __future__ import annotations

import numpy as np

from ._accel import USE_NUMBA, njit
from .errors import EmptyPointSet

_STACK = 128


@njit(cache=True)
def _build_loops(points):
    n = points.shape[0]
    m = 2 * n - 1
    perm = np.arange(n)
    lo = np.zeros(m, np.int64)
    hi = np.zeros(m, np.int64)
    left = np.full(m, -1, np.int64)
    right = np.full(m, -1, np.int64)
    axis = np.full(m, -1, np.int64)
    split = np.zeros(m)
    hi[0] = n
    count = 1
    stack = np.empty(m, np.int64)
    stack[0] = 0
    sp = 1
    key = np.empty(n)
    while sp > 0:
        sp -= 1
        node = stack[sp]
        a = lo[node]
        b = hi[node]
        if b - a == 1:
            continue
        best_ax = 0
        best_ext = -1.0
        for ax in range(3):
            mn = np.inf
            mx = -np.inf
            for k in range(a, b):
                val = points[perm[k], ax]
                if val < mn:
                    mn = val
                if val > mx:
                    mx = val
            if mx - mn > best_ext:
                best_ext = mx - mn
                best_ax = ax
        for k in range(a, b):
            key[k - a] = points[perm[k], best_ax]
        order = np.argsort(key[: b - a], kind="mergesort")
        sub = perm[a:b].copy()
        for k in range(b - a):
            perm[a + k] = sub[order[k]]
        mid = a + (b - a) // 2
        axis[node] = best_ax
        split[node] = 0.5 * (points[perm[mid - 1], best_ax] + points[perm[mid], best_ax])
        l = count
        r = count + 1
        count += 2
        left[node] = l
        right[node] = r
        lo[l] = a
        hi[l] = mid
        lo[r] = mid
        hi[r] = b
        stack[sp] = r
        stack[sp + 1] = l
        sp += 2
    return perm, lo, hi, left, right, axis, split


def _build_numpy(points):
    """Same tree as ``_build_loops`` using per-node numpy operations."""
    n = len(points)
    m = 2 * n - 1
    perm = np.arange(n)
    lo = np.zeros(m, np.int64)
    hi = np.zeros(m, np.int64)
    left = np.full(m, -1, np.int64)
    right = np.full(m, -1, np.int64)
    axis = np.full(m, -1, np.int64)
    split = np.zeros(m)
    hi[0] = n
    count = 1
    stack = [0]
    while stack:
        node = stack.pop()
        a, b = lo[node], hi[node]
        if b - a == 1:
            continue
        cell = points[perm[a:b]]
        ext = cell.max(axis=0) - cell.min(axis=0)
        ax = int(np.argmax(ext))
        order = np.argsort(cell[:, ax], kind="mergesort")
        perm[a:b] = perm[a:b][order]
        mid = a + (b - a) // 2
        axis[node] = ax
        split[node] = 0.5 * (points[perm[mid - 1], ax] + points[perm[mid], ax])
        l, r = count, count + 1
        count += 2
        left[node], right[node] = l, r
        lo[l], hi[l], lo[r], hi[r] = a, mid, mid, b
        stack.append(r)
        stack.append(l)
    return perm, lo, hi, left, right, axis, split


@njit(cache=True)
def _nearest_loops(points, perm, lo, left, right, axis, split, queries):
    nq = queries.shape[0]
    out_idx = np.empty(nq, np.int64)
    out_dist = np.empty(nq)
    st_node = np.empty(_STACK, np.int64)
    st_bound = np.empty(_STACK)
    for qi in range(nq):
        q0 = queries[qi, 0]
        q1 = queries[qi, 1]
        q2 = queries[qi, 2]
        best = np.inf
        best_i = -1
        st_node[0] = 0
        st_bound[0] = 0.0
        sp = 1
        while sp > 0:
            sp -= 1
            node = st_node[sp]
            if st_bound[sp] > best:
                continue
            while axis[node] >= 0:
                ax = axis[node]
                if ax == 0:
                    diff = q0 - split[node]
                elif ax == 1:
                    diff = q1 - split[node]
                else:
                    diff = q2 - split[node]
                if diff < 0.0:
                    near = left[node]
                    far = right[node]
                else:
                    near = right[node]
                    far = left[node]
                st_node[sp] = far
                st_bound[sp] = diff * diff
                sp += 1
                node = near
            i = perm[lo[node]]
            dx = q0 - points[i, 0]
            dy = q1 - points[i, 1]
            dz = q2 - points[i, 2]
            d2 = dx * dx + dy * dy + dz * dz
            if d2 < best or (d2 == best and i < best_i):
                best = d2
                best_i = i
        out_idx[qi] = best_i
        out_dist[qi] = np.sqrt(best)
    return out_idx, out_dist


@njit(cache=True)
def _knn_loops(points, perm, lo, left, right, axis, split, queries, k):
    nq = queries.shape[0]
    out_idx = np.full((nq, k), -1, np.int64)
    out_d2 = np.full((nq, k), np.inf)
    st_node = np.empty(_STACK, np.int64)
    st_bound = np.empty(_STACK)
    for qi in range(nq):
        bi = out_idx[qi]
        bd = out_d2[qi]
        st_node[0] = 0
        st_bound[0] = 0.0
        sp = 1
        while sp > 0:
            sp -= 1
            node = st_node[sp]
            if st_bound[sp] > bd[k - 1]:
                continue
            while axis[node] >= 0:
                ax = axis[node]
                diff = queries[qi, ax] - split[node]
                if diff < 0.0:
                    near = left[node]
                    far = right[node]
                else:
                    near = right[node]
                    far = left[node]
                st_node[sp] = far
                st_bound[sp] = diff * diff
                sp += 1
                node = near
            i = perm[lo[node]]
            dx = queries[qi, 0] - points[i, 0]
            dy = queries[qi, 1] - points[i, 1]
            dz = queries[qi, 2] - points[i, 2]
            d2 = dx * dx + dy * dy + dz * dz
            if d2 < bd[k - 1] or (d2 == bd[k - 1] and i < bi[k - 1]):
                pos = k - 1
                while pos > 0 and (bd[pos - 1] > d2 or (bd[pos - 1] == d2 and bi[pos - 1] > i)):
                    bd[pos] = bd[pos - 1]
                    bi[pos] = bi[pos - 1]
                    pos -= 1
                bd[pos] = d2
                bi[pos] = i
    return out_idx, np.sqrt(out_d2)


_build = _build_loops if USE_NUMBA else _build_numpy


class KdTree:
    """Immutable KD-tree over an (n, 3) point array."""

    def __init__(self, points):
        pts = np.array(points, dtype=np.float64, order="C").reshape(-1, 3)
        if len(pts) == 0:
            raise EmptyPointSet("cannot build a KD-tree over zero points")
        self.points = pts
        self.points.setflags(write=False)
        (self.perm, self.lo, self.hi, self.left, self.right, self.axis, self.split) = _build(pts)
        for a in (self.perm, self.lo, self.hi, self.left, self.right, self.axis, self.split):
            a.setflags(write=False)

    def __len__(self):
        return len(self.points)

    @property
    def n_nodes(self):
        return len(self.axis)

    @property
    def leaves(self):
        """Node ids of the leaves, left to right."""
        return np.flatnonzero(self.axis < 0)

    def leaf_points(self):
        leaves = self.leaves
        return self.perm[self.lo[leaves]]

    @property
    def depth(self):
        depth = np.zeros(self.n_nodes, np.int64)
        for node in range(self.n_nodes):
            if self.axis[node] >= 0:
                depth[self.left[node]] = depth[node] + 1
                depth[self.right[node]] = depth[node] + 1
        return int(depth.max())

    def query(self, queries):
        """Nearest stored point for each query row: ``(indices, distances)``."""
        q = np.ascontiguousarray(queries, dtype=np.float64).reshape(-1, 3)
        return _nearest_loops(self.points, self.perm, self.lo, self.left, self.right, self.axis, self.split, q)

    def nearest(self, query):
        """``(index, distance)`` of the point closest to a single query."""
        idx, dist = self.query(np.asarray(query, dtype=np.float64).reshape(1, 3))
        return int(idx[0]), float(dist[0])

    def query_knn(self, queries, k):
        """The ``k`` nearest points per query, sorted by distance then index."""
        q = np.ascontiguousarray(queries, dtype=np.float64).reshape(-1, 3)
        k = int(min(k, len(self.points)))
        return _knn_loops(self.points, self.perm, self.lo, self.left, self.right, self.axis, self.split, q, k)


def kdtree_build(points):
    return KdTree(points)


def kdtree_nearest(tree: KdTree, query):
    return tree.nearest(query)
