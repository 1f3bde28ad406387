"""Connected components of a ball union (edge iff pairwise distance < 2R).

Hot path: spatial cell hashing (cell side 2R) plus union-find, expected
near-linear in the point count.  The numba kernel and the numpy/scipy
fallback (kd-tree pairs + sparse connected components) produce identical
canonical labelings: ties at distance exactly 2R are not connected in
either path, and labels are renumbered by first point occurrence.
"""

from __future__ import annotations

import numpy as np

from ._accel import USE_NUMBA, njit_or_plain


@njit_or_plain
def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@njit_or_plain
def _roots_cellhash(pts, r2, cell_side):
    n, d = pts.shape
    parent = np.arange(n)
    size = np.ones(n, dtype=np.int64)
    if n == 0:
        return parent

    cell = np.empty((n, d), dtype=np.int64)
    for i in range(n):
        for k in range(d):
            cell[i, k] = np.int64(np.floor(pts[i, k] / cell_side))
    mins = np.empty(d, dtype=np.int64)
    extents = np.empty(d, dtype=np.int64)
    for k in range(d):
        lo = cell[0, k]
        hi = cell[0, k]
        for i in range(1, n):
            if cell[i, k] < lo:
                lo = cell[i, k]
            if cell[i, k] > hi:
                hi = cell[i, k]
        mins[k] = lo
        extents[k] = hi - lo + 3  # +1 span, +2 for the neighbor halo

    strides = np.empty(d, dtype=np.int64)
    strides[d - 1] = 1
    for k in range(d - 2, -1, -1):
        strides[k] = strides[k + 1] * extents[k + 1]

    keys = np.zeros(n, dtype=np.int64)
    for i in range(n):
        acc = np.int64(0)
        for k in range(d):
            acc += (cell[i, k] - mins[k] + 1) * strides[k]
        keys[i] = acc

    order = np.argsort(keys, kind="mergesort")
    sorted_keys = keys[order]

    n_offsets = 3**d
    for i in range(n):
        for off_id in range(n_offsets):
            nkey = keys[i]
            rem = off_id
            for k in range(d):
                nkey += (rem % 3 - 1) * strides[k]
                rem //= 3
            lo = np.searchsorted(sorted_keys, nkey, side="left")
            hi = np.searchsorted(sorted_keys, nkey, side="right")
            for slot in range(lo, hi):
                j = order[slot]
                if j >= i:
                    continue
                dd = 0.0
                for k in range(d):
                    diff = pts[i, k] - pts[j, k]
                    dd += diff * diff
                if dd < r2:
                    ri = _find(parent, i)
                    rj = _find(parent, j)
                    if ri != rj:
                        if size[ri] < size[rj]:
                            ri, rj = rj, ri
                        parent[rj] = ri
                        size[ri] += size[rj]

    roots = np.empty(n, dtype=np.int64)
    for i in range(n):
        roots[i] = _find(parent, i)
    return roots


def _roots_scipy(pts, r2, cell_side):
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components
    from scipy.spatial import cKDTree

    n = len(pts)
    if n == 0:
        return np.empty(0, dtype=np.int64)
    pairs = cKDTree(pts).query_pairs(cell_side, output_type="ndarray")
    if len(pairs):
        diff = pts[pairs[:, 0]] - pts[pairs[:, 1]]
        keep = np.einsum("ij,ij->i", diff, diff) < r2  # open balls: drop exact ties
        pairs = pairs[keep]
    graph = coo_matrix(
        (np.ones(len(pairs), dtype=np.int8), (pairs[:, 0], pairs[:, 1])), shape=(n, n)
    )
    _, comp = connected_components(graph, directed=False)
    return comp.astype(np.int64)


def canonical_labels(roots: np.ndarray) -> np.ndarray:
    """Renumber component ids by first occurrence so labelings are backend-stable."""
    if len(roots) == 0:
        return roots.astype(np.int64)
    _, first_idx, inverse = np.unique(roots, return_index=True, return_inverse=True)
    rank = np.empty(len(first_idx), dtype=np.int64)
    rank[np.argsort(first_idx, kind="stable")] = np.arange(len(first_idx))
    return rank[inverse]


def label_positions(pts: np.ndarray, radius: float) -> np.ndarray:
    """Canonical component label per point for balls of the given radius."""
    pts = np.ascontiguousarray(np.atleast_2d(pts), dtype=np.float64)
    if not radius > 0:
        raise ValueError("radius must be > 0")
    cell_side = 2.0 * radius
    r2 = cell_side * cell_side
    if USE_NUMBA:
        roots = _roots_cellhash(pts, r2, cell_side)
    else:
        roots = _roots_scipy(pts, r2, cell_side)
    return canonical_labels(roots)
