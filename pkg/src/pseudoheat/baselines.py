"""Heuristic clustering baselines for the latency/accuracy comparison:
flat-kernel Mean Shift and DBSCAN over shifted BEV points."""
from __future__ import annotations

from collections import deque

import numpy as np
from scipy.spatial import cKDTree

from .grouping import DisjointSet

NOISE = -1


def canonical_labels(labels) -> np.ndarray:
    """Renumber cluster ids by first occurrence; negative ids are kept."""
    labels = np.asarray(labels, dtype=np.int64)
    out = np.full(len(labels), NOISE, dtype=np.int64)
    pos = labels >= 0
    if pos.any():
        _, first, inv = np.unique(labels[pos], return_index=True, return_inverse=True)
        rank = np.empty(len(first), dtype=np.int64)
        rank[np.argsort(first, kind="stable")] = np.arange(len(first))
        out[pos] = rank[inv]
    return out


def _ball_means(tree: cKDTree, points: np.ndarray, seeds: np.ndarray, radius: float):
    # all (seed, point) pairs within radius, as a sparse COO list
    pairs = cKDTree(seeds).sparse_distance_matrix(tree, radius, output_type="ndarray")
    rows, cols = pairs["i"], pairs["j"]
    cnt = np.bincount(rows, minlength=len(seeds)).astype(np.float64)
    out = np.empty_like(seeds)
    for d in range(points.shape[1]):
        out[:, d] = np.bincount(rows, weights=points[cols, d], minlength=len(seeds))
    # a seed always sits on or near data it came from; guard the empty case
    empty = cnt == 0
    out[empty] = seeds[empty]
    cnt[empty] = 1.0
    return out / cnt[:, None]


def mean_shift(points, bandwidth: float, max_iter: int = 300, tol: float | None = None):
    """Flat-kernel mean shift seeded from every point.

    Each seed moves to the mean of the input points within ``bandwidth``
    until it stops moving (or moves less than ``tol``). Modes closer than
    ``bandwidth / 2`` are merged transitively. Returns (labels, modes) with
    labels numbered by first occurrence.
    """
    if bandwidth <= 0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth}")
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ValueError(f"points must be (M, D), got {pts.shape}")
    m = len(pts)
    if m == 0:
        return np.zeros(0, dtype=np.int64), np.zeros((0, pts.shape[1]))
    tol = 1e-3 * bandwidth if tol is None else tol
    tree = cKDTree(pts)
    seeds = pts.copy()
    active = np.arange(m)
    for _ in range(max_iter):
        new = _ball_means(tree, pts, seeds[active], bandwidth)
        shift = np.linalg.norm(new - seeds[active], axis=1)
        seeds[active] = new
        active = active[shift > tol]
        if active.size == 0:
            break

    ds = DisjointSet(m)
    for a, b in sorted(cKDTree(seeds).query_pairs(bandwidth / 2.0)):
        ds.union(a, b)
    labels = canonical_labels(ds.roots())
    modes = np.array([seeds[labels == c].mean(axis=0) for c in range(labels.max() + 1)])
    return labels, modes


def dbscan(points, eps: float, min_pts: int) -> np.ndarray:
    """Density-based clustering; returns cluster ids with noise as -1.

    Core points have at least ``min_pts`` neighbors within ``eps`` (self
    included). Clusters are grown breadth-first from the lowest unvisited
    core index, so border points go to the first cluster that reaches them.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if min_pts < 1:
        raise ValueError(f"min_pts must be >= 1, got {min_pts}")
    pts = np.asarray(points, dtype=np.float64)
    m = len(pts)
    labels = np.full(m, NOISE, dtype=np.int64)
    if m == 0:
        return labels
    nbrs = cKDTree(pts).query_ball_point(pts, r=eps, return_sorted=True)
    core = np.fromiter((len(n) >= min_pts for n in nbrs), dtype=bool, count=m)
    cid = 0
    for i in range(m):
        if labels[i] != NOISE or not core[i]:
            continue
        labels[i] = cid
        queue = deque([i])
        while queue:
            p = queue.popleft()
            if not core[p]:
                continue
            for q in nbrs[p]:
                if labels[q] == NOISE:
                    labels[q] = cid
                    if core[q]:
                        queue.append(q)
        cid += 1
    return labels
