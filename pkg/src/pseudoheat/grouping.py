"""Size-based merging of redundant centers that belong to one object."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import IGNORE, ClassTable, GridConfig
from .heatmap import CenterSet, PseudoImage


class DisjointSet:
    """Union-find with path halving; ``union(a, b)`` hangs b's root under a's."""

    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        p = self.parent
        while p[a] != a:
            p[a] = p[p[a]]
            a = p[a]
        return a

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[rb] = ra
        return True

    def roots(self) -> np.ndarray:
        return np.array([self.find(i) for i in range(len(self.parent))], dtype=np.int64)


@dataclass(frozen=True, eq=False)
class GridClassMap:
    classes: np.ndarray  # (H, W); 0 where the window holds no thing voxel

    def at(self, rows, cols) -> np.ndarray:
        return self.classes[rows, cols].astype(np.int64)


@dataclass(frozen=True, eq=False)
class SparseClassMap:
    """Window majority evaluated lazily, only at the requested cells.

    Gives the same classes as :func:`grid_class_majority` but costs
    O(cells * window^2 * C_n) instead of a pass over the whole grid.
    """

    img: PseudoImage
    window: int

    def at(self, rows, cols) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        counts = self.img.counts
        h, w = counts.shape[:2]
        r = self.window // 2
        sums = np.zeros((len(rows), counts.shape[2]), dtype=np.int64)
        for dr in range(-r, r + 1):
            for dc in range(-r, r + 1):
                rr, cc = rows + dr, cols + dc
                ok = (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w)
                sums[ok] += counts[rr[ok], cc[ok]]
        sums[:, IGNORE] = 0
        out = np.argmax(sums, axis=1)
        out[sums.max(axis=1) == 0] = IGNORE
        return out


@dataclass(frozen=True, eq=False)
class CenterGroups:
    group_of: np.ndarray  # per center, 0-based group id
    representative: np.ndarray  # per group, index of its highest-score center
    center_class: np.ndarray  # per center semantic class (0 = ignore)

    @property
    def n_groups(self) -> int:
        return len(self.representative)


def _box1d(a: np.ndarray, r: int, axis: int) -> np.ndarray:
    pad = [(0, 0)] * a.ndim
    pad[axis] = (r + 1, r)
    c = np.cumsum(np.pad(a, pad), axis=axis)
    n = a.shape[axis]
    hi = np.take(c, np.arange(2 * r + 1, n + 2 * r + 1), axis=axis)
    lo = np.take(c, np.arange(0, n), axis=axis)
    return hi - lo


def window_sums(counts: np.ndarray, window: int) -> np.ndarray:
    """Sum over a centered odd window per channel, zero outside the grid."""
    r = window // 2
    return _box1d(_box1d(np.asarray(counts, dtype=np.int64), r, 0), r, 1)


def grid_class_majority(img: PseudoImage, cfg: GridConfig, window: int | None = None) -> GridClassMap:
    """Majority class of the voxels inside each cell's average-pool window.

    Average pooling only rescales the window counts, so the windowed sum gives
    the same argmax. Ties go to the smaller class id; empty windows get 0.
    """
    w = cfg.avgpool_window if window is None else window
    if w < 1 or w % 2 == 0:
        raise ValueError(f"average-pool window must be odd, got {w}")
    counts = img.counts
    live = np.flatnonzero(counts.reshape(-1, counts.shape[2]).any(axis=0))
    live = live[live != IGNORE]
    out = np.zeros(counts.shape[:2], dtype=np.int64)
    if live.size == 0:
        return GridClassMap(out)
    sums = window_sums(counts[:, :, live], w)
    best = np.argmax(sums, axis=2)
    occupied = sums.max(axis=2) > 0
    out[occupied] = live[best[occupied]]
    return GridClassMap(out)


def radius_for_class(cls: int, table: ClassTable) -> float:
    """min(width, length) of the class's average box size."""
    try:
        w, l, _ = table.avg_size[int(cls)]
    except KeyError:
        raise ValueError(f"class {cls} has no average size (not a thing class?)") from None
    return float(min(w, l))


def singleton_groups(centers: CenterSet, classmap: GridClassMap | None = None) -> CenterGroups:
    n = len(centers)
    cls = (classmap.at(centers.rows, centers.cols) if classmap is not None
           else np.zeros(n, dtype=np.int64))
    return CenterGroups(np.arange(n), np.arange(n), cls)


def group_centers(centers: CenterSet, classmap, table: ClassTable,
                  radius_scale: float = 1.0) -> CenterGroups:
    """Merge same-class centers lying within the base center's class radius.

    Bases are visited in CenterSet order (descending score); merging is
    transitive through union-find, so chains along a large object collapse
    into one group represented by its highest-score center.
    """
    n = len(centers)
    cls = classmap.at(centers.rows, centers.cols)
    if n == 0:
        return CenterGroups(np.zeros(0, np.int64), np.zeros(0, np.int64), cls)
    radius = np.zeros(n)
    mergeable = cls != IGNORE
    for c in np.unique(cls[mergeable]):
        radius[cls == c] = radius_for_class(c, table) * radius_scale
    diff = centers.xy[:, None, :] - centers.xy[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    near = (dist <= radius[:, None]) & (cls[:, None] == cls[None, :]) & mergeable[:, None]
    ds = DisjointSet(n)
    for b in range(n):
        for t in np.flatnonzero(near[b]):
            if t != b:
                ds.union(b, int(t))
    roots = ds.roots()
    # group ids numbered by first appearance in score order; the first
    # member of each group is its highest-score center
    _, first, inv = np.unique(roots, return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(first))
    group_of = rank[inv]
    representative = np.sort(first)
    return CenterGroups(group_of, representative, cls)
