"""Clustering pseudo heatmap: project shifted thing voxels to a cartesian BEV
grid, count them per class, and pick local peaks with a window max-pool."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core import GridConfig


@dataclass(frozen=True, eq=False)
class PseudoImage:
    counts: np.ndarray  # (H, W, C_n) voxel counts per class channel
    cell: float
    origin: float  # world coordinate of the grid's lower edge on both axes
    overflow: int = 0  # shifted voxels that fell outside the extent

    @property
    def shape(self):
        return self.counts.shape[:2]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True, eq=False)
class Heatmap:
    scores: np.ndarray  # (H, W) non-negative integers
    cell: float
    origin: float

    def cell_xy(self, rows, cols) -> np.ndarray:
        return cell_centers(rows, cols, self.cell, self.origin)


@dataclass(frozen=True, eq=False)
class CenterSet:
    """Local heatmap peaks ordered by descending score, then row-major."""

    rows: np.ndarray
    cols: np.ndarray
    scores: np.ndarray
    xy: np.ndarray  # (K, 2) cell-center coordinates in meters

    def __len__(self):
        return len(self.rows)

    @classmethod
    def from_cells(cls, rows, cols, scores, cell, origin, shape=None) -> "CenterSet":
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        scores = np.asarray(scores, dtype=np.int64)
        width = shape[1] if shape is not None else (cols.max() + 1 if cols.size else 1)
        order = np.lexsort((rows * width + cols, -scores))
        rows, cols, scores = rows[order], cols[order], scores[order]
        return cls(rows, cols, scores, cell_centers(rows, cols, cell, origin))


def cell_centers(rows, cols, cell, origin) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.float64)
    cols = np.asarray(cols, dtype=np.float64)
    return np.column_stack([origin + (cols + 0.5) * cell, origin + (rows + 0.5) * cell])


def bev_cells(xy: np.ndarray, cfg: GridConfig):
    """(row, col, inside) for cartesian positions; row follows y, col follows x."""
    xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
    n = cfg.bev_size
    origin = -cfg.bev_extent
    col = np.floor((xy[:, 0] - origin) / cfg.bev_cell).astype(np.int64)
    row = np.floor((xy[:, 1] - origin) / cfg.bev_cell).astype(np.int64)
    inside = (row >= 0) & (row < n) & (col >= 0) & (col < n)
    return row, col, inside


def build_pseudo_image(shifted, classes, cfg: GridConfig, n_classes: int | None = None) -> PseudoImage:
    """Count shifted voxels per (cell, class); out-of-extent voxels go to ``overflow``."""
    shifted = np.asarray(shifted, dtype=np.float64)
    if shifted.ndim != 2 or shifted.shape[1] < 2:
        raise ValueError(f"shifted positions must be (M, 2) or (M, 3), got {shifted.shape}")
    shifted = shifted[:, :2]
    if not np.isfinite(shifted).all():
        raise ValueError("shifted positions must be finite")
    classes = np.asarray(classes, dtype=np.int64).reshape(-1)
    if len(classes) != len(shifted):
        raise ValueError(f"{len(classes)} classes for {len(shifted)} voxels")
    if classes.size and classes.min() < 0:
        raise ValueError("class ids must be non-negative")
    cn = n_classes if n_classes is not None else (int(classes.max()) + 1 if classes.size else 1)
    if classes.size and classes.max() >= cn:
        raise ValueError(f"class id {classes.max()} exceeds channel count {cn}")
    n = cfg.bev_size
    row, col, inside = bev_cells(shifted, cfg)
    key = (row[inside] * n + col[inside]) * cn + classes[inside]
    counts = np.bincount(key, minlength=n * n * cn).reshape(n, n, cn)
    return PseudoImage(counts, cfg.bev_cell, -cfg.bev_extent, int((~inside).sum()))


def class_agnostic(img: PseudoImage) -> Heatmap:
    return Heatmap(img.counts.sum(axis=2), img.cell, img.origin)


def _earlier_offsets(window: int):
    r = window // 2
    return [(dr, dc) for dr in range(-r, 1) for dc in range(-r, r + 1) if dr < 0 or dc < 0]


def extract_centers(hm: Heatmap, cfg: GridConfig, window: int | None = None) -> CenterSet:
    """Window max-pool peak picking with a row-major tie-break.

    A cell is a center when its score reaches ``min_center_score``, equals
    the maximum of its (boundary-shrunk) window, and no row-major earlier
    cell in that window has the same score.
    """
    w = cfg.maxpool_window if window is None else window
    if w < 1 or w % 2 == 0:
        raise ValueError(f"max-pool window must be odd, got {w}")
    s = np.asarray(hm.scores)
    h, wd = s.shape
    # cval below every score == shrinking the window at the border
    pooled = ndimage.maximum_filter(s.astype(np.int64), size=w, mode="constant", cval=-1)
    cand = (s >= cfg.min_center_score) & (s == pooled)
    r, c = np.nonzero(cand)
    sc = s[r, c]
    keep = np.ones(len(r), dtype=bool)
    for dr, dc in _earlier_offsets(w):
        rr, cc = r + dr, c + dc
        ok = (rr >= 0) & (cc >= 0) & (cc < wd)
        tie = np.zeros(len(r), dtype=bool)
        tie[ok] = s[rr[ok], cc[ok]] == sc[ok]
        keep &= ~tie
    return CenterSet.from_cells(r[keep], c[keep], sc[keep], hm.cell, hm.origin, shape=(h, wd))


def write_pgm(path, hm: Heatmap | np.ndarray) -> None:
    """Binary 16-bit PGM (P5, big-endian samples), scores clipped to 65535."""
    scores = hm.scores if isinstance(hm, Heatmap) else np.asarray(hm)
    img = np.clip(scores, 0, 65535).astype(">u2")
    h, w = img.shape
    with open(path, "wb") as f:
        # fixed maxval keeps two bytes per sample regardless of content
        f.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        f.write(img.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    parts = []
    pos = 0
    while len(parts) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        parts.append(data[pos:end])
        pos = end
    pos += 1
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM")
    w, h, maxval = (int(p) for p in parts[1:])
    dt = ">u2" if maxval > 255 else "u1"
    return np.frombuffer(data[pos:], dtype=dt, count=w * h).reshape(h, w).astype(np.int64)
