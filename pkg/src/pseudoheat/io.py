"""KITTI-style binary files.

* ``.label``: one little-endian uint32 per point, semantic class in the
  lower 16 bits and instance id in the upper 16 bits.
* ``.bin`` points: little-endian float32 (x, y, z, intensity) per point.
* offsets: little-endian float32 (dx, dy) per point.
"""
from __future__ import annotations

import os

import numpy as np

from .core import PanopticLabeling, PointCloud


def _read(path, itemsize, what):
    size = os.path.getsize(path)
    if size % itemsize:
        raise ValueError(f"{path}: {size} bytes is not a multiple of {itemsize} ({what})")
    return np.fromfile(path, dtype=np.uint8)


def encode_labels(labels: PanopticLabeling) -> np.ndarray:
    return (labels.semantic.astype(np.uint32) & 0xFFFF) | (labels.instance.astype(np.uint32) << 16)


def decode_labels(words) -> PanopticLabeling:
    w = np.asarray(words, dtype=np.uint32)
    return PanopticLabeling((w & 0xFFFF).astype(np.int64), (w >> 16).astype(np.int64))


def read_label_file(path, n_points: int | None = None) -> PanopticLabeling:
    raw = _read(path, 4, "uint32 labels")
    words = raw.view("<u4")
    if n_points is not None and len(words) != n_points:
        raise ValueError(f"{path}: {len(words)} labels for {n_points} points")
    return decode_labels(words)


def write_label_file(path, labels: PanopticLabeling) -> None:
    encode_labels(labels).astype("<u4").tofile(path)


def read_point_file(path) -> PointCloud:
    raw = _read(path, 16, "float32 x/y/z/intensity")
    pts = raw.view("<f4").reshape(-1, 4).astype(np.float64)
    if not np.isfinite(pts[:, :3]).all():
        bad = int(np.flatnonzero(~np.isfinite(pts[:, :3]).all(axis=1))[0])
        raise ValueError(f"{path}: non-finite coordinate at point {bad}")
    return PointCloud(pts[:, :3], pts[:, 3])


def write_point_file(path, cloud: PointCloud) -> None:
    inten = cloud.intensity if cloud.intensity is not None else np.zeros(len(cloud))
    np.column_stack([cloud.xyz, inten]).astype("<f4").tofile(path)


def read_offsets_file(path, n_points: int | None = None) -> np.ndarray:
    raw = _read(path, 8, "float32 dx/dy")
    off = raw.view("<f4").reshape(-1, 2).astype(np.float64)
    if n_points is not None and len(off) != n_points:
        raise ValueError(f"{path}: {len(off)} offsets for {n_points} points")
    if not np.isfinite(off).all():
        raise ValueError(f"{path}: non-finite offsets")
    return off


def write_offsets_file(path, offsets) -> None:
    np.asarray(offsets, dtype=np.float64)[:, :2].astype("<f4").tofile(path)
