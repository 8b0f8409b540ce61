"""Nearest-center instance assignment and per-instance semantic fusion."""
from __future__ import annotations

import warnings

import numpy as np
from scipy.spatial import cKDTree

from .core import ClassTable, PanopticLabeling
from .grouping import CenterGroups
from .heatmap import CenterSet


def _nearest_brute(points, cxy, gid):
    d = points[:, None, :] - cxy[None, :, :]
    d = np.einsum("ijk,ijk->ij", d, d)
    # centers are pre-sorted by group id, so argmin's first hit is the
    # smallest group among equidistant centers
    return gid[np.argmin(d, axis=1)]


def assign_instances(shifted, centers: CenterSet, groups: CenterGroups) -> np.ndarray:
    """1-based instance id (group id + 1) of each voxel's nearest center.

    The test is class-agnostic and has no distance cut-off. With no centers
    every voxel gets 0 and a warning is emitted.
    """
    pts = np.asarray(shifted, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] < 2:
        raise ValueError(f"shifted positions must be (M, 2), got {pts.shape}")
    pts = pts[:, :2]
    m = len(pts)
    if len(groups.group_of) != len(centers):
        raise ValueError("groups do not match the center set")
    if m == 0:
        return np.zeros(0, dtype=np.int64)
    if len(centers) == 0:
        warnings.warn(f"no centers: {m} voxels left without an instance", RuntimeWarning)
        return np.zeros(m, dtype=np.int64)
    order = np.argsort(groups.group_of, kind="stable")
    cxy = centers.xy[order]
    gid = groups.group_of[order]
    if len(cxy) == 1:
        return np.full(m, gid[0] + 1, dtype=np.int64)
    tree = cKDTree(cxy)
    dist, nn = tree.query(pts, k=2)
    out = gid[nn[:, 0]]
    # exact distance ties fall back to the all-pairs rule
    tie = dist[:, 0] == dist[:, 1]
    if tie.any():
        out[tie] = _nearest_brute(pts[tie], cxy, gid)
    return out + 1


def assign_instances_brute(shifted, centers: CenterSet, groups: CenterGroups,
                           chunk: int = 8192) -> np.ndarray:
    """All-pairs variant of :func:`assign_instances` (no tree)."""
    pts = np.asarray(shifted, dtype=np.float64)[:, :2]
    if len(centers) == 0:
        return np.zeros(len(pts), dtype=np.int64)
    order = np.argsort(groups.group_of, kind="stable")
    cxy, gid = centers.xy[order], groups.group_of[order]
    out = np.empty(len(pts), dtype=np.int64)
    for s in range(0, len(pts), chunk):
        out[s:s + chunk] = _nearest_brute(pts[s:s + chunk], cxy, gid)
    return out + 1


def fuse_panoptic(semantic, instance, table: ClassTable) -> PanopticLabeling:
    """Give every point of an instance the instance's majority thing class.

    Stuff (and ignore) points keep their class and lose any instance id;
    thing points with instance 0 are left untouched.
    """
    sem = np.asarray(semantic, dtype=np.int64).reshape(-1).copy()
    inst = np.asarray(instance, dtype=np.int64).reshape(-1).copy()
    if len(sem) != len(inst):
        raise ValueError(f"semantic ({len(sem)}) and instance ({len(inst)}) are not aligned")
    thing = table.is_thing(sem)
    inst[~thing] = 0
    sel = np.flatnonzero(inst != 0)
    if sel.size:
        pairs, counts = np.unique(np.column_stack([inst[sel], sem[sel]]), axis=0, return_counts=True)
        order = np.lexsort((pairs[:, 1], -counts, pairs[:, 0]))
        pairs = pairs[order]
        first = np.ones(len(pairs), dtype=bool)
        first[1:] = pairs[1:, 0] != pairs[:-1, 0]
        winners = pairs[first]
        lookup = winners[np.searchsorted(winners[:, 0], inst[sel]), 1]
        sem[sel] = lookup
    return PanopticLabeling(sem, inst)
