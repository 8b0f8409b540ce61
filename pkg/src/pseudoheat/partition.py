"""Cylindrical voxelization and the voxel <-> point / polar-BEV index plumbing."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, NamedTuple

import numpy as np

from .core import GridConfig, PanopticLabeling, PointCloud

OUT_OF_RANGE = -1


def _bin(v, lo, hi, n):
    """Uniform half-open binning of ``v`` over [lo, hi); -1 outside."""
    idx = np.floor((v - lo) * (n / (hi - lo))).astype(np.int64)
    inside = (v >= lo) & (v < hi)
    # rounding can push v just below hi into bin n
    idx = np.minimum(idx, n - 1)
    return np.where(inside, idx, -1)


def cylindrical_coords(xyz: np.ndarray):
    """(rho, phi, z) with phi in [-pi, pi)."""
    xyz = np.asarray(xyz, dtype=np.float64)
    rho = np.hypot(xyz[:, 0], xyz[:, 1])
    phi = np.arctan2(xyz[:, 1], xyz[:, 0])
    phi = np.where(phi >= np.pi, -np.pi, phi)
    return rho, phi, xyz[:, 2]


@dataclass(frozen=True, eq=False)
class VoxelAssignment:
    """Point -> non-empty voxel assignment.

    ``voxel_ids`` holds the sorted flat indices of non-empty voxels;
    ``point_voxel`` maps each point to a row of ``voxel_ids`` (or -1 when the
    point is out of range). Members are stored CSR-style: the points of voxel
    ``v`` are ``order[starts[v]:starts[v + 1]]`` in ascending point order.
    """

    dims: tuple
    point_to_voxel: np.ndarray  # flat voxel index per point or -1
    voxel_ids: np.ndarray
    point_voxel: np.ndarray
    order: np.ndarray
    starts: np.ndarray

    @property
    def n_nonempty(self) -> int:
        return len(self.voxel_ids)

    @property
    def n_points(self) -> int:
        return len(self.point_to_voxel)

    @property
    def in_range(self) -> np.ndarray:
        return self.point_voxel >= 0

    @property
    def counts(self) -> np.ndarray:
        return np.diff(self.starts)

    @property
    def coords(self) -> np.ndarray:
        """(N_nonempty, 3) integer (i_rho, i_phi, i_z) per voxel."""
        return np.column_stack(np.unravel_index(self.voxel_ids, self.dims)).astype(np.int64)

    def members(self, v: int) -> np.ndarray:
        return self.order[self.starts[v]:self.starts[v + 1]]


def assignment_from_flat(flat: np.ndarray, dims) -> VoxelAssignment:
    """Build the CSR voxel records from per-point flat voxel indices (-1 = out)."""
    flat = np.asarray(flat, dtype=np.int64)
    valid = np.flatnonzero(flat >= 0)
    voxel_ids, inv = np.unique(flat[valid], return_inverse=True)
    point_voxel = np.full(len(flat), -1, dtype=np.int64)
    point_voxel[valid] = inv
    # stable sort keeps member points in ascending order inside each voxel
    order = valid[np.argsort(inv, kind="stable")]
    starts = np.zeros(len(voxel_ids) + 1, dtype=np.int64)
    np.cumsum(np.bincount(inv, minlength=len(voxel_ids)), out=starts[1:])
    return VoxelAssignment(tuple(int(d) for d in dims), flat, voxel_ids, point_voxel, order, starts)


def cylindrical_voxelize(cloud: PointCloud, cfg: GridConfig) -> VoxelAssignment:
    rho, phi, z = cylindrical_coords(cloud.xyz)
    ir = _bin(rho, cfg.rho_min, cfg.rho_max, cfg.n_rho)
    ip = _bin(phi, -np.pi, np.pi, cfg.n_phi)
    iz = _bin(z, cfg.z_min, cfg.z_max, cfg.n_z)
    ok = (ir >= 0) & (ip >= 0) & (iz >= 0)
    flat = np.where(ok, (ir * cfg.n_phi + ip) * cfg.n_z + iz, OUT_OF_RANGE)
    return assignment_from_flat(flat, cfg.cyl_dims)


@dataclass(frozen=True, eq=False)
class BevIndexMap:
    """Voxel -> polar BEV cell map (z collapsed) and its inverse multimap."""

    shape: tuple  # (H, W) = (n_rho, n_phi)
    voxel_to_bev: np.ndarray  # (N_nonempty, 2) rows of (i_rho, i_phi)
    cell_ids: np.ndarray  # sorted flat BEV ids of occupied cells
    order: np.ndarray
    starts: np.ndarray

    def voxels_in(self, row: int, col: int) -> np.ndarray:
        flat = row * self.shape[1] + col
        j = np.searchsorted(self.cell_ids, flat)
        if j == len(self.cell_ids) or self.cell_ids[j] != flat:
            return np.empty(0, dtype=np.int64)
        return self.order[self.starts[j]:self.starts[j + 1]]

    def cell_counts(self) -> np.ndarray:
        """H x W voxel multiplicity per BEV cell."""
        out = np.zeros(self.shape[0] * self.shape[1], dtype=np.int64)
        out[self.cell_ids] = np.diff(self.starts)
        return out.reshape(self.shape)


def voxel_to_bev(assignment: VoxelAssignment, cfg: GridConfig) -> BevIndexMap:
    if tuple(assignment.dims) != cfg.cyl_dims:
        raise ValueError(f"assignment dims {assignment.dims} do not match config {cfg.cyl_dims}")
    rc = assignment.coords[:, :2] if assignment.n_nonempty else np.zeros((0, 2), np.int64)
    flat = rc[:, 0] * cfg.n_phi + rc[:, 1]
    cell_ids, inv = np.unique(flat, return_inverse=True)
    order = np.argsort(inv, kind="stable")
    starts = np.zeros(len(cell_ids) + 1, dtype=np.int64)
    np.cumsum(np.bincount(inv, minlength=len(cell_ids)), out=starts[1:])
    return BevIndexMap((cfg.n_rho, cfg.n_phi), rc, cell_ids, order, starts)


def gather_bev_to_voxels(bev_features: np.ndarray, bev_map: BevIndexMap) -> np.ndarray:
    """Per-voxel copy of the feature vector of its BEV cell, shape (N_nonempty, C)."""
    feats = np.asarray(bev_features)
    if feats.ndim != 3 or feats.shape[:2] != tuple(bev_map.shape):
        raise ValueError(
            f"BEV feature grid {feats.shape} does not match map shape {bev_map.shape} x C"
        )
    return feats[bev_map.voxel_to_bev[:, 0], bev_map.voxel_to_bev[:, 1]]


def _per_voxel_majority(voxel_of: np.ndarray, values: np.ndarray, n_voxels: int) -> np.ndarray:
    # most frequent value per voxel, ties -> smallest value
    pairs, counts = np.unique(np.column_stack([voxel_of, values]), axis=0, return_counts=True)
    order = np.lexsort((pairs[:, 1], -counts, pairs[:, 0]))
    pairs = pairs[order]
    first = np.ones(len(pairs), dtype=bool)
    first[1:] = pairs[1:, 0] != pairs[:-1, 0]
    out = np.zeros(n_voxels, dtype=np.int64)
    out[pairs[first, 0]] = pairs[first, 1]
    return out


def voxel_semantic_labels(assignment: VoxelAssignment, labels: PanopticLabeling) -> np.ndarray:
    """Majority-vote class per non-empty voxel (ties -> smallest class id)."""
    if len(labels) != assignment.n_points:
        raise ValueError(f"labels have {len(labels)} entries, assignment has {assignment.n_points}")
    pts = np.flatnonzero(assignment.in_range)
    if assignment.n_nonempty == 0:
        return np.zeros(0, dtype=np.int64)
    return _per_voxel_majority(assignment.point_voxel[pts], labels.semantic[pts], assignment.n_nonempty)


class VoxelOffsets(NamedTuple):
    voxels: np.ndarray  # rows of the assignment that contain thing points
    offsets: np.ndarray  # (len(voxels), D) mean offset in meters


def voxel_offset_labels(
    assignment: VoxelAssignment,
    cloud: PointCloud,
    labels: PanopticLabeling,
    centers: Mapping[int, np.ndarray],
) -> VoxelOffsets:
    """Mean of (instance center - point position) over each voxel's thing points.

    Thing points are those with a non-zero instance id; the center dimension
    (2 for BEV, 3 for full) sets the offset dimension.
    """
    if len(labels) != assignment.n_points or len(cloud) != assignment.n_points:
        raise ValueError("cloud, labels and assignment must cover the same points")
    sel = np.flatnonzero(assignment.in_range & (labels.instance != 0))
    inst = labels.instance[sel]
    present = np.unique(inst)
    missing = [int(i) for i in present if int(i) not in centers]
    if missing:
        raise KeyError(f"no center given for instance ids {missing}")
    dim = len(np.asarray(next(iter(centers.values())))) if centers else 2
    if dim not in (2, 3):
        raise ValueError("centers must be 2D or 3D")
    table = np.zeros((int(present.max()) + 1 if present.size else 1, dim))
    for i in present:
        table[i] = np.asarray(centers[int(i)], dtype=np.float64)
    diff = table[inst] - cloud.xyz[sel, :dim]
    vox = assignment.point_voxel[sel]
    rows, inv = np.unique(vox, return_inverse=True)
    sums = np.zeros((len(rows), dim))
    np.add.at(sums, inv, diff)
    cnt = np.bincount(inv, minlength=len(rows))
    return VoxelOffsets(rows, sums / cnt[:, None])


def voxel_to_point_labels(assignment: VoxelAssignment, voxel_semantic, voxel_instance) -> PanopticLabeling:
    """Broadcast per-voxel (class, instance) to points; out-of-range points get (0, 0)."""
    vs = np.asarray(voxel_semantic, dtype=np.int64).reshape(-1)
    vi = np.asarray(voxel_instance, dtype=np.int64).reshape(-1)
    if len(vs) != assignment.n_nonempty or len(vi) != assignment.n_nonempty:
        raise ValueError(
            f"voxel results cover {len(vs)}/{len(vi)} voxels, expected {assignment.n_nonempty}"
        )
    pv = assignment.point_voxel
    ok = pv >= 0
    sem = np.zeros(len(pv), dtype=np.int64)
    inst = np.zeros(len(pv), dtype=np.int64)
    sem[ok] = vs[pv[ok]]
    inst[ok] = vi[pv[ok]]
    return PanopticLabeling(sem, inst)


def voxel_means(assignment: VoxelAssignment, values: np.ndarray, mask=None) -> np.ndarray:
    """Per-voxel mean of a per-point array, optionally over a point subset.

    Voxels with no selected point get NaN.
    """
    values = np.asarray(values, dtype=np.float64)
    sel = assignment.in_range if mask is None else assignment.in_range & np.asarray(mask, bool)
    idx = np.flatnonzero(sel)
    vox = assignment.point_voxel[idx]
    shape = (assignment.n_nonempty,) + values.shape[1:]
    sums = np.zeros(shape)
    np.add.at(sums, vox, values[idx])
    cnt = np.bincount(vox, minlength=assignment.n_nonempty).astype(np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        cnt = cnt.reshape((-1,) + (1,) * (values.ndim - 1))
        return sums / cnt
