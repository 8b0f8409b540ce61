"""End-to-end clustering: shifted thing voxels -> heatmap -> centers -> groups
-> instance ids, plus the point-level panoptic fusion around it."""
from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .assignment import assign_instances, fuse_panoptic
from .baselines import dbscan, mean_shift
from .config import Config
from .core import ClassTable, GridConfig, PanopticLabeling, PointCloud
from .grouping import CenterGroups, SparseClassMap, group_centers, singleton_groups
from .heatmap import CenterSet, Heatmap, build_pseudo_image, class_agnostic, extract_centers
from .partition import cylindrical_voxelize, voxel_means, voxel_semantic_labels, voxel_to_point_labels


@contextmanager
def _timed(timings, key):
    t0 = time.perf_counter()
    yield
    if timings is not None:
        timings[key] = timings.get(key, 0.0) + (time.perf_counter() - t0) * 1e3


@dataclass
class ClusterResult:
    instance: np.ndarray  # 1-based per shifted voxel, 0 = unassigned
    centers: CenterSet | None = None
    groups: CenterGroups | None = None
    heatmap: Heatmap | None = None
    timings: dict = field(default_factory=dict)  # milliseconds per stage


def cluster_shifted(shifted, classes, grid: GridConfig, table: ClassTable,
                    grouping: bool = True) -> ClusterResult:
    """Pseudo-heatmap clustering of shifted thing voxels (BEV positions)."""
    timings = {}
    with _timed(timings, "build"):
        img = build_pseudo_image(shifted, classes, grid, n_classes=table.n_classes)
        hm = class_agnostic(img)
    with _timed(timings, "extract"):
        centers = extract_centers(hm, grid)
    with _timed(timings, "group"):
        cmap = SparseClassMap(img, grid.avgpool_window)
        groups = group_centers(centers, cmap, table) if grouping else singleton_groups(centers, cmap)
    with _timed(timings, "assign"):
        inst = assign_instances(shifted, centers, groups)
    timings["total"] = sum(timings.values())
    return ClusterResult(inst, centers, groups, hm, timings)


def cluster_with(algo: str, shifted, classes, config: Config, **kw) -> ClusterResult:
    """Run one of ``phnet``, ``phnet-nogroup``, ``meanshift`` or ``dbscan``."""
    if algo in ("phnet", "phnet-nogroup"):
        return cluster_shifted(shifted, classes, config.grid, config.table,
                               grouping=(algo == "phnet") and config.grouping)
    timings = {}
    xy = np.asarray(shifted, dtype=np.float64)[:, :2]
    if algo == "meanshift":
        bw = kw.get("bandwidth") or dominant_radius(classes, config.table)
        with _timed(timings, "total"):
            labels, _ = mean_shift(xy, bw)
        return ClusterResult(labels + 1, timings=timings)
    if algo == "dbscan":
        eps = kw.get("eps", 2 * config.grid.bev_cell)
        with _timed(timings, "total"):
            labels = dbscan(xy, eps, kw.get("min_pts", 3))
        return ClusterResult(np.where(labels >= 0, labels + 1, 0), timings=timings)
    raise ValueError(f"unknown clustering algorithm {algo!r}")


def dominant_radius(classes, table: ClassTable) -> float:
    """Grouping radius of the most frequent thing class."""
    cls = np.asarray(classes, dtype=np.int64)
    cls = cls[table.is_thing(cls)]
    if cls.size == 0:
        return min(min(s[:2]) for s in table.avg_size.values())
    top = np.bincount(cls).argmax()
    return float(min(table.avg_size[int(top)][:2]))


@dataclass
class FrameResult:
    labels: PanopticLabeling
    cluster: ClusterResult
    n_thing_elements: int
    timings: dict


def segment_frame(cloud: PointCloud, semantic, offsets, config: Config,
                  algo: str = "phnet", **kw) -> FrameResult:
    """Panoptic labels for one frame from per-point classes and BEV offsets.

    In voxel mode points are first binned into the cylindrical grid; each
    voxel takes the majority class of its points and is shifted by the mean
    offset of its thing points from the mean position of those points.
    """
    semantic = np.asarray(semantic, dtype=np.int64).reshape(-1)
    offsets = np.asarray(offsets, dtype=np.float64)[:, :2]
    if len(semantic) != len(cloud) or len(offsets) != len(cloud):
        raise ValueError("semantics, offsets and points must be aligned")
    table = config.table
    timings = {}
    if config.mode == "point":
        thing = np.flatnonzero(table.is_thing(semantic))
        shifted = cloud.xyz[thing, :2] + offsets[thing]
        res = cluster_with(algo, shifted, semantic[thing], config, **kw)
        inst = np.zeros(len(cloud), dtype=np.int64)
        inst[thing] = res.instance
        with _timed(timings, "fuse"):
            labels = fuse_panoptic(semantic, inst, table)
        n_elem = len(thing)
    else:
        with _timed(timings, "voxelize"):
            va = cylindrical_voxelize(cloud, config.grid)
            vsem = voxel_semantic_labels(va, PanopticLabeling(semantic, np.zeros_like(semantic)))
            thing_pts = table.is_thing(semantic)
            pos = voxel_means(va, cloud.xyz[:, :2], thing_pts)
            off = voxel_means(va, offsets, thing_pts)
            tv = np.flatnonzero(table.is_thing(vsem))
            shifted = pos[tv] + off[tv]
        res = cluster_with(algo, shifted, vsem[tv], config, **kw)
        vinst = np.zeros(va.n_nonempty, dtype=np.int64)
        vinst[tv] = res.instance
        with _timed(timings, "fuse"):
            pl = voxel_to_point_labels(va, vsem, vinst)
            labels = fuse_panoptic(pl.semantic, pl.instance, table)
        n_elem = len(tv)
    timings.update({f"cluster_{k}": v for k, v in res.timings.items()})
    return FrameResult(labels, res, n_elem, timings)
