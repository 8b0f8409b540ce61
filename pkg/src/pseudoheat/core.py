"""Shared domain types, configuration and the seeded random stream.

Label conventions follow SemanticKITTI: semantic class 0 is ignore/unlabeled
and instance id 0 means "no instance" (stuff, or unassigned thing).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

IGNORE = 0
MAX_LABEL = 0xFFFF


def seeded_rng(seed: int) -> np.random.Generator:
    """Return a numpy Generator backed by PCG64 (PCG-XSL-RR 128/64).

    The raw 64-bit output of PCG64 for a given seed is fixed by numpy's
    stream-compatibility policy, which is what the golden file pins.
    """
    if not isinstance(seed, (int, np.integer)) or seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must be an integer in [0, 2**64), got {seed!r}")
    return np.random.Generator(np.random.PCG64(int(seed)))


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PointCloud:
    xyz: np.ndarray
    intensity: np.ndarray | None = None

    def __post_init__(self):
        xyz = np.array(self.xyz, dtype=np.float64)
        if xyz.ndim != 2 or xyz.shape[1] != 3:
            raise ValueError(f"xyz must have shape (N, 3), got {xyz.shape}")
        if not np.isfinite(xyz).all():
            raise ValueError("point coordinates must be finite (found NaN/Inf)")
        object.__setattr__(self, "xyz", _frozen(xyz))
        if self.intensity is not None:
            inten = np.array(self.intensity, dtype=np.float64).reshape(-1)
            if len(inten) != len(xyz):
                raise ValueError(
                    f"intensity has length {len(inten)}, expected {len(xyz)}"
                )
            object.__setattr__(self, "intensity", _frozen(inten))

    def __len__(self):
        return len(self.xyz)

    @property
    def n(self) -> int:
        return len(self.xyz)


@dataclass(frozen=True, eq=False)
class PanopticLabeling:
    """Per-point (semantic class, instance id) pairs."""

    semantic: np.ndarray
    instance: np.ndarray

    def __post_init__(self):
        sem = np.asarray(self.semantic).reshape(-1)
        inst = np.asarray(self.instance).reshape(-1)
        if len(sem) != len(inst):
            raise ValueError(
                f"semantic ({len(sem)}) and instance ({len(inst)}) lengths differ"
            )
        for name, a in (("semantic", sem), ("instance", inst)):
            if a.size and (a.min() < 0 or a.max() > MAX_LABEL):
                raise ValueError(f"{name} ids must lie in [0, {MAX_LABEL}]")
        object.__setattr__(self, "semantic", _frozen(sem.astype(np.int64)))
        object.__setattr__(self, "instance", _frozen(inst.astype(np.int64)))

    def __len__(self):
        return len(self.semantic)

    def __eq__(self, other):
        if not isinstance(other, PanopticLabeling):
            return NotImplemented
        return np.array_equal(self.semantic, other.semantic) and np.array_equal(
            self.instance, other.instance
        )

    def check(self, table: "ClassTable", n: int | None = None) -> "PanopticLabeling":
        """Validate against a class table (and optionally a cloud size)."""
        if n is not None and len(self) != n:
            raise ValueError(f"labeling has {len(self)} entries, cloud has {n}")
        has_inst = self.instance != 0
        if has_inst.any():
            bad = ~np.isin(self.semantic[has_inst], table.thing_ids)
            if bad.any():
                cls = np.unique(self.semantic[has_inst][bad])
                raise ValueError(
                    f"points with instance ids carry non-thing classes {cls.tolist()}"
                )
        return self

    @classmethod
    def empty(cls, n: int = 0) -> "PanopticLabeling":
        z = np.zeros(n, dtype=np.int64)
        return cls(z, z.copy())


@dataclass(frozen=True)
class ClassTable:
    """Thing/stuff class ids and average thing sizes (width, length, height) in m."""

    thing_classes: frozenset
    stuff_classes: frozenset
    avg_size: Mapping[int, tuple] = field(default_factory=dict)
    names: Mapping[int, str] = field(default_factory=dict)

    def __post_init__(self):
        things = frozenset(int(c) for c in self.thing_classes)
        stuff = frozenset(int(c) for c in self.stuff_classes)
        if things & stuff:
            raise ValueError(f"thing and stuff classes overlap: {sorted(things & stuff)}")
        if IGNORE in things or IGNORE in stuff:
            raise ValueError("class id 0 is reserved for ignore")
        if any(c < 0 or c > MAX_LABEL for c in things | stuff):
            raise ValueError("class ids must lie in [1, 65535]")
        sizes = {}
        for c, s in dict(self.avg_size).items():
            c = int(c)
            s = tuple(float(v) for v in s)
            if c not in things:
                raise ValueError(f"avg_size given for non-thing class {c}")
            if len(s) != 3 or not all(math.isfinite(v) and v > 0 for v in s):
                raise ValueError(f"avg_size for class {c} must be 3 positive values, got {s}")
            sizes[c] = s
        missing = things - sizes.keys()
        if missing:
            raise ValueError(f"thing classes without avg_size: {sorted(missing)}")
        object.__setattr__(self, "thing_classes", things)
        object.__setattr__(self, "stuff_classes", stuff)
        object.__setattr__(self, "avg_size", sizes)
        object.__setattr__(self, "names", {int(k): str(v) for k, v in dict(self.names).items()})

    @property
    def thing_ids(self) -> np.ndarray:
        return np.array(sorted(self.thing_classes), dtype=np.int64)

    @property
    def stuff_ids(self) -> np.ndarray:
        return np.array(sorted(self.stuff_classes), dtype=np.int64)

    @property
    def class_ids(self) -> np.ndarray:
        return np.array(sorted(self.thing_classes | self.stuff_classes), dtype=np.int64)

    @property
    def n_classes(self) -> int:
        """Channel count covering every class id, ignore included."""
        return int(self.class_ids.max()) + 1 if self.class_ids.size else 1

    def is_thing(self, semantic) -> np.ndarray:
        return np.isin(np.asarray(semantic), self.thing_ids)

    def name(self, c: int) -> str:
        return self.names.get(int(c), str(c))


# SemanticKITTI learning ids (19 classes). Sizes are KITTI box-statistics
# averages (w, l, h) in meters; classes without KITTI boxes borrow the
# closest annotated category.
SEMANTIC_KITTI_NAMES = {
    1: "car", 2: "bicycle", 3: "motorcycle", 4: "truck", 5: "other-vehicle",
    6: "person", 7: "bicyclist", 8: "motorcyclist", 9: "road", 10: "parking",
    11: "sidewalk", 12: "other-ground", 13: "building", 14: "fence",
    15: "vegetation", 16: "trunk", 17: "terrain", 18: "pole", 19: "traffic-sign",
}
SEMANTIC_KITTI_SIZES = {
    1: (1.6, 3.9, 1.56),
    2: (0.6, 1.76, 1.73),
    3: (0.8, 2.1, 1.5),
    4: (2.6, 9.5, 3.4),
    5: (2.9, 11.0, 3.5),
    6: (0.6, 0.8, 1.73),
    7: (0.6, 1.76, 1.73),
    8: (0.8, 2.1, 1.73),
}


def semantic_kitti_table() -> ClassTable:
    return ClassTable(
        thing_classes=frozenset(range(1, 9)),
        stuff_classes=frozenset(range(9, 20)),
        avg_size=SEMANTIC_KITTI_SIZES,
        names=SEMANTIC_KITTI_NAMES,
    )


def average_sizes(box_sizes, box_classes) -> dict:
    """Per-class mean (width, length, height) from 3D box annotations.

    ``box_sizes`` is (B, 3) as (w, l, h); width is taken as the shorter
    footprint side so that box orientation conventions do not matter.
    """
    sizes = np.asarray(box_sizes, dtype=np.float64).reshape(-1, 3)
    classes = np.asarray(box_classes).reshape(-1)
    if len(sizes) != len(classes):
        raise ValueError("box_sizes and box_classes lengths differ")
    wl = np.sort(sizes[:, :2], axis=1)
    canon = np.column_stack([wl, sizes[:, 2]])
    out = {}
    for c in np.unique(classes):
        out[int(c)] = tuple(float(v) for v in canon[classes == c].mean(axis=0))
    return out


@dataclass(frozen=True)
class GridConfig:
    """Cylindrical voxel grid plus cartesian BEV heatmap parameters.

    phi always spans the full circle [-pi, pi).
    """

    rho_min: float = 0.0
    rho_max: float = 50.0
    z_min: float = -4.0
    z_max: float = 2.0
    n_rho: int = 240
    n_phi: int = 180
    n_z: int = 32
    bev_cell: float = 0.2
    bev_extent: float = 51.2
    maxpool_window: int = 5
    avgpool_window: int = 5
    min_center_score: int = 1

    def __post_init__(self):
        for name in ("rho_min", "rho_max", "z_min", "z_max", "bev_cell", "bev_extent"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if not 0 <= self.rho_min < self.rho_max:
            raise ValueError(f"need 0 <= rho_min < rho_max, got {self.rho_min}, {self.rho_max}")
        if not self.z_min < self.z_max:
            raise ValueError(f"need z_min < z_max, got {self.z_min}, {self.z_max}")
        for name in ("n_rho", "n_phi", "n_z"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v}")
        if self.bev_cell <= 0:
            raise ValueError(f"bev_cell must be > 0, got {self.bev_cell}")
        if self.bev_extent <= 0:
            raise ValueError(f"bev_extent must be > 0, got {self.bev_extent}")
        for name in ("maxpool_window", "avgpool_window"):
            v = getattr(self, name)
            if int(v) != v or v < 1 or v % 2 == 0:
                raise ValueError(f"{name} must be an odd positive integer, got {v}")
        if int(self.min_center_score) != self.min_center_score or self.min_center_score < 1:
            raise ValueError(f"min_center_score must be a positive integer, got {self.min_center_score}")

    @property
    def cyl_dims(self) -> tuple:
        return (self.n_rho, self.n_phi, self.n_z)

    @property
    def bev_size(self) -> int:
        """Heatmap side length in cells (the heatmap is square)."""
        return int(math.ceil(2 * self.bev_extent / self.bev_cell - 1e-9))


def check_offsets(offsets, n: int | None = None) -> np.ndarray:
    """Validate an (M, 2) or (M, 3) displacement array in meters."""
    off = np.asarray(offsets, dtype=np.float64)
    if off.ndim != 2 or off.shape[1] not in (2, 3):
        raise ValueError(f"offsets must have shape (M, 2) or (M, 3), got {off.shape}")
    if not np.isfinite(off).all():
        raise ValueError("offsets must be finite")
    if n is not None and len(off) != n:
        raise ValueError(f"expected {n} offsets, got {len(off)}")
    return off
