"""Seeded synthetic LiDAR-like scenes with panoptic ground truth.

Instances are axis-aligned box footprints filled with uniform points; stuff
is scattered over annuli around the sensor. Ground-truth offsets point from
each thing point to its instance center in the BEV plane, so shifting by
them is what a perfect offset regressor would produce.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import ClassTable, PanopticLabeling, PointCloud, check_offsets, seeded_rng

CENTER_MODES = ("axis_aligned", "mass", "box")


@dataclass
class InstanceSpec:
    cls: int
    size: tuple  # (width, length, height) m; length runs along ``axis``
    position: tuple  # footprint center (x, y) m
    n_points: int
    scatter: str = "uniform"  # "uniform" | "partial"
    axis: str = "x"
    partial_depth: float = 0.25  # fraction of the footprint kept in partial mode

    def half_extents(self):
        w, l, _ = self.size
        return (l / 2, w / 2) if self.axis == "x" else (w / 2, l / 2)


@dataclass
class StuffSpec:
    cls: int
    n_points: int
    rho: tuple = (3.0, 45.0)
    z: tuple = (-0.05, 0.05)  # relative to ground


@dataclass
class SceneSpec:
    instances: list = field(default_factory=list)
    stuff: list = field(default_factory=list)
    extent: float = 50.0
    seed: int = 0
    center_mode: str = "axis_aligned"
    ground_z: float = -2.0
    lift: float = 0.3  # gap between ground and object bottoms

    def __post_init__(self):
        self.instances = [i if isinstance(i, InstanceSpec) else InstanceSpec(**i) for i in self.instances]
        self.stuff = [s if isinstance(s, StuffSpec) else StuffSpec(**s) for s in self.stuff]
        if self.center_mode not in CENTER_MODES:
            raise ValueError(f"center_mode must be one of {CENTER_MODES}, got {self.center_mode!r}")
        if self.extent <= 0:
            raise ValueError("extent must be positive")
        for inst in self.instances:
            inst.size = tuple(float(v) for v in inst.size)
            inst.position = tuple(float(v) for v in inst.position)
            if inst.n_points < 1 or min(inst.size) <= 0:
                raise ValueError(f"instance needs positive point count and size: {inst}")
            if inst.scatter not in ("uniform", "partial") or inst.axis not in ("x", "y"):
                raise ValueError(f"bad scatter/axis in {inst}")
            if np.hypot(*inst.position) > self.extent:
                raise ValueError(f"instance at {inst.position} lies outside extent {self.extent}")
        for s in self.stuff:
            if s.n_points < 0 or not 0 <= s.rho[0] < s.rho[1] <= self.extent:
                raise ValueError(f"bad stuff spec {s}")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SceneSpec":
        return cls(**json.loads(text))


@dataclass(frozen=True, eq=False)
class Scene:
    cloud: PointCloud
    labels: PanopticLabeling
    centers: dict  # instance id -> (x, y)
    offsets: np.ndarray  # (N, 2), zero on stuff points

    @property
    def thing_mask(self) -> np.ndarray:
        return self.labels.instance != 0


def _sample_instance(rng, inst: InstanceSpec, ground_z, lift):
    hx, hy = inst.half_extents()
    cx, cy = inst.position
    n = inst.n_points
    u = rng.uniform(-1.0, 1.0, size=(n, 2))
    if inst.scatter == "partial":
        # keep a band on the side facing the sensor, across the short axis
        d = 1 if inst.axis == "x" else 0
        toward = -np.sign(inst.position[d]) or -1.0
        depth = 2.0 * inst.partial_depth
        band = rng.uniform(0.0, depth, size=n)
        u[:, d] = toward * (1.0 - band)
    x = cx + u[:, 0] * hx
    y = cy + u[:, 1] * hy
    z = ground_z + lift + rng.uniform(0.0, inst.size[2], size=n)
    return np.column_stack([x, y, z])


def _center(xy, inst: InstanceSpec, mode):
    if mode == "mass":
        return xy.mean(axis=0)
    if mode == "axis_aligned":
        return 0.5 * (xy.min(axis=0) + xy.max(axis=0))
    return np.asarray(inst.position, dtype=np.float64)


def generate_scene(spec: SceneSpec) -> Scene:
    rng = seeded_rng(spec.seed)
    xyz, sem, ins = [], [], []
    centers = {}
    for k, inst in enumerate(spec.instances, start=1):
        p = _sample_instance(rng, inst, spec.ground_z, spec.lift)
        xyz.append(p)
        sem.append(np.full(len(p), inst.cls))
        ins.append(np.full(len(p), k))
        centers[k] = _center(p[:, :2], inst, spec.center_mode)
    for s in spec.stuff:
        r = np.sqrt(rng.uniform(s.rho[0] ** 2, s.rho[1] ** 2, size=s.n_points))
        t = rng.uniform(-np.pi, np.pi, size=s.n_points)
        z = spec.ground_z + rng.uniform(s.z[0], s.z[1], size=s.n_points)
        xyz.append(np.column_stack([r * np.cos(t), r * np.sin(t), z]))
        sem.append(np.full(s.n_points, s.cls))
        ins.append(np.zeros(s.n_points))
    if not xyz:
        return Scene(PointCloud(np.zeros((0, 3))), PanopticLabeling.empty(), {}, np.zeros((0, 2)))
    xyz = np.concatenate(xyz)
    sem = np.concatenate(sem).astype(np.int64)
    ins = np.concatenate(ins).astype(np.int64)
    offsets = np.zeros((len(xyz), 2))
    thing = ins != 0
    ctab = np.zeros((len(spec.instances) + 1, 2))
    for k, c in centers.items():
        ctab[k] = c
    offsets[thing] = ctab[ins[thing]] - xyz[thing, :2]
    intensity = rng.uniform(0.0, 1.0, size=len(xyz))
    return Scene(PointCloud(xyz, intensity), PanopticLabeling(sem, ins),
                 {k: tuple(map(float, c)) for k, c in centers.items()}, offsets)


def perturb_offsets(offsets, sigma: float, seed: int) -> np.ndarray:
    """Add isotropic Gaussian noise (std ``sigma`` m per axis)."""
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    off = check_offsets(offsets)
    if sigma == 0:
        return off.copy()
    return off + seeded_rng(seed).normal(0.0, sigma, size=off.shape)


def shrink_offsets(offsets, alpha: float, mask=None) -> np.ndarray:
    """Scale offsets by ``alpha`` (under-regression when alpha < 1).

    Models a regressor that stops short of the center, which is what spreads
    a long, partially scanned object into several heatmap peaks. Only rows
    selected by ``mask`` are scaled when a mask is given.
    """
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    off = check_offsets(offsets).copy()
    sel = slice(None) if mask is None else np.asarray(mask, dtype=bool)
    off[sel] *= alpha
    return off


# ---------------------------------------------------------------------------
# presets

def _default_stuff(n_points):
    # road near the sensor, sidewalk/terrain further out, a vertical building ring
    return [
        StuffSpec(9, n_points // 2, (2.0, 30.0)),
        StuffSpec(17, n_points // 4, (30.0, 45.0)),
        StuffSpec(13, n_points - n_points // 2 - n_points // 4, (45.0, 49.0), (0.0, 3.5)),
    ]


def _footprint_gap(a: InstanceSpec, b: InstanceSpec) -> float:
    ax, ay = a.half_extents()
    bx, by = b.half_extents()
    dx = abs(a.position[0] - b.position[0]) - (ax + bx)
    dy = abs(a.position[1] - b.position[1]) - (ay + by)
    return max(dx, dy)


def place_instances(rng, kinds, table: ClassTable, n_points, gap, rho=(6.0, 40.0),
                    scatter="uniform", max_tries=10_000):
    """Rejection-sample non-overlapping footprints at least ``gap`` apart."""
    placed = []
    for cls in kinds:
        w, l, h = table.avg_size[cls]
        for _ in range(max_tries):
            r = np.sqrt(rng.uniform(rho[0] ** 2, rho[1] ** 2))
            t = rng.uniform(-np.pi, np.pi)
            cand = InstanceSpec(int(cls), (w, l, h), (float(r * np.cos(t)), float(r * np.sin(t))),
                                int(n_points), scatter, "x" if rng.uniform() < 0.5 else "y")
            if all(_footprint_gap(cand, p) >= gap for p in placed):
                placed.append(cand)
                break
        else:
            raise RuntimeError(f"could not place {len(kinds)} instances with gap {gap} m")
    return placed


def separated_instances(table: ClassTable, seed: int = 0, n_instances: int = 12,
                        points_per_instance: int = 150, gap: float = 2.0,
                        stuff_points: int = 4000, classes=(1, 6, 2, 4)) -> SceneSpec:
    """Well separated instances; ``gap`` is the minimum footprint clearance.

    The default gap is twice the 1 m extent of the default 5-cell window.
    """
    rng = seeded_rng(seed)
    kinds = [classes[i % len(classes)] for i in range(n_instances)]
    inst = place_instances(rng, kinds, table, points_per_instance, gap)
    return SceneSpec(inst, _default_stuff(stuff_points), seed=seed)


def crowded_pedestrians(table: ClassTable, seed: int = 0, rows: int = 3, cols: int = 4,
                        spacing: float = 1.2, origin=(12.0, 0.0), points_per_person: int = 60,
                        stuff_points: int = 2000, person_class: int = 6) -> SceneSpec:
    """Pedestrians on a lattice with ``spacing`` m between centers."""
    w, l, h = table.avg_size[person_class]
    inst = []
    for i in range(rows):
        for j in range(cols):
            pos = (origin[0] + (i - (rows - 1) / 2) * spacing, origin[1] + (j - (cols - 1) / 2) * spacing)
            inst.append(InstanceSpec(person_class, (w, l, h), pos, points_per_person))
    return SceneSpec(inst, _default_stuff(stuff_points), seed=seed)


def partial_bus(table: ClassTable, seed: int = 0, bus_class: int = 5, distance: float = 4.0,
                bus_points: int = 1500, stuff_points: int = 3000) -> SceneSpec:
    """A bus close to the sensor seen from one side only, plus two distant cars."""
    w, l, h = table.avg_size[bus_class]
    bus = InstanceSpec(bus_class, (w, l, h), (0.0, distance + w / 2), bus_points, "partial", "x")
    cars = [
        InstanceSpec(1, table.avg_size[1], (20.0, -15.0), 200),
        InstanceSpec(1, table.avg_size[1], (-25.0, -10.0), 200, axis="y"),
    ]
    return SceneSpec([bus] + cars, _default_stuff(stuff_points), seed=seed)


def latency_scene(table: ClassTable, seed: int = 0, n_instances: int = 50,
                  n_thing_points: int = 10_000, gap: float = 2.0, classes=(1, 6)) -> SceneSpec:
    rng = seeded_rng(seed)
    kinds = [classes[i % len(classes)] for i in range(n_instances)]
    per = n_thing_points // n_instances
    inst = place_instances(rng, kinds, table, per, gap, rho=(5.0, 45.0))
    return SceneSpec(inst, [], seed=seed)
