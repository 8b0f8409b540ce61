"""JSON configuration: grid, class table and pipeline switches in one document."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

from .core import ClassTable, GridConfig, semantic_kitti_table

_PIPELINE_KEYS = ("knn_k", "center_mode", "grouping", "mode", "min_segment_points",
                  "attention_heads", "ff_mult", "seed")


@dataclass(frozen=True)
class Config:
    grid: GridConfig = field(default_factory=GridConfig)
    table: ClassTable = field(default_factory=semantic_kitti_table)
    knn_k: int = 25
    center_mode: str = "axis_aligned"
    grouping: bool = True
    mode: str = "voxel"  # cluster voxels ("voxel") or raw points ("point")
    min_segment_points: int = 0
    attention_heads: int = 4
    ff_mult: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.knn_k < 1:
            raise ValueError(f"knn_k must be positive, got {self.knn_k}")
        if self.mode not in ("voxel", "point"):
            raise ValueError(f"mode must be 'voxel' or 'point', got {self.mode!r}")
        if self.center_mode not in ("axis_aligned", "mass", "box"):
            raise ValueError(f"unknown center_mode {self.center_mode!r}")
        if self.min_segment_points < 0:
            raise ValueError("min_segment_points must be >= 0")

    def to_dict(self) -> dict:
        t = self.table
        things = {str(c): {"name": t.name(c), "size": list(t.avg_size[c])} for c in sorted(t.thing_classes)}
        stuff = {str(c): t.name(c) for c in sorted(t.stuff_classes)}
        out = {"grid": asdict(self.grid), "classes": {"thing": things, "stuff": stuff}}
        out.update({k: getattr(self, k) for k in _PIPELINE_KEYS})
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "Config":
        unknown = set(d) - {"grid", "classes", *_PIPELINE_KEYS}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kw = {}
        if "grid" in d:
            names = {f.name for f in fields(GridConfig)}
            bad = set(d["grid"]) - names
            if bad:
                raise ValueError(f"unknown grid keys: {sorted(bad)}")
            kw["grid"] = GridConfig(**d["grid"])
        if "classes" in d:
            c = d["classes"]
            things = {int(k): v for k, v in c.get("thing", {}).items()}
            stuff = {int(k): v for k, v in c.get("stuff", {}).items()}
            names = {k: v.get("name", str(k)) for k, v in things.items()}
            names.update({k: (v if isinstance(v, str) else str(k)) for k, v in stuff.items()})
            kw["table"] = ClassTable(frozenset(things), frozenset(stuff),
                                     {k: tuple(v["size"]) for k, v in things.items()}, names)
        for k in _PIPELINE_KEYS:
            if k in d:
                kw[k] = d[k]
        return cls(**kw)


def load_config(path) -> Config:
    with open(path) as f:
        try:
            d = json.load(f)
        except json.JSONDecodeError as e:
            raise ValueError(f"{path}: invalid JSON ({e})") from None
    return Config.from_dict(d)
