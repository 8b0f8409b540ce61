"""Panoptic quality (PQ/SQ/RQ, PQ-dagger, thing/stuff splits), mIoU and EPE.

Points whose ground-truth class is 0 are dropped before any counting.
Segments are (class, instance) pairs; stuff classes form one segment per
class per frame, and a predicted segment matches a ground-truth segment of
the same class iff their IoU is strictly above 0.5.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .core import IGNORE, ClassTable, PanopticLabeling


def _segments(sem, inst, thing_mask):
    # stuff: instance forced to 0 -> one segment per class
    return np.where(thing_mask, inst, 0)


@dataclass
class PanopticReport:
    classes: list
    pq: dict
    sq: dict
    rq: dict
    iou: dict
    thing_classes: list
    stuff_classes: list
    aggregates: dict = field(default_factory=dict)

    def to_json(self) -> str:
        per_class = {
            str(c): {"PQ": self.pq[c], "SQ": self.sq[c], "RQ": self.rq[c], "IoU": self.iou.get(c)}
            for c in self.classes
        }
        return json.dumps({"aggregates": self.aggregates, "per_class": per_class}, indent=2, sort_keys=True)

    def to_csv(self, names=None) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["class_id", "name", "kind", "PQ", "SQ", "RQ", "IoU"])
        for c in self.classes:
            kind = "thing" if c in self.thing_classes else "stuff"
            name = names.get(c, str(c)) if names else str(c)
            iou = self.iou.get(c)
            wr.writerow([c, name, kind, f"{self.pq[c]:.4f}", f"{self.sq[c]:.4f}",
                         f"{self.rq[c]:.4f}", "" if iou is None else f"{iou:.4f}"])
        return buf.getvalue()

    def __getitem__(self, key):
        return self.aggregates[key]


class PanopticEvaluator:
    """Accumulates per-class TP/FP/FN/IoU statistics over frames.

    ``min_points`` drops unmatched segments smaller than the threshold from
    the FP/FN counts (0 disables the filter).
    """

    def __init__(self, table: ClassTable, min_points: int = 0):
        self.table = table
        self.min_points = int(min_points)
        self.class_ids = table.class_ids
        n = self.table.n_classes
        self.tp = np.zeros(n, dtype=np.int64)
        self.fp = np.zeros(n, dtype=np.int64)
        self.fn = np.zeros(n, dtype=np.int64)
        self.iou_sum = np.zeros(n, dtype=np.float64)
        self.gt_present = np.zeros(n, dtype=bool)
        self.conf = np.zeros((n, n), dtype=np.int64)  # rows pred, cols gt

    def add_frame(self, pred: PanopticLabeling, gt: PanopticLabeling) -> None:
        if len(pred) != len(gt):
            raise ValueError(f"prediction ({len(pred)}) and ground truth ({len(gt)}) are misaligned")
        keep = gt.semantic != IGNORE
        ps, pi = pred.semantic[keep], pred.instance[keep]
        gs, gi = gt.semantic[keep], gt.instance[keep]
        known = np.isin(gs, self.class_ids)
        if not known.all():
            raise ValueError(f"ground truth uses classes outside the table: {np.unique(gs[~known]).tolist()}")
        # predictions of unknown classes act as class 0: never match, never counted
        ps = np.where(np.isin(ps, self.class_ids), ps, IGNORE)
        np.add.at(self.conf, (ps, gs), 1)

        pseg = _segments(ps, pi, self.table.is_thing(ps))
        gseg = _segments(gs, gi, self.table.is_thing(gs))
        for c in self.class_ids:
            pm = ps == c
            gm = gs == c
            if gm.any():
                self.gt_present[c] = True
            if not (pm.any() or gm.any()):
                continue
            p_ids, p_area = np.unique(pseg[pm], return_counts=True)
            g_ids, g_area = np.unique(gseg[gm], return_counts=True)
            both = pm & gm
            pairs, inter = np.unique(np.column_stack([pseg[both], gseg[both]]).reshape(-1, 2),
                                     axis=0, return_counts=True)
            pa = p_area[np.searchsorted(p_ids, pairs[:, 0])]
            ga = g_area[np.searchsorted(g_ids, pairs[:, 1])]
            iou = inter / (pa + ga - inter)
            match = iou > 0.5
            self.tp[c] += int(match.sum())
            self.iou_sum[c] += float(iou[match].sum())
            p_matched = np.isin(p_ids, pairs[match, 0])
            g_matched = np.isin(g_ids, pairs[match, 1])
            self.fp[c] += int(((~p_matched) & (p_area >= self.min_points)).sum())
            self.fn[c] += int(((~g_matched) & (g_area >= self.min_points)).sum())

    def report(self) -> PanopticReport:
        t = self.table
        tp, fp, fn = (a.astype(np.float64) for a in (self.tp, self.fp, self.fn))
        denom = tp + 0.5 * fp + 0.5 * fn
        with np.errstate(invalid="ignore", divide="ignore"):
            sq = np.where(tp > 0, self.iou_sum / np.maximum(tp, 1), 0.0)
            rq = np.where(denom > 0, tp / np.where(denom > 0, denom, 1), 0.0)
            pq = np.where(denom > 0, self.iou_sum / np.where(denom > 0, denom, 1), 0.0)
        classes = [int(c) for c in t.class_ids]
        present = [c for c in classes if self.gt_present[c]]
        things = [c for c in present if c in t.thing_classes]
        stuff = [c for c in present if c in t.stuff_classes]
        conf = self.conf
        iou = {}
        for c in classes:
            gt_c = conf[:, c].sum()
            pred_c = conf[c, :].sum()
            u = gt_c + pred_c - conf[c, c]
            iou[c] = float(conf[c, c] / u) if u > 0 else 0.0

        def mean(vals, idx):
            return float(np.mean([vals[c] for c in idx])) * 100.0 if idx else 0.0

        pq_d = {c: float(pq[c]) for c in classes}
        sq_d = {c: float(sq[c]) for c in classes}
        rq_d = {c: float(rq[c]) for c in classes}
        dagger = {c: (sq_d[c] if c in t.stuff_classes else pq_d[c]) for c in present}
        agg = {
            "PQ": mean(pq_d, present), "SQ": mean(sq_d, present), "RQ": mean(rq_d, present),
            "PQ_dagger": mean(dagger, present),
            "PQ_Th": mean(pq_d, things), "SQ_Th": mean(sq_d, things), "RQ_Th": mean(rq_d, things),
            "PQ_St": mean(pq_d, stuff), "SQ_St": mean(sq_d, stuff), "RQ_St": mean(rq_d, stuff),
            "mIoU": mean(iou, present),
        }
        return PanopticReport(classes, pq_d, sq_d, rq_d, iou, things, stuff, agg)

    def stats(self, c: int) -> dict:
        return {"tp": int(self.tp[c]), "fp": int(self.fp[c]), "fn": int(self.fn[c]),
                "iou_sum": float(self.iou_sum[c])}


def panoptic_quality(pred: PanopticLabeling, gt: PanopticLabeling, table: ClassTable,
                     min_points: int = 0) -> PanopticReport:
    ev = PanopticEvaluator(table, min_points)
    ev.add_frame(pred, gt)
    return ev.report()


def mean_iou(pred_sem, gt_sem, table: ClassTable):
    """(per-class IoU dict, mean IoU in percent) over classes present in GT."""
    ps = np.asarray(pred_sem, dtype=np.int64).reshape(-1)
    gs = np.asarray(gt_sem, dtype=np.int64).reshape(-1)
    if len(ps) != len(gs):
        raise ValueError("prediction and ground truth are misaligned")
    keep = gs != IGNORE
    ps, gs = ps[keep], gs[keep]
    per = {}
    for c in table.class_ids:
        c = int(c)
        inter = np.count_nonzero((ps == c) & (gs == c))
        union = np.count_nonzero((ps == c) | (gs == c))
        per[c] = inter / union if union else 0.0
    present = [int(c) for c in table.class_ids if np.any(gs == c)]
    miou = float(np.mean([per[c] for c in present])) * 100.0 if present else 0.0
    return per, miou


def average_epe(pred_offsets, gt_offsets) -> float:
    """Mean BEV end-point error in centimeters (only x/y are used)."""
    p = np.asarray(pred_offsets, dtype=np.float64)
    g = np.asarray(gt_offsets, dtype=np.float64)
    if p.shape != g.shape:
        raise ValueError(f"offset arrays differ in shape: {p.shape} vs {g.shape}")
    if p.size == 0:
        return 0.0
    d = p.reshape(len(p), -1)[:, :2] - g.reshape(len(g), -1)[:, :2]
    return float(np.mean(np.hypot(d[:, 0], d[:, 1]))) * 100.0
