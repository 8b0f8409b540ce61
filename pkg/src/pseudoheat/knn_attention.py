"""k-nearest-neighbor self-attention over thing voxels (forward pass only).

Each query attends to its k spatially nearest voxels (itself included). The
layer is multi-head attention followed by a ReLU feed-forward sublayer, both
with residual connections; no positional embedding and no normalization.
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass

import numpy as np

from .core import seeded_rng

BRUTE_FORCE_BELOW = 256
_QUERY_CHUNK = 2048


@dataclass(frozen=True, eq=False)
class ThingFeatures:
    features: np.ndarray  # (M, C)
    positions: np.ndarray  # (M, 3)

    def __post_init__(self):
        f = np.asarray(self.features, dtype=np.float64)
        p = np.asarray(self.positions, dtype=np.float64)
        if f.ndim != 2 or p.ndim != 2 or p.shape[1] != 3:
            raise ValueError(f"expected features (M, C) and positions (M, 3), got {f.shape}, {p.shape}")
        if len(f) != len(p):
            raise ValueError(f"features ({len(f)}) and positions ({len(p)}) disagree on M")
        if not (np.isfinite(f).all() and np.isfinite(p).all()):
            raise ValueError("features and positions must be finite")
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "positions", p)

    def __len__(self):
        return len(self.features)


_WEIGHT_NAMES = ("w_q", "w_k", "w_v", "w_o", "w_ff1", "w_ff2")


@dataclass(frozen=True, eq=False)
class AttentionWeights:
    w_q: np.ndarray  # (C, C')
    w_k: np.ndarray  # (C, C')
    w_v: np.ndarray  # (C, C')
    w_o: np.ndarray  # (C', C)
    w_ff1: np.ndarray  # (C, C_ff)
    w_ff2: np.ndarray  # (C_ff, C)
    heads: int = 4

    def __post_init__(self):
        arrs = {n: np.asarray(getattr(self, n), dtype=np.float64) for n in _WEIGHT_NAMES}
        for n, a in arrs.items():
            if a.ndim != 2:
                raise ValueError(f"{n} must be a matrix, got shape {a.shape}")
            if not np.isfinite(a).all():
                raise ValueError(f"{n} has non-finite entries")
            object.__setattr__(self, n, a)
        c, cp = arrs["w_q"].shape
        cff = arrs["w_ff1"].shape[1]
        expect = {
            "w_k": (c, cp), "w_v": (c, cp), "w_o": (cp, c),
            "w_ff1": (c, cff), "w_ff2": (cff, c),
        }
        for n, shape in expect.items():
            if arrs[n].shape != shape:
                raise ValueError(f"{n} has shape {arrs[n].shape}, expected {shape}")
        if self.heads < 1 or cp % self.heads:
            raise ValueError(f"head count {self.heads} must divide C'={cp}")

    @property
    def channels(self) -> int:
        return self.w_q.shape[0]

    @property
    def inner(self) -> int:
        return self.w_q.shape[1]

    @classmethod
    def random(cls, channels, inner=None, heads=4, ff=None, seed=0) -> "AttentionWeights":
        """Gaussian weights with variance 1/C drawn from the seeded stream."""
        inner = channels if inner is None else inner
        ff = 2 * channels if ff is None else ff
        rng = seeded_rng(seed)
        std = 1.0 / math.sqrt(channels)
        shapes = [(channels, inner)] * 3 + [(inner, channels), (channels, ff), (ff, channels)]
        mats = [rng.normal(0.0, std, size=s) for s in shapes]
        return cls(*mats, heads=heads)

    def save(self, path) -> None:
        """Write a length-prefixed JSON header followed by little-endian float64 data."""
        header = {
            "format": "pseudoheat-attention",
            "dtype": "<f8",
            "heads": int(self.heads),
            "tensors": [{"name": n, "shape": list(getattr(self, n).shape)} for n in _WEIGHT_NAMES],
        }
        raw = json.dumps(header, sort_keys=True).encode()
        with open(path, "wb") as f:
            f.write(struct.pack("<I", len(raw)))
            f.write(raw)
            for n in _WEIGHT_NAMES:
                f.write(np.ascontiguousarray(getattr(self, n), dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> "AttentionWeights":
        with open(path, "rb") as f:
            blob = f.read()
        if len(blob) < 4:
            raise ValueError("weight file too short")
        (hlen,) = struct.unpack("<I", blob[:4])
        header = json.loads(blob[4:4 + hlen].decode())
        if header.get("dtype") != "<f8":
            raise ValueError(f"unsupported dtype {header.get('dtype')!r}")
        pos = 4 + hlen
        mats = {}
        for t in header["tensors"]:
            n = int(np.prod(t["shape"]))
            chunk = blob[pos:pos + 8 * n]
            if len(chunk) != 8 * n:
                raise ValueError(f"weight file truncated in tensor {t['name']}")
            mats[t["name"]] = np.frombuffer(chunk, dtype="<f8").reshape(t["shape"]).astype(np.float64)
            pos += 8 * n
        if pos != len(blob):
            raise ValueError(f"{len(blob) - pos} trailing bytes in weight file")
        return cls(*(mats[n] for n in _WEIGHT_NAMES), heads=int(header["heads"]))


# ---------------------------------------------------------------------------
# knn search

def _sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # explicit differences (not the |a|^2 + |b|^2 - 2ab expansion) so that
    # coincident points get exactly zero and ties stay exact
    d = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,ijk->ij", d, d)


def _pad_rows(idx: np.ndarray, rows: np.ndarray, k: int) -> np.ndarray:
    if idx.shape[1] >= k:
        return idx[:, :k]
    pad = np.repeat(rows[:, None], k - idx.shape[1], axis=1)
    return np.concatenate([idx, pad], axis=1)


def knn_brute_force(positions: np.ndarray, k: int, queries: np.ndarray | None = None) -> np.ndarray:
    pos = np.asarray(positions, dtype=np.float64)
    m = len(pos)
    rows = np.arange(m) if queries is None else np.asarray(queries, dtype=np.int64)
    out = np.empty((len(rows), k), dtype=np.int64)
    keep = min(k, m)
    step = max(1, (1 << 22) // max(m, 1))
    for s in range(0, len(rows), step):
        r = rows[s:s + step]
        d = _sq_dists(pos[r], pos)
        # stable sort: equal distances keep ascending index order
        nn = np.argsort(d, axis=1, kind="stable")[:, :keep]
        out[s:s + step] = _pad_rows(nn, r, k)
    return out


class _HashGrid:
    """Uniform grid bucketing of points, sorted by flat cell key."""

    def __init__(self, pos: np.ndarray, k: int):
        self.pos = pos
        lo = pos.min(axis=0)
        ext = pos.max(axis=0) - lo
        live = ext > 1e-9 * max(ext.max(), 1e-300)
        d = max(int(live.sum()), 1)
        vol = float(np.prod(ext[live])) if live.any() else 1.0
        # roughly k/2 points per cell over the non-degenerate axes
        self.cell = max((vol * k / (2.0 * len(pos))) ** (1.0 / d), 1e-12)
        self.lo = lo
        c = np.floor((pos - lo) / self.cell).astype(np.int64)
        self.dims = c.max(axis=0) + 1
        self.cells = c
        key = self._key(c)
        self.order = np.argsort(key, kind="stable")
        self.sorted_keys = key[self.order]

    def _key(self, c):
        return (c[:, 0] * self.dims[1] + c[:, 1]) * self.dims[2] + c[:, 2]

    def candidates(self, queries: np.ndarray, ring: int):
        """Flat (query row, point index) pairs over the (2r+1)^3 cell block."""
        qc = self.cells[queries]
        rng = np.arange(-ring, ring + 1)
        offs = np.stack(np.meshgrid(rng, rng, rng, indexing="ij"), -1).reshape(-1, 3)
        nb = qc[:, None, :] + offs[None, :, :]
        ok = ((nb >= 0) & (nb < self.dims)).all(axis=2)
        keys = np.where(ok, (nb[..., 0] * self.dims[1] + nb[..., 1]) * self.dims[2] + nb[..., 2], -1)
        lo = np.searchsorted(self.sorted_keys, keys, side="left")
        hi = np.searchsorted(self.sorted_keys, keys, side="right")
        lo = np.where(ok, lo, 0)
        hi = np.where(ok, hi, 0)
        cnt = (hi - lo).reshape(-1)
        qrow = np.repeat(np.repeat(np.arange(len(queries)), offs.shape[0]), cnt)
        starts = np.repeat(lo.reshape(-1), cnt)
        within = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        return qrow, self.order[starts + within]


def _k_smallest(qrow, cand, d, nq, k):
    """Per query row, the k candidates of smallest (distance, index).

    ``qrow`` must be non-decreasing. Returns the k-th distance (inf when a
    row has fewer than k candidates) and the (nq, k) sorted indices.
    """
    cnt = np.bincount(qrow, minlength=nq)
    nbrs = np.zeros((nq, k), dtype=np.int64)
    if cnt.max(initial=0) < k:
        return np.full(nq, np.inf), nbrs
    first = np.cumsum(cnt) - cnt
    col = np.arange(len(qrow)) - first[qrow]
    dm = np.full((nq, cnt.max()), np.inf)
    cm = np.full((nq, cnt.max()), np.iinfo(np.int64).max)
    dm[qrow, col] = d
    cm[qrow, col] = cand
    kth = np.partition(dm, k - 1, axis=1)[:, k - 1]
    kth[cnt < k] = np.inf
    rows = np.flatnonzero(np.isfinite(kth))
    inside = dm[rows] <= kth[rows, None]
    tied = inside.sum(axis=1) > k
    # common case: exactly k candidates within the k-th distance
    plain = rows[~tied]
    if plain.size:
        sel_d = dm[plain][inside[~tied]].reshape(-1, k)
        sel_c = cm[plain][inside[~tied]].reshape(-1, k)
        o = np.lexsort((sel_c, sel_d), axis=1)
        nbrs[plain] = np.take_along_axis(sel_c, o, axis=1)
    # equal distances straddle the k-th place: full row sort, ties by index
    for r in rows[tied]:
        o = np.lexsort((cm[r], dm[r]))[:k]
        nbrs[r] = cm[r][o]
    return kth, nbrs


def knn_indices(positions, k: int) -> np.ndarray:
    """(M, k) neighbor indices sorted by distance, ties by smaller index.

    Rows of clouds with fewer than k points are padded with the query index.
    """
    pos = np.asarray(positions, dtype=np.float64)
    if pos.ndim != 2 or pos.shape[1] != 3:
        raise ValueError(f"positions must be (M, 3), got {pos.shape}")
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    m = len(pos)
    if m == 0:
        return np.zeros((0, k), dtype=np.int64)
    if m < BRUTE_FORCE_BELOW or k >= m:
        return knn_brute_force(pos, k)

    grid = _HashGrid(pos, k)
    out = np.empty((m, k), dtype=np.int64)
    todo = grid.order  # cell order keeps candidate gathers local
    ring = 1
    while todo.size:
        if ring > 2 or ring >= grid.dims.max():
            out[todo] = knn_brute_force(pos, k, todo)
            break
        step = max(1, (1 << 21) // (k * (2 * ring + 1) ** 3))
        failed = []
        for s in range(0, len(todo), step):
            q = todo[s:s + step]
            qrow, cand = grid.candidates(q, ring)
            diff = pos[cand] - pos[q[qrow]]
            d = np.einsum("ij,ij->i", diff, diff)
            kth, nbrs = _k_smallest(qrow, cand, d, len(q), k)
            # points outside the block are farther than ring * cell
            bound = (ring * grid.cell) ** 2 * (1.0 - 1e-9)
            good = kth <= bound
            out[q[good]] = nbrs[good]
            failed.append(q[~good])
        todo = np.concatenate(failed) if failed else np.zeros(0, np.int64)
        ring += 1
    return out


# ---------------------------------------------------------------------------
# attention

def _softmax(x: np.ndarray, axis=-1) -> np.ndarray:
    x = x - x.max(axis=axis, keepdims=True)
    e = np.exp(x)
    return e / e.sum(axis=axis, keepdims=True)


def _check_finite(a, what):
    if not np.isfinite(a).all():
        raise FloatingPointError(f"non-finite values in {what}; check the weights")


def attention_forward(feat: ThingFeatures, idx: np.ndarray, w: AttentionWeights,
                      return_probs: bool = False):
    """One knn-transformer layer; returns (M, C) (and the (M, h, k) softmax if asked)."""
    x = feat.features
    m, c = x.shape
    if c != w.channels:
        raise ValueError(f"features have {c} channels, weights expect {w.channels}")
    idx = np.asarray(idx, dtype=np.int64)
    if idx.ndim != 2 or len(idx) != m:
        raise ValueError(f"idx must be (M, k) with M={m}, got {idx.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= m):
        raise ValueError("idx holds out-of-range voxel indices")
    k = idx.shape[1]
    h = w.heads
    d = w.inner // h
    scale = 1.0 / math.sqrt(d)

    with np.errstate(over="ignore", invalid="ignore"):
        q = (x @ w.w_q).reshape(m, h, d)
        kk = (x @ w.w_k).reshape(m, h, d)
        v = (x @ w.w_v).reshape(m, h, d)
        _check_finite(q, "Q"), _check_finite(kk, "K"), _check_finite(v, "V")

        att = np.empty((m, w.inner))
        probs = np.empty((m, h, k)) if return_probs else None
        for s in range(0, m, _QUERY_CHUNK):
            nb = idx[s:s + _QUERY_CHUNK]
            logits = np.einsum("mhd,mkhd->mhk", q[s:s + _QUERY_CHUNK], kk[nb]) * scale
            _check_finite(logits, "attention logits")
            p = _softmax(logits)
            if probs is not None:
                probs[s:s + _QUERY_CHUNK] = p
            att[s:s + _QUERY_CHUNK] = np.einsum("mhk,mkhd->mhd", p, v[nb]).reshape(-1, w.inner)

        y = x + att @ w.w_o
        out = y + np.maximum(y @ w.w_ff1, 0.0) @ w.w_ff2
        _check_finite(out, "layer output")
    return (out, probs) if return_probs else out


def attention_flop_count(m: int, k: int, inner: int) -> int:
    """Multiply-accumulates of the neighborhood attention (QK^T and AV).

    The dense projections are O(M * C * C') and do not depend on k, so they
    are left out of the count.
    """
    if min(m, k, inner) <= 0:
        raise ValueError("M, k and C' must be positive")
    return 2 * int(m) * int(k) * int(inner)
