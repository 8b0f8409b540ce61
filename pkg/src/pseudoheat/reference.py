"""Dense reference for the knn attention layer.

Computes every query against every key with full M x M matrices, then
restricts the softmax to the neighbor multiset (all keys when no index is
given). Quadratic in M; meant for checks, not for production sizes.
"""
from __future__ import annotations

import numpy as np


def dense_attention(x, w, idx=None):
    x = np.asarray(x, dtype=np.float64)
    m = len(x)
    h = w.heads
    d = w.inner // h
    if idx is None:
        mult = np.ones((m, m))
    else:
        mult = np.zeros((m, m))
        idx = np.asarray(idx)
        for i in range(m):
            np.add.at(mult[i], idx[i], 1.0)
    q = x @ w.w_q
    k = x @ w.w_k
    v = x @ w.w_v
    heads = []
    for j in range(h):
        sl = slice(j * d, (j + 1) * d)
        logits = q[:, sl] @ k[:, sl].T / np.sqrt(d)
        logits = np.where(mult > 0, logits, -np.inf)
        e = mult * np.exp(logits - logits.max(axis=1, keepdims=True))
        heads.append((e / e.sum(axis=1, keepdims=True)) @ v[:, sl])
    y = x + np.concatenate(heads, axis=1) @ w.w_o
    return y + np.maximum(y @ w.w_ff1, 0.0) @ w.w_ff2
