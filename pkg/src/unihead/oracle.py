"""Brute-force reference implementations.

Everything here is written as a direct loop transcription and shares no
kernel code with the production modules (only numpy primitives). Oracles
always run in double precision and are allowed to be asymptotically slow.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericError, ShapeError

REL_FLOOR = 1e-8  # below this reference magnitude, absolute error is used


@dataclass
class OracleReport:
    name: str
    max_abs_err: float
    max_rel_err: float
    trials: int
    tolerance: float
    passed: bool

    def to_json(self) -> str:
        return json.dumps({
            "name": self.name,
            "max_abs_err": self.max_abs_err,
            "max_rel_err": self.max_rel_err,
            "trials": self.trials,
            "tolerance": self.tolerance,
            "pass": self.passed,
        })


def error_stats(got: np.ndarray, ref: np.ndarray) -> tuple[float, float]:
    """(max abs error, max hybrid rel error) over all elements."""
    got = np.asarray(got, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if got.shape != ref.shape:
        raise ShapeError(f"comparison shapes differ: {got.shape} vs {ref.shape}")
    diff = np.abs(got - ref)
    mag = np.abs(ref)
    rel = np.where(mag >= REL_FLOOR, diff / np.maximum(mag, REL_FLOOR), diff)
    if diff.size == 0:
        return 0.0, 0.0
    return float(diff.max()), float(rel.max())


def make_report(name: str, pairs, tolerance: float) -> OracleReport:
    """Aggregate (got, ref) pairs into a single report."""
    max_abs = 0.0
    max_rel = 0.0
    n = 0
    for got, ref in pairs:
        a, r = error_stats(got, ref)
        max_abs = max(max_abs, a)
        max_rel = max(max_rel, r)
        n += 1
    return OracleReport(name, max_abs, max_rel, n, tolerance, max_rel <= tolerance)


# ------------------------------------------------------- full attention

def full_attention_masked(tokens: np.ndarray, mask: np.ndarray,
                          projections) -> np.ndarray:
    """Dense O(N^2 C) softmax attention with -inf on masked pairs.

    projections = (wq, wk, wv), each (C, d). Reference semantics for the
    axial stripes: a block-diagonal mask reproduces stripe attention.
    """
    tokens = np.asarray(tokens, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    n = tokens.shape[0]
    if mask.shape != (n, n):
        raise ShapeError(f"mask shape {mask.shape} does not match {n} tokens")
    for i in range(n):
        if not mask[i].any():
            raise ConfigError(f"mask row {i} allows no positions")
    wq, wk, wv = (np.asarray(m, dtype=np.float64) for m in projections)
    d = wq.shape[1]
    q = tokens @ wq
    k = tokens @ wk
    v = tokens @ wv

    out = np.zeros((n, d))
    inv = 1.0 / math.sqrt(d)
    for i in range(n):
        scores = np.full(n, -np.inf)
        for j in range(n):
            if mask[i, j]:
                scores[j] = float(np.dot(q[i], k[j])) * inv
        m = scores[mask[i]].max()
        weights = np.zeros(n)
        for j in range(n):
            if mask[i, j]:
                weights[j] = math.exp(scores[j] - m)
        weights /= weights.sum()
        for j in range(n):
            if weights[j] != 0.0:
                out[i] += weights[j] * v[j]
    return out


# ------------------------------------------------- finite differences

def fd_gradient(f, x: np.ndarray, h: float) -> np.ndarray:
    """Central differences (f(x+h e_i) - f(x-h e_i)) / 2h per coordinate."""
    if h <= 0:
        raise ConfigError(f"finite-difference step must be positive, got {h}")
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros(x.size)
    flat = x.ravel()
    for i in range(x.size):
        bump = np.zeros(x.size)
        bump[i] = h
        hi = f((flat + bump).reshape(x.shape))
        lo = f((flat - bump).reshape(x.shape))
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise NumericError(f"non-finite evaluation at coordinate {i}")
        grad[i] = (hi - lo) / (2.0 * h)
    return grad.reshape(x.shape)


# ------------------------------------------------------ deformable loop

def _bilinear_point(x: np.ndarray, ph: float, pw: float) -> np.ndarray:
    """Zero-padded bilinear blend, written out longhand."""
    H, W, C = x.shape
    h0, w0 = math.floor(ph), math.floor(pw)
    fh, fw = ph - h0, pw - w0
    acc = np.zeros(C)
    for hh, ww, wt in ((h0, w0, (1 - fh) * (1 - fw)),
                       (h0, w0 + 1, (1 - fh) * fw),
                       (h0 + 1, w0, fh * (1 - fw)),
                       (h0 + 1, w0 + 1, fh * fw)):
        if 0 <= hh < H and 0 <= ww < W:
            acc = acc + wt * x[hh, ww]
    return acc


def naive_eq1(x: np.ndarray, weights: np.ndarray, offsets: np.ndarray,
              scales: np.ndarray) -> np.ndarray:
    """Literal per-position loop over the nine modulated deformed samples.

    weights (C_out, C_in, 3, 3); offsets (H, W, 9, 2); scales (H, W, 9).
    Bias is intentionally absent; callers add it when comparing.
    """
    x = np.asarray(x, dtype=np.float64)
    H, W, _ = x.shape
    if offsets.shape[:2] != (H, W) or scales.shape[:2] != (H, W):
        raise ShapeError(f"field dims {offsets.shape[:2]} vs map {H, W}")
    cout = weights.shape[0]
    out = np.zeros((H, W, cout))
    taps = [(ky, kx) for ky in (-1, 0, 1) for kx in (-1, 0, 1)]
    for h in range(H):
        for w in range(W):
            acc = np.zeros(cout)
            for k, (ky, kx) in enumerate(taps):
                ph = h + ky + offsets[h, w, k, 0]
                pw = w + kx + offsets[h, w, k, 1]
                sample = _bilinear_point(x, float(ph), float(pw))
                acc = acc + (weights[:, :, ky + 1, kx + 1] @ sample) * scales[h, w, k]
            out[h, w] = acc
    return out


def naive_conv3x3(x: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Plain zero-padded 3x3 convolution via the zero-offset degenerate path."""
    H, W, _ = x.shape
    offsets = np.zeros((H, W, 9, 2))
    scales = np.ones((H, W, 9))
    return naive_eq1(x, weights, offsets, scales)


# -------------------------------------------------- channel attention

def naive_eq6(xc: np.ndarray, xl: np.ndarray, params) -> np.ndarray:
    """Literal channel cross-attention for the branch guided by xl.

    params = (wq_guide, wk_target, wv_target, wk_guide, wv_guide); keys and
    values concatenate the target half then the guide half. The explicit
    C x C attention matrix is normalized column by column.
    """
    xc = np.asarray(xc, dtype=np.float64)
    xl = np.asarray(xl, dtype=np.float64)
    if xc.shape != xl.shape:
        raise ShapeError(f"branch shapes differ: {xc.shape} vs {xl.shape}")
    H, W, C = xc.shape
    hw = H * W
    wq, wk_t, wv_t, wk_g, wv_g = (np.asarray(m, dtype=np.float64) for m in params)
    tc = xc.reshape(hw, C)
    tl = xl.reshape(hw, C)
    K = np.concatenate([tc @ wk_t, tl @ wk_g], axis=1)
    V = np.concatenate([tc @ wv_t, tl @ wv_g], axis=1)
    Q = tl @ wq

    inv = 1.0 / math.sqrt(hw)
    scores = np.zeros((C, C))
    for i in range(C):
        for j in range(C):
            scores[i, j] = float(np.dot(Q[:, i], K[:, j])) * inv

    attn = np.zeros((C, C))
    for j in range(C):
        col = scores[:, j]
        m = col.max()
        e = np.array([math.exp(v - m) for v in col])
        attn[:, j] = e / e.sum()

    out = np.zeros((hw, C))
    for j in range(C):
        for i in range(C):
            if attn[i, j] != 0.0:
                out[:, j] += attn[i, j] * V[:, i]
    return out.reshape(H, W, C)
