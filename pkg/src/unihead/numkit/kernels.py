"""Dense-array kernels with hand-written backward companions.

Forward functions report MAC costs to the active counter (counting.py) and
enforce the finiteness invariant; the *_bwd companions are plain math and
never report. Feature maps are (H, W, C) row-major; projection matrices are
(in, out) so tokens multiply on the left; dense conv weights are
(C_out, C_in, k, k); depth-wise weights are (k, k, C).

Matrix products go through einsum with optimization disabled, which fixes
the reduction order (ascending inner index) and keeps goldens bitwise
reproducible.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, NumericError, ShapeError
from . import counting


def _check_finite(out: np.ndarray, op: str) -> np.ndarray:
    if not np.isfinite(out).all():
        raise NumericError(f"{op} produced non-finite values")
    return out


# ---------------------------------------------------------------- matmul

def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a, b = np.asarray(a), np.asarray(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shapes {a.shape} x {b.shape} do not chain")
    counting.add(a.shape[0] * a.shape[1] * b.shape[1])
    return _check_finite(np.einsum("ik,kj->ij", a, b, optimize=False), "matmul")


def matmul_bwd(g, a, b):
    ga = np.einsum("ij,kj->ik", g, b, optimize=False)
    gb = np.einsum("ik,ij->kj", a, g, optimize=False)
    return ga, gb


def bmm(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a, b = np.asarray(a), np.asarray(b)
    if a.ndim != 3 or b.ndim != 3 or a.shape[0] != b.shape[0] or a.shape[2] != b.shape[1]:
        raise ShapeError(f"bmm shapes {a.shape} x {b.shape} do not chain")
    counting.add(a.shape[0] * a.shape[1] * a.shape[2] * b.shape[2])
    return _check_finite(np.einsum("bik,bkj->bij", a, b, optimize=False), "bmm")


def bmm_bwd(g, a, b):
    ga = np.einsum("bij,bkj->bik", g, b, optimize=False)
    gb = np.einsum("bik,bij->bkj", a, g, optimize=False)
    return ga, gb


# --------------------------------------------------------------- softmax

def softmax(v: np.ndarray) -> np.ndarray:
    """Stable softmax of a single vector (max-subtraction)."""
    v = np.asarray(v)
    if v.ndim != 1 or v.size == 0:
        raise ShapeError(f"softmax expects a non-empty vector, got shape {v.shape}")
    return softmax_last(v)


def softmax_last(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    if x.shape[-1] == 0:
        raise ShapeError(f"softmax over empty axis, shape {x.shape}")
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)
    counting.add_non_mac("softmax", x.size)
    return _check_finite(out, "softmax")


def softmax_last_bwd(g, y):
    return y * (g - (g * y).sum(axis=-1, keepdims=True))


# ----------------------------------------------------------- activations

def relu(x: np.ndarray) -> np.ndarray:
    counting.add_non_mac("activation", x.size)
    return np.maximum(x, 0.0)


def relu_bwd(g, x):
    return g * (x > 0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    out = np.empty_like(x, dtype=x.dtype)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    counting.add_non_mac("activation", x.size)
    return _check_finite(out, "sigmoid")


def sigmoid_bwd(g, y):
    return g * y * (1.0 - y)


# ------------------------------------------------------------ layernorm

def layernorm(x: np.ndarray, gain: np.ndarray, bias: np.ndarray, eps: float) -> np.ndarray:
    """Normalize the channel vector at every spatial position (biased variance)."""
    if eps <= 0:
        raise ConfigError(f"layernorm eps must be positive, got {eps}")
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    out = xc * inv * gain + bias
    counting.add_non_mac("layernorm", x.size)
    return _check_finite(out, "layernorm")


def layernorm_bwd(g, x, gain, eps):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    ggain = (g * xhat).sum(axis=tuple(range(g.ndim - 1)))
    gbias = g.sum(axis=tuple(range(g.ndim - 1)))
    gh = g * gain
    gx = inv * (gh - gh.mean(axis=-1, keepdims=True)
                - xhat * (gh * xhat).mean(axis=-1, keepdims=True))
    return gx, ggain, gbias


# ---------------------------------------------------- dense convolution

def _tap_regions(H, W, dy, dx, pad):
    """Target slice and matching source slice for one kernel tap."""
    oy, ox = dy - pad, dx - pad
    t0h, t1h = max(0, -oy), min(H, H - oy)
    t0w, t1w = max(0, -ox), min(W, W - ox)
    if t0h >= t1h or t0w >= t1w:
        return None
    tgt = (slice(t0h, t1h), slice(t0w, t1w))
    src = (slice(t0h + oy, t1h + oy), slice(t0w + ox, t1w + ox))
    return tgt, src


def conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray | None) -> np.ndarray:
    """Stride-1 zero-padded convolution; weights (C_out, C_in, k, k), odd k."""
    H, W, Cin = x.shape
    Cout, wc_in, k, k2 = w.shape
    if k != k2 or k % 2 == 0:
        raise ConfigError(f"conv2d kernel must be odd square, got {k}x{k2}")
    if wc_in != Cin:
        raise ShapeError(f"conv2d input channels {Cin} vs weight {wc_in}")
    pad = k // 2
    y = np.zeros((H, W, Cout), dtype=x.dtype)
    if b is not None:
        y += b
    for dy in range(k):
        for dx in range(k):
            r = _tap_regions(H, W, dy, dx, pad)
            if r is None:
                continue
            tgt, src = r
            y[tgt] += np.einsum("hwi,oi->hwo", x[src], w[:, :, dy, dx], optimize=False)
    # Zero-padded taps are counted at full cost (standard accounting).
    counting.add(H * W * k * k * Cin * Cout)
    return _check_finite(y, "conv2d")


def conv2d_bwd(g, x, w):
    H, W, Cin = x.shape
    Cout, _, k, _ = w.shape
    pad = k // 2
    gx = np.zeros_like(x)
    gw = np.zeros_like(w)
    gb = g.sum(axis=(0, 1))
    for dy in range(k):
        for dx in range(k):
            r = _tap_regions(H, W, dy, dx, pad)
            if r is None:
                continue
            tgt, src = r
            gw[:, :, dy, dx] = np.einsum("hwo,hwi->oi", g[tgt], x[src], optimize=False)
            gx[src] += np.einsum("hwo,oi->hwi", g[tgt], w[:, :, dy, dx], optimize=False)
    return gx, gw, gb


def dwconv(x: np.ndarray, w: np.ndarray, b: np.ndarray | None) -> np.ndarray:
    """Depth-wise stride-1 zero-padded convolution; weights (k, k, C), odd k."""
    H, W, C = x.shape
    k, k2, wc = w.shape
    if k != k2 or k % 2 == 0:
        raise ConfigError(f"dwconv kernel must be odd square, got {k}x{k2}")
    if wc != C:
        raise ShapeError(f"dwconv channels {C} vs weight {wc}")
    pad = k // 2
    y = np.zeros_like(x)
    if b is not None:
        y += b
    for dy in range(k):
        for dx in range(k):
            r = _tap_regions(H, W, dy, dx, pad)
            if r is None:
                continue
            tgt, src = r
            y[tgt] += x[src] * w[dy, dx]
    counting.add(H * W * C * k * k)
    return _check_finite(y, "dwconv")


def dwconv_bwd(g, x, w):
    H, W, C = x.shape
    k = w.shape[0]
    pad = k // 2
    gx = np.zeros_like(x)
    gw = np.zeros_like(w)
    gb = g.sum(axis=(0, 1))
    for dy in range(k):
        for dx in range(k):
            r = _tap_regions(H, W, dy, dx, pad)
            if r is None:
                continue
            tgt, src = r
            gw[dy, dx] = (g[tgt] * x[src]).sum(axis=(0, 1))
            gx[src] += g[tgt] * w[dy, dx]
    return gx, gw, gb


# ----------------------------------------------------- bilinear sampling

def _corner_values(x, hc, wc):
    """Values at integer grid (hc, wc) under zero padding, plus validity mask."""
    H, W, _ = x.shape
    valid = (hc >= 0) & (hc < H) & (wc >= 0) & (wc < W)
    vals = x[np.clip(hc, 0, H - 1), np.clip(wc, 0, W - 1)] * valid[..., None]
    return vals, valid


def _bilinear_parts(x, ph, pw):
    h0 = np.floor(ph).astype(np.int64)
    w0 = np.floor(pw).astype(np.int64)
    # subtract in the position dtype: int64 operands would upcast f32 to f64
    fh = ph - h0.astype(ph.dtype)
    fw = pw - w0.astype(pw.dtype)
    v00, _ = _corner_values(x, h0, w0)
    v01, _ = _corner_values(x, h0, w0 + 1)
    v10, _ = _corner_values(x, h0 + 1, w0)
    v11, _ = _corner_values(x, h0 + 1, w0 + 1)
    return h0, w0, fh, fw, v00, v01, v10, v11


def grid_sample(x: np.ndarray, pos: np.ndarray) -> np.ndarray:
    """Bilinear samples of x at absolute (h, w) positions; pos is (..., 2).

    Points with all four corners outside the map give the zero vector.
    """
    pos = np.asarray(pos)
    if pos.shape[-1] != 2:
        raise ShapeError(f"grid_sample positions must end in 2, got {pos.shape}")
    ph, pw = pos[..., 0], pos[..., 1]
    _, _, fh, fw, v00, v01, v10, v11 = _bilinear_parts(x, ph, pw)
    fh, fw = fh[..., None], fw[..., None]
    out = ((1 - fh) * (1 - fw) * v00 + (1 - fh) * fw * v01
           + fh * (1 - fw) * v10 + fh * fw * v11)
    counting.add(4 * ph.size * x.shape[2])
    return _check_finite(out, "grid_sample")


def grid_sample_bwd(g, x, pos):
    H, W, C = x.shape
    ph, pw = pos[..., 0], pos[..., 1]
    h0, w0, fh, fw, v00, v01, v10, v11 = _bilinear_parts(x, ph, pw)
    fhe, fwe = fh[..., None], fw[..., None]

    gx = np.zeros_like(x)
    for hc, wc, wgt in (
        (h0, w0, (1 - fhe) * (1 - fwe)),
        (h0, w0 + 1, (1 - fhe) * fwe),
        (h0 + 1, w0, fhe * (1 - fwe)),
        (h0 + 1, w0 + 1, fhe * fwe),
    ):
        valid = (hc >= 0) & (hc < H) & (wc >= 0) & (wc < W)
        contrib = (g * wgt * valid[..., None]).reshape(-1, C)
        np.add.at(gx, (np.clip(hc, 0, H - 1).ravel(), np.clip(wc, 0, W - 1).ravel()), contrib)

    dh = (v10 - v00) * (1 - fwe) + (v11 - v01) * fwe
    dw = (v01 - v00) * (1 - fhe) + (v11 - v10) * fhe
    gpos = np.stack([(g * dh).sum(axis=-1), (g * dw).sum(axis=-1)], axis=-1)
    return gx, gpos


def bilinear_sample(x: np.ndarray, p) -> np.ndarray:
    """Bilinear blend of the <=4 grid points around continuous point p = (h, w)."""
    p = np.asarray(p, dtype=np.asarray(x).dtype)
    if p.shape != (2,):
        raise ShapeError(f"bilinear_sample point must have shape (2,), got {p.shape}")
    return grid_sample(x, p[None, :])[0]
