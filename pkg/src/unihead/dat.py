"""Global perception: dual-axial stripe attention in a channel-halved space
with a shared value projection, a depth-wise cross-axis aggregation on the
value map, and a pre-norm residual block around the whole thing.

Parameterization (enforced by the 3.5 C^2 parameter-law test): separate
query/key projections per axis, one value projection shared by both axes,
one full-width output projection, no projection biases. That is the only
split consistent with the closed-form costs:

    params = 4 * (C * C/2)   q/k, both axes      = 2   C^2
           + 1 * (C * C/2)   shared v            = 0.5 C^2
           + 1 * (C * C)     output projection   = 1   C^2
                                          total  = 3.5 C^2

and per forward pass the projections cost HW * 3.5C^2 MACs while width-1
stripe attention adds HW*C*(H+W) (scores and mixing over W-token rows and
H-token columns), giving HWC * (3.5C + H + W). Sharing the value map is
load-bearing: projecting it once per axis would read 4C^2, not 3.5C^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .numkit import autodiff as ad
from .numkit import counting

AXES = ("horizontal", "vertical")


def _arr(x):
    return x.data if isinstance(x, ad.Tensor) else np.asarray(x)


@dataclass
class StripeSpec:
    axis: str
    width: int = 1

    def __post_init__(self):
        if self.axis not in AXES:
            raise ConfigError(f"stripe axis must be one of {AXES}, got {self.axis!r}")
        if self.width < 1:
            raise ConfigError(f"stripe width must be positive, got {self.width}")


@dataclass
class EdaParams:
    wq_h: object
    wk_h: object
    wq_v: object
    wk_v: object
    wv_s: object
    wo: object
    cab_h_w: object
    cab_h_b: object
    cab_v_w: object
    cab_v_b: object

    @property
    def channels(self) -> int:
        return _arr(self.wq_h).shape[0]

    def check(self, c: int) -> None:
        if c % 2 != 0:
            raise ConfigError(f"channel count must be even for halving, got {c}")
        if self.channels != c:
            raise ShapeError(f"params built for C={self.channels}, input has C={c}")


@dataclass
class FfnParams:
    ln_g: object
    ln_b: object
    w1: object
    b1: object
    w2: object
    b2: object


@dataclass
class DatParams:
    ln_g: object
    ln_b: object
    eda: EdaParams
    ffn: FfnParams | None = None


def _check_divides(spec: StripeSpec, H: int, W: int) -> None:
    extent = H if spec.axis == "horizontal" else W
    if extent % spec.width != 0:
        raise ConfigError(
            f"stripe width {spec.width} does not divide {spec.axis[0].upper()}={extent}")


def _stripe_attention(q2d, k2d, vmap, H, W, spec: StripeSpec):
    """Scaled dot-product attention within stripes; token order is raster
    order of the (possibly transposed) map, which attention does not see."""
    d = q2d.shape[1]
    qm = ad.reshape(q2d, (H, W, d))
    km = ad.reshape(k2d, (H, W, d))
    vm = vmap
    if spec.axis == "vertical":
        qm, km, vm = (ad.transpose(t, (1, 0, 2)) for t in (qm, km, vm))
        H, W = W, H
    s = spec.width
    stripes, tokens = H // s, s * W
    q = ad.reshape(qm, (stripes, tokens, d))
    k = ad.reshape(km, (stripes, tokens, d))
    v = ad.reshape(vm, (stripes, tokens, d))
    scores = ad.scale(ad.bmm(q, ad.transpose(k, (0, 2, 1))), 1.0 / math.sqrt(d))
    out = ad.bmm(ad.softmax_last(scores), v)
    out = ad.reshape(out, (H, W, d))
    if spec.axis == "vertical":
        out = ad.transpose(out, (1, 0, 2))
    return out


def axial_attention(x, params: EdaParams, spec: StripeSpec):
    """One axis of stripe attention. Returns (attention output, value map),
    both (H, W, C/2); the value map feeds the cross-axis aggregation."""
    x = ad.as_tensor(x)
    H, W, C = x.shape
    params.check(C)
    _check_divides(spec, H, W)
    wq, wk = ((params.wq_h, params.wk_h) if spec.axis == "horizontal"
              else (params.wq_v, params.wk_v))
    x2d = ad.reshape(x, (H * W, C))
    with counting.scope("proj"):
        q2d = ad.matmul(x2d, ad.as_tensor(wq))
        k2d = ad.matmul(x2d, ad.as_tensor(wk))
        vmap = ad.reshape(ad.matmul(x2d, ad.as_tensor(params.wv_s)), (H, W, C // 2))
    with counting.scope("attn"):
        out = _stripe_attention(q2d, k2d, vmap, H, W, spec)
    return out, vmap


def cab(value_map, attn_out, weight, bias):
    """attn_out + 3x3 depth-wise conv of the value map."""
    value_map, attn_out = ad.as_tensor(value_map), ad.as_tensor(attn_out)
    if value_map.shape != attn_out.shape:
        raise ShapeError(f"cab shapes differ: {value_map.shape} vs {attn_out.shape}")
    return ad.add(attn_out, ad.dwconv(value_map, weight, bias))


def eda(x, params: EdaParams, stripe_width: int = 1) -> ad.Tensor:
    """Both axes in parallel over one shared value map, concatenated back to
    C channels and fused by the output projection."""
    x = ad.as_tensor(x)
    H, W, C = x.shape
    params.check(C)
    h_spec = StripeSpec("horizontal", stripe_width)
    v_spec = StripeSpec("vertical", stripe_width)
    _check_divides(h_spec, H, W)
    _check_divides(v_spec, H, W)

    x2d = ad.reshape(x, (H * W, C))
    with counting.scope("proj"):
        vmap = ad.reshape(ad.matmul(x2d, ad.as_tensor(params.wv_s)), (H, W, C // 2))
        qh = ad.matmul(x2d, ad.as_tensor(params.wq_h))
        kh = ad.matmul(x2d, ad.as_tensor(params.wk_h))
        qv = ad.matmul(x2d, ad.as_tensor(params.wq_v))
        kv = ad.matmul(x2d, ad.as_tensor(params.wk_v))
    with counting.scope("attn"):
        out_h = _stripe_attention(qh, kh, vmap, H, W, h_spec)
        out_v = _stripe_attention(qv, kv, vmap, H, W, v_spec)
    with counting.scope("cab"):
        z_h = cab(vmap, out_h, params.cab_h_w, params.cab_h_b)
        z_v = cab(vmap, out_v, params.cab_v_w, params.cab_v_b)
    cat = ad.concat([z_h, z_v], axis=2)
    with counting.scope("proj"):
        fused = ad.matmul(ad.reshape(cat, (H * W, C)), ad.as_tensor(params.wo))
    return ad.reshape(fused, (H, W, C))


LN_EPS = 1e-6


def dat_block(x, params: DatParams, stripe_width: int = 1) -> ad.Tensor:
    """x + eda(layernorm(x)), plus an optional pre-norm MLP sub-layer."""
    x = ad.as_tensor(x)
    with counting.scope("norm"):
        normed = ad.layernorm(x, params.ln_g, params.ln_b, LN_EPS)
    with counting.scope("eda"):
        mixed = eda(normed, params.eda, stripe_width)
    out = ad.add(x, mixed)
    if params.ffn is not None:
        f = params.ffn
        H, W, C = out.shape
        with counting.scope("ffn"):
            n2 = ad.reshape(ad.layernorm(out, f.ln_g, f.ln_b, LN_EPS), (H * W, C))
            hid = ad.relu(ad.add(ad.matmul(n2, ad.as_tensor(f.w1)), ad.as_tensor(f.b1)))
            y = ad.add(ad.matmul(hid, ad.as_tensor(f.w2)), ad.as_tensor(f.b2))
        out = ad.add(out, ad.reshape(y, (H, W, C)))
    return out


def eda_flops(H: int, W: int, C: int) -> int:
    """Closed-form MAC count of eda at stripe width 1: HWC * (3.5C + H + W).
    Counts projections and attention only (cab and softmax excluded)."""
    if C % 2 != 0:
        raise ConfigError(f"channel count must be even, got {C}")
    return H * W * (7 * C * C // 2) + H * W * C * (H + W)
