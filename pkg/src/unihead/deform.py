"""Deformation perception: a modulated deformable 3x3 convolution whose
sampling offsets and modulation scales are predicted from the input by a
3x3 conv (zero-initialized, so an untrained block starts at plain-conv
behaviour with half modulation).

All entry points run on the autodiff tape; pass plain arrays when gradients
are not needed and read `.data` off the result.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .numkit import autodiff as ad

K = 9  # 3x3 sampling grid
TAPS = tuple((ky, kx) for ky in (-1, 0, 1) for kx in (-1, 0, 1))


def _arr(x):
    return x.data if isinstance(x, ad.Tensor) else np.asarray(x)


@dataclass
class DeformParams:
    """conv_w (C_out, C_in, 3, 3); pred_w (3K, C_in, 3, 3) producing 2K offset
    channels followed by K modulation logits."""
    conv_w: object
    conv_b: object
    pred_w: object
    pred_b: object

    def __post_init__(self):
        cw, pw = _arr(self.conv_w), _arr(self.pred_w)
        if cw.shape[2:] != (3, 3):
            raise ShapeError(f"deform conv kernel must be 3x3, got {cw.shape[2:]}")
        if pw.shape[0] != 3 * K:
            raise ShapeError(f"predictor must emit {3 * K} channels, got {pw.shape[0]}")

    @property
    def c_in(self) -> int:
        return _arr(self.conv_w).shape[1]

    @property
    def c_out(self) -> int:
        return _arr(self.conv_w).shape[0]


@dataclass
class OffsetField:
    offsets: object  # (H, W, K, 2) grid-unit displacements
    scales: object   # (H, W, K) in (0, 1)


def predict_offsets(x, p: DeformParams) -> OffsetField:
    """Raw conv output: first 2K channels are offsets, last K are sigmoided."""
    x = ad.as_tensor(x)
    H, W, C = x.shape
    if C != p.c_in:
        raise ShapeError(f"predictor expects {p.c_in} channels, input has {C}")
    raw = ad.conv2d(x, p.pred_w, p.pred_b)
    offsets = ad.reshape(ad.narrow(raw, 2, 0, 2 * K), (H, W, K, 2))
    scales = ad.sigmoid(ad.narrow(raw, 2, 2 * K, K))
    return OffsetField(offsets, scales)


def deform_conv(x, field: OffsetField, p: DeformParams) -> ad.Tensor:
    """Nine modulated bilinear samples per position, mixed by the conv weights."""
    x = ad.as_tensor(x)
    H, W, C = x.shape
    off = ad.as_tensor(field.offsets)
    sc = ad.as_tensor(field.scales)
    if off.shape[:2] != (H, W) or sc.shape[:2] != (H, W):
        raise ShapeError(f"offset field dims {off.shape[:2]} vs input {(H, W)}")
    if C != p.c_in:
        raise ShapeError(f"deform_conv expects {p.c_in} channels, input has {C}")

    conv_w = ad.as_tensor(p.conv_w)
    c_out = conv_w.shape[0]
    base = np.stack(np.meshgrid(np.arange(H), np.arange(W), indexing="ij"),
                    axis=-1).astype(x.data.dtype)

    out = None
    for k, (ky, kx) in enumerate(TAPS):
        off_k = ad.reshape(ad.narrow(off, 2, k, 1), (H, W, 2))
        pos = ad.add(off_k, base + np.array([ky, kx], dtype=x.data.dtype))
        sample = ad.grid_sample(x, pos)
        mod = ad.mul(sample, ad.reshape(ad.narrow(sc, 2, k, 1), (H, W, 1)))
        w_k = ad.transpose(ad.reshape(
            ad.narrow(ad.narrow(conv_w, 2, ky + 1, 1), 3, kx + 1, 1),
            (c_out, C)), (1, 0))
        contrib = ad.matmul(ad.reshape(mod, (H * W, C)), w_k)
        out = contrib if out is None else ad.add(out, contrib)
    return ad.add(ad.reshape(out, (H, W, c_out)), ad.as_tensor(p.conv_b))


def dp_block(x, p: DeformParams) -> ad.Tensor:
    """predict_offsets -> deform_conv -> ReLU."""
    field = predict_offsets(x, p)
    return ad.relu(deform_conv(x, field, p))
