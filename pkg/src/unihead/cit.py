"""Cross-task perception: conditional positional encoding on each branch,
channel-wise cross-attention where one branch's features act as queries for
the other, and a depth-wise locality chain on the attention output.

Both branch updates read the same positionally-encoded pair, so the block is
symmetric: swapping the inputs together with the branch parameter sets swaps
the outputs exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .numkit import autodiff as ad
from .numkit import counting

DIRECTIONS = ("cls", "loc")


def _arr(x):
    return x.data if isinstance(x, ad.Tensor) else np.asarray(x)


@dataclass
class BranchParams:
    """One task branch's projections plus its positional-encoding and
    locality kernels. wq is (C, C); wk and wv are (C, C/2) halves that
    concatenate with the other branch's to rebuild C channels."""
    wq: object
    wk: object
    wv: object
    cpe_w: object
    cpe_b: object
    leb_w1: object
    leb_b1: object
    leb_w3: object
    leb_b3: object
    leb_w2: object
    leb_b2: object


@dataclass
class CitParams:
    cls: BranchParams
    loc: BranchParams

    def check(self, c: int) -> None:
        if c % 2 != 0:
            raise ConfigError(f"channel count must be even for halving, got {c}")
        for b in (self.cls, self.loc):
            if _arr(b.wq).shape != (c, c) or _arr(b.wk).shape != (c, c // 2):
                raise ShapeError(
                    f"branch projections {_arr(b.wq).shape}/{_arr(b.wk).shape} "
                    f"inconsistent with C={c}")


@dataclass
class BranchPair:
    cls: object
    loc: object


def cpe(x, weight, bias) -> ad.Tensor:
    """Residual 3x3 depth-wise conv: input-conditioned positional signal."""
    x = ad.as_tensor(x)
    return ad.add(x, ad.dwconv(x, weight, bias))


def cca(target, guide, params: CitParams, direction: str, with_attn: bool = False):
    """Channel attention over the flattened pair.

    Keys/values concatenate the target half then the guide half; queries come
    from the guide branch (cross-task supervision). The C x C attention
    matrix is normalized over its first index, so each output channel is a
    convex mixture of value channels; scaling uses the contraction length HW.
    """
    if direction not in DIRECTIONS:
        raise ConfigError(f"direction must be one of {DIRECTIONS}, got {direction!r}")
    target, guide = ad.as_tensor(target), ad.as_tensor(guide)
    if target.shape != guide.shape:
        raise ShapeError(f"branch shapes differ: {target.shape} vs {guide.shape}")
    H, W, C = target.shape
    params.check(C)
    tp = params.cls if direction == "cls" else params.loc
    gp = params.loc if direction == "cls" else params.cls

    hw = H * W
    t2 = ad.reshape(target, (hw, C))
    g2 = ad.reshape(guide, (hw, C))
    with counting.scope("cca"):
        keys = ad.concat([ad.matmul(t2, ad.as_tensor(tp.wk)),
                          ad.matmul(g2, ad.as_tensor(gp.wk))], axis=1)
        vals = ad.concat([ad.matmul(t2, ad.as_tensor(tp.wv)),
                          ad.matmul(g2, ad.as_tensor(gp.wv))], axis=1)
        q = ad.matmul(g2, ad.as_tensor(gp.wq))
        scores = ad.scale(ad.matmul(ad.transpose(q, (1, 0)), keys), 1.0 / math.sqrt(hw))
        attn = ad.transpose(ad.softmax_last(ad.transpose(scores, (1, 0))), (1, 0))
        out = ad.reshape(ad.matmul(vals, attn), (H, W, C))
    return (out, attn) if with_attn else out


def leb(x, bp: BranchParams) -> ad.Tensor:
    """Depth-wise 1x1 -> 3x3 -> 1x1 chain, innermost first."""
    x = ad.as_tensor(x)
    y = ad.dwconv(x, bp.leb_w1, bp.leb_b1)
    y = ad.dwconv(y, bp.leb_w3, bp.leb_b3)
    return ad.dwconv(y, bp.leb_w2, bp.leb_b2)


def cit_block(pair: BranchPair, params: CitParams) -> BranchPair:
    """Encode both branches, then update each from the other in parallel."""
    cls_in, loc_in = ad.as_tensor(pair.cls), ad.as_tensor(pair.loc)
    if cls_in.shape != loc_in.shape:
        raise ShapeError(f"branch shapes differ: {cls_in.shape} vs {loc_in.shape}")
    with counting.scope("cpe"):
        enc_c = cpe(cls_in, params.cls.cpe_w, params.cls.cpe_b)
        enc_l = cpe(loc_in, params.loc.cpe_w, params.loc.cpe_b)
    with counting.scope("cls"):
        mixed_c = cca(enc_c, enc_l, params, "cls")
        with counting.scope("leb"):
            local_c = leb(mixed_c, params.cls)
        out_c = ad.add(enc_c, local_c)
    with counting.scope("loc"):
        mixed_l = cca(enc_l, enc_c, params, "loc")
        with counting.scope("leb"):
            local_l = leb(mixed_l, params.loc)
        out_l = ad.add(enc_l, local_l)
    return BranchPair(out_c, out_l)


def cca_flops(H: int, W: int, C: int) -> int:
    """Exact MAC count of one cca call: Q/K/V projections plus the two
    channel-sized products; every term is linear in H*W."""
    return 5 * H * W * C * C
