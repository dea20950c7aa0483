"""Full head assembly: deformable perception blocks, then dual-axial
transformer blocks, then the branch split, then cross-task blocks, then a
3x3 prediction conv per branch.

Parameters are created in one fixed order from the config seed, so two
builds with the same seed are bitwise identical. The classification bias
starts at -log((1-0.01)/0.01) so initial foreground scores sit near the
usual 0.01 prior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import cit, dat, deform
from .config import HeadConfig
from .errors import ShapeError
from .numkit import autodiff as ad
from .numkit import counting
from .numkit.rng import Rng
from .params import ParamStore

CLS_PRIOR_BIAS = -math.log((1.0 - 0.01) / 0.01)


@dataclass
class HeadOutput:
    cls_logits: np.ndarray  # (H, W, A * num_classes)
    box_deltas: np.ndarray  # (H, W, A * 4)


class _Init:
    """Sequential parameter factory over one deterministic stream."""

    def __init__(self, store: ParamStore, rng: Rng, dtype):
        self.store, self.rng, self.dtype = store, rng, dtype

    def uniform(self, name, shape, fan_in, fan_out):
        a = math.sqrt(6.0 / (fan_in + fan_out))
        return self.store.add(name, self.rng.uniform(shape, -a, a).astype(self.dtype))

    def matrix(self, name, rows, cols):
        return self.uniform(name, (rows, cols), rows, cols)

    def conv(self, name, c_out, c_in, k):
        return self.uniform(name, (c_out, c_in, k, k), k * k * c_in, k * k * c_out)

    def dw(self, name, c, k):
        return self.uniform(name, (k, k, c), k * k, k * k)

    def const(self, name, shape, value=0.0):
        return self.store.add(name, np.full(shape, value, dtype=self.dtype))


class Head:
    def __init__(self, cfg: HeadConfig, store: ParamStore,
                 dp_params, dat_params, split, cit_params, pred):
        self.cfg = cfg
        self.params = store
        self._dp = dp_params
        self._dat = dat_params
        self._split = split
        self._cit = cit_params
        self._pred = pred

    def _check_input(self, x: np.ndarray) -> None:
        if x.ndim != 3:
            raise ShapeError(f"head input must be (H, W, C), got {x.shape}")
        if x.shape[2] != self.cfg.C:
            raise ShapeError(f"head expects C={self.cfg.C}, input has {x.shape[2]}")
        self.cfg.check_spatial(x.shape[0], x.shape[1])

    def forward_tensors(self, x) -> tuple[ad.Tensor, ad.Tensor]:
        """Tape forward; pass a Tensor to keep gradients flowing to the input."""
        t = ad.as_tensor(x)
        self._check_input(t.data)
        for i, p in enumerate(self._dp):
            with counting.scope(f"dp{i}"):
                t = deform.dp_block(t, p)
        for i, p in enumerate(self._dat):
            with counting.scope(f"dat{i}"):
                t = dat.dat_block(t, p, self.cfg.stripe_width)
        with counting.scope("split_cls"):
            cls_t = ad.conv2d(t, self._split["cls_w"], self._split["cls_b"])
        with counting.scope("split_loc"):
            loc_t = ad.conv2d(t, self._split["loc_w"], self._split["loc_b"])
        pair = cit.BranchPair(cls_t, loc_t)
        for i, p in enumerate(self._cit):
            with counting.scope(f"cit{i}"):
                pair = cit.cit_block(pair, p)
        with counting.scope("pred_cls"):
            logits = ad.conv2d(pair.cls, self._pred["cls_w"], self._pred["cls_b"])
        with counting.scope("pred_box"):
            deltas = ad.conv2d(pair.loc, self._pred["box_w"], self._pred["box_b"])
        return logits, deltas

    def forward(self, x: np.ndarray) -> HeadOutput:
        x = np.asarray(x).astype(self.cfg.dtype, copy=False)
        logits, deltas = self.forward_tensors(x)
        return HeadOutput(logits.data, deltas.data)

    def multi_level_forward(self, pyramid) -> list[HeadOutput]:
        """The same parameters applied independently to every level."""
        return [self.forward(level) for level in pyramid]


def build_head(cfg: HeadConfig) -> tuple[Head, ParamStore]:
    cfg.validate()
    store = ParamStore()
    init = _Init(store, Rng(cfg.seed), cfg.dtype)
    C, half = cfg.C, cfg.C // 2

    dp_params = []
    for i in range(cfg.n_dp):
        name = f"dp{i}"
        dp_params.append(deform.DeformParams(
            conv_w=init.conv(f"{name}.conv_w", C, C, 3),
            conv_b=init.const(f"{name}.conv_b", (C,)),
            # Zero predictor: the untrained block is a plain conv at half
            # modulation, which the degeneracy tests rely on.
            pred_w=init.const(f"{name}.pred_w", (27, C, 3, 3)),
            pred_b=init.const(f"{name}.pred_b", (27,)),
        ))

    dat_params = []
    for i in range(cfg.n_dat):
        name = f"dat{i}"
        eda_p = dat.EdaParams(
            wq_h=init.matrix(f"{name}.wq_h", C, half),
            wk_h=init.matrix(f"{name}.wk_h", C, half),
            wq_v=init.matrix(f"{name}.wq_v", C, half),
            wk_v=init.matrix(f"{name}.wk_v", C, half),
            wv_s=init.matrix(f"{name}.wv_s", C, half),
            wo=init.matrix(f"{name}.wo", C, C),
            cab_h_w=init.dw(f"{name}.cab_h_w", half, 3),
            cab_h_b=init.const(f"{name}.cab_h_b", (half,)),
            cab_v_w=init.dw(f"{name}.cab_v_w", half, 3),
            cab_v_b=init.const(f"{name}.cab_v_b", (half,)),
        )
        ffn_p = None
        if cfg.ffn_enabled:
            ffn_p = dat.FfnParams(
                ln_g=init.const(f"{name}.ffn_ln_g", (C,), 1.0),
                ln_b=init.const(f"{name}.ffn_ln_b", (C,)),
                w1=init.matrix(f"{name}.ffn_w1", C, 4 * C),
                b1=init.const(f"{name}.ffn_b1", (4 * C,)),
                w2=init.matrix(f"{name}.ffn_w2", 4 * C, C),
                b2=init.const(f"{name}.ffn_b2", (C,)),
            )
        dat_params.append(dat.DatParams(
            ln_g=init.const(f"{name}.ln_g", (C,), 1.0),
            ln_b=init.const(f"{name}.ln_b", (C,)),
            eda=eda_p,
            ffn=ffn_p,
        ))

    split = {
        "cls_w": init.conv("split.cls_w", C, C, 1),
        "cls_b": init.const("split.cls_b", (C,)),
        "loc_w": init.conv("split.loc_w", C, C, 1),
        "loc_b": init.const("split.loc_b", (C,)),
    }

    cit_params = []
    for i in range(cfg.n_cit):
        branches = {}
        for b in ("cls", "loc"):
            name = f"cit{i}.{b}"
            branches[b] = cit.BranchParams(
                wq=init.matrix(f"{name}.wq", C, C),
                wk=init.matrix(f"{name}.wk", C, half),
                wv=init.matrix(f"{name}.wv", C, half),
                cpe_w=init.dw(f"{name}.cpe_w", C, 3),
                cpe_b=init.const(f"{name}.cpe_b", (C,)),
                leb_w1=init.dw(f"{name}.leb_w1", C, 1),
                leb_b1=init.const(f"{name}.leb_b1", (C,)),
                leb_w3=init.dw(f"{name}.leb_w3", C, 3),
                leb_b3=init.const(f"{name}.leb_b3", (C,)),
                leb_w2=init.dw(f"{name}.leb_w2", C, 1),
                leb_b2=init.const(f"{name}.leb_b2", (C,)),
            )
        cit_params.append(cit.CitParams(cls=branches["cls"], loc=branches["loc"]))

    n_cls_out = cfg.num_anchors * cfg.num_classes
    n_box_out = cfg.num_anchors * 4
    pred = {
        "cls_w": init.conv("pred.cls_w", n_cls_out, C, 3),
        "cls_b": init.const("pred.cls_b", (n_cls_out,), CLS_PRIOR_BIAS),
        "box_w": init.conv("pred.box_w", n_box_out, C, 3),
        "box_b": init.const("pred.box_b", (n_box_out,)),
    }

    head = Head(cfg, store, dp_params, dat_params, split, cit_params, pred)
    return head, store
