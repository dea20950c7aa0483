"""Randomized comparison and gradient-check runners.

Each trial derives its own stream from (seed, trial index), so results are
reproducible and independent of execution order; --threads parallelism maps
over trials and collects in index order.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import cit, dat, deform, oracle
from .config import HeadConfig
from .errors import ConfigError
from .head import build_head
from .numkit import autodiff as ad
from .numkit.rng import Rng

GRADCHECK_MODULES = ("numkit", "deform", "dat", "cit", "head")
ORACLE_CHECKS = ("eda-mask", "eq1", "eq6")
DEFAULT_TOLS = {"eda-mask": 1e-10, "eq1": 1e-12, "eq6": 1e-10}


def _map_trials(fn, trials: int, threads: int):
    if threads <= 1:
        return [fn(i) for i in range(trials)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(trials)))


def _umap(rng: Rng, H, W, C, lo=-2.0, hi=2.0):
    return rng.uniform((H, W, C), lo, hi)


def random_eda_params(rng: Rng, C: int, zero_cab: bool = False) -> dat.EdaParams:
    half = C // 2
    m = lambda r, c: rng.uniform((r, c), -1.0, 1.0)
    return dat.EdaParams(
        wq_h=m(C, half), wk_h=m(C, half), wq_v=m(C, half), wk_v=m(C, half),
        wv_s=m(C, half), wo=m(C, C),
        cab_h_w=np.zeros((3, 3, half)) if zero_cab else rng.uniform((3, 3, half), -0.5, 0.5),
        cab_h_b=np.zeros(half) if zero_cab else rng.uniform((half,), -0.2, 0.2),
        cab_v_w=np.zeros((3, 3, half)) if zero_cab else rng.uniform((3, 3, half), -0.5, 0.5),
        cab_v_b=np.zeros(half) if zero_cab else rng.uniform((half,), -0.2, 0.2))


def random_branch_params(rng: Rng, C: int) -> cit.BranchParams:
    half = C // 2
    m = lambda r, c: rng.uniform((r, c), -1.0, 1.0)
    dw = lambda k: rng.uniform((k, k, C), -0.5, 0.5)
    vec = lambda: rng.uniform((C,), -0.2, 0.2)
    return cit.BranchParams(
        wq=m(C, C), wk=m(C, half), wv=m(C, half),
        cpe_w=dw(3), cpe_b=vec(),
        leb_w1=dw(1), leb_b1=vec(), leb_w3=dw(3), leb_b3=vec(),
        leb_w2=dw(1), leb_b2=vec())


def random_deform_params(rng: Rng, c_in: int, c_out: int,
                         live_predictor: bool) -> deform.DeformParams:
    p_w = rng.uniform((27, c_in, 3, 3), -0.15, 0.15) if live_predictor \
        else np.zeros((27, c_in, 3, 3))
    p_b = rng.uniform((27,), -0.3, 0.3) if live_predictor else np.zeros(27)
    return deform.DeformParams(
        conv_w=rng.uniform((c_out, c_in, 3, 3), -1.0, 1.0),
        conv_b=rng.uniform((c_out,), -0.5, 0.5),
        pred_w=p_w, pred_b=p_b)


def _stripe_extent(rng: Rng, s: int) -> int:
    """Random spatial extent in {2..8}, restricted to multiples of s."""
    lo = max(1, -(-2 // s))  # ceil(2/s)
    return s * int(rng.uniform((), lo, 8 // s + 1))


def stripe_mask(H: int, W: int, axis: str, s: int) -> np.ndarray:
    """Block mask over raster-order tokens: True where two tokens share a stripe."""
    idx = np.arange(H * W).reshape(H, W)
    group = idx // (s * W) if axis == "horizontal" else (idx % W) // s
    flat = group.reshape(-1)
    return flat[:, None] == flat[None, :]


# ------------------------------------------------------- oracle trials

def check_eda_mask(trials: int, seed: int = 0, tol: float = 1e-10,
                   threads: int = 1) -> list[oracle.OracleReport]:
    def trial(i: int) -> oracle.OracleReport:
        rng = Rng(seed).split(i)
        axis = "horizontal" if i % 2 == 0 else "vertical"
        s = 1 + (i // 2) % 2
        H = _stripe_extent(rng, s)
        W = _stripe_extent(rng, s)
        C = (4, 8, 16)[int(rng.uniform((), 0, 3))]
        x = _umap(rng, H, W, C)
        params = random_eda_params(rng, C, zero_cab=True)
        out, _ = dat.axial_attention(x, params, dat.StripeSpec(axis, s))
        wq, wk = ((params.wq_h, params.wk_h) if axis == "horizontal"
                  else (params.wq_v, params.wk_v))
        ref = oracle.full_attention_masked(
            x.reshape(-1, C), stripe_mask(H, W, axis, s),
            (wq, wk, params.wv_s)).reshape(H, W, C // 2)
        return oracle.make_report(f"eda-mask/{axis}/s{s}/t{i}",
                                  [(out.data, ref)], tol)
    return _map_trials(trial, trials, threads)


def check_eq1(trials: int, seed: int = 0, tol: float = 1e-12,
              threads: int = 1) -> list[oracle.OracleReport]:
    def trial(i: int) -> oracle.OracleReport:
        rng = Rng(seed).split(1000 + i)
        H = int(rng.uniform((), 2, 9))
        W = int(rng.uniform((), 2, 9))
        C = (2, 4, 8)[int(rng.uniform((), 0, 3))]
        c_out = (2, 3, 4)[int(rng.uniform((), 0, 3))]
        x = _umap(rng, H, W, C)
        p = random_deform_params(rng, C, c_out, live_predictor=False)
        field = deform.OffsetField(rng.uniform((H, W, 9, 2), -1.0, 1.0),
                                   rng.uniform((H, W, 9), 0.05, 0.95))
        got = deform.deform_conv(x, field, p).data
        ref = oracle.naive_eq1(x, np.asarray(p.conv_w), field.offsets, field.scales) \
            + np.asarray(p.conv_b)
        return oracle.make_report(f"eq1/t{i}", [(got, ref)], tol)
    return _map_trials(trial, trials, threads)


def check_eq6(trials: int, seed: int = 0, tol: float = 1e-10,
              threads: int = 1) -> list[oracle.OracleReport]:
    def trial(i: int) -> oracle.OracleReport:
        rng = Rng(seed).split(2000 + i)
        H = int(rng.uniform((), 2, 7))
        W = int(rng.uniform((), 2, 7))
        C = (4, 6, 8)[int(rng.uniform((), 0, 3))]
        xc, xl = _umap(rng, H, W, C), _umap(rng, H, W, C)
        params = cit.CitParams(cls=random_branch_params(rng, C),
                               loc=random_branch_params(rng, C))
        pairs = []
        for direction in ("cls", "loc"):
            got = cit.cca(xc if direction == "cls" else xl,
                          xl if direction == "cls" else xc,
                          params, direction).data
            tp = params.cls if direction == "cls" else params.loc
            gp = params.loc if direction == "cls" else params.cls
            ref = oracle.naive_eq6(xc if direction == "cls" else xl,
                                   xl if direction == "cls" else xc,
                                   (gp.wq, tp.wk, tp.wv, gp.wk, gp.wv))
            pairs.append((got, ref))
        return oracle.make_report(f"eq6/t{i}", pairs, tol)
    return _map_trials(trial, trials, threads)


def run_oracle_checks(which: str, trials: int, seed: int = 0,
                      threads: int = 1) -> list[oracle.OracleReport]:
    runners = {"eda-mask": check_eda_mask, "eq1": check_eq1, "eq6": check_eq6}
    if which != "all" and which not in runners:
        raise ConfigError(f"unknown oracle check {which!r}")
    names = list(runners) if which == "all" else [which]
    reports = []
    for name in names:
        reports += runners[name](trials, seed=seed, tol=DEFAULT_TOLS[name],
                                 threads=threads)
    return reports


# ---------------------------------------------------------- gradchecks

def _grad_vs_fd(build_loss, x0: np.ndarray, h: float):
    """Analytic input gradient against central differences; returns (ana, fd)."""
    leaf = ad.Tensor(x0.copy())
    loss = build_loss(leaf)
    ad.backward(loss)
    fd = oracle.fd_gradient(lambda a: float(build_loss(ad.Tensor(a)).data), x0, h)
    return leaf.grad, fd


def _numkit_trial(rng: Rng, h: float):
    pairs = []
    # matmul (gradients w.r.t. both operands)
    a0 = rng.uniform((3, 4), -1, 1)
    b0 = rng.uniform((4, 2), -1, 1)
    pairs.append(_grad_vs_fd(lambda t: ad.ssum(ad.matmul(t, b0)), a0, h))
    pairs.append(_grad_vs_fd(lambda t: ad.ssum(ad.matmul(a0, t)), b0, h))
    # softmax over rows
    s0 = rng.uniform((4, 5), -2, 2)
    pairs.append(_grad_vs_fd(lambda t: ad.ssum(ad.mul(ad.softmax_last(t), s0 + 3.0)), s0, h))
    # dense conv: x, w, b
    x0 = rng.uniform((3, 3, 4), -1, 1)
    w0 = rng.uniform((2, 4, 3, 3), -1, 1)
    bb = rng.uniform((2,), -1, 1)
    pairs.append(_grad_vs_fd(lambda t: ad.ssum(ad.conv2d(t, w0, bb)), x0, h))
    pairs.append(_grad_vs_fd(lambda t: ad.ssum(ad.conv2d(x0, t, bb)), w0, h))
    pairs.append(_grad_vs_fd(lambda t: ad.ssum(ad.conv2d(x0, w0, t)), bb, h))
    # depth-wise conv
    dw0 = rng.uniform((3, 3, 4), -1, 1)
    pairs.append(_grad_vs_fd(lambda t: ad.ssum(ad.dwconv(t, dw0, None)), x0, h))
    pairs.append(_grad_vs_fd(lambda t: ad.ssum(ad.dwconv(x0, t, None)), dw0, h))
    # layernorm: x, gain, bias (squared output so gain/bias grads are nontrivial)
    g0 = rng.uniform((4,), 0.5, 1.5)
    beta0 = rng.uniform((4,), -0.5, 0.5)
    sq = lambda t: ad.ssum(ad.mul(t, t))
    pairs.append(_grad_vs_fd(lambda t: sq(ad.layernorm(t, g0, beta0, 1e-6)), x0, h))
    pairs.append(_grad_vs_fd(lambda t: sq(ad.layernorm(x0, t, beta0, 1e-6)), g0, h))
    pairs.append(_grad_vs_fd(lambda t: sq(ad.layernorm(x0, g0, t, 1e-6)), beta0, h))
    # bilinear sampling: x and positions (fractions kept off the lattice)
    xs = rng.uniform((4, 4, 3), -1, 1)
    base = np.stack([np.floor(rng.uniform((3, 3), -1, 4)),
                     np.floor(rng.uniform((3, 3), -1, 4))], axis=-1)
    pos0 = base + rng.uniform((3, 3, 2), 0.2, 0.8)
    pairs.append(_grad_vs_fd(lambda t: ad.ssum(ad.grid_sample(t, pos0)), xs, h))
    pairs.append(_grad_vs_fd(lambda t: ad.ssum(ad.grid_sample(xs, t)), pos0, h))
    # activations, kept away from the relu kink
    r0 = np.sign(rng.uniform((3, 3, 2), -1, 1)) * rng.uniform((3, 3, 2), 0.2, 1.5)
    pairs.append(_grad_vs_fd(lambda t: ad.ssum(ad.relu(t)), r0, h))
    pairs.append(_grad_vs_fd(lambda t: ad.ssum(ad.sigmoid(t)), r0, h))
    # batched matmul
    ba = rng.uniform((2, 3, 4), -1, 1)
    bbm = rng.uniform((2, 4, 2), -1, 1)
    pairs.append(_grad_vs_fd(lambda t: ad.ssum(ad.bmm(t, bbm)), ba, h))
    pairs.append(_grad_vs_fd(lambda t: ad.ssum(ad.bmm(ba, t)), bbm, h))
    return pairs


def _deform_trial(rng: Rng, h: float):
    C = 4
    x0 = _umap(rng, 3, 3, C, -1, 1)
    p = random_deform_params(rng, C, C, live_predictor=True)
    pairs = [_grad_vs_fd(lambda t: ad.ssum(deform.dp_block(t, p)), x0, h)]
    # Through the predictor biases: offsets and scales both move.
    pb0 = np.asarray(p.pred_b).copy()

    def loss_pb(t):
        q = deform.DeformParams(p.conv_w, p.conv_b, p.pred_w, t)
        return ad.ssum(deform.dp_block(x0, q))

    pairs.append(_grad_vs_fd(loss_pb, pb0, h))
    return pairs


def _dat_trial(rng: Rng, h: float, s: int):
    C = 8
    H = W = 4
    x0 = _umap(rng, H, W, C, -1, 1)
    params = dat.DatParams(
        ln_g=rng.uniform((C,), 0.5, 1.5), ln_b=rng.uniform((C,), -0.5, 0.5),
        eda=random_eda_params(rng, C))
    return [_grad_vs_fd(lambda t: ad.ssum(dat.dat_block(t, params, s)), x0, h)]


def _cit_trial(rng: Rng, h: float):
    C = 4
    cls0 = _umap(rng, 3, 3, C, -1, 1)
    loc0 = _umap(rng, 3, 3, C, -1, 1)
    params = cit.CitParams(cls=random_branch_params(rng, C),
                           loc=random_branch_params(rng, C))

    def loss_sum(pair):
        return ad.add(ad.ssum(pair.cls), ad.ssum(pair.loc))

    pairs = [
        _grad_vs_fd(lambda t: loss_sum(cit.cit_block(cit.BranchPair(t, loc0), params)), cls0, h),
        _grad_vs_fd(lambda t: loss_sum(cit.cit_block(cit.BranchPair(cls0, t), params)), loc0, h),
    ]
    return pairs


def _head_trial(rng: Rng, h: float, trial: int):
    # One block per perception keeps the h^2 truncation term of the central
    # difference well under the 1e-6 gate; deeper stacks multiply softmax
    # curvature and turn the check into a seed lottery. The deeper paths get
    # their gradients checked at the dat/cit block level.
    cfg = HeadConfig(C=8, n_dp=1, n_dat=1, n_cit=1, num_classes=2,
                     num_anchors=1, seed=int(rng.uniform((), 0, 2 ** 31)))
    head, store = build_head(cfg)
    # Wake the offset predictor so gradients flow through sampling positions.
    store["dp0.pred_w"][...] = rng.uniform((27, cfg.C, 3, 3), -0.05, 0.05)
    store["dp0.pred_b"][...] = rng.uniform((27,), -0.2, 0.2)
    # Shrink the large constant prior bias: it inflates |loss| and with it the
    # cancellation error of the finite-difference quotient.
    store["pred.cls_b"][...] = rng.uniform((store["pred.cls_b"].size,), -0.3, 0.3)
    x0 = _umap(rng, 4, 4, cfg.C, -1.0, 1.0)

    def loss(t):
        logits, deltas = head.forward_tensors(t)
        return ad.add(ad.ssum(logits), ad.ssum(deltas))

    return [_grad_vs_fd(loss, x0, h)]


def gradcheck_module(module: str, trials: int, h: float = 1e-5,
                     tol: float = 1e-6, seed: int = 0,
                     threads: int = 1) -> list[oracle.OracleReport]:
    if module not in GRADCHECK_MODULES:
        raise ConfigError(f"unknown gradcheck module {module!r}")

    def trial(i: int) -> oracle.OracleReport:
        rng = Rng(seed).split(GRADCHECK_MODULES.index(module) * 10007 + i)
        if module == "numkit":
            pairs = _numkit_trial(rng, h)
        elif module == "deform":
            pairs = _deform_trial(rng, h)
        elif module == "dat":
            pairs = _dat_trial(rng, h, s=1 + i % 2)
        elif module == "cit":
            pairs = _cit_trial(rng, h)
        else:
            pairs = _head_trial(rng, h, i)
        return oracle.make_report(f"gradcheck/{module}/t{i}", pairs, tol)

    return _map_trials(trial, trials, threads)


def run_gradchecks(module: str, trials: int, h: float = 1e-5, tol: float = 1e-6,
                   seed: int = 0, threads: int = 1) -> list[oracle.OracleReport]:
    modules = GRADCHECK_MODULES if module == "all" else (module,)
    reports = []
    for m in modules:
        reports += gradcheck_module(m, trials, h=h, tol=tol, seed=seed, threads=threads)
    return reports
