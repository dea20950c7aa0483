"""Acceptance gate: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -v -s`. Tolerances and runtime
budgets are pinned here and nowhere else.
"""

import json
import time
from contextlib import contextmanager

import numpy as np
import pytest

from conftest import rel_err
from unihead import build_head, checks, cit, dat, deform, goldens, oracle, profiler
from unihead.config import HeadConfig
from unihead.inputs import synthetic_input
from unihead.numkit import counting, kernels
from unihead.numkit.rng import Rng

GRID_HW = (2, 4, 8)
GRID_C = (4, 8, 16)


@contextmanager
def criterion(n: int, description: str, budget_s: float):
    start = time.perf_counter()
    try:
        yield
    except Exception:
        print(f"\nACCEPTANCE {n:02d} FAIL: {description}")
        raise
    elapsed = time.perf_counter() - start
    print(f"\nACCEPTANCE {n:02d} PASS: {description} [{elapsed:.2f}s]")
    assert elapsed < budget_s, f"criterion {n} exceeded {budget_s}s budget"


def test_criterion_01_eq4_exact_reproduction():
    with criterion(1, "EDA MAC count equals HWC*(3.5C+H+W) exactly on the grid", 5.0):
        rng = Rng(1)
        for H in GRID_HW:
            for W in GRID_HW:
                for C in GRID_C:
                    x = rng.uniform((H, W, C), -2, 2)
                    params = checks.random_eda_params(rng, C)
                    with counting.count() as c:
                        dat.eda(x, params, stripe_width=1)
                    measured = c.macs["proj"] + c.macs["attn"]
                    expected = H * W * C * (H + W) + H * W * (7 * C * C // 2)
                    assert measured == expected, (H, W, C)
        assert dat.eda_flops(8, 8, 16) == 73_728


def test_criterion_02_parameter_law_exact():
    with criterion(2, "EDA projection parameters equal 3.5*C^2", 1.0):
        rng = Rng(2)
        for C in (4, 8, 16, 64, 256):
            p = checks.random_eda_params(rng, C)
            measured = sum(np.asarray(m).size for m in
                           (p.wq_h, p.wk_h, p.wq_v, p.wk_v, p.wv_s, p.wo))
            assert measured == 7 * C * C // 2, C
        assert 7 * 256 * 256 // 2 == 229_376


def test_criterion_03_masked_oracle_equivalence():
    with criterion(3, "axial attention equals masked full attention < 1e-10", 30.0):
        rng = Rng(3)
        for axis in ("horizontal", "vertical"):
            for width in (1, 2):
                for trial in range(20):
                    H = checks._stripe_extent(rng, width)
                    W = checks._stripe_extent(rng, width)
                    C = GRID_C[int(rng.uniform((), 0, 3))]
                    x = rng.uniform((H, W, C), -2, 2)
                    params = checks.random_eda_params(rng, C)
                    out, _ = dat.axial_attention(x, params, dat.StripeSpec(axis, width))
                    wq, wk = ((params.wq_h, params.wk_h) if axis == "horizontal"
                              else (params.wq_v, params.wk_v))
                    ref = oracle.full_attention_masked(
                        x.reshape(-1, C), checks.stripe_mask(H, W, axis, width),
                        (wq, wk, params.wv_s)).reshape(H, W, C // 2)
                    assert rel_err(out.data, ref) < 1e-10, (axis, width, trial)


def test_criterion_04_eq1_oracle_equivalence():
    with criterion(4, "deform_conv equals the literal-equation loop < 1e-12", 30.0):
        reports = checks.check_eq1(trials=20, seed=4, tol=1e-12)
        for r in reports:
            assert r.passed, f"{r.name}: {r.max_rel_err}"
        # zero-offset / unit-scale degeneracy against the plain convolution
        rng = Rng(40)
        x = rng.uniform((6, 6, 4), -2, 2)
        p = checks.random_deform_params(rng, 4, 4, live_predictor=False)
        field = deform.OffsetField(np.zeros((6, 6, 9, 2)), np.ones((6, 6, 9)))
        got = deform.deform_conv(x, field, p).data
        ref = kernels.conv2d(x, np.asarray(p.conv_w), np.asarray(p.conv_b))
        assert rel_err(got, ref) < 1e-12


def test_criterion_05_eq6_oracle_equivalence():
    with criterion(5, "cca equals the literal-equation loop < 1e-10", 30.0):
        reports = checks.check_eq6(trials=20, seed=5, tol=1e-10)
        for r in reports:
            assert r.passed, f"{r.name}: {r.max_rel_err}"
        rng = Rng(50)
        for _ in range(5):
            C = 8
            params = cit.CitParams(cls=checks.random_branch_params(rng, C),
                                   loc=checks.random_branch_params(rng, C))
            xc = rng.uniform((4, 4, C), -2, 2)
            xl = rng.uniform((4, 4, C), -2, 2)
            _, attn = cit.cca(xc, xl, params, "cls", with_attn=True)
            assert np.abs(attn.data.sum(axis=0) - 1.0).max() < 1e-12


def test_criterion_06_gradient_soundness():
    with criterion(6, "analytic gradients match central differences < 1e-6", 300.0):
        for module in checks.GRADCHECK_MODULES:
            reports = checks.gradcheck_module(module, trials=10, h=1e-5,
                                              tol=1e-6, seed=0)
            assert len(reports) == 10
            for r in reports:
                assert r.passed, f"{r.name}: max rel err {r.max_rel_err}"


def test_criterion_07_structural_invariants():
    with criterion(7, "stripe/permutation/residual/passthrough/level invariants", 60.0):
        rng = Rng(7)
        # stripe independence (pre-CAB, width 1)
        C = 8
        x = rng.uniform((5, 4, C), -2, 2)
        eda_p = checks.random_eda_params(rng, C)
        out, _ = dat.axial_attention(x, eda_p, dat.StripeSpec("horizontal", 1))
        x2 = x.copy()
        x2[[0, 1, 3, 4]] = rng.uniform((4, 4, C), -5, 5)
        out2, _ = dat.axial_attention(x2, eda_p, dat.StripeSpec("horizontal", 1))
        np.testing.assert_array_equal(out.data[2], out2.data[2])

        # permutation equivariance with CAB disabled
        x = rng.uniform((5, 6, C), -2, 2)
        p0 = checks.random_eda_params(rng, C, zero_cab=True)
        base = dat.eda(x, p0).data
        rows = np.argsort(rng.uniform((5,)))
        cols = np.argsort(rng.uniform((6,)))
        assert rel_err(dat.eda(x[rows], p0).data, base[rows]) < 1e-12
        assert rel_err(dat.eda(x[:, cols], p0).data, base[:, cols]) < 1e-12

        # residual identity: zero output projection makes the block identity
        dp = dat.DatParams(ln_g=rng.uniform((C,), 0.5, 1.5),
                           ln_b=rng.uniform((C,), -0.5, 0.5),
                           eda=checks.random_eda_params(rng, C))
        dp.eda.wo = np.zeros((C, C))
        np.testing.assert_array_equal(dat.dat_block(x, dp, 1).data, x)

        # CIT zero-value passthrough
        cp = cit.CitParams(cls=checks.random_branch_params(rng, C),
                           loc=checks.random_branch_params(rng, C))
        for b in (cp.cls, cp.loc):
            b.wv = np.zeros((C, C // 2))
            b.leb_b1 = np.zeros(C)
            b.leb_b3 = np.zeros(C)
            b.leb_b2 = np.zeros(C)
        x1 = rng.uniform((4, 4, C), -1, 1)
        x2 = rng.uniform((4, 4, C), -1, 1)
        pair = cit.cit_block(cit.BranchPair(x1, x2), cp)
        assert rel_err(pair.cls.data,
                       cit.cpe(x1, cp.cls.cpe_w, cp.cls.cpe_b).data) < 1e-14
        assert rel_err(pair.loc.data,
                       cit.cpe(x2, cp.loc.cpe_w, cp.loc.cpe_b).data) < 1e-14

        # multi-level forward equals per-level forward
        head, _ = build_head(HeadConfig(C=8, num_classes=3, seed=7))
        levels = [synthetic_input(s, s, 8, 70 + s) for s in (4, 6, 8)]
        outs = head.multi_level_forward(levels)
        for level, got in zip(levels, outs):
            ref = head.forward(level)
            assert got.cls_logits.tobytes() == ref.cls_logits.tobytes()
            assert got.box_deltas.tobytes() == ref.box_deltas.tobytes()


def test_criterion_08_cca_complexity_linear_in_image_size():
    with criterion(8, "cca_flops doubles exactly when H doubles", 1.0):
        for H in GRID_HW:
            for W in GRID_HW:
                for C in GRID_C:
                    assert cit.cca_flops(2 * H, W, C) == 2 * cit.cca_flops(H, W, C)


def test_criterion_09_cost_monotonicity():
    with criterion(9, "MACs and params strictly increase along (1,n,n)", 1.0):
        reports = [profiler.count(HeadConfig(C=16, n_dp=1, n_dat=n, n_cit=n), 8, 8)
                   for n in (1, 2, 3, 4)]
        macs = [r.total_macs for r in reports]
        params = [r.total_params for r in reports]
        assert all(b > a for a, b in zip(macs, macs[1:])), macs
        assert all(b > a for a, b in zip(params, params[1:])), params


def test_criterion_10_determinism_and_goldens(goldens_root):
    with criterion(10, "golden corpus replays byte-identically; reruns bitwise", 120.0):
        results = goldens.replay_all(goldens_root)
        for r in results:
            assert r.passed, r.summary()

        # same-seed double run: fresh builds, bitwise-equal forward
        outs = []
        for _ in range(2):
            head, _ = build_head(HeadConfig(C=8, num_classes=3, seed=99))
            outs.append(head.forward(synthetic_input(8, 8, 8, 123)))
        assert outs[0].cls_logits.tobytes() == outs[1].cls_logits.tobytes()
        assert outs[0].box_deltas.tobytes() == outs[1].box_deltas.tobytes()

        # same-seed double run: identical gradcheck reports
        runs = []
        for _ in range(2):
            reports = checks.run_gradchecks("dat", trials=2, seed=11)
            runs.append(json.dumps([r.to_json() for r in reports]))
        assert runs[0] == runs[1]
