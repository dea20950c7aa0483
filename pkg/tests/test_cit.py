"""Cross-task perception: encoding, channel attention against the literal
oracle, locality chain, block wiring and symmetry."""

import math

import numpy as np
import pytest

from conftest import rel_err
from unihead import checks, cit, oracle
from unihead.errors import ConfigError, ShapeError
from unihead.numkit import counting, kernels
from unihead.numkit.rng import Rng


def branch(seed, C):
    return checks.random_branch_params(Rng(seed), C)


def make_params(seed, C):
    return cit.CitParams(cls=branch(seed, C), loc=branch(seed + 1, C))


@pytest.fixture
def rng():
    return np.random.default_rng(300)


class TestCpe:
    def test_zero_kernel_is_identity(self, rng):
        x = rng.uniform(-2, 2, (4, 5, 6))
        out = cit.cpe(x, np.zeros((3, 3, 6)), np.zeros(6))
        np.testing.assert_array_equal(out.data, x)

    def test_zero_sum_kernel_on_constant_input(self, rng):
        C = 4
        w = rng.uniform(-1, 1, (3, 3, C))
        w[1, 1] -= w.sum(axis=(0, 1))  # kernel now sums to zero per channel
        x = np.full((6, 6, C), 1.7)
        out = cit.cpe(x, w, np.zeros(C)).data
        np.testing.assert_allclose(out[1:-1, 1:-1], x[1:-1, 1:-1], atol=1e-12)
        assert np.abs(out[0] - x[0]).max() > 1e-6  # boundary differs (zero pad)


class TestCca:
    def test_attention_columns_sum_to_one(self, rng):
        x1 = rng.uniform(-2, 2, (3, 4, 6))
        x2 = rng.uniform(-2, 2, (3, 4, 6))
        _, attn = cit.cca(x1, x2, make_params(1, 6), "cls", with_attn=True)
        np.testing.assert_allclose(attn.data.sum(axis=0), 1.0, atol=1e-12)

    def test_single_position_closed_form(self, rng):
        C = 4
        p = make_params(2, C)
        xc = rng.uniform(-2, 2, (1, 1, C))
        xl = rng.uniform(-2, 2, (1, 1, C))
        got = cit.cca(xc, xl, p, "cls").data
        tc, tl = xc.reshape(1, C), xl.reshape(1, C)
        K = np.concatenate([tc @ p.cls.wk, tl @ p.loc.wk], axis=1)
        V = np.concatenate([tc @ p.cls.wv, tl @ p.loc.wv], axis=1)
        q = tl @ p.loc.wq
        scores = q.T @ K / math.sqrt(1.0)
        e = np.exp(scores - scores.max(axis=0, keepdims=True))
        attn = e / e.sum(axis=0, keepdims=True)
        ref = (V @ attn).reshape(1, 1, C)
        assert rel_err(got, ref) < 1e-12

    def test_matches_literal_equation_oracle(self, rng):
        for _ in range(5):
            C = 6
            p = make_params(int(rng.integers(0, 10_000)), C)
            xc = rng.uniform(-2, 2, (3, 4, C))
            xl = rng.uniform(-2, 2, (3, 4, C))
            got = cit.cca(xc, xl, p, "cls").data
            ref = oracle.naive_eq6(xc, xl, (p.loc.wq, p.cls.wk, p.cls.wv,
                                            p.loc.wk, p.loc.wv))
            assert rel_err(got, ref) < 1e-10

    def test_cross_guidance_sensitivity(self, rng):
        C = 6
        p = make_params(3, C)
        xc = rng.uniform(-2, 2, (3, 3, C))
        xl = rng.uniform(-2, 2, (3, 3, C))
        base = cit.cca(xc, xl, p, "cls").data
        moved = cit.cca(xc, xl + rng.uniform(0.1, 0.5, xl.shape), p, "cls").data
        assert np.abs(base - moved).max() > 1e-8

    def test_shape_mismatch(self, rng):
        with pytest.raises(ShapeError):
            cit.cca(np.zeros((3, 3, 4)), np.zeros((3, 4, 4)), make_params(4, 4), "cls")

    def test_bad_direction(self):
        with pytest.raises(ConfigError):
            cit.cca(np.zeros((2, 2, 4)), np.zeros((2, 2, 4)), make_params(5, 4), "up")


class TestLeb:
    def test_identity_kernels(self, rng):
        C = 5
        x = rng.uniform(-2, 2, (4, 4, C))
        p = branch(6, C)
        p.leb_w1 = np.ones((1, 1, C))
        p.leb_w2 = np.ones((1, 1, C))
        w3 = np.zeros((3, 3, C))
        w3[1, 1] = 1.0
        p.leb_w3 = w3
        for name in ("leb_b1", "leb_b3", "leb_b2"):
            setattr(p, name, np.zeros(C))
        np.testing.assert_array_equal(cit.leb(x, p).data, x)

    def test_pointwise_scales_compose_multiplicatively(self, rng):
        C = 3
        x = rng.uniform(-2, 2, (4, 4, C))
        p = branch(7, C)
        for name in ("leb_b1", "leb_b3", "leb_b2"):
            setattr(p, name, np.zeros(C))
        base = cit.leb(x, p).data
        alpha, beta = 2.5, -1.5
        p2 = branch(7, C)
        for name in ("leb_b1", "leb_b3", "leb_b2"):
            setattr(p2, name, np.zeros(C))
        p2.leb_w1 = np.asarray(p.leb_w1) * alpha
        p2.leb_w3 = np.asarray(p.leb_w3)
        p2.leb_w2 = np.asarray(p.leb_w2) * beta
        np.testing.assert_allclose(cit.leb(x, p2).data, alpha * beta * base,
                                   atol=1e-12)

    def test_matches_sequential_dwconv(self, rng):
        C = 4
        x = rng.uniform(-2, 2, (5, 4, C))
        p = branch(8, C)
        got = cit.leb(x, p).data
        ref = kernels.dwconv(
            kernels.dwconv(
                kernels.dwconv(x, np.asarray(p.leb_w1), np.asarray(p.leb_b1)),
                np.asarray(p.leb_w3), np.asarray(p.leb_b3)),
            np.asarray(p.leb_w2), np.asarray(p.leb_b2))
        assert np.abs(got - ref).max() < 1e-13


class TestCitBlock:
    def test_shapes_preserved(self, rng):
        p = make_params(9, 6)
        pair = cit.BranchPair(rng.uniform(-1, 1, (4, 5, 6)),
                              rng.uniform(-1, 1, (4, 5, 6)))
        out = cit.cit_block(pair, p)
        assert out.cls.data.shape == (4, 5, 6)
        assert out.loc.data.shape == (4, 5, 6)

    def test_zero_values_reduce_to_encoded_passthrough(self, rng):
        C = 6
        p = make_params(10, C)
        for b in (p.cls, p.loc):
            b.wv = np.zeros((C, C // 2))
            b.leb_b1 = np.zeros(C)
            b.leb_b3 = np.zeros(C)
            b.leb_b2 = np.zeros(C)
        x1 = rng.uniform(-1, 1, (4, 4, C))
        x2 = rng.uniform(-1, 1, (4, 4, C))
        out = cit.cit_block(cit.BranchPair(x1, x2), p)
        np.testing.assert_allclose(
            out.cls.data, cit.cpe(x1, p.cls.cpe_w, p.cls.cpe_b).data, atol=1e-14)
        np.testing.assert_allclose(
            out.loc.data, cit.cpe(x2, p.loc.cpe_w, p.loc.cpe_b).data, atol=1e-14)

    def test_swap_symmetry(self, rng):
        C = 6
        bc, bl = branch(11, C), branch(12, C)
        x1 = rng.uniform(-1, 1, (3, 4, C))
        x2 = rng.uniform(-1, 1, (3, 4, C))
        fwd = cit.cit_block(cit.BranchPair(x1, x2), cit.CitParams(cls=bc, loc=bl))
        swp = cit.cit_block(cit.BranchPair(x2, x1), cit.CitParams(cls=bl, loc=bc))
        np.testing.assert_array_equal(fwd.cls.data, swp.loc.data)
        np.testing.assert_array_equal(fwd.loc.data, swp.cls.data)

    def test_gradcheck(self):
        for r in checks.gradcheck_module("cit", trials=3, seed=9):
            assert r.passed, f"{r.name}: max rel err {r.max_rel_err}"


class TestCcaFlops:
    def test_linear_in_image_size(self):
        for H, W, C in [(2, 3, 4), (4, 4, 8), (5, 7, 6)]:
            assert cit.cca_flops(2 * H, W, C) == 2 * cit.cca_flops(H, W, C)

    def test_single_position_counter_match(self, rng):
        C = 2
        p = make_params(13, C)
        with counting.count() as c:
            cit.cca(rng.uniform(-1, 1, (1, 1, C)), rng.uniform(-1, 1, (1, 1, C)),
                    p, "cls")
        assert c.macs["cca"] == cit.cca_flops(1, 1, C) == 20

    def test_counter_match_4x4x8(self, rng):
        C = 8
        p = make_params(14, C)
        with counting.count() as c:
            cit.cca(rng.uniform(-1, 1, (4, 4, C)), rng.uniform(-1, 1, (4, 4, C)),
                    p, "loc")
        assert c.macs["cca"] == cit.cca_flops(4, 4, C)
