"""Property-based invariants over randomized inputs."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from unihead import dat, deform
from unihead.checks import random_deform_params, random_eda_params
from unihead.numkit import kernels
from unihead.numkit.rng import Rng

finite = st.floats(min_value=-50, max_value=50, allow_nan=False)


@given(st.lists(finite, min_size=1, max_size=12), finite)
def test_softmax_shift_invariance_and_simplex(values, shift):
    v = np.array(values)
    out = kernels.softmax(v)
    assert abs(out.sum() - 1.0) < 1e-12
    assert (out > 0).all() and (out <= 1.0).all()
    np.testing.assert_allclose(kernels.softmax(v + shift), out, atol=1e-12)


@given(st.integers(0, 2 ** 32), st.floats(-3, 3), st.floats(-3, 3),
       st.floats(-8, 8), st.floats(-8, 8))
def test_bilinear_sample_is_linear_in_the_map(seed, alpha, beta, ph, pw):
    rng = Rng(seed)
    x = rng.uniform((4, 5, 3), -2, 2)
    y = rng.uniform((4, 5, 3), -2, 2)
    p = np.array([ph, pw])
    lhs = kernels.bilinear_sample(alpha * x + beta * y, p)
    rhs = (alpha * kernels.bilinear_sample(x, p)
           + beta * kernels.bilinear_sample(y, p))
    np.testing.assert_allclose(lhs, rhs, atol=1e-11)


@given(st.integers(0, 2 ** 32))
def test_layernorm_invariant_to_uniform_channel_shift(seed):
    rng = Rng(seed)
    x = rng.uniform((3, 3, 6), -2, 2)
    shift = rng.uniform((3, 3, 1), -5, 5)
    a = kernels.layernorm(x, np.ones(6), np.zeros(6), 1e-10)
    b = kernels.layernorm(x + shift, np.ones(6), np.zeros(6), 1e-10)
    np.testing.assert_allclose(a, b, atol=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32), st.floats(0.0, 1.0))
def test_modulation_scaling_property(seed, lam):
    rng = Rng(seed)
    x = rng.uniform((4, 4, 3), -2, 2)
    p = random_deform_params(rng, 3, 3, live_predictor=False)
    off = rng.uniform((4, 4, 9, 2), -1, 1)
    sc = rng.uniform((4, 4, 9), 0.1, 0.9)
    bias = np.asarray(p.conv_b)
    full = deform.deform_conv(x, deform.OffsetField(off, sc), p).data - bias
    scaled = deform.deform_conv(x, deform.OffsetField(off, lam * sc), p).data - bias
    np.testing.assert_allclose(scaled, lam * full, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32), st.integers(1, 4), st.integers(1, 4))
def test_axial_attention_row_locality(seed, h_pick, w_pick):
    """With width-1 horizontal stripes, a row's output depends on that row only."""
    rng = Rng(seed)
    H, W, C = 4, 4, 8
    x = rng.uniform((H, W, C), -2, 2)
    params = random_eda_params(rng, C)
    spec = dat.StripeSpec("horizontal", 1)
    row = h_pick % H
    out, _ = dat.axial_attention(x, params, spec)
    x2 = x.copy()
    others = [r for r in range(H) if r != row]
    x2[others] = rng.uniform((len(others), W, C), -5, 5)
    out2, _ = dat.axial_attention(x2, params, spec)
    np.testing.assert_array_equal(out.data[row], out2.data[row])


@given(st.integers(0, 2 ** 64 - 1), st.integers(1, 64), st.integers(1, 64))
def test_rng_stream_is_counter_consistent(seed, n1, n2):
    a = Rng(seed)
    first = a.next_u64(n1)
    second = a.next_u64(n2)
    whole = Rng(seed).next_u64(n1 + n2)
    assert np.concatenate([first, second]).tolist() == whole.tolist()


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32))
def test_forward_determinism_property(seed):
    from unihead import build_head
    from unihead.config import HeadConfig
    cfg = HeadConfig(C=8, n_dp=1, n_dat=1, n_cit=1, num_classes=2,
                     seed=seed & 0xFFFF)
    head, _ = build_head(cfg)
    x = Rng(seed).uniform((4, 4, 8), -3, 3)
    a = head.forward(x)
    b = head.forward(x)
    assert a.cls_logits.tobytes() == b.cls_logits.tobytes()
    assert a.box_deltas.tobytes() == b.box_deltas.tobytes()
