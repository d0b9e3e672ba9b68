import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from patchtunnel.tensor import (
    ConvParams,
    ShapeError,
    channel_affine_relu6,
    conv2d,
    conv2d_naive,
    conv_output_dim,
    depthwise_conv,
    pointwise_conv,
)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


class TestConvNaive:
    def test_worked_example_shape(self):
        x = np.ones((130, 130, 3))
        k = np.ones((3, 3, 3, 3))
        y = conv2d_naive(x, k, ConvParams(3, 3, 1, 0, 0, 3, 3))
        assert y.shape == (128, 128, 3)

    def test_zero_input(self, rng):
        y = conv2d_naive(np.zeros((8, 8, 2)), rng.standard_normal((3, 3, 2, 5)), ConvParams(3, 3, 1, 1, 1, 2, 5))
        assert y.shape == (8, 8, 5)
        assert not y.any()

    def test_window_sum(self):
        y = conv2d_naive(np.ones((5, 5, 1)), np.ones((3, 3, 1, 1)), ConvParams(3, 3, 1, 0, 0, 1, 1))
        np.testing.assert_array_equal(y, np.full((3, 3, 1), 9.0))

    def test_padding_corner(self):
        # zero padding: the corner window sees 2x2 of the ones image
        y = conv2d_naive(np.ones((4, 4, 1)), np.ones((3, 3, 1, 1)), ConvParams(3, 3, 1, 1, 1, 1, 1))
        assert y[0, 0, 0] == 4.0 and y[1, 1, 0] == 9.0 and y[0, 1, 0] == 6.0

    def test_channel_mismatch(self):
        with pytest.raises(ShapeError):
            conv2d_naive(np.ones((4, 4, 2)), np.ones((3, 3, 3, 1)), ConvParams(3, 3, 1, 0, 0, 3, 1))

    def test_empty_output(self):
        with pytest.raises(ShapeError):
            conv2d_naive(np.ones((2, 2, 1)), np.ones((3, 3, 1, 1)), ConvParams(3, 3, 1, 0, 0, 1, 1))

    def test_linearity(self, rng):
        p = ConvParams(3, 3, 2, 1, 0, 2, 3)
        k = rng.standard_normal((3, 3, 2, 3))
        x1, x2 = rng.standard_normal((2, 7, 6, 2))
        lhs = conv2d_naive(2.5 * x1 - 0.75 * x2, k, p)
        rhs = 2.5 * conv2d_naive(x1, k, p) - 0.75 * conv2d_naive(x2, k, p)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-6, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(
    h=st.integers(1, 9), w=st.integers(1, 9),
    k_h=st.integers(1, 4), k_w=st.integers(1, 4),
    s=st.integers(1, 3), p_h=st.integers(0, 2), p_w=st.integers(0, 2),
    c_in=st.integers(1, 3), c_out=st.integers(1, 3), seed=st.integers(0, 2**16),
)
def test_output_shape_formula_and_fast_conv(h, w, k_h, k_w, s, p_h, p_w, c_in, c_out, seed):
    oh, ow = (h + 2 * p_h - k_h) // s + 1, (w + 2 * p_w - k_w) // s + 1
    params = ConvParams(k_h, k_w, s, p_h, p_w, c_in, c_out)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((h, w, c_in))
    k = rng.standard_normal((k_h, k_w, c_in, c_out))
    if oh < 1 or ow < 1:
        with pytest.raises(ShapeError):
            conv2d_naive(x, k, params)
        return
    ref = conv2d_naive(x, k, params)
    assert ref.shape == (oh, ow, c_out)
    # same accumulation order, so bitwise equal
    np.testing.assert_array_equal(conv2d(x, k, params), ref)


def test_conv_output_dim_rejects_nonpositive():
    assert conv_output_dim(8, 3, 2, 1) == 4
    with pytest.raises(ShapeError):
        conv_output_dim(1, 3, 1, 0)


class TestPointwise:
    def test_identity(self, rng):
        x = rng.standard_normal((4, 4, 2))
        np.testing.assert_array_equal(pointwise_conv(x, np.eye(2)), x)

    def test_scalar(self):
        assert pointwise_conv(np.full((1, 1, 1), 2.0), [[3.0]])[0, 0, 0] == 6.0

    def test_matches_oracle_exactly(self, rng):
        x = rng.standard_normal((8, 8, 4))
        k = rng.standard_normal((4, 6))
        ref = conv2d_naive(x, k.reshape(1, 1, 4, 6), ConvParams(1, 1, 1, 0, 0, 4, 6))
        np.testing.assert_array_equal(pointwise_conv(x, k), ref)

    def test_channel_mismatch(self):
        with pytest.raises(ShapeError):
            pointwise_conv(np.ones((2, 2, 3)), np.ones((2, 2)))


class TestDepthwise:
    def test_delta_kernel(self, rng):
        x = rng.standard_normal((4, 4, 3))
        k = np.zeros((3, 3, 3))
        k[:, 1, 1] = 1.0
        np.testing.assert_array_equal(depthwise_conv(x, k, 1, 1, 1), x)

    def test_zeros(self, rng):
        assert not depthwise_conv(np.zeros((5, 5, 2)), rng.standard_normal((2, 3, 3)), 2, 1, 1).any()

    @pytest.mark.parametrize("s", [1, 2])
    def test_block_diagonal_oracle(self, rng, s):
        x = rng.standard_normal((8, 8, 4))
        k = rng.standard_normal((4, 3, 3))
        dense = np.zeros((3, 3, 4, 4))
        for c in range(4):
            dense[:, :, c, c] = k[c]
        ref = conv2d_naive(x, dense, ConvParams(3, 3, s, 1, 1, 4, 4))
        np.testing.assert_allclose(depthwise_conv(x, k, s, 1, 1), ref, rtol=0, atol=1e-12)

    def test_channel_isolation(self, rng):
        x = rng.standard_normal((6, 6, 3))
        k = rng.standard_normal((3, 3, 3))
        y0 = depthwise_conv(x, k, 1, 1, 1)
        x[:, :, 1] += rng.standard_normal((6, 6)) * 10
        x[:, :, 2] = 0.0
        y1 = depthwise_conv(x, k, 1, 1, 1)
        np.testing.assert_array_equal(y0[:, :, 0], y1[:, :, 0])

    def test_channel_mismatch(self):
        with pytest.raises(ShapeError):
            depthwise_conv(np.ones((4, 4, 2)), np.ones((3, 3, 3)), 1, 1, 1)


class TestAffineRelu6:
    def test_identity(self, rng):
        x = rng.standard_normal((3, 3, 2))
        np.testing.assert_array_equal(channel_affine_relu6(x, np.ones(2), np.zeros(2), False), x)

    def test_clamp_top(self):
        assert channel_affine_relu6(np.full((1, 1, 1), 10.0), [1.0], [0.0], True)[0, 0, 0] == 6.0

    def test_clamp_bottom(self):
        assert channel_affine_relu6(np.full((1, 1, 1), -2.0), [3.0], [1.0], True)[0, 0, 0] == 0.0

    def test_no_clamp_when_off(self):
        assert channel_affine_relu6(np.full((1, 1, 1), -2.0), [3.0], [1.0], False)[0, 0, 0] == -5.0

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            channel_affine_relu6(np.ones((2, 2, 3)), np.ones(2), np.zeros(3), True)
