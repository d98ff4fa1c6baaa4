"""Forward-value oracles and contracts for the diffcore operations."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from camd.diffcore import (
    LabelError,
    LengthError,
    ShapeError,
    Tensor,
    activation,
    add,
    backward,
    conv1d,
    cross_entropy,
    layer_norm,
    lstm_cell,
    matmul,
    mul,
    relu,
    sigmoid,
    softmax,
    tanh,
    tsum,
)


def brute_matmul(a, b):
    m, k = a.shape
    k2, n = b.shape
    out = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            for p in range(k):
                out[i, j] += a[i, p] * b[p, j]
    return out


class TestMatmul:
    def test_identity(self):
        a = np.array([[1.0, 2.0], [3.0, 4.0]])
        out = matmul(Tensor(a), Tensor(np.eye(2)))
        np.testing.assert_array_equal(out.data, a)

    def test_against_triple_loop_oracle(self):
        a = np.array([[1.0, 1.0], [0.0, 1.0]])
        out = matmul(Tensor(a), Tensor(a))
        np.testing.assert_allclose(out.data, [[1.0, 2.0], [0.0, 1.0]])
        np.testing.assert_allclose(out.data, brute_matmul(a, a))

    def test_random_against_oracle(self):
        rng = np.random.default_rng(0)
        a, b = rng.normal(size=(4, 3)), rng.normal(size=(3, 5))
        np.testing.assert_allclose(matmul(Tensor(a), Tensor(b)).data,
                                   brute_matmul(a, b), rtol=1e-6)

    def test_shape_mismatch_names_both_shapes(self):
        with pytest.raises(ShapeError, match=r"2, 3.*2, 3"):
            matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 3))))


def sliding_window_conv(x, w, b, stride, pad):
    """Direct per-window oracle for conv1d."""
    n, length, cin = x.shape
    k, _, cout = w.shape
    xp = np.pad(x, ((0, 0), (pad, pad), (0, 0)))
    lout = (length + 2 * pad - k) // stride + 1
    out = np.zeros((n, lout, cout))
    for i in range(n):
        for t in range(lout):
            window = xp[i, t * stride:t * stride + k, :]
            for c in range(cout):
                out[i, t, c] = (window * w[:, :, c]).sum() + b[c]
    return out


class TestConv1d:
    def test_stride2_halves_length_twice(self):
        # L=256, K_c=2 stride-2 stages: 256 -> 128 -> 64
        x = Tensor(np.zeros((1, 256, 1)))
        w = Tensor(np.zeros((3, 1, 1)))
        b = Tensor(np.zeros(1))
        y = conv1d(x, w, b, stride=2, pad=1)
        assert y.shape == (1, 128, 1)
        y = conv1d(y, w, b, stride=2, pad=1)
        assert y.shape == (1, 64, 1)

    def test_unit_impulse_kernel_is_identity(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(2, 10, 3))
        w = np.zeros((3, 3, 3))
        for c in range(3):
            w[1, c, c] = 1.0          # center tap passes each channel through
        y = conv1d(Tensor(x), Tensor(w), Tensor(np.zeros(3)), stride=1, pad=1)
        np.testing.assert_allclose(y.data, x, rtol=1e-6)

    def test_all_ones_example(self):
        x = Tensor(np.ones((1, 4, 1)))
        w = Tensor(np.ones((3, 1, 1)))
        b = Tensor(np.zeros(1))
        y = conv1d(x, w, b, stride=1, pad=1)
        np.testing.assert_allclose(y.data[0, :, 0], [2.0, 3.0, 3.0, 2.0])

    def test_random_against_sliding_window_oracle(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(2, 9, 3))
        w = rng.normal(size=(3, 3, 4))
        b = rng.normal(size=4)
        for stride, pad in [(1, 0), (1, 1), (2, 1), (3, 2)]:
            y = conv1d(Tensor(x), Tensor(w), Tensor(b), stride=stride, pad=pad)
            np.testing.assert_allclose(y.data, sliding_window_conv(x, w, b, stride, pad),
                                       rtol=1e-5, atol=1e-6)

    def test_degenerate_length_rejected(self):
        with pytest.raises(LengthError):
            conv1d(Tensor(np.zeros((1, 2, 1))), Tensor(np.zeros((5, 1, 1))),
                   Tensor(np.zeros(1)), stride=1, pad=0)

    @given(length=st.integers(3, 64), stride=st.sampled_from([1, 2, 3]),
           pad=st.integers(0, 2))
    @settings(max_examples=60, deadline=None)
    def test_output_length_formula(self, length, stride, pad):
        k = 3
        x = Tensor(np.zeros((1, length, 1)))
        w = Tensor(np.zeros((k, 1, 1)))
        y = conv1d(x, w, Tensor(np.zeros(1)), stride=stride, pad=pad)
        assert y.shape[1] == (length + 2 * pad - k) // stride + 1


class TestActivations:
    def test_relu_values(self):
        y = activation(Tensor(np.array([-1.0, 2.0])), "relu")
        np.testing.assert_array_equal(y.data, [0.0, 2.0])

    def test_sigmoid_tanh_at_zero(self):
        assert float(sigmoid(Tensor(np.array(0.0))).data) == 0.5
        assert float(tanh(Tensor(np.array(0.0))).data) == 0.0

    def test_relu_gradient(self):
        x = Tensor(np.array([3.0, -3.0]), requires_grad=True)
        backward(tsum(relu(x)))
        np.testing.assert_array_equal(x.grad, [1.0, 0.0])

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            activation(Tensor(np.zeros(1)), "gelu")


class TestSoftmax:
    def test_uniform(self):
        y = softmax(Tensor(np.array([0.0, 0.0])))
        np.testing.assert_allclose(y.data, [0.5, 0.5])

    def test_shift_invariance(self):
        z = np.array([0.3, -1.2, 2.5])
        a = softmax(Tensor(z)).data
        b = softmax(Tensor(z + 10.0)).data
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_123_oracle(self):
        y = softmax(Tensor(np.array([1.0, 2.0, 3.0], dtype=np.float64))).data
        assert abs(y.sum() - 1.0) < 1e-12
        assert abs(y[2] / y[1] - math.e) < 1e-12
        denom = math.exp(1) + math.exp(2) + math.exp(3)
        np.testing.assert_allclose(y, [math.exp(i) / denom for i in (1, 2, 3)], rtol=1e-12)

    def test_large_logits_stay_finite(self):
        y = softmax(Tensor(np.array([80.0, -80.0])))
        assert np.all(np.isfinite(y.data))

    @given(st.lists(st.floats(-50, 50), min_size=1, max_size=8))
    @settings(max_examples=50, deadline=None)
    def test_rows_nonnegative_and_sum_to_one(self, logits):
        y = softmax(Tensor(np.array(logits, dtype=np.float64))).data
        assert np.all(y >= 0)
        assert abs(y.sum() - 1.0) < 1e-6


class TestCrossEntropy:
    def test_confident_correct_is_near_zero(self):
        logits = Tensor(np.array([[50.0, 0.0]], dtype=np.float64))
        loss = cross_entropy(logits, np.array([0]))
        assert 0.0 <= float(loss.data) < 1e-20

    def test_uniform_logits_give_ln_k(self):
        loss = cross_entropy(Tensor(np.zeros((1, 5), dtype=np.float64)), np.array([3]))
        assert abs(float(loss.data) - math.log(5)) < 1e-12

    def test_closed_form_oracle(self):
        loss = cross_entropy(Tensor(np.array([[2.0, 0.0]], dtype=np.float64)), np.array([0]))
        expected = -math.log(math.exp(2) / (math.exp(2) + 1))
        assert abs(float(loss.data) - expected) < 1e-12

    def test_gradient_is_softmax_minus_onehot_over_batch(self):
        z = np.array([[1.0, -1.0, 0.5], [0.0, 0.0, 0.0]])
        logits = Tensor(z, requires_grad=True, dtype=np.float64)
        labels = np.array([2, 0])
        backward(cross_entropy(logits, labels))
        p = np.exp(z) / np.exp(z).sum(axis=1, keepdims=True)
        p[np.arange(2), labels] -= 1
        np.testing.assert_allclose(logits.grad, p / 2, rtol=1e-12)

    def test_out_of_range_label(self):
        with pytest.raises(LabelError):
            cross_entropy(Tensor(np.zeros((1, 3))), np.array([3]))
        with pytest.raises(LabelError):
            cross_entropy(Tensor(np.zeros((1, 3))), np.array([-1]))

    def test_nonnegative(self):
        rng = np.random.default_rng(3)
        z = Tensor(rng.normal(size=(8, 4)))
        assert float(cross_entropy(z, rng.integers(0, 4, size=8)).data) >= 0.0


class TestLayerNorm:
    def test_constant_vector_maps_to_zero(self):
        y = layer_norm(Tensor(np.full((1, 4), 7.0)), Tensor(np.ones(4)), Tensor(np.zeros(4)))
        np.testing.assert_allclose(y.data, 0.0, atol=1e-6)

    def test_two_point_oracle(self):
        # mean 0, var 1 already: output reproduces input up to epsilon
        y = layer_norm(Tensor(np.array([[1.0, -1.0]], dtype=np.float64)),
                       Tensor(np.ones(2)), Tensor(np.zeros(2)))
        np.testing.assert_allclose(y.data, [[1.0, -1.0]], atol=1e-4)

    def test_output_mean_near_zero(self):
        rng = np.random.default_rng(4)
        x = Tensor(rng.normal(size=(3, 8), scale=5))
        y = layer_norm(x, Tensor(np.ones(8)), Tensor(np.zeros(8)))
        np.testing.assert_allclose(y.data.mean(axis=-1), 0.0, atol=1e-6)


def scalar_lstm_oracle(x, h, c, wx, wh, b):
    """Step-by-step scalar-loop LSTM reference."""
    def sig(v):
        return 1.0 / (1.0 + math.exp(-v))

    bsz, width = h.shape
    h_new = np.zeros_like(h)
    c_new = np.zeros_like(c)
    for n in range(bsz):
        gates = np.zeros(4 * width)
        for j in range(4 * width):
            acc = b[j]
            for i in range(width):
                acc += x[n, i] * wx[i, j] + h[n, i] * wh[i, j]
            gates[j] = acc
        for i in range(width):
            ig = sig(gates[i])
            fg = sig(gates[width + i])
            gg = math.tanh(gates[2 * width + i])
            og = sig(gates[3 * width + i])
            c_new[n, i] = fg * c[n, i] + ig * gg
            h_new[n, i] = og * math.tanh(c_new[n, i])
    return h_new, c_new


class TestLstmCell:
    def test_all_zero_params_give_zero_hidden(self):
        x = Tensor(np.random.default_rng(5).normal(size=(2, 3)))
        zeros = Tensor(np.zeros((2, 3)))
        wz = Tensor(np.zeros((3, 12)))
        h, c = lstm_cell(x, zeros, zeros, wz, wz, Tensor(np.zeros(12)))
        np.testing.assert_array_equal(h.data, 0.0)
        np.testing.assert_array_equal(c.data, 0.0)

    def test_gate_saturation_preserves_cell(self):
        # forget bias -> +inf, input bias -> -inf: c' = c
        width = 2
        b = np.zeros(4 * width)
        b[0:width] = -50.0            # input gate shut
        b[width:2 * width] = 50.0     # forget gate open
        c0 = np.array([[0.3, -0.7]])
        h, c = lstm_cell(Tensor(np.zeros((1, width))), Tensor(np.zeros((1, width))),
                         Tensor(c0), Tensor(np.zeros((width, 4 * width))),
                         Tensor(np.zeros((width, 4 * width))), Tensor(b))
        np.testing.assert_allclose(c.data, c0, atol=1e-12)

    def test_random_matches_scalar_oracle(self):
        rng = np.random.default_rng(6)
        x, h0, c0 = (rng.normal(size=(2, 3)) for _ in range(3))
        wx, wh = rng.normal(size=(3, 12)), rng.normal(size=(3, 12))
        b = rng.normal(size=12)
        h, c = lstm_cell(Tensor(x, dtype=np.float64), Tensor(h0, dtype=np.float64),
                         Tensor(c0, dtype=np.float64), Tensor(wx, dtype=np.float64),
                         Tensor(wh, dtype=np.float64), Tensor(b, dtype=np.float64))
        eh, ec = scalar_lstm_oracle(x, h0, c0, wx, wh, b)
        np.testing.assert_allclose(h.data, eh, atol=1e-10)
        np.testing.assert_allclose(c.data, ec, atol=1e-10)

    def test_width_mismatch(self):
        with pytest.raises(ShapeError):
            lstm_cell(Tensor(np.zeros((1, 3))), Tensor(np.zeros((1, 3))),
                      Tensor(np.zeros((1, 2))), Tensor(np.zeros((3, 12))),
                      Tensor(np.zeros((3, 12))), Tensor(np.zeros(12)))


class TestBackward:
    def test_sum_gives_ones(self):
        x = Tensor(np.zeros((2, 3)), requires_grad=True)
        backward(tsum(x))
        np.testing.assert_array_equal(x.grad, np.ones((2, 3)))

    def test_square_gradient(self):
        x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
        backward(tsum(mul(x, x)))
        np.testing.assert_allclose(x.grad, [2.0, 4.0])

    def test_fanout_accumulates(self):
        x = Tensor(np.array([1.0]), requires_grad=True)
        backward(tsum(add(x, x)))
        np.testing.assert_array_equal(x.grad, [2.0])

    def test_non_scalar_root_rejected(self):
        from camd.diffcore import GraphError
        with pytest.raises(GraphError):
            backward(Tensor(np.zeros(3), requires_grad=True))

    def test_zero_grad_resets(self):
        x = Tensor(np.array([1.0]), requires_grad=True)
        backward(tsum(mul(x, x)))
        x.zero_grad()
        np.testing.assert_array_equal(x.grad, [0.0])


def test_fixed_seed_forward_is_bitwise_deterministic():
    def run():
        rng = np.random.default_rng(7)
        x = Tensor(rng.normal(size=(2, 8, 3)).astype(np.float32))
        w = Tensor(rng.normal(size=(3, 3, 4)).astype(np.float32))
        y = conv1d(x, w, Tensor(np.zeros(4, dtype=np.float32)), stride=2, pad=1)
        return softmax(y).data.tobytes()

    assert run() == run()
