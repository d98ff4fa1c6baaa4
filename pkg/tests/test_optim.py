"""AdamW contract tests."""

import numpy as np

from camd.diffcore import AdamW, Tensor


def make_param(values):
    p = Tensor(np.array(values, dtype=np.float32), requires_grad=True)
    p.zero_grad()
    return p


def test_zero_grad_zero_decay_is_bitwise_identity():
    p = make_param([1.25, -3.5, 0.001])
    before = p.data.tobytes()
    opt = AdamW([p], lr=2e-3, weight_decay=0.0)
    for _ in range(3):
        opt.step()
    assert p.data.tobytes() == before
    assert opt.t == 3


def test_decoupled_decay_scales_exactly():
    p = make_param([2.0, -4.0])
    expected = p.data - (2e-3 * 1e-3) * p.data
    opt = AdamW([p], lr=2e-3, weight_decay=1e-3)
    opt.step()
    np.testing.assert_array_equal(p.data, expected)


def test_first_step_moves_by_learning_rate():
    # constant unit gradient: bias-corrected m_hat = v_hat = 1, step ~ -lr
    p = make_param([0.0])
    p.grad = np.ones(1, dtype=np.float32)
    lr = 2e-3
    opt = AdamW([p], lr=lr, weight_decay=0.0)
    opt.step()
    expected = -lr / (1.0 + 1e-8)
    np.testing.assert_allclose(p.data, [expected], rtol=1e-6)


def test_step_counter_and_moment_shapes():
    p = make_param(np.zeros((3, 2)))
    opt = AdamW([p])
    opt.step()
    opt.step()
    assert opt.t == 2
    assert opt.m[0].shape == (3, 2)
    assert opt.v[0].shape == (3, 2)
    assert np.all(opt.v[0] >= 0)


def test_descends_a_quadratic():
    from camd.diffcore import backward, mul, tsum
    p = Tensor(np.array([3.0, -2.0]), requires_grad=True)
    opt = AdamW([p], lr=0.05, weight_decay=0.0)
    for _ in range(200):
        opt.zero_grad()
        backward(tsum(mul(p, p)))
        opt.step()
    assert np.all(np.abs(p.data) < 0.1)
