"""Channel draw statistics, application oracle, and AWGN calibration."""

import math

import numpy as np
import pytest

from camd.sigsynth import (
    ChannelError,
    ChannelRealization,
    add_awgn,
    apply_channel,
    draw_channel,
)


def test_entry_variance_near_one():
    rng = np.random.default_rng(0)
    n = 100_000
    h_i = np.empty(n)
    h_q = np.empty(n)
    for chunk in range(0, n, 2500):
        ch = draw_channel(50, 50, rng)
        h_i[chunk:chunk + 2500] = ch.h_i.reshape(-1)
        h_q[chunk:chunk + 2500] = ch.h_q.reshape(-1)
    var = np.mean(h_i ** 2 + h_q ** 2)
    assert 0.95 <= var <= 1.05


def test_mean_within_clt_bound():
    rng = np.random.default_rng(1)
    ch = draw_channel(100, 100, rng)
    n = ch.h_i.size
    bound = 4 * math.sqrt(0.5) / math.sqrt(n)
    assert abs(ch.h_i.mean()) < bound
    assert abs(ch.h_q.mean()) < bound


def test_same_seed_identical():
    a = draw_channel(2, 2, np.random.default_rng(42))
    b = draw_channel(2, 2, np.random.default_rng(42))
    np.testing.assert_array_equal(a.h_i, b.h_i)
    np.testing.assert_array_equal(a.h_q, b.h_q)


def test_invalid_antenna_counts():
    rng = np.random.default_rng(0)
    with pytest.raises(ChannelError):
        draw_channel(0, 2, rng)
    with pytest.raises(ChannelError):
        draw_channel(4, 2, rng)


def identity_channel(n):
    return ChannelRealization(h_i=np.eye(n), h_q=np.zeros((n, n)))


class TestApplyChannel:
    def test_identity(self):
        s = np.random.default_rng(2).normal(size=(2, 5, 2))
        np.testing.assert_array_equal(apply_channel(identity_channel(2), s), s)

    def test_multiplication_by_j(self):
        h = ChannelRealization(h_i=np.zeros((2, 2)), h_q=np.eye(2))
        s = np.random.default_rng(3).normal(size=(2, 5, 2))
        r = apply_channel(h, s)
        np.testing.assert_allclose(r[..., 0], -s[..., 1])
        np.testing.assert_allclose(r[..., 1], s[..., 0])

    def test_random_2x2_scalar_oracle(self):
        rng = np.random.default_rng(4)
        h = draw_channel(2, 2, rng)
        s = rng.normal(size=(2, 6, 2))
        r = apply_channel(h, s)
        hc = h.as_complex()
        sc = s[..., 0] + 1j * s[..., 1]
        for j in range(2):
            for t in range(6):
                expected = sum(hc[j, i] * sc[i, t] for i in range(2))
                assert abs((r[j, t, 0] + 1j * r[j, t, 1]) - expected) < 1e-12

    def test_complex_linearity(self):
        rng = np.random.default_rng(5)
        h = draw_channel(2, 3, rng)
        s1, s2 = rng.normal(size=(2, 2, 8, 2))
        combo = 1.7 * s1 - 0.3 * s2
        lhs = apply_channel(h, combo)
        rhs = 1.7 * apply_channel(h, s1) - 0.3 * apply_channel(h, s2)
        np.testing.assert_allclose(lhs, rhs, atol=1e-10)

    def test_shape_mismatch(self):
        with pytest.raises(ChannelError):
            apply_channel(identity_channel(2), np.zeros((3, 4, 2)))


class TestAddAwgn:
    def test_infinite_snr_is_identity(self):
        rng = np.random.default_rng(6)
        r = rng.normal(size=(2, 16, 2))
        np.testing.assert_array_equal(add_awgn(r, math.inf, rng), r)

    @pytest.mark.parametrize("snr_db", [0.0, 20.0])
    def test_empirical_snr_within_tenth_db(self, snr_db):
        rng = np.random.default_rng(7)
        n = 1_200_000
        r_clean = rng.normal(size=(1, n, 2))
        noisy = add_awgn(r_clean, snr_db, rng)
        noise = noisy - r_clean
        p_sig = np.mean(r_clean[..., 0] ** 2 + r_clean[..., 1] ** 2)
        p_noise = np.mean(noise[..., 0] ** 2 + noise[..., 1] ** 2)
        measured = 10 * math.log10(p_sig / p_noise)
        assert abs(measured - snr_db) <= 0.1

    def test_non_finite_rejected(self):
        rng = np.random.default_rng(8)
        with pytest.raises(ChannelError):
            add_awgn(np.array([[[np.nan, 0.0]]]), 10.0, rng)
