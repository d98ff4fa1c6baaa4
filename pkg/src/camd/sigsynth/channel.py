"""Flat block-fading MIMO channel and AWGN."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class ChannelError(ValueError):
    pass


@dataclass
class ChannelRealization:
    """Complex Nr x Nt channel matrix stored as I/Q planes."""

    h_i: np.ndarray
    h_q: np.ndarray
    seed: int | None = None
    frame_index: int | None = None

    @property
    def nr(self) -> int:
        return self.h_i.shape[0]

    @property
    def nt(self) -> int:
        return self.h_i.shape[1]

    def as_complex(self) -> np.ndarray:
        return self.h_i + 1j * self.h_q


def draw_channel(nt: int, nr: int, rng: np.random.Generator) -> ChannelRealization:
    """i.i.d. complex Gaussian entries with unit per-entry variance (1/2 per plane)."""
    if nt < 1:
        raise ChannelError(f"Nt must be >= 1, got {nt}")
    if nr < nt:
        raise ChannelError(f"Nr ({nr}) must be >= Nt ({nt})")
    scale = math.sqrt(0.5)
    h_i = rng.normal(0.0, scale, size=(nr, nt))
    h_q = rng.normal(0.0, scale, size=(nr, nt))
    return ChannelRealization(h_i=h_i, h_q=h_q)


def apply_channel(h: ChannelRealization, s: np.ndarray) -> np.ndarray:
    """Noiseless r = H s per time slot; s is [Nt, L, 2], result [Nr, L, 2]."""
    s = np.asarray(s)
    if s.ndim != 3 or s.shape[2] != 2 or s.shape[0] != h.nt:
        raise ChannelError(f"signal shape {s.shape} incompatible with channel {h.h_i.shape}")
    z = s[..., 0] + 1j * s[..., 1]          # [Nt, L]
    r = h.as_complex() @ z                  # [Nr, L]
    return np.stack([r.real, r.imag], axis=-1)


def add_awgn(r_clean: np.ndarray, snr_db: float, rng: np.random.Generator) -> np.ndarray:
    """Add white Gaussian noise at the requested per-antenna SNR.

    The signal power is measured per receive antenna as the mean |r|^2 per
    complex sample; noise power sigma^2 = P_sig * 10^(-snr/10), split
    equally between I and Q. snr_db = +inf means no noise.
    """
    r = np.asarray(r_clean, dtype=np.float64)
    if not np.all(np.isfinite(r)):
        raise ChannelError("add_awgn: non-finite input")
    if math.isinf(snr_db) and snr_db > 0:
        return r.copy()
    p_sig = np.mean(r[..., 0] ** 2 + r[..., 1] ** 2, axis=-1)      # [Nr]
    sigma2 = p_sig * 10.0 ** (-snr_db / 10.0)
    std = np.sqrt(sigma2 / 2.0)[:, None, None]
    return r + std * rng.normal(size=r.shape)
