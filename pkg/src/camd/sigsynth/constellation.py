"""Symbol alphabets: PSK / QAM / PAM with Gray labels, plus 16APSK.

All constellations are normalized to unit mean power. The symbol index of
a point is the integer value of its bit label (most significant bit
first), so ``points[label]`` is the mapped symbol.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ModulationError(ValueError):
    """Unsupported (scheme, order) pair or malformed bit input."""


def _gray(k: int) -> int:
    return k ^ (k >> 1)


@dataclass(frozen=True)
class Constellation:
    scheme: str            # PSK | QAM | PAM | APSK16
    order: int
    points: np.ndarray     # complex128 [M], indexed by bit label

    @property
    def bits_per_symbol(self) -> int:
        return self.order.bit_length() - 1

    def iq(self) -> np.ndarray:
        """Points as a real [M, 2] array (I then Q)."""
        return np.stack([self.points.real, self.points.imag], axis=-1)


def _normalize(points: np.ndarray) -> np.ndarray:
    return points / np.sqrt(np.mean(np.abs(points) ** 2))


def _psk(m: int) -> np.ndarray:
    # 45-degree offset for QPSK so points sit at (+-1 +-j)/sqrt(2)
    offset = np.pi / 4 if m == 4 else 0.0
    pts = np.empty(m, dtype=np.complex128)
    for k in range(m):
        pts[_gray(k)] = np.exp(1j * (2 * np.pi * k / m + offset))
    return pts


def _pam(m: int) -> np.ndarray:
    levels = np.arange(m) * 2.0 - (m - 1)
    pts = np.empty(m, dtype=np.complex128)
    for k in range(m):
        pts[_gray(k)] = levels[k]
    return _normalize(pts)


def _qam(m: int) -> np.ndarray:
    side = round(np.sqrt(m))
    if side * side != m:
        raise ModulationError(f"QAM order {m} is not square")
    half = side.bit_length() - 1
    levels = np.arange(side) * 2.0 - (side - 1)
    pts = np.empty(m, dtype=np.complex128)
    for a in range(side):
        for b in range(side):
            label = (_gray(a) << half) | _gray(b)
            pts[label] = levels[a] + 1j * levels[b]
    return _normalize(pts)


def _apsk16() -> np.ndarray:
    # 4+12 two-ring layout, outer/inner radius ratio 2.57
    gamma = 2.57
    r1 = 1.0
    r2 = gamma
    pts = np.empty(16, dtype=np.complex128)
    for k in range(4):
        pts[k] = r1 * np.exp(1j * (2 * k + 1) * np.pi / 4)
    for k in range(12):
        pts[4 + k] = r2 * np.exp(1j * (2 * k + 1) * np.pi / 12)
    return _normalize(pts)


def make_constellation(scheme: str, order: int) -> Constellation:
    scheme = scheme.upper()
    if order < 2 or order & (order - 1):
        raise ModulationError(f"order {order} is not a power of two >= 2")
    if scheme == "PSK":
        pts = _psk(order)
    elif scheme == "PAM":
        pts = _pam(order)
    elif scheme == "QAM":
        if order not in (4, 16, 64, 256):
            raise ModulationError(f"QAM supports square orders 4/16/64/256, not {order}")
        pts = _qam(order)
    elif scheme == "APSK16":
        if order != 16:
            raise ModulationError("APSK16 requires order 16")
        pts = _apsk16()
    else:
        raise ModulationError(f"unknown scheme {scheme!r}")
    return Constellation(scheme=scheme, order=order, points=pts)


# canonical class-name registry used by dataset generation and the CLI
_NAMED = {
    "bpsk": ("PSK", 2),
    "qpsk": ("PSK", 4),
    "apsk16": ("APSK16", 16),
}
for _m in (8, 16, 32, 64, 128, 256):
    _NAMED[f"psk{_m}"] = ("PSK", _m)
for _m in (4, 16, 64, 256):
    _NAMED[f"qam{_m}"] = ("QAM", _m)
for _m in (2, 4, 8, 16, 32, 64, 128, 256):
    _NAMED[f"pam{_m}"] = ("PAM", _m)


def constellation_by_name(name: str) -> Constellation:
    try:
        scheme, order = _NAMED[name.lower()]
    except KeyError:
        raise ModulationError(f"unknown modulation class {name!r}") from None
    return make_constellation(scheme, order)


def known_class_names() -> list[str]:
    return sorted(_NAMED)


def modulate(bits, c: Constellation) -> np.ndarray:
    """Map a bit sequence (MSB-first groups) to symbols [L, 2]."""
    bits = np.asarray(bits, dtype=np.int64)
    bps = c.bits_per_symbol
    if bits.ndim != 1 or bits.size % bps:
        raise ModulationError(f"bit count {bits.size} not divisible by {bps}")
    groups = bits.reshape(-1, bps)
    weights = 1 << np.arange(bps - 1, -1, -1)
    labels = groups @ weights
    sym = c.points[labels]
    return np.stack([sym.real, sym.imag], axis=-1)


def demodulate(symbols: np.ndarray, c: Constellation) -> np.ndarray:
    """Nearest-point hard decision back to bits; inverse of modulate when noiseless."""
    s = np.asarray(symbols)
    z = s[..., 0] + 1j * s[..., 1]
    labels = np.abs(z[:, None] - c.points[None, :]).argmin(axis=1)
    bps = c.bits_per_symbol
    out = np.zeros((labels.size, bps), dtype=np.int64)
    for i in range(bps):
        out[:, bps - 1 - i] = (labels >> i) & 1
    return out.reshape(-1)
