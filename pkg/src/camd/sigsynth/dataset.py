"""Deterministic labeled MIMO IQ dataset generation and its binary format.

File layout (little-endian):
    magic "CAMD" | version u32 = 1 | rng_id u32 | num_frames u32 |
    Nr u16 | Nt u16 | L u32 | num_classes u16 | has_clean_symbols u8 |
    class-name table (per class: u16 byte count + UTF-8) | frames.
Each frame: label u16 | snr_db f32 | iq f32[Nr*L*2] (antenna-major,
time-next, I-then-Q) | optional clean f32[Nt*L*2] in the same order.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelRealization, add_awgn, apply_channel, draw_channel
from .constellation import constellation_by_name, modulate

MAGIC = b"CAMD"
VERSION = 1
RNG_ID_PCG64 = 1  # numpy PCG64 seeded through SeedSequence([seed, frame_index])


class DatasetFormatError(Exception):
    """Base class for dataset file format violations."""


class BadMagicError(DatasetFormatError):
    pass


class VersionMismatchError(DatasetFormatError):
    pass


class TruncatedFileError(DatasetFormatError):
    pass


@dataclass
class SignalFrame:
    """One labeled example: received IQ [Nr, L, 2] plus metadata."""

    iq: np.ndarray
    label: int
    snr_db: float
    symbols: np.ndarray | None = None   # clean [Nt, L, 2] sidecar for oracles


@dataclass
class DatasetSpec:
    classes: list[str]
    nt: int = 2
    nr: int = 2
    length: int = 128
    snr_dbs: list[float] = field(default_factory=lambda: [10.0, 20.0])
    frames_per_stratum: int = 100
    seed: int = 0
    include_clean: bool = False
    drift: bool = False                 # per-slot Gauss-Markov channel drift
    drift_rho: float = 0.999


@dataclass
class DatasetFile:
    class_names: list[str]
    nt: int
    nr: int
    length: int
    labels: np.ndarray                  # u16 [N]
    snr_dbs: np.ndarray                 # f32 [N]
    iq: np.ndarray                      # f32 [N, Nr, L, 2]
    clean: np.ndarray | None = None     # f32 [N, Nt, L, 2]
    rng_id: int = RNG_ID_PCG64

    @property
    def num_frames(self) -> int:
        return len(self.labels)

    def frame(self, i: int) -> SignalFrame:
        return SignalFrame(
            iq=self.iq[i],
            label=int(self.labels[i]),
            snr_db=float(self.snr_dbs[i]),
            symbols=None if self.clean is None else self.clean[i],
        )


def _frame_rng(master_seed: int, frame_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([master_seed, frame_index])))


def _synthesize_frame(spec: DatasetSpec, label: int, snr_db: float, frame_index: int):
    rng = _frame_rng(spec.seed, frame_index)
    c = constellation_by_name(spec.classes[label])
    bps = c.bits_per_symbol
    symbols = np.empty((spec.nt, spec.length, 2))
    for ant in range(spec.nt):
        bits = rng.integers(0, 2, size=spec.length * bps)
        symbols[ant] = modulate(bits, c)
    h = draw_channel(spec.nt, spec.nr, rng)
    if spec.drift:
        r_clean = _apply_drifting(h, symbols, spec.drift_rho, rng)
    else:
        r_clean = apply_channel(h, symbols)
    iq = add_awgn(r_clean, snr_db, rng)
    return iq, symbols


def _apply_drifting(h: ChannelRealization, s: np.ndarray, rho: float, rng: np.random.Generator):
    z = s[..., 0] + 1j * s[..., 1]
    hk = h.as_complex()
    innov_scale = math.sqrt((1.0 - rho * rho) / 2.0)
    out = np.empty((h.nr, s.shape[1]), dtype=np.complex128)
    for t in range(s.shape[1]):
        if t:
            hk = rho * hk + innov_scale * (
                rng.normal(size=hk.shape) + 1j * rng.normal(size=hk.shape))
        out[:, t] = hk @ z[:, t]
    return np.stack([out.real, out.imag], axis=-1)


def generate_dataset(spec: DatasetSpec) -> DatasetFile:
    """Uniform frames per (class, snr) stratum; fresh channel per frame.

    Fully deterministic per seed: frame i depends only on
    (seed, i, spec), so generation may be parallelized by frame index.
    """
    if not spec.classes:
        raise ValueError("generate_dataset: empty class list")
    for name in spec.classes:
        constellation_by_name(name)     # fail fast on unknown names
    n = len(spec.classes) * len(spec.snr_dbs) * spec.frames_per_stratum
    labels = np.empty(n, dtype=np.uint16)
    snrs = np.empty(n, dtype=np.float32)
    iq = np.empty((n, spec.nr, spec.length, 2), dtype=np.float32)
    clean = np.empty((n, spec.nt, spec.length, 2), dtype=np.float32) if spec.include_clean else None
    i = 0
    for label in range(len(spec.classes)):
        for snr_db in spec.snr_dbs:
            for _ in range(spec.frames_per_stratum):
                frame_iq, symbols = _synthesize_frame(spec, label, snr_db, i)
                labels[i] = label
                snrs[i] = snr_db
                iq[i] = frame_iq
                if clean is not None:
                    clean[i] = symbols
                i += 1
    return DatasetFile(
        class_names=list(spec.classes), nt=spec.nt, nr=spec.nr, length=spec.length,
        labels=labels, snr_dbs=snrs, iq=iq, clean=clean)


_HEADER = struct.Struct("<4sIIIHHIHB")


def write_dataset(d: DatasetFile, path) -> None:
    has_clean = d.clean is not None
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, d.rng_id, d.num_frames,
                             d.nr, d.nt, d.length, len(d.class_names), int(has_clean)))
        for name in d.class_names:
            raw = name.encode("utf-8")
            f.write(struct.pack("<H", len(raw)))
            f.write(raw)
        for i in range(d.num_frames):
            f.write(struct.pack("<Hf", int(d.labels[i]), float(d.snr_dbs[i])))
            f.write(np.ascontiguousarray(d.iq[i], dtype="<f4").tobytes())
            if has_clean:
                f.write(np.ascontiguousarray(d.clean[i], dtype="<f4").tobytes())


def _need(buf: bytes, offset: int, count: int) -> int:
    if offset + count > len(buf):
        raise TruncatedFileError(
            f"expected {offset + count} bytes, file has only {len(buf)}")
    return offset + count


def read_dataset(path) -> DatasetFile:
    with open(path, "rb") as f:
        buf = f.read()
    off = _need(buf, 0, _HEADER.size)
    magic, version, rng_id, n, nr, nt, length, n_classes, has_clean = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise VersionMismatchError(f"unsupported version {version}, expected {VERSION}")
    names = []
    for _ in range(n_classes):
        end = _need(buf, off, 2)
        (ln,) = struct.unpack_from("<H", buf, off)
        off = _need(buf, end, ln)
        names.append(buf[end:off].decode("utf-8"))
    labels = np.empty(n, dtype=np.uint16)
    snrs = np.empty(n, dtype=np.float32)
    iq = np.empty((n, nr, length, 2), dtype=np.float32)
    clean = np.empty((n, nt, length, 2), dtype=np.float32) if has_clean else None
    iq_bytes = nr * length * 2 * 4
    clean_bytes = nt * length * 2 * 4
    for i in range(n):
        end = _need(buf, off, 6)
        labels[i], snrs[i] = struct.unpack_from("<Hf", buf, off)
        off = _need(buf, end, iq_bytes)
        iq[i] = np.frombuffer(buf[end:off], dtype="<f4").reshape(nr, length, 2)
        if has_clean:
            end = off
            off = _need(buf, end, clean_bytes)
            clean[i] = np.frombuffer(buf[end:off], dtype="<f4").reshape(nt, length, 2)
    return DatasetFile(class_names=names, nt=nt, nr=nr, length=length,
                       labels=labels, snr_dbs=snrs, iq=iq, clean=clean, rng_id=rng_id)
