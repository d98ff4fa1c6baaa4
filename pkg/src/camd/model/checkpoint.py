"""Model checkpoint format (little-endian).

Layout: magic "CMDW" | version u32 | u32 length-prefixed UTF-8 JSON config |
parameter table in canonical order: name (u16-prefixed UTF-8), rank u8,
dims u32[rank], data f32[]. Loaders reject unknown names and shape
mismatches.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .config import ModelConfig
from .network import CamdModel, parameter_shapes

MAGIC = b"CMDW"
VERSION = 1


class CheckpointFormatError(Exception):
    pass


class BadMagicError(CheckpointFormatError):
    pass


class VersionMismatchError(CheckpointFormatError):
    pass


class TruncatedFileError(CheckpointFormatError):
    pass


def save_checkpoint(model: CamdModel, path) -> None:
    blob = json.dumps(model.config.to_dict(), sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        for name, _, _ in parameter_shapes(model.config):
            arr = model.params[name].data
            raw = name.encode("utf-8")
            f.write(struct.pack("<HB", len(raw), arr.ndim))
            f.write(raw)
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def _need(buf: bytes, offset: int, count: int) -> int:
    if offset + count > len(buf):
        raise TruncatedFileError(f"expected {offset + count} bytes, file has {len(buf)}")
    return offset + count


def load_checkpoint(path) -> CamdModel:
    with open(path, "rb") as f:
        buf = f.read()
    off = _need(buf, 0, 12)
    if buf[:4] != MAGIC:
        raise BadMagicError(f"bad magic {buf[:4]!r}, expected {MAGIC!r}")
    (version,) = struct.unpack_from("<I", buf, 4)
    if version != VERSION:
        raise VersionMismatchError(f"unsupported version {version}, expected {VERSION}")
    (blob_len,) = struct.unpack_from("<I", buf, 8)
    end = _need(buf, off, blob_len)
    config = ModelConfig.from_dict(json.loads(buf[off:end].decode("utf-8")))
    off = end

    expected = {name: shape for name, shape, _ in parameter_shapes(config)}
    model = CamdModel(config, seed=0)
    seen = set()
    while off < len(buf):
        end = _need(buf, off, 3)
        name_len, rank = struct.unpack_from("<HB", buf, off)
        off = _need(buf, end, name_len)
        name = buf[end:off].decode("utf-8")
        end = _need(buf, off, 4 * rank)
        dims = struct.unpack_from(f"<{rank}I", buf, off)
        off = end
        if name not in expected:
            raise CheckpointFormatError(f"unknown parameter {name!r}")
        if dims != expected[name]:
            raise CheckpointFormatError(
                f"parameter {name!r}: stored shape {dims} != expected {expected[name]}")
        count = int(np.prod(dims, dtype=np.int64)) if rank else 1
        end = _need(buf, off, 4 * count)
        model.params[name].data = np.frombuffer(buf[off:end], dtype="<f4").reshape(dims).copy()
        off = end
        seen.add(name)
    missing = set(expected) - seen
    if missing:
        raise TruncatedFileError(f"missing parameters: {sorted(missing)}")
    return model
