"""Versioned binary container for model parameters.

Layout (all integers little-endian)::

    b"CAPS"  u16 version  u32 config_len  config (UTF-8 key=value lines)
    u32 n_blobs
    per blob: u16 name_len  name  u8 ndim  u32 dims[ndim]  f64 values[prod(dims)]

Values are stored as 64-bit little-endian floats in row-major order, so a
write/read/write cycle reproduces the file byte for byte.
"""
from __future__ import annotations

import io
import struct
from pathlib import Path

import numpy as np

MAGIC = b"CAPS"
VERSION = 1


class CheckpointError(ValueError):
    pass


def encode_config(config: dict[str, object]) -> bytes:
    lines = []
    for key, value in config.items():
        text = str(value)
        if "\n" in text or "=" in key:
            raise CheckpointError(f"config entry {key!r} cannot be stored")
        lines.append(f"{key}={text}")
    return "\n".join(lines).encode("utf-8")


def decode_config(raw: bytes) -> dict[str, str]:
    out = {}
    for line in raw.decode("utf-8").splitlines():
        if line:
            key, _, value = line.partition("=")
            out[key] = value
    return out


def dumps(config: dict[str, object], arrays: dict[str, np.ndarray]) -> bytes:
    buf = io.BytesIO()
    cfg = encode_config(config)
    buf.write(MAGIC)
    buf.write(struct.pack("<HI", VERSION, len(cfg)))
    buf.write(cfg)
    buf.write(struct.pack("<I", len(arrays)))
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        raw_name = name.encode("utf-8")
        buf.write(struct.pack("<H", len(raw_name)))
        buf.write(raw_name)
        buf.write(struct.pack("<B", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        buf.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return buf.getvalue()


def loads(raw: bytes) -> tuple[dict[str, str], dict[str, np.ndarray]]:
    view = memoryview(raw)
    pos = 0

    def take(n: int) -> memoryview:
        nonlocal pos
        if pos + n > len(view):
            raise CheckpointError("unexpected EOF in checkpoint")
        chunk = view[pos:pos + n]
        pos += n
        return chunk

    if bytes(take(4)) != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    version, cfg_len = struct.unpack("<HI", take(6))
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    config = decode_config(bytes(take(cfg_len)))
    (count,) = struct.unpack("<I", take(4))
    arrays = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2))
        name = bytes(take(name_len)).decode("utf-8")
        (ndim,) = struct.unpack("<B", take(1))
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim))
        n = int(np.prod(shape)) if ndim else 1
        arrays[name] = np.frombuffer(take(8 * n), dtype="<f8").reshape(shape).astype(np.float64)
    if pos != len(view):
        raise CheckpointError("trailing bytes after last blob")
    return config, arrays


def save(path, config: dict[str, object], arrays: dict[str, np.ndarray]) -> None:
    Path(path).write_bytes(dumps(config, arrays))


def load(path) -> tuple[dict[str, str], dict[str, np.ndarray]]:
    return loads(Path(path).read_bytes())
