"""Netpbm graymap (PGM) reading and writing, binary ``P5`` and ASCII ``P2``."""
from __future__ import annotations

from pathlib import Path

import numpy as np


class PGMError(ValueError):
    pass


class PGMMagicError(PGMError):
    pass


class PGMTruncatedError(PGMError):
    pass


class PGMMaxvalError(PGMError):
    pass


def _header_tokens(raw: bytes, count: int, pos: int) -> tuple[list[int], int]:
    tokens: list[int] = []
    n = len(raw)
    while len(tokens) < count:
        while pos < n and raw[pos:pos + 1].isspace():
            pos += 1
        if pos < n and raw[pos:pos + 1] == b"#":
            while pos < n and raw[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not raw[pos:pos + 1].isspace() and raw[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise PGMTruncatedError("unexpected EOF in PGM header")
        try:
            tokens.append(int(raw[start:pos]))
        except ValueError:
            raise PGMError(f"malformed PGM header token {raw[start:pos]!r}") from None
    return tokens, pos


def decode_pgm(raw: bytes) -> np.ndarray:
    """Decode PGM bytes to an ``H x W`` float array scaled to [0, 1] by maxval."""
    magic = raw[:2]
    if magic not in (b"P5", b"P2"):
        raise PGMMagicError(f"bad PGM magic {magic!r}")
    (width, height, maxval), pos = _header_tokens(raw, 3, 2)
    if maxval <= 0 or maxval > 65535:
        raise PGMMaxvalError(f"PGM maxval must be in 1..65535, got {maxval}")
    if width <= 0 or height <= 0:
        raise PGMError(f"bad PGM size {width}x{height}")
    count = width * height
    if magic == b"P5":
        pos += 1  # the single whitespace byte before the payload
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        need = count * dtype.itemsize
        payload = raw[pos:pos + need]
        if len(payload) < need:
            raise PGMTruncatedError("unexpected EOF in PGM payload")
        values = np.frombuffer(payload, dtype=dtype).astype(np.float64)
    else:
        values_list, _ = _ascii_values(raw, pos, count)
        values = np.asarray(values_list, dtype=np.float64)
    if values.max(initial=0) > maxval:
        raise PGMError("PGM sample exceeds maxval")
    return (values / maxval).reshape(height, width)


def _ascii_values(raw: bytes, pos: int, count: int):
    try:
        return _header_tokens(raw, count, pos)
    except PGMTruncatedError:
        raise PGMTruncatedError("unexpected EOF in PGM payload") from None


def encode_pgm(image: np.ndarray, maxval: int = 255, ascii: bool = False) -> bytes:
    """Encode a [0, 1] image (rounded to ``maxval`` levels)."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[..., 0]
    if img.ndim != 2:
        raise PGMError(f"PGM needs a 2-D image, got shape {img.shape}")
    if not 0 < maxval <= 65535:
        raise PGMMaxvalError(f"PGM maxval must be in 1..65535, got {maxval}")
    levels = np.clip(np.rint(img * maxval), 0, maxval).astype(np.int64)
    h, w = levels.shape
    if ascii:
        body = "\n".join(" ".join(str(v) for v in row) for row in levels)
        return f"P2\n{w} {h}\n{maxval}\n{body}\n".encode("ascii")
    dtype = ">u2" if maxval > 255 else "u1"
    return f"P5\n{w} {h}\n{maxval}\n".encode("ascii") + levels.astype(dtype).tobytes()


def load_pgm(path) -> np.ndarray:
    return decode_pgm(Path(path).read_bytes())


def save_pgm(path, image: np.ndarray, maxval: int = 255, ascii: bool = False) -> None:
    Path(path).write_bytes(encode_pgm(image, maxval, ascii))
