"""CIFAR-100 binary records.

Each record is 3074 bytes: coarse label, fine label, then the red, green and
blue planes of a 32x32 image, 1024 row-major bytes each.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

RECORD_BYTES = 3074
SIDE = 32


class CifarFormatError(ValueError):
    pass


@dataclass
class CifarRecord:
    image: np.ndarray   # 32 x 32 x 3, uint8
    fine: int
    coarse: int

    def rgb_float(self) -> np.ndarray:
        return self.image.astype(np.float64) / 255.0


def decode_cifar100(raw: bytes) -> list[CifarRecord]:
    if len(raw) % RECORD_BYTES:
        raise CifarFormatError(f"file length {len(raw)} is not a multiple of {RECORD_BYTES}")
    arr = np.frombuffer(raw, dtype=np.uint8).reshape(-1, RECORD_BYTES)
    images = arr[:, 2:].reshape(-1, 3, SIDE, SIDE).transpose(0, 2, 3, 1)
    return [CifarRecord(images[i].copy(), int(arr[i, 1]), int(arr[i, 0])) for i in range(len(arr))]


def encode_cifar100(records: list[CifarRecord]) -> bytes:
    out = bytearray()
    for rec in records:
        img = np.asarray(rec.image)
        if img.shape != (SIDE, SIDE, 3) or img.dtype != np.uint8:
            raise CifarFormatError(f"record image must be 32x32x3 uint8, got {img.shape} {img.dtype}")
        if not (0 <= rec.coarse < 256 and 0 <= rec.fine < 256):
            raise CifarFormatError("labels must fit in one byte")
        out.append(rec.coarse)
        out.append(rec.fine)
        out += img.transpose(2, 0, 1).tobytes()
    return bytes(out)


def load_cifar100_binary(path) -> list[CifarRecord]:
    return decode_cifar100(Path(path).read_bytes())


def save_cifar100_binary(path, records: list[CifarRecord]) -> None:
    Path(path).write_bytes(encode_cifar100(records))
