"""Binary PGM (P5) export of neurons and sample images."""

from __future__ import annotations

import os
import re

import numpy as np

from pcann.dataset_io import SIDE

_HEADER = re.compile(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s")


def neuron_to_gray(v) -> np.ndarray:
    """Map weights to uint8 with 0.0 -> 128 and +/-max|w| -> 255/1."""
    w = np.asarray(v, dtype=np.float64).reshape(SIDE, SIDE)
    peak = np.max(np.abs(w))
    if peak == 0.0:
        return np.full((SIDE, SIDE), 128, dtype=np.uint8)
    return np.clip(np.rint(128.0 + 127.0 * w / peak), 0, 255).astype(np.uint8)


def image_to_gray(x) -> np.ndarray:
    """Nonnegative image scaled so its brightest pixel is 255."""
    a = np.asarray(x, dtype=np.float64).reshape(SIDE, SIDE)
    peak = a.max()
    if peak <= 0.0:
        return np.zeros((SIDE, SIDE), dtype=np.uint8)
    return np.clip(np.rint(255.0 * a / peak), 0, 255).astype(np.uint8)


def pgm_bytes(pixels: np.ndarray) -> bytes:
    pixels = np.asarray(pixels, dtype=np.uint8)
    h, w = pixels.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + pixels.tobytes()


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    m = _HEADER.match(data)
    if m is None or m.group(3) != b"255":
        raise ValueError(f"{path}: not an 8-bit binary PGM")
    w, h = int(m.group(1)), int(m.group(2))
    return np.frombuffer(data, dtype=np.uint8, count=w * h, offset=m.end()).reshape(h, w)


def write_pgm(path, pixels) -> None:
    with open(os.fspath(path), "wb") as f:
        f.write(pgm_bytes(pixels))
