"""Rigid rotations of 28x28 images and rotated (dual) neuron sets.

Images are rotated by inverse mapping: output pixel (i, j) reads the input
at the point obtained by turning (i, j) about the grid center (13.5, 13.5)
by the opposite angle, with bilinear interpolation and zero fill outside
the grid. Positive angles turn the picture counterclockwise as displayed
(row 0 at the top). Quarter turns use exact cosines, so they are pure pixel
permutations.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from pcann.dataset_io import PIXELS, SIDE
from pcann.pca import NeuronSet

CENTER = (SIDE - 1) / 2.0

_EXACT = {0: (1.0, 0.0), 90: (0.0, 1.0), 180: (-1.0, 0.0), 270: (0.0, -1.0)}


def _cos_sin(angle_deg: float) -> tuple[float, float]:
    if float(angle_deg).is_integer() and int(angle_deg) % 90 == 0:
        return _EXACT[int(angle_deg) % 360]
    t = math.radians(angle_deg)
    return math.cos(t), math.sin(t)


@lru_cache(maxsize=64)
def _plan(angle_deg: float) -> tuple[np.ndarray, np.ndarray]:
    """Source indices (4, 784) into a zero-padded flat image and weights (4, 784)."""
    c, s = _cos_sin(angle_deg)
    i, j = np.meshgrid(np.arange(SIDE, dtype=np.float64), np.arange(SIDE, dtype=np.float64), indexing="ij")
    # display coordinates: x to the right, y up
    x = j - CENTER
    y = CENTER - i
    xs = c * x + s * y
    ys = -s * x + c * y
    src_j = (xs + CENTER).ravel()
    src_i = (CENTER - ys).ravel()
    i0 = np.floor(src_i)
    j0 = np.floor(src_j)
    fi = src_i - i0
    fj = src_j - j0
    i0 = i0.astype(np.int64)
    j0 = j0.astype(np.int64)

    idx = np.empty((4, PIXELS), dtype=np.int64)
    w = np.empty((4, PIXELS), dtype=np.float64)
    corners = ((0, 0, (1 - fi) * (1 - fj)), (0, 1, (1 - fi) * fj), (1, 0, fi * (1 - fj)), (1, 1, fi * fj))
    for n, (di, dj, weight) in enumerate(corners):
        ii = i0 + di
        jj = j0 + dj
        inside = (ii >= 0) & (ii < SIDE) & (jj >= 0) & (jj < SIDE)
        # index PIXELS points at an always-zero pad entry
        idx[n] = np.where(inside, ii * SIDE + jj, PIXELS)
        w[n] = weight
    idx.setflags(write=False)
    w.setflags(write=False)
    return idx, w


def rotate_images(images, angle_deg: float) -> np.ndarray:
    """Rotate a batch of flat images (n, 784) by ``angle_deg`` degrees."""
    x = np.asarray(images, dtype=np.float64).reshape(-1, PIXELS)
    if angle_deg == 0.0:
        return x.copy()
    idx, w = _plan(float(angle_deg))
    padded = np.concatenate([x, np.zeros((len(x), 1))], axis=1)
    out = padded[:, idx[0]] * w[0]
    for n in range(1, 4):
        out = out + padded[:, idx[n]] * w[n]
    return out


def rotate_image(img, angle_deg: float) -> np.ndarray:
    """Rotate one image (784,) or (28, 28); returns a flat (784,) vector."""
    return rotate_images(np.asarray(img).reshape(1, PIXELS), angle_deg)[0]


def dual_neuron_set(nset: NeuronSet, angle_deg: float, *, renormalize: bool = False) -> NeuronSet:
    """Rotate every neuron by ``angle_deg``; the result responds to inputs turned by ``-angle_deg``."""
    if angle_deg == 0.0:
        return nset
    rotated = rotate_images(nset.neurons, angle_deg)
    if renormalize:
        norms = np.linalg.norm(rotated, axis=1)
        rotated = rotated / np.where(norms > 0, norms, 1.0)[:, None]
    return NeuronSet(nset.class_label, nset.predicted_label, float(angle_deg), rotated)


def classify_transformed(x, model, angles):
    """Argmax over classes of the maximum projection energy across rotated copies."""
    from pcann.network import _apply

    angles = tuple(float(a) for a in angles)
    if 0.0 not in angles:
        raise ValueError("the transform set must contain the identity angle 0.0")
    return _apply(model.bank(angles).predict, x)
