"""Uncentered SVD spectra, tail truncation and PCA neuron sets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pcann.dataset_io import PIXELS
from pcann.errors import NumericalFailure


@dataclass(frozen=True)
class Spectrum:
    singular_values: np.ndarray  # (K,) descending
    basis: np.ndarray  # (K, 784) right singular vectors as rows

    @property
    def energies(self) -> np.ndarray:
        return self.singular_values**2


def _fix_signs(basis: np.ndarray) -> np.ndarray:
    # largest-magnitude coordinate positive; argmax picks the lowest index on ties
    pivots = np.argmax(np.abs(basis), axis=1)
    signs = np.sign(basis[np.arange(len(basis)), pivots])
    signs[signs == 0] = 1.0
    return basis * signs[:, None]


def compute_spectrum(samples) -> Spectrum:
    """SVD of the stacked samples without mean-centering.

    Rows are samples. Returns ``min(rows, 784)`` singular values in
    descending order with the matching right singular vectors.
    """
    m = np.asarray(samples, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 1:
        raise ValueError("need a non-empty 2-D sample matrix")
    try:
        _, s, vt = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as e:
        raise NumericalFailure(f"SVD did not converge on a {m.shape[0]}x{m.shape[1]} matrix") from e
    if not np.all(np.isfinite(s)):
        raise NumericalFailure("SVD produced non-finite singular values")
    basis = _fix_signs(vt)
    s.setflags(write=False)
    basis.setflags(write=False)
    return Spectrum(s, basis)


def truncation_index(energies, r: float) -> int:
    """Smallest neuron count whose discarded tail energy is within ``r`` of the total.

    ``energies`` are squared singular values in descending order. The tail
    allowance is relative: ``r * sum(energies)``.
    """
    e = np.asarray(energies, dtype=np.float64)
    if e.ndim != 1 or e.size == 0:
        raise ValueError("need a non-empty 1-D list of energies")
    if not 0.0 < r < 1.0:
        raise ValueError(f"r must lie in (0, 1), got {r}")
    k = e.size
    allowed = r * e.sum()
    if e[-1] > allowed:
        return k
    # tails[j] = sum(e[j:]), summed from the small end for accuracy
    tails = np.cumsum(e[::-1])[::-1]
    # tail after keeping k components is tails[k]; tails[k] for k = K is 0
    for kept in range(1, k):
        if tails[kept] <= allowed:
            return kept
    return k


@dataclass(frozen=True)
class NeuronSet:
    """Ordered neurons (K, 784) for one class, bucket, and rotation angle."""

    class_label: int
    predicted_label: int | None
    transform_angle_deg: float
    neurons: np.ndarray

    def __post_init__(self):
        neurons = np.asarray(self.neurons, dtype=np.float64).reshape(-1, PIXELS)
        if len(neurons) == 0:
            raise ValueError("a neuron set needs at least one neuron")
        neurons.setflags(write=False)
        object.__setattr__(self, "neurons", neurons)
        object.__setattr__(self, "transform_angle_deg", float(self.transform_angle_deg))

    def __len__(self):
        return len(self.neurons)

    @property
    def key(self) -> tuple[int, int | None, float]:
        return (self.class_label, self.predicted_label, self.transform_angle_deg)

    def gram_deviation(self) -> float:
        g = self.neurons @ self.neurons.T
        return float(np.max(np.abs(g - np.eye(len(g)))))

    def __eq__(self, other):
        if not isinstance(other, NeuronSet):
            return NotImplemented
        return self.key == other.key and np.array_equal(self.neurons, other.neurons)

    __hash__ = None


def build_neuron_set(samples, r: float, class_label: int, predicted_label: int | None = None) -> NeuronSet:
    """Keep the leading right singular vectors of ``samples`` at tail level ``r``."""
    spectrum = compute_spectrum(samples)
    k = truncation_index(spectrum.energies, r)
    return NeuronSet(class_label, predicted_label, 0.0, spectrum.basis[:k].copy())
