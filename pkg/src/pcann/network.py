"""Raw PCA-NN forward pass and the shared evaluation harness.

First layer: inner products of the input with every neuron, squared.
Second layer: per-set sums of those squares. Whenever several sets share a
class (rotated copies, error buckets) the class score is their maximum, and
the prediction is the argmax over classes with ties going to the lowest
label. The indicator weights of the second layer are never materialized;
summing a set's own squared responses is the same thing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from pcann.dataset_io import CLASSES, LabeledDataset, partition_by_label
from pcann.parallel import chunk_slices, pmap
from pcann.pca import NeuronSet, build_neuron_set

FLAVORS = ("raw", "transformed", "bucketed", "bucketed_transformed")


@dataclass(frozen=True)
class ModelConfig:
    r: float = 0.20
    M: int = 20
    angles_deg: tuple[float, ...] = (-12.0, 0.0, 12.0)

    def __post_init__(self):
        angles = tuple(float(a) for a in self.angles_deg)
        object.__setattr__(self, "angles_deg", angles)
        if not 0.0 < self.r < 1.0:
            raise ValueError(f"r must lie in (0, 1), got {self.r}")
        if int(self.M) != self.M or self.M < 1:
            raise ValueError(f"M must be a positive integer, got {self.M}")
        if 0.0 not in angles:
            raise ValueError("angles_deg must contain 0.0")
        if any(abs(a) > 180.0 for a in angles):
            raise ValueError("angles must lie in [-180, 180]")
        if len(set(angles)) != len(angles):
            raise ValueError("angles must be distinct")


def neuron_response(x, v) -> float:
    return float(np.dot(np.asarray(x, dtype=np.float64), np.asarray(v, dtype=np.float64)))


def class_score(x, nset: NeuronSet):
    """Projection energy of ``x`` onto a neuron set: sum of squared responses.

    Accepts one image (784,) or a batch (n, 784).
    """
    x = np.asarray(x, dtype=np.float64)
    z = x @ nset.neurons.T
    return np.sum(z * z, axis=-1)


class ScoreBank:
    """All neurons of a collection of sets stacked for one matmul per batch."""

    def __init__(self, sets: Sequence[NeuronSet]):
        if not sets:
            raise ValueError("empty set collection")
        self.sets = tuple(sets)
        self.weights = np.ascontiguousarray(np.vstack([s.neurons for s in self.sets]).T)
        sizes = np.array([len(s) for s in self.sets])
        self.offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]])
        labels = np.array([s.class_label for s in self.sets])
        self.columns = {a: np.flatnonzero(labels == a) for a in CLASSES if np.any(labels == a)}

    def set_scores(self, x: np.ndarray) -> np.ndarray:
        z = x @ self.weights
        return np.add.reduceat(z * z, self.offsets, axis=1)

    def class_scores(self, x: np.ndarray) -> np.ndarray:
        """(n, 10) class maxima; classes with no set score -inf."""
        s = self.set_scores(x)
        out = np.full((len(x), len(CLASSES)), -np.inf)
        for a, cols in self.columns.items():
            out[:, a] = s[:, cols].max(axis=1)
        return out

    def predict(self, x) -> np.ndarray:
        return argmax_lowest(self.class_scores(x))


def argmax_lowest(scores: np.ndarray) -> np.ndarray:
    # np.argmax returns the first maximum, i.e. the lowest label on ties
    return np.argmax(scores, axis=-1)


def _apply(bank_predict: Callable[[np.ndarray], np.ndarray], x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return int(bank_predict(x[None, :])[0])
    return bank_predict(x)


@dataclass(frozen=True)
class RawModel:
    """One neuron set per class, plus optional precomputed rotated copies."""

    config: ModelConfig
    sets: dict[int, NeuronSet]
    transformed_sets: dict[float, dict[int, NeuronSet]] = field(default_factory=dict)
    flavor: str = "raw"
    _banks: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if not self.sets:
            raise ValueError("a raw model needs at least one class")
        if self.flavor not in ("raw", "transformed"):
            raise ValueError(f"raw model flavor must be raw or transformed, got {self.flavor!r}")
        for a, s in self.sets.items():
            if s.class_label != a or s.predicted_label is not None or s.transform_angle_deg != 0.0:
                raise ValueError(f"set stored under class {a} is tagged {s.key}")

    def bank(self, angles: tuple[float, ...] = (0.0,)) -> ScoreBank:
        angles = tuple(float(a) for a in angles)
        bank = self._banks.get(angles)
        if bank is None:
            bank = ScoreBank([s for a in sorted(self.sets) for s in self.sets_at(angles, a)])
            self._banks[angles] = bank
        return bank

    def sets_at(self, angles, label: int) -> list[NeuronSet]:
        from pcann.transforms import dual_neuron_set

        out = []
        for g in angles:
            if g == 0.0:
                out.append(self.sets[label])
            elif g in self.transformed_sets:
                out.append(self.transformed_sets[g][label])
            else:
                out.append(dual_neuron_set(self.sets[label], g))
        return out

    def all_sets(self) -> list[NeuronSet]:
        out = [self.sets[a] for a in sorted(self.sets)]
        for g in sorted(self.transformed_sets):
            out.extend(self.transformed_sets[g][a] for a in sorted(self.sets))
        return out

    def predict(self, x):
        if self.flavor == "transformed":
            return _apply(self.bank(self.config.angles_deg).predict, x)
        return _apply(self.bank().predict, x)


def build_raw_model(
    train: LabeledDataset,
    config: ModelConfig,
    *,
    flavor: str = "raw",
    renormalize_rotated: bool = False,
    threads: int | None = None,
) -> RawModel:
    """Per-class PCA neuron sets, with rotated copies for every nonzero angle."""
    buckets = partition_by_label(train)
    present = [a for a in CLASSES if len(buckets[a])]
    built = pmap(lambda a: build_neuron_set(buckets[a], config.r, a), present, threads)
    sets = dict(zip(present, built))
    return RawModel(
        config,
        sets,
        precompute_duals(sets, config.angles_deg, renormalize_rotated, threads),
        flavor,
    )


def precompute_duals(sets: dict, angles, renormalize: bool = False, threads: int | None = None) -> dict:
    from pcann.transforms import dual_neuron_set

    out = {}
    for g in angles:
        if g == 0.0:
            continue
        keys = list(sets)
        rotated = pmap(lambda k: dual_neuron_set(sets[k], g, renormalize=renormalize), keys, threads)
        out[g] = dict(zip(keys, rotated))
    return out


def classify_raw(x, model: RawModel):
    """Argmax of per-class projection energies. One image -> int, batch -> array."""
    return _apply(model.bank().predict, x)


@dataclass(frozen=True)
class EvalReport:
    total: int
    correct: int
    accuracy: float
    confusion: np.ndarray  # (10, 10): row = supervised, column = predicted

    def bucket_counts(self) -> dict[tuple[int, int], int]:
        return {(a, b): int(self.confusion[a, b]) for a in CLASSES for b in CLASSES if self.confusion[a, b]}

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "correct": self.correct,
            "accuracy": self.accuracy,
            "confusion": self.confusion.tolist(),
        }


def predict_all(classify: Callable, images: np.ndarray, threads: int | None = None) -> np.ndarray:
    """Batch predictions over fixed-size chunks, merged in order."""
    if len(images) == 0:
        return np.zeros(0, dtype=np.int64)
    parts = pmap(lambda sl: np.asarray(classify(images[sl]), dtype=np.int64), chunk_slices(len(images)), threads)
    return np.concatenate(parts)


def confusion_matrix(labels, predicted) -> np.ndarray:
    conf = np.zeros((len(CLASSES), len(CLASSES)), dtype=np.int64)
    np.add.at(conf, (np.asarray(labels), np.asarray(predicted)), 1)
    return conf


def evaluate(classify: Callable, ds: LabeledDataset, threads: int | None = None) -> EvalReport:
    """Accuracy and confusion of a batch classifier on a labeled dataset."""
    if len(ds) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    predicted = predict_all(classify, ds.images, threads)
    conf = confusion_matrix(ds.labels, predicted)
    correct = int(np.trace(conf))
    return EvalReport(len(ds), correct, correct / len(ds), conf)
