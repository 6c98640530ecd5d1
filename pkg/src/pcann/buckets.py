"""Error-bucket refinement on top of a raw PCA-NN.

Every training sample is filed under (supervised, predicted-by-raw-model).
Buckets holding at least ``M`` samples get their own PCA neuron set; the
rest are dropped entirely (their samples are not moved anywhere else). A
class scores as the best of its buckets, optionally also maximized over
rotated copies of each bucket.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from pcann.dataset_io import CLASSES, LabeledDataset
from pcann.errors import MissingDiagonal
from pcann.network import ModelConfig, ScoreBank, _apply, precompute_duals, predict_all
from pcann.parallel import pmap
from pcann.pca import NeuronSet, build_neuron_set


def compute_error_buckets(
    raw_model, train: LabeledDataset, threads: int | None = None, *, classify=None
) -> dict[tuple[int, int], np.ndarray]:
    """Map (supervised, predicted) to the stacked samples, in dataset order.

    Predictions come from the untransformed raw classifier of ``raw_model``
    unless a batch ``classify`` callable is given instead.
    """
    from pcann.network import classify_raw

    if classify is None:
        classify = lambda x: classify_raw(x, raw_model)  # noqa: E731
    predicted = predict_all(classify, train.images, threads)
    buckets = {}
    for a in CLASSES:
        for b in CLASSES:
            mask = (train.labels == a) & (predicted == b)
            if mask.any():
                buckets[(a, b)] = train.images[mask]
    return buckets


@dataclass(frozen=True)
class BucketedModel:
    config: ModelConfig
    sets: dict[tuple[int, int], NeuronSet]
    transformed_sets: dict[tuple[int, int, float], NeuronSet] = field(default_factory=dict)
    flavor: str = "bucketed"
    _banks: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.flavor not in ("bucketed", "bucketed_transformed"):
            raise ValueError(f"bucketed model flavor must be bucketed or bucketed_transformed, got {self.flavor!r}")
        for (a, b), s in self.sets.items():
            if (s.class_label, s.predicted_label, s.transform_angle_deg) != (a, b, 0.0):
                raise ValueError(f"set stored under bucket {(a, b)} is tagged {s.key}")
        classes = {a for a, _ in self.sets}
        missing = [a for a in classes if (a, a) not in self.sets]
        if missing:
            raise MissingDiagonal(f"classes {missing} have no diagonal bucket")
        for key in self.sets:
            for g in self.config.angles_deg:
                if g != 0.0 and (*key, g) not in self.transformed_sets:
                    raise ValueError(f"missing rotated set for bucket {key} at {g} degrees")

    def keys(self) -> list[tuple[int, int]]:
        return sorted(self.sets)

    def set_for(self, key: tuple[int, int], angle: float) -> NeuronSet:
        return self.sets[key] if angle == 0.0 else self.transformed_sets[(*key, float(angle))]

    def bank(self, angles: tuple[float, ...] = (0.0,)) -> ScoreBank:
        angles = tuple(float(a) for a in angles)
        bank = self._banks.get(angles)
        if bank is None:
            bank = ScoreBank([self.set_for(k, g) for k in self.keys() for g in angles])
            self._banks[angles] = bank
        return bank

    def all_sets(self) -> list[NeuronSet]:
        out = [self.sets[k] for k in self.keys()]
        for g in sorted(a for a in self.config.angles_deg if a != 0.0):
            out.extend(self.transformed_sets[(*k, g)] for k in self.keys())
        return out

    def predict(self, x):
        if self.flavor == "bucketed_transformed":
            return classify_bucketed_transformed(x, self)
        return classify_bucketed(x, self)


def build_bucketed_model(
    buckets: dict[tuple[int, int], np.ndarray],
    config: ModelConfig,
    *,
    flavor: str = "bucketed",
    renormalize_rotated: bool = False,
    threads: int | None = None,
) -> BucketedModel:
    """PCA neuron sets for every bucket with at least ``config.M`` samples."""
    kept = sorted(k for k, v in buckets.items() if len(v) >= config.M)
    classes = sorted({a for a, _ in buckets})
    missing = [a for a in classes if (a, a) not in kept]
    if missing:
        raise MissingDiagonal(
            f"classes {missing} have fewer than M={config.M} correctly classified training samples"
        )
    built = pmap(lambda k: build_neuron_set(buckets[k], config.r, k[0], k[1]), kept, threads)
    sets = dict(zip(kept, built))
    duals = precompute_duals(sets, config.angles_deg, renormalize_rotated, threads)
    transformed = {(*k, g): s for g, by_key in duals.items() for k, s in by_key.items()}
    return BucketedModel(config, sets, transformed, flavor)


def classify_bucketed(x, model: BucketedModel):
    """Best bucket score per class, then argmax."""
    return _apply(model.bank().predict, x)


def classify_bucketed_transformed(x, model: BucketedModel):
    """Best (bucket, rotation) score per class, then argmax."""
    return _apply(model.bank(model.config.angles_deg).predict, x)
