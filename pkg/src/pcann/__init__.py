"""pcann: bucketed PCA neural networks with neuron transforms."""

from pcann.dataset_io import (
    LabeledDataset,
    load_dataset,
    normalize,
    parse_idx_images,
    parse_idx_labels,
    partition_by_label,
)
from pcann.pca import NeuronSet, Spectrum, build_neuron_set, compute_spectrum, truncation_index
from pcann.network import (
    EvalReport,
    ModelConfig,
    RawModel,
    build_raw_model,
    class_score,
    classify_raw,
    evaluate,
    neuron_response,
)
from pcann.transforms import classify_transformed, dual_neuron_set, rotate_image
from pcann.buckets import (
    BucketedModel,
    build_bucketed_model,
    classify_bucketed,
    classify_bucketed_transformed,
    compute_error_buckets,
)

__all__ = [
    "BucketedModel",
    "EvalReport",
    "LabeledDataset",
    "ModelConfig",
    "NeuronSet",
    "RawModel",
    "Spectrum",
    "build_bucketed_model",
    "build_neuron_set",
    "build_raw_model",
    "class_score",
    "classify_bucketed",
    "classify_bucketed_transformed",
    "classify_raw",
    "classify_transformed",
    "compute_error_buckets",
    "compute_spectrum",
    "dual_neuron_set",
    "evaluate",
    "load_dataset",
    "neuron_response",
    "normalize",
    "parse_idx_images",
    "parse_idx_labels",
    "partition_by_label",
    "rotate_image",
    "truncation_index",
]

__version__ = "0.1.0"
