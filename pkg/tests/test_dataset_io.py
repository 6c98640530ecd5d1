import gzip
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pcann.dataset_io import (
    LabeledDataset,
    load_dataset,
    normalize,
    normalize_batch,
    parse_idx_images,
    parse_idx_labels,
    partition_by_label,
    serialize_idx_images,
    serialize_idx_labels,
)
from pcann.errors import DimensionMismatch, InvalidLabel, Truncated, WrongMagic, ZeroNorm


def image_header(n, rows=28, cols=28, magic=0x803):
    return struct.pack(">IIII", magic, n, rows, cols)


class TestParseImages:
    def test_minimal_file(self):
        imgs = parse_idx_images(image_header(1) + bytes(784))
        assert imgs.shape == (1, 28, 28)
        assert imgs.dtype == np.uint8
        assert not imgs.any()

    def test_label_magic_rejected(self):
        with pytest.raises(WrongMagic):
            parse_idx_images(image_header(1, magic=0x801) + bytes(784))

    def test_truncated_payload(self):
        with pytest.raises(Truncated):
            parse_idx_images(image_header(2) + bytes(784))

    def test_truncated_header(self):
        with pytest.raises(Truncated):
            parse_idx_images(struct.pack(">II", 0x803, 1))

    def test_wrong_dimensions(self):
        with pytest.raises(DimensionMismatch):
            parse_idx_images(image_header(1, rows=32, cols=32) + bytes(1024))

    def test_pixels_copied_verbatim_in_file_order(self):
        payload = bytes(range(256)) * 6 + bytes(range(64))
        imgs = parse_idx_images(image_header(2) + payload[:784] + payload[784:1568])
        assert imgs[0].tobytes() == payload[:784]
        assert imgs[1].tobytes() == payload[784:1568]
        assert imgs[0, 0, 5] == 5  # row 0 is the first row of the payload


class TestParseLabels:
    def test_three_labels(self):
        labels = parse_idx_labels(struct.pack(">II", 0x801, 3) + bytes([5, 0, 9]))
        assert labels.tolist() == [5, 0, 9]

    def test_label_ten_rejected(self):
        with pytest.raises(InvalidLabel):
            parse_idx_labels(struct.pack(">II", 0x801, 2) + bytes([3, 10]))

    def test_image_magic_rejected(self):
        with pytest.raises(WrongMagic):
            parse_idx_labels(struct.pack(">II", 0x803, 1) + bytes([1]))

    def test_truncated(self):
        with pytest.raises(Truncated):
            parse_idx_labels(struct.pack(">II", 0x801, 4) + bytes([1, 2]))


@settings(max_examples=25, deadline=None)
@given(arrays(np.uint8, st.tuples(st.integers(0, 4), st.just(28), st.just(28))))
def test_image_round_trip(images):
    assert parse_idx_images(serialize_idx_images(images)).tobytes() == images.tobytes()


@given(st.lists(st.integers(0, 9), max_size=50))
def test_label_round_trip(labels):
    assert parse_idx_labels(serialize_idx_labels(labels)).tolist() == labels


def test_gzip_files_detected(tmp_path):
    rng = np.random.default_rng(3)
    raw = rng.integers(0, 256, size=(5, 28, 28), dtype=np.uint8)
    labels = [1, 2, 3, 4, 5]
    (tmp_path / "img.gz").write_bytes(gzip.compress(serialize_idx_images(raw)))
    (tmp_path / "lab").write_bytes(serialize_idx_labels(labels))
    ds = load_dataset(tmp_path / "img.gz", tmp_path / "lab")
    assert ds.labels.tolist() == labels
    np.testing.assert_array_equal(ds.images, normalize_batch(raw))


def test_load_reports_path_on_error(tmp_path):
    (tmp_path / "img").write_bytes(image_header(1, magic=0x801))
    (tmp_path / "lab").write_bytes(serialize_idx_labels([1]))
    with pytest.raises(WrongMagic, match="img"):
        load_dataset(tmp_path / "img", tmp_path / "lab")


def test_load_count_mismatch(tmp_path):
    (tmp_path / "img").write_bytes(serialize_idx_images(np.ones((2, 28, 28), np.uint8)))
    (tmp_path / "lab").write_bytes(serialize_idx_labels([1]))
    with pytest.raises(DimensionMismatch):
        load_dataset(tmp_path / "img", tmp_path / "lab")


class TestNormalize:
    def test_blank_rejected(self):
        with pytest.raises(ZeroNorm):
            normalize(np.zeros((28, 28), np.uint8))
        with pytest.raises(ZeroNorm):
            normalize_batch(np.zeros((2, 28, 28)))

    def test_single_pixel(self):
        img = np.zeros((28, 28), np.uint8)
        img[3, 7] = 255
        x = normalize(img)
        assert x[3 * 28 + 7] == 1.0
        assert np.count_nonzero(x) == 1

    def test_three_four_five(self):
        img = np.zeros((28, 28), np.uint8)
        img[0, 0], img[27, 27] = 3, 4
        x = normalize(img)
        assert x[0] == pytest.approx(0.6, abs=1e-15)
        assert x[-1] == pytest.approx(0.8, abs=1e-15)

    def test_batch_matches_single(self):
        rng = np.random.default_rng(0)
        raw = rng.integers(1, 256, size=(4, 28, 28))
        for img, row in zip(raw, normalize_batch(raw)):
            np.testing.assert_allclose(row, normalize(img), rtol=0, atol=1e-15)


nonblank = arrays(np.uint8, (28, 28)).filter(lambda a: a.any())


@given(nonblank)
def test_unit_norm_and_nonnegative(img):
    x = normalize(img)
    assert abs(np.linalg.norm(x) - 1.0) < 1e-12
    assert (x >= 0).all()


@given(nonblank, st.integers(1, 1000))
def test_gray_scale_invariance(img, c):
    np.testing.assert_allclose(normalize(c * img.astype(np.int64)), normalize(img), rtol=0, atol=1e-12)


class TestPartition:
    def test_sizes(self):
        imgs = np.eye(3, 784)
        buckets = partition_by_label(LabeledDataset(imgs, [1, 0, 1]))
        assert len(buckets[0]) == 1 and len(buckets[1]) == 2
        np.testing.assert_array_equal(buckets[1], imgs[[0, 2]])  # dataset order kept

    def test_empty_dataset(self):
        buckets = partition_by_label(LabeledDataset(np.zeros((0, 784)), []))
        assert sorted(buckets) == list(range(10))
        assert all(len(b) == 0 for b in buckets.values())

    @given(st.lists(st.integers(0, 9), max_size=80))
    def test_partition_identity(self, labels):
        n = len(labels)
        imgs = np.arange(n * 784, dtype=float).reshape(n, 784) + 1
        buckets = partition_by_label(LabeledDataset(imgs, labels))
        assert sum(len(b) for b in buckets.values()) == n
        firsts = [row[0] for b in buckets.values() for row in b]
        assert len(set(firsts)) == n  # disjoint

    def test_dataset_validation(self):
        with pytest.raises(DimensionMismatch):
            LabeledDataset(np.zeros((2, 784)), [1])
        with pytest.raises(InvalidLabel):
            LabeledDataset(np.zeros((1, 784)), [11])
