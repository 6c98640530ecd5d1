"""Binary model files.

Layout, little-endian throughout::

    b"PCNN"  u32 version=1  u8 flavor  f64 r  u32 M
    u32 n_angles  f64 * n_angles
    u32 n_sets
    per set: u8 class  u8 predicted (0xFF = none)  f64 angle  u32 n_neurons
             f64 * (n_neurons * 784), row-major
    u32 CRC32 of every preceding byte

Every stored set is written, rotated copies included, so loading never
recomputes anything and a save/load round trip is bit-exact.
"""

from __future__ import annotations

import os
import struct
import tempfile
import zlib

import numpy as np

from pcann.buckets import BucketedModel
from pcann.dataset_io import PIXELS
from pcann.errors import BadMagic, ChecksumMismatch, ModelFileError, Truncated, UnsupportedVersion
from pcann.network import FLAVORS, ModelConfig, RawModel
from pcann.pca import NeuronSet

MAGIC = b"PCNN"
VERSION = 1
_NONE = 0xFF


def model_to_bytes(model) -> bytes:
    cfg = model.config
    parts = [
        MAGIC,
        struct.pack("<IBdI", VERSION, FLAVORS.index(model.flavor), cfg.r, cfg.M),
        struct.pack("<I", len(cfg.angles_deg)),
        struct.pack(f"<{len(cfg.angles_deg)}d", *cfg.angles_deg),
    ]
    sets = model.all_sets()
    parts.append(struct.pack("<I", len(sets)))
    for s in sets:
        pred = _NONE if s.predicted_label is None else s.predicted_label
        parts.append(struct.pack("<BBdI", s.class_label, pred, s.transform_angle_deg, len(s)))
        parts.append(np.ascontiguousarray(s.neurons, dtype="<f8").tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.data):
            raise Truncated("model file ends inside a record")
        out = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += size
        return out

    def floats(self, count: int) -> np.ndarray:
        size = 8 * count
        if self.pos + size > len(self.data):
            raise Truncated("model file ends inside a neuron block")
        out = np.frombuffer(self.data, dtype="<f8", count=count, offset=self.pos).astype(np.float64)
        self.pos += size
        return out


def model_from_bytes(data: bytes):
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagic(f"not a model file (magic {data[:4]!r})")
    if len(data) < 8:
        raise Truncated("model file ends inside the header")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != VERSION:
        raise UnsupportedVersion(f"model format version {version}, this build reads {VERSION}")
    if len(data) < 12:
        raise Truncated("model file too short")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) != crc:
        raise ChecksumMismatch("model file checksum does not match (corrupt or truncated)")

    rd = _Reader(body)
    rd.pos = 4
    _, flavor_code, r, M = rd.take("<IBdI")
    if flavor_code >= len(FLAVORS):
        raise ModelFileError(f"unknown flavor code {flavor_code}")
    flavor = FLAVORS[flavor_code]
    (n_angles,) = rd.take("<I")
    angles = rd.take(f"<{n_angles}d")
    (n_sets,) = rd.take("<I")
    sets = []
    for _ in range(n_sets):
        cls, pred, angle, count = rd.take("<BBdI")
        neurons = rd.floats(count * PIXELS).reshape(count, PIXELS)
        sets.append(NeuronSet(cls, None if pred == _NONE else pred, angle, neurons))
    if rd.pos != len(body):
        raise ModelFileError(f"{len(body) - rd.pos} unexpected trailing bytes")

    try:
        config = ModelConfig(r, M, tuple(angles))
        if flavor in ("raw", "transformed"):
            return _raw_from_sets(config, flavor, sets)
        return _bucketed_from_sets(config, flavor, sets)
    except ValueError as e:
        raise ModelFileError(f"inconsistent model file: {e}") from e


def _raw_from_sets(config, flavor, sets) -> RawModel:
    base, rotated = {}, {}
    for s in sets:
        if s.predicted_label is not None:
            raise ModelFileError("raw model file contains a bucket set")
        if s.transform_angle_deg == 0.0:
            base[s.class_label] = s
        else:
            rotated.setdefault(s.transform_angle_deg, {})[s.class_label] = s
    return RawModel(config, base, rotated, flavor)


def _bucketed_from_sets(config, flavor, sets) -> BucketedModel:
    base, rotated = {}, {}
    for s in sets:
        if s.predicted_label is None:
            raise ModelFileError("bucketed model file contains a set without a bucket")
        key = (s.class_label, s.predicted_label)
        if s.transform_angle_deg == 0.0:
            base[key] = s
        else:
            rotated[(*key, s.transform_angle_deg)] = s
    return BucketedModel(config, base, rotated, flavor)


def write_atomic(path, data: bytes) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".pcann-", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_model(path, model) -> None:
    write_atomic(path, model_to_bytes(model))


def load_model(path):
    with open(path, "rb") as f:
        data = f.read()
    try:
        return model_from_bytes(data)
    except ModelFileError as e:
        raise type(e)(f"{path}: {e}") from e
    except Truncated as e:
        raise Truncated(f"{path}: {e}") from e
