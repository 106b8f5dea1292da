"""Dataset persistence, split construction and SNR filtering.

Binary dataset format (all little-endian):

    header (28 bytes):
        magic        4 bytes  b"AMRD"
        version      uint32   1
        num_samples  uint64
        signal_len   uint32
        num_channels uint32   always 2 (I then Q)
        num_classes  uint32
    records (num_samples consecutive, 4 + 8*signal_len bytes each):
        label        uint16
        snr_db       int16
        data         float32[2 * signal_len], channel-major (I block, Q block)

Files are identified by a 64-bit FNV-1a digest over their raw bytes. Split
sidecars and class manifests are JSON so they stay human-auditable.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .digest import digest_hex, fnv1a64, parse_digest
from .errors import CorruptDatasetError, SizingError
from .util import atomic_write_bytes, atomic_write_text, round_half_up
from .validation import check_index_array

MAGIC = b"AMRD"
VERSION = 1
NUM_CHANNELS = 2
_HEADER = struct.Struct("<4sIQIII")


@dataclass
class SignalRecord:
    """One labeled IQ sample: float32 [2, L] data, class label, SNR tag."""

    label: int
    snr_db: int
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32)
        if self.data.ndim != 2 or self.data.shape[0] != NUM_CHANNELS:
            raise ValueError(f"record data must be [2, L], got {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("record data must be finite")


@dataclass
class SignalDataset:
    """Column-oriented collection of SignalRecords.

    Treated as immutable once constructed; `content_digest` is cached under
    that assumption.
    """

    x: np.ndarray        # float32 [N, 2, L]
    labels: np.ndarray   # uint16 [N]
    snr_db: np.ndarray   # int16 [N]
    num_classes: int
    _digest: int | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.x = np.ascontiguousarray(self.x, dtype=np.float32)
        self.labels = np.asarray(self.labels, dtype=np.uint16)
        self.snr_db = np.asarray(self.snr_db, dtype=np.int16)
        if self.x.ndim != 3 or self.x.shape[1] != NUM_CHANNELS:
            raise ValueError(f"x must be [N, 2, L], got {self.x.shape}")
        n = len(self.x)
        if len(self.labels) != n or len(self.snr_db) != n:
            raise ValueError("labels/snr_db length mismatch with x")
        if not np.all(np.isfinite(self.x)):
            raise ValueError("dataset contains non-finite values")
        if n and int(self.labels.max()) >= self.num_classes:
            raise ValueError("label out of range for num_classes")

    def __len__(self) -> int:
        return len(self.x)

    @property
    def signal_len(self) -> int:
        return self.x.shape[2]

    def record(self, i: int) -> SignalRecord:
        return SignalRecord(int(self.labels[i]), int(self.snr_db[i]), self.x[i])

    def records(self):
        return [self.record(i) for i in range(len(self))]

    @classmethod
    def from_records(cls, records, num_classes: int) -> "SignalDataset":
        records = list(records)
        if not records:
            raise ValueError("cannot build a dataset from zero records")
        x = np.stack([r.data for r in records])
        labels = np.array([r.label for r in records], dtype=np.uint16)
        snr = np.array([r.snr_db for r in records], dtype=np.int16)
        return cls(x, labels, snr, num_classes)

    def to_bytes(self) -> bytes:
        header = _HEADER.pack(MAGIC, VERSION, len(self), self.signal_len,
                              NUM_CHANNELS, self.num_classes)
        body = np.empty(len(self), dtype=_record_dtype(self.signal_len))
        body["label"] = self.labels
        body["snr_db"] = self.snr_db
        body["data"] = self.x.reshape(len(self), -1)
        return header + body.tobytes()

    def content_digest(self) -> int:
        if self._digest is None:
            self._digest = fnv1a64(self.to_bytes())
        return self._digest


def _record_dtype(signal_len: int) -> np.dtype:
    return np.dtype([("label", "<u2"), ("snr_db", "<i2"),
                     ("data", "<f4", (NUM_CHANNELS * signal_len,))])


def write_dataset(dataset: SignalDataset, path: str | os.PathLike) -> None:
    """Serialize a dataset; read_dataset(write_dataset(d)) is bit-exact."""
    atomic_write_bytes(path, dataset.to_bytes())


def read_dataset(path: str | os.PathLike) -> SignalDataset:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise CorruptDatasetError(
            f"{path}: truncated header, expected {_HEADER.size} bytes, got {len(raw)} (offset 0)")
    magic, version, num_samples, signal_len, num_channels, num_classes = \
        _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise CorruptDatasetError(f"{path}: bad magic {magic!r} at offset 0, expected {MAGIC!r}")
    if version != VERSION:
        raise CorruptDatasetError(f"{path}: unsupported version {version} at offset 4")
    if num_channels != NUM_CHANNELS:
        raise CorruptDatasetError(
            f"{path}: num_channels={num_channels} at offset 20, format requires {NUM_CHANNELS}")
    rec_dtype = _record_dtype(signal_len)
    expected = _HEADER.size + num_samples * rec_dtype.itemsize
    if len(raw) != expected:
        raise CorruptDatasetError(
            f"{path}: expected {expected} bytes for {num_samples} records, got {len(raw)} "
            f"(record block starts at offset {_HEADER.size})")
    body = np.frombuffer(raw, dtype=rec_dtype, count=num_samples, offset=_HEADER.size)
    x = np.ascontiguousarray(body["data"]).reshape(num_samples, NUM_CHANNELS, signal_len)
    dataset = SignalDataset(x, np.ascontiguousarray(body["label"]),
                            np.ascontiguousarray(body["snr_db"]), num_classes,
                            _digest=fnv1a64(raw))
    return dataset


def filter_by_snr(dataset: SignalDataset, min_exclusive_db: int) -> SignalDataset:
    """Keep records with snr_db strictly above the threshold, preserving order."""
    keep = np.flatnonzero(dataset.snr_db > min_exclusive_db)
    return SignalDataset(dataset.x[keep], dataset.labels[keep], dataset.snr_db[keep],
                         dataset.num_classes)


@dataclass
class SplitIndices:
    """Disjoint target/auxiliary/test index sets over one dataset file."""

    target: np.ndarray
    auxiliary: np.ndarray
    test: np.ndarray
    source_digest: int

    def __post_init__(self):
        self.target = np.asarray(self.target, dtype=np.int64)
        self.auxiliary = np.asarray(self.auxiliary, dtype=np.int64)
        self.test = np.asarray(self.test, dtype=np.int64)


def make_splits(dataset: SignalDataset, target_fraction: float, test_fraction: float,
                seed: int, snr_min_exclusive_db: int | None = None) -> SplitIndices:
    """Build class-stratified test / class-balanced target / auxiliary splits.

    The sampled pool is the whole dataset, optionally restricted to records
    with snr_db > snr_min_exclusive_db; all returned indices refer to the
    dataset file. Test indices are drawn uniformly per class; the target gets
    exactly round(target_fraction * pool_size / C) samples from every class;
    the auxiliary set is the remaining pool.
    """
    if not 0 < target_fraction or not 0 < test_fraction:
        raise ValueError("target_fraction and test_fraction must be positive")
    if target_fraction + test_fraction >= 1:
        raise ValueError("target_fraction + test_fraction must be < 1")
    if snr_min_exclusive_db is None:
        pool = np.arange(len(dataset), dtype=np.int64)
    else:
        pool = np.flatnonzero(dataset.snr_db > snr_min_exclusive_db).astype(np.int64)
    if len(pool) == 0:
        raise SizingError("sampled pool is empty")
    C = dataset.num_classes
    target_quota = round_half_up(target_fraction * len(pool) / C)
    if target_quota == 0:
        raise SizingError(
            f"target_fraction {target_fraction} yields a per-class quota of 0 "
            f"(pool size {len(pool)}, {C} classes)")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    labels = dataset.labels
    target, auxiliary, test = [], [], []
    for c in range(C):
        pool_c = pool[labels[pool] == c]
        test_quota = round_half_up(test_fraction * len(pool_c))
        if len(pool_c) - test_quota < target_quota:
            raise SizingError(
                f"class {c}: pool of {len(pool_c)} cannot supply {test_quota} test "
                f"+ {target_quota} target samples")
        perm = rng.permutation(pool_c)
        test.append(perm[:test_quota])
        target.append(perm[test_quota:test_quota + target_quota])
        auxiliary.append(perm[test_quota + target_quota:])
    return SplitIndices(
        target=np.sort(np.concatenate(target)),
        auxiliary=np.sort(np.concatenate(auxiliary)),
        test=np.sort(np.concatenate(test)),
        source_digest=dataset.content_digest(),
    )


def validate_splits(dataset: SignalDataset, splits: SplitIndices) -> list[str]:
    """Check all SplitIndices invariants; returns violations (empty = valid)."""
    violations = []
    if splits.source_digest != dataset.content_digest():
        violations.append(
            f"source_digest mismatch: splits carry {digest_hex(splits.source_digest)}, "
            f"dataset is {digest_hex(dataset.content_digest())}")
    names = ("target", "auxiliary", "test")
    arrays = (splits.target, splits.auxiliary, splits.test)
    for name, arr in zip(names, arrays):
        try:
            check_index_array(arr, len(dataset), name)
        except ValueError as exc:
            violations.append(str(exc))
    for i in range(len(arrays)):
        for j in range(i + 1, len(arrays)):
            overlap = np.intersect1d(arrays[i], arrays[j])
            if len(overlap):
                violations.append(
                    f"{names[i]}/{names[j]} overlap at index {int(overlap[0])}"
                    + (f" (+{len(overlap) - 1} more)" if len(overlap) > 1 else ""))
    return violations


def save_splits(splits: SplitIndices, path: str | os.PathLike) -> None:
    payload = {
        "source_digest": digest_hex(splits.source_digest),
        "target": [int(i) for i in splits.target],
        "auxiliary": [int(i) for i in splits.auxiliary],
        "test": [int(i) for i in splits.test],
    }
    atomic_write_text(path, json.dumps(payload) + "\n")


def load_splits(path: str | os.PathLike) -> SplitIndices:
    with open(path) as fh:
        payload = json.load(fh)
    return SplitIndices(
        target=np.array(payload["target"], dtype=np.int64),
        auxiliary=np.array(payload["auxiliary"], dtype=np.int64),
        test=np.array(payload["test"], dtype=np.int64),
        source_digest=parse_digest(payload["source_digest"]),
    )


def write_manifest(class_names: list[str], path: str | os.PathLike) -> None:
    """Class-name manifest, one name per label id in label order."""
    atomic_write_text(path, json.dumps({"classes": list(class_names)}) + "\n")


def read_manifest(path: str | os.PathLike) -> list[str]:
    with open(path) as fh:
        return list(json.load(fh)["classes"])
