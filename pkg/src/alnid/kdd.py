"""KDD Cup 99 ingestion: parsing, 12-attribute encoding, census and zero-shot split."""

from __future__ import annotations

import bz2
import gzip
import io
import lzma
import math
import zipfile
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator, Sequence

import numpy as np

RAW_FIELDS = [
    "duration", "protocol_type", "service", "flag", "src_bytes", "dst_bytes",
    "land", "wrong_fragment", "urgent", "hot", "num_failed_logins", "logged_in",
    "num_compromised", "root_shell", "su_attempted", "num_root",
    "num_file_creations", "num_shells", "num_access_files", "num_outbound_cmds",
    "is_host_login", "is_guest_login", "count", "srv_count", "serror_rate",
    "srv_serror_rate", "rerror_rate", "srv_rerror_rate", "same_srv_rate",
    "diff_srv_rate", "srv_diff_host_rate", "dst_host_count",
    "dst_host_srv_count", "dst_host_same_srv_rate", "dst_host_diff_srv_rate",
    "dst_host_same_src_port_rate", "dst_host_srv_diff_host_rate",
    "dst_host_serror_rate", "dst_host_srv_serror_rate", "dst_host_rerror_rate",
    "dst_host_srv_rerror_rate",
]
SYMBOLIC_FIELDS = {1, 2, 3}
N_FIELDS = len(RAW_FIELDS) + 1

ATTRIBUTES = [
    "duration", "protocol_type", "src_bytes", "dst_bytes", "urgent", "count",
    "srv_count", "same_srv_rate", "dst_host_count", "dst_host_srv_count",
    "dst_host_same_srv_rate", "dst_host_same_src_port_rate",
]
ATTRIBUTE_FIELDS = [RAW_FIELDS.index(name) for name in ATTRIBUTES]
RATE_ATTRIBUTES = {i for i, name in enumerate(ATTRIBUTES) if name.endswith("_rate")}

PROTOCOLS = {"icmp": 1, "tcp": 2, "udp": 3}

CATEGORIES = ["DOS", "NORMAL", "PROBE", "R2L", "U2R"]


@dataclass(frozen=True)
class ClassInfo:
    name: str
    category: str
    zero_shot: bool
    expected_count: int


CLASS_TABLE: tuple[ClassInfo, ...] = (
    ClassInfo("smurf", "DOS", False, 280_790),
    ClassInfo("neptune", "DOS", False, 107_201),
    ClassInfo("back", "DOS", False, 2_203),
    ClassInfo("teardrop", "DOS", True, 979),
    ClassInfo("pod", "DOS", False, 264),
    ClassInfo("land", "DOS", True, 21),
    ClassInfo("normal", "NORMAL", False, 97_277),
    ClassInfo("satan", "PROBE", False, 1_589),
    ClassInfo("ipsweep", "PROBE", True, 1_247),
    ClassInfo("portsweep", "PROBE", False, 1_040),
    ClassInfo("nmap", "PROBE", True, 231),
    ClassInfo("warezclient", "R2L", False, 1_020),
    ClassInfo("guess_passwd", "R2L", True, 53),
    ClassInfo("warezmaster", "R2L", False, 20),
    ClassInfo("imap", "R2L", True, 12),
    ClassInfo("ftp_write", "R2L", False, 8),
    ClassInfo("multihop", "R2L", False, 7),
    ClassInfo("phf", "R2L", False, 4),
    ClassInfo("spy", "R2L", False, 2),
    ClassInfo("buffer_overflow", "U2R", False, 30),
    ClassInfo("rootkit", "U2R", True, 10),
    ClassInfo("loadmodule", "U2R", False, 9),
    ClassInfo("perl", "U2R", True, 3),
)
CLASSES = {info.name: info for info in CLASS_TABLE}
CANONICAL_TOTAL = 494_021


class KddFormatError(ValueError):
    """A malformed KDD line. Carries the 1-based line number and 0-based field index."""

    def __init__(self, kind: str, message: str, line_no: int | None = None, field: int | None = None):
        self.kind = kind
        self.line_no = line_no
        self.field = field
        where = []
        if line_no is not None:
            where.append(f"line {line_no}")
        if field is not None:
            where.append(f"field {field}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(f"{prefix}{kind}: {message}")


@dataclass(frozen=True)
class RawConnectionRecord:
    fields: tuple  # 41 values; str for symbolic fields, float otherwise
    label: str

    @property
    def category(self) -> str:
        return CLASSES[self.label].category


@dataclass(frozen=True)
class EncodedInstance:
    features: tuple[float, ...]
    label: str
    category: str


def parse_kdd_line(line: str, line_no: int | None = None) -> RawConnectionRecord:
    line = line.strip()
    if not line:
        raise KddFormatError("empty-line", "no content", line_no)
    parts = line.split(",")
    if len(parts) != N_FIELDS:
        raise KddFormatError(
            "malformed-field-count", f"expected {N_FIELDS} fields, got {len(parts)}", line_no
        )
    values = []
    for i, raw in enumerate(parts[:-1]):
        if i in SYMBOLIC_FIELDS:
            values.append(raw)
            continue
        try:
            v = float(raw)
        except ValueError:
            raise KddFormatError("unparseable-numeric", repr(raw), line_no, i) from None
        if not math.isfinite(v) or v < 0:
            raise KddFormatError("unparseable-numeric", f"{raw!r} is not a finite non-negative number", line_no, i)
        values.append(v)
    if values[1] not in PROTOCOLS:
        raise KddFormatError("unknown-protocol", repr(values[1]), line_no, 1)
    label = parts[-1].strip()
    if label.endswith("."):
        label = label[:-1]
    if label not in CLASSES:
        raise KddFormatError("unknown-label", repr(label), line_no, N_FIELDS - 1)
    return RawConnectionRecord(tuple(values), label)


def encode_instance(record: RawConnectionRecord) -> EncodedInstance:
    features = []
    for field in ATTRIBUTE_FIELDS:
        v = record.fields[field]
        features.append(float(PROTOCOLS[v]) if field == 1 else v)
    return EncodedInstance(tuple(features), record.label, record.category)


class Dataset:
    """Columnar collection of encoded (or relearned) instances.

    ``features`` is an ``(n, 12)`` array; ``labels`` holds class names.
    Indexing yields :class:`EncodedInstance` views.
    """

    def __init__(self, features, labels: Sequence[str]):
        features = np.array(features, dtype=float)
        if features.ndim != 2:
            features = features.reshape(len(labels), -1)
        self.features = features
        self.labels = np.array(labels, dtype=object)
        if len(self.features) != len(self.labels):
            raise ValueError("features and labels differ in length")
        self.features.setflags(write=False)
        self.labels.setflags(write=False)

    @classmethod
    def from_instances(cls, instances: Iterable[EncodedInstance]) -> "Dataset":
        instances = list(instances)
        features = np.array([inst.features for inst in instances], dtype=float).reshape(len(instances), len(ATTRIBUTES))
        return cls(features, [inst.label for inst in instances])

    def __len__(self) -> int:
        return len(self.labels)

    def __getitem__(self, i: int) -> EncodedInstance:
        label = self.labels[i]
        return EncodedInstance(tuple(self.features[i].tolist()), label, CLASSES[label].category)

    def __iter__(self) -> Iterator[EncodedInstance]:
        for i in range(len(self)):
            yield self[i]

    @property
    def categories(self) -> np.ndarray:
        return np.array([CLASSES[label].category for label in self.labels], dtype=object)

    def subset(self, mask_or_index) -> "Dataset":
        return Dataset(self.features[mask_or_index], self.labels[mask_or_index])


@dataclass(frozen=True)
class DatasetSplit:
    seen: Dataset
    unseen: Dataset


def open_text(source) -> io.TextIOBase:
    """Open a path or binary stream, transparently decompressing gzip/bz2/xz/zip."""
    if isinstance(source, (str, Path)):
        stream: BinaryIO = open(source, "rb")
    else:
        stream = source
    if not hasattr(stream, "peek"):
        stream = io.BufferedReader(stream)
    magic = stream.peek(6)[:6]
    if magic[:2] == b"\x1f\x8b":
        stream = gzip.GzipFile(fileobj=stream)
    elif magic[:3] == b"BZh":
        stream = bz2.BZ2File(stream)
    elif magic[:6] == b"\xfd7zXZ\x00":
        stream = lzma.LZMAFile(stream)
    elif magic[:4] == b"PK\x03\x04":
        archive = zipfile.ZipFile(stream)
        members = [m for m in archive.namelist() if not m.endswith("/")]
        if len(members) != 1:
            raise KddFormatError("archive", f"expected one member in zip archive, found {len(members)}")
        stream = archive.open(members[0])
    return io.TextIOWrapper(stream, encoding="ascii", newline=None)


def load_dataset(source) -> Dataset:
    """Stream-parse a KDD file (path or binary stream), preserving record order.

    Blank lines are skipped; any malformed line aborts the load.
    """
    features = []
    labels = []
    text = open_text(source)
    try:
        for line_no, line in enumerate(text, start=1):
            if not line.strip():
                continue
            inst = encode_instance(parse_kdd_line(line, line_no))
            features.append(inst.features)
            labels.append(inst.label)
    finally:
        if isinstance(source, (str, Path)):
            text.close()
    return Dataset(np.array(features, dtype=float).reshape(len(labels), len(ATTRIBUTES)), labels)


def census(dataset: Dataset) -> dict[str, int]:
    """Per-class instance counts in class-table order (absent classes count 0)."""
    names, counts = np.unique(dataset.labels.astype(str), return_counts=True)
    found = dict(zip(names.tolist(), counts.tolist()))
    return {info.name: int(found.get(info.name, 0)) for info in CLASS_TABLE}


def census_mismatches(counts: dict[str, int]) -> dict[str, tuple[int, int]]:
    """Classes whose count differs from the canonical 10% subset: name -> (found, expected)."""
    return {
        info.name: (counts.get(info.name, 0), info.expected_count)
        for info in CLASS_TABLE
        if counts.get(info.name, 0) != info.expected_count
    }


def category_census(dataset: Dataset) -> dict[str, int]:
    counts = dict.fromkeys(CATEGORIES, 0)
    for name, n in census(dataset).items():
        counts[CLASSES[name].category] += n
    return counts


def split_zero_shot(dataset: Dataset, table: Sequence[ClassInfo] = CLASS_TABLE) -> DatasetSplit:
    flags = {info.name: info.zero_shot for info in table}
    unknown = sorted(set(dataset.labels.tolist()) - flags.keys())
    if unknown:
        raise KeyError(f"unknown-class: {', '.join(unknown)}")
    unseen = np.array([flags[label] for label in dataset.labels], dtype=bool)
    return DatasetSplit(dataset.subset(~unseen), dataset.subset(unseen))


def column_stats(values) -> dict[str, float]:
    """Population min/max/mean/stddev of a 1-D column."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("empty-dataset: cannot compute statistics")
    mean = float(np.mean(values))
    return {
        "min": float(np.min(values)),
        "max": float(np.max(values)),
        "mean": mean,
        "stddev": float(np.sqrt(np.mean((values - mean) ** 2))),
    }


def attribute_stats(dataset: Dataset, attribute_index: int) -> dict[str, float]:
    if not 0 <= attribute_index < dataset.features.shape[1]:
        raise IndexError(f"attribute index {attribute_index} out of range")
    return column_stats(dataset.features[:, attribute_index])


def stratified_subsample(dataset: Dataset, size: int, seed: int) -> Dataset:
    """Per-class proportional sample of about ``size`` instances, at least one per class.

    Selected instances keep their original order.
    """
    n = len(dataset)
    if size >= n:
        return dataset
    rng = np.random.default_rng(seed)
    picked = []
    for name in sorted(set(dataset.labels.tolist())):
        idx = np.flatnonzero(dataset.labels == name)
        take = max(1, int(round(size * len(idx) / n)))
        picked.append(rng.choice(idx, size=min(take, len(idx)), replace=False))
    return dataset.subset(np.sort(np.concatenate(picked)))


# Published statistics of the 12 attributes on the 10% subset: (min, max, mean, stddev).
REFERENCE_STATS = {
    "duration": (0, 58_329, 47.979, 707.747),
    "protocol_type": (1, 3, 2.189, 0.961),
    "src_bytes": (0, 693_375_640, 3025.616, 988_219.101),
    "dst_bytes": (0, 5_155_468, 868.531, 33_040.035),
    "urgent": (0, 3, 0.0, 0.006),
    "count": (0, 511, 332.286, 213.147),
    "srv_count": (0, 511, 292.907, 246.323),
    "same_srv_rate": (0, 1, 0.792, 0.388),
    "dst_host_count": (0, 255, 232.471, 64.745),
    "dst_host_srv_count": (0, 255, 188.666, 106.04),
    "dst_host_same_srv_rate": (0, 1, 0.754, 0.411),
    "dst_host_same_src_port_rate": (0, 1, 0.602, 0.481),
}
# dst_bytes max is printed ambiguously in the source table; mismatches are reported, not fatal.
SOFT_REFERENCE = {("dst_bytes", "max")}


def compare_stats(stats: dict[str, dict[str, float]], tol: float = 0.01) -> list[dict]:
    """Compare per-attribute stats to REFERENCE_STATS: exact min/max, ``tol`` on mean/stddev."""
    rows = []
    for name, ref in REFERENCE_STATS.items():
        got = stats[name]
        for key, expected in zip(("min", "max", "mean", "stddev"), ref):
            exact = key in ("min", "max")
            ok = got[key] == expected if exact else abs(got[key] - expected) <= tol
            rows.append({
                "attribute": name, "statistic": key, "expected": expected, "found": got[key],
                "ok": bool(ok), "soft": (name, key) in SOFT_REFERENCE,
            })
    return rows
