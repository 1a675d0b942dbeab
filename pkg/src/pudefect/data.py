"""Sample containers, PU splits, and feature-file I/O.

Two on-disk formats are supported:

* CSV — optional header line ``id,label,f0,...,f{d-1}``, then one sample
  per line as ``id,label,features...``. Labels are -1 (unlabeled),
  0 (negative) or 1 (positive); features are decimal floats.
* PUFV binary — magic bytes ``PUFV``, u32-LE version (=1), u64-LE n,
  u64-LE d, one label-presence byte (0/1), n*d float32-LE row-major
  feature values, then (if the flag is set) n signed label bytes.
  No padding anywhere; any deviation is a FormatError.

Features are stored as float32 both on disk and in memory; numeric
algorithms upcast to float64 internally.
"""
from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, FormatError
from .seeding import make_rng, sample_without_replacement

PUFV_MAGIC = b"PUFV"
PUFV_VERSION = 1

LABEL_POSITIVE = 1
LABEL_NEGATIVE = 0
LABEL_UNLABELED = -1
VALID_LABELS = (LABEL_UNLABELED, LABEL_NEGATIVE, LABEL_POSITIVE)


@dataclass(frozen=True)
class FeatureMatrix:
    """n x d table of float32 feature vectors, row-major."""

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.ndim != 2:
            raise DataError(f"feature matrix must be 2-D, got shape {arr.shape}")
        if arr.shape[1] < 1:
            raise DataError("feature dimension must be at least 1")
        if arr.size and not np.all(np.isfinite(arr)):
            bad = int(np.nonzero(~np.isfinite(arr).all(axis=1))[0][0])
            raise DataError(f"non-finite feature value in row {bad}")
        object.__setattr__(self, "data", arr)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]

    def rows(self, indices) -> "FeatureMatrix":
        return FeatureMatrix(self.data[np.asarray(indices, dtype=np.int64)])

    def as_float64(self) -> np.ndarray:
        return self.data.astype(np.float64)


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix plus one {0,1} label per row."""

    features: FeatureMatrix
    labels: np.ndarray

    def __post_init__(self) -> None:
        lab = np.asarray(self.labels, dtype=np.int8)
        if lab.ndim != 1 or lab.shape[0] != self.features.n:
            raise DataError(
                f"label count {lab.shape} does not match sample count {self.features.n}"
            )
        if lab.size and not np.isin(lab, (0, 1)).all():
            raise DataError("labeled dataset labels must be 0 or 1")
        object.__setattr__(self, "labels", lab)

    @property
    def n(self) -> int:
        return self.features.n

    def subset(self, indices) -> "LabeledDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(self.features.rows(idx), self.labels[idx])


@dataclass(frozen=True)
class PUDataset:
    """Positive-labeled set P plus an unlabeled pool U.

    ``hidden_truth`` carries U's true {0,1} labels for evaluation only;
    no training stage may read it.
    """

    positives: FeatureMatrix
    unlabeled: FeatureMatrix
    hidden_truth: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.positives.d != self.unlabeled.d:
            raise DataError(
                f"P and U feature dimensions differ: {self.positives.d} vs {self.unlabeled.d}"
            )
        if self.hidden_truth is not None:
            truth = np.asarray(self.hidden_truth, dtype=np.int8)
            if truth.shape != (self.unlabeled.n,):
                raise DataError("hidden_truth length must equal |U|")
            if truth.size and not np.isin(truth, (0, 1)).all():
                raise DataError("hidden_truth entries must be 0 or 1")
            object.__setattr__(self, "hidden_truth", truth)


def make_pu_split(
    full: LabeledDataset,
    positive_class: int,
    positive_fraction: float,
    seed: int,
) -> PUDataset:
    """Draw P uniformly from one class; everything else becomes U.

    |P| = max(1, floor(positive_fraction * n_pos)), sampled without
    replacement via a seeded partial Fisher-Yates shuffle. U keeps the
    remaining samples of both classes in original order, with their true
    labels retained as hidden_truth.
    """
    if positive_class not in (0, 1):
        raise DataError(f"positive_class must be 0 or 1, got {positive_class}")
    if not (0.0 < positive_fraction <= 1.0):
        raise DataError(f"positive_fraction must be in (0, 1], got {positive_fraction}")
    pos_idx = np.nonzero(full.labels == positive_class)[0]
    n_pos = pos_idx.shape[0]
    if n_pos == 0:
        raise DataError(f"dataset has no samples of class {positive_class}")
    k = max(1, int(positive_fraction * n_pos))
    rng = make_rng(seed)
    chosen = pos_idx[np.sort(sample_without_replacement(rng, n_pos, k))]
    mask = np.ones(full.n, dtype=bool)
    mask[chosen] = False
    rest = np.nonzero(mask)[0]
    return PUDataset(
        positives=full.features.rows(chosen),
        unlabeled=full.features.rows(rest),
        hidden_truth=full.labels[rest].copy(),
    )


# ---------------------------------------------------------------------------
# File I/O


def _format_from_path(path: Path) -> str:
    return "csv" if path.suffix.lower() == ".csv" else "pufv"


def _parse_csv(path: Path) -> tuple[np.ndarray, np.ndarray]:
    rows: list[list[float]] = []
    labels: list[int] = []
    d = None
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    start = 0
    if lines and lines[0].split(",")[0].strip() == "id":
        start = 1
        header_d = len(lines[0].split(",")) - 2
        if header_d >= 1:
            d = header_d
    for lineno, line in enumerate(lines[start:], start=start + 1):
        parts = [p.strip() for p in line.split(",")]
        if len(parts) < 3:
            raise FormatError(f"{path}: row {lineno} has {len(parts)} columns, need >= 3")
        try:
            label = int(parts[1])
            values = [float(p) for p in parts[2:]]
        except ValueError as exc:
            raise FormatError(f"{path}: row {lineno}: {exc}") from exc
        if label not in VALID_LABELS:
            raise FormatError(f"{path}: row {lineno} label {label} not in {{-1,0,1}}")
        if d is None:
            d = len(values)
        elif len(values) != d:
            raise DataError(f"{path}: row {lineno} has {len(values)} features, expected {d}")
        if not all(np.isfinite(values)):
            raise DataError(f"{path}: row {lineno} contains a non-finite value")
        rows.append(values)
        labels.append(label)
    if d is None:
        raise FormatError(f"{path}: no data rows and no header to infer dimension")
    feats = np.asarray(rows, dtype=np.float32).reshape(len(rows), d)
    return feats, np.asarray(labels, dtype=np.int8)


def _parse_pufv(path: Path) -> tuple[np.ndarray, np.ndarray | None]:
    blob = path.read_bytes()
    header = struct.calcsize("<4sIQQB")
    if len(blob) < header:
        raise FormatError(f"{path}: truncated header ({len(blob)} bytes)")
    magic, version, n, d, flag = struct.unpack_from("<4sIQQB", blob, 0)
    if magic != PUFV_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != PUFV_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if flag not in (0, 1):
        raise FormatError(f"{path}: label-presence flag must be 0 or 1, got {flag}")
    if d < 1:
        raise FormatError(f"{path}: feature dimension {d} invalid")
    expected = header + n * d * 4 + (n if flag else 0)
    if len(blob) != expected:
        raise FormatError(f"{path}: size {len(blob)} != expected {expected}")
    feats = np.frombuffer(blob, dtype="<f4", count=n * d, offset=header).reshape(n, d)
    if feats.size and not np.all(np.isfinite(feats)):
        bad = int(np.nonzero(~np.isfinite(feats).all(axis=1))[0][0])
        raise DataError(f"{path}: non-finite feature value in row {bad}")
    labels = None
    if flag:
        labels = np.frombuffer(blob, dtype=np.int8, count=n, offset=header + n * d * 4)
        if labels.size and not np.isin(labels, VALID_LABELS).all():
            raise FormatError(f"{path}: label byte outside {{-1,0,1}}")
    return feats.copy(), None if labels is None else labels.copy()


def load_feature_file(
    path: str | Path,
    format: str = "auto",
    *,
    pu: bool = False,
) -> LabeledDataset | PUDataset:
    """Load a feature file as a labeled dataset or a PU split.

    With ``pu=False`` the file must contain only {0,1} labels. With
    ``pu=True`` rows labeled 1 become P and rows labeled -1 become the
    unlabeled pool; explicitly negative rows are not part of a PU problem
    and are dropped with a warning.
    """
    matrix, labels = load_rows(path, format)
    if labels is None:
        if matrix.n == 0:
            labels = np.zeros(0, dtype=np.int8)
        else:
            raise DataError(f"{path}: file has no labels; use load_matrix for raw features")
    if not pu:
        if np.any(labels == LABEL_UNLABELED):
            raise DataError(
                f"{path}: contains unlabeled rows; load with pu=True for a PU dataset"
            )
        return LabeledDataset(matrix, labels)
    pos = np.nonzero(labels == LABEL_POSITIVE)[0]
    unl = np.nonzero(labels == LABEL_UNLABELED)[0]
    neg = np.nonzero(labels == LABEL_NEGATIVE)[0]
    if neg.size:
        warnings.warn(
            f"{path}: {neg.size} explicitly negative rows excluded from the PU pool",
            stacklevel=2,
        )
    return PUDataset(positives=matrix.rows(pos), unlabeled=matrix.rows(unl))


def load_rows(
    path: str | Path, format: str = "auto"
) -> tuple[FeatureMatrix, np.ndarray | None]:
    """Raw view of a feature file: the matrix plus the label codes as
    stored (or None for a label-free binary file)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"feature file not found: {path}")
    fmt = _format_from_path(path) if format == "auto" else format
    if fmt == "csv":
        feats, labels = _parse_csv(path)
    elif fmt == "pufv":
        feats, labels = _parse_pufv(path)
    else:
        raise FormatError(f"unknown format {format!r}")
    return FeatureMatrix(feats), labels


def load_matrix(path: str | Path, format: str = "auto") -> FeatureMatrix:
    """Load only the feature rows of a file, ignoring any label column."""
    return load_rows(path, format)[0]


def save_matrix(matrix: FeatureMatrix, path: str | Path, format: str = "auto") -> None:
    """Write bare features; PUFV uses label flag 0, CSV marks rows unlabeled."""
    path = Path(path)
    fmt = _format_from_path(path) if format == "auto" else format
    if fmt == "csv":
        _write_csv(path, matrix.data, np.full(matrix.n, LABEL_UNLABELED, dtype=np.int8))
    elif fmt == "pufv":
        _write_pufv(path, matrix.data, None)
    else:
        raise FormatError(f"unknown format {format!r}")


def save_feature_file(
    data: LabeledDataset | PUDataset,
    path: str | Path,
    format: str = "auto",
) -> None:
    """Write a dataset so that load_feature_file returns it unchanged.

    Binary PUFV round-trips bit-exactly. A PUDataset is written with P
    rows labeled 1 and U rows labeled -1 (hidden truth never reaches disk).
    """
    path = Path(path)
    fmt = _format_from_path(path) if format == "auto" else format
    if isinstance(data, PUDataset):
        feats = np.concatenate([data.positives.data, data.unlabeled.data], axis=0)
        labels = np.concatenate(
            [
                np.full(data.positives.n, LABEL_POSITIVE, dtype=np.int8),
                np.full(data.unlabeled.n, LABEL_UNLABELED, dtype=np.int8),
            ]
        )
    else:
        feats = data.features.data
        labels = data.labels
    if fmt == "csv":
        _write_csv(path, feats, labels)
    elif fmt == "pufv":
        _write_pufv(path, feats, labels)
    else:
        raise FormatError(f"unknown format {format!r}")


def _write_csv(path: Path, feats: np.ndarray, labels: np.ndarray) -> None:
    n, d = feats.shape
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("id,label," + ",".join(f"f{j}" for j in range(d)) + "\n")
        for i in range(n):
            row = ",".join(repr(float(v)) for v in feats[i])
            fh.write(f"{i},{int(labels[i])},{row}\n")


def _write_pufv(path: Path, feats: np.ndarray, labels: np.ndarray | None) -> None:
    n, d = feats.shape
    flag = 0 if labels is None else 1
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sIQQB", PUFV_MAGIC, PUFV_VERSION, n, d, flag))
        fh.write(np.ascontiguousarray(feats, dtype="<f4").tobytes())
        if labels is not None:
            fh.write(np.ascontiguousarray(labels, dtype=np.int8).tobytes())
