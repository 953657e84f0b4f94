"""Diabetes data pipeline: CSV ingest, undersampling, min-max scaling, split."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import DataError

N_FEATURES = 8


def bundled_csv_path() -> Path:
    """Path of the Pima Indians diabetes CSV shipped with the package."""
    return Path(str(resources.files("mctsga") / "data" / "diabetes.csv"))


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class RawDataset:
    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple

    def __post_init__(self):
        object.__setattr__(self, "features", _frozen(self.features, np.float64))
        object.__setattr__(self, "labels", _frozen(self.labels, np.int64))
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.shape[0]:
            raise DataError("features and labels disagree in row count")
        if not np.all(np.isfinite(self.features)):
            raise DataError("non-finite feature value")
        if not np.all(np.isin(self.labels, (0, 1))):
            raise DataError("labels must be 0 or 1")

    def __len__(self):
        return self.labels.shape[0]

    def class_counts(self):
        return int(np.sum(self.labels == 0)), int(np.sum(self.labels == 1))


@dataclass(frozen=True)
class ScalerParams:
    data_min: np.ndarray
    data_max: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data_min", _frozen(self.data_min, np.float64))
        object.__setattr__(self, "data_max", _frozen(self.data_max, np.float64))
        if np.any(self.data_min > self.data_max):
            raise DataError("scaler min exceeds max")

    @property
    def span(self):
        return self.data_max - self.data_min

    def transform(self, X):
        X = np.asarray(X, dtype=np.float64)
        span = self.span
        safe = np.where(span > 0, span, 1.0)
        return np.where(span > 0, (X - self.data_min) / safe, 0.0)

    def inverse_transform(self, Xs):
        # constant columns map back to their single value
        return np.asarray(Xs, dtype=np.float64) * self.span + self.data_min

    def to_dict(self):
        return {"min": self.data_min.tolist(), "max": self.data_max.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["min"]), np.array(d["max"]))


@dataclass(frozen=True)
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray
    scaler: ScalerParams

    def __post_init__(self):
        object.__setattr__(self, "features", _frozen(self.features, np.float64))
        object.__setattr__(self, "labels", _frozen(self.labels, np.int64))
        if self.features.shape[0] == 0:
            raise DataError("empty dataset")
        if self.features.shape[0] != self.labels.shape[0]:
            raise DataError("features and labels disagree in row count")
        if np.any(self.features < 0.0) or np.any(self.features > 1.0):
            raise DataError("scaled features must lie in [0, 1]")

    def __len__(self):
        return self.labels.shape[0]

    def take(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        return LabeledDataset(self.features[idx], self.labels[idx], self.scaler)

    def class_counts(self):
        return int(np.sum(self.labels == 0)), int(np.sum(self.labels == 1))


def _is_number(s):
    try:
        float(s)
    except ValueError:
        return False
    return True


def load_csv(path, n_features=N_FEATURES) -> RawDataset:
    """Read a CSV of ``n_features`` numeric columns plus a trailing 0/1 label.

    A header is assumed when the first field of the first non-empty line is
    not numeric. Errors name the offending line (1-based).
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    n_cols = n_features + 1
    names = tuple(f"x{i}" for i in range(n_features))
    feats, labels = [], []
    with path.open(newline="", encoding="utf-8") as fh:
        first = True
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            cells = [c.strip() for c in row]
            if first:
                first = False
                if not _is_number(cells[0]):
                    if len(cells) != n_cols:
                        raise DataError(
                            f"line {lineno}: header has {len(cells)} columns, expected {n_cols}")
                    names = tuple(cells[:n_features])
                    continue
            if len(cells) != n_cols:
                raise DataError(f"line {lineno}: expected {n_cols} columns, got {len(cells)}")
            try:
                values = [float(c) for c in cells]
            except ValueError:
                raise DataError(f"line {lineno}: non-numeric cell") from None
            if not all(np.isfinite(values)):
                raise DataError(f"line {lineno}: non-finite value")
            label = values[-1]
            if label not in (0.0, 1.0):
                raise DataError(f"line {lineno}: label must be 0 or 1, got {cells[-1]}")
            feats.append(values[:-1])
            labels.append(int(label))
    if not feats:
        raise DataError(f"{path}: no data rows")
    return RawDataset(np.array(feats), np.array(labels), names)


def balance_undersample(ds: RawDataset, seed) -> RawDataset:
    """Drop majority-class rows at random until both classes match, then shuffle."""
    neg, pos = ds.class_counts()
    if neg == 0 or pos == 0:
        raise DataError("balancing needs both classes present")
    rng = np.random.default_rng(seed)
    m = min(neg, pos)
    keep = []
    for cls in (0, 1):
        idx = np.flatnonzero(ds.labels == cls)
        keep.append(np.sort(rng.choice(idx, size=m, replace=False)))
    order = rng.permutation(np.concatenate(keep))
    return RawDataset(ds.features[order], ds.labels[order], ds.feature_names)


def minmax_fit_transform(ds: RawDataset) -> LabeledDataset:
    if len(ds) == 0:
        raise DataError("empty dataset")
    scaler = ScalerParams(ds.features.min(axis=0), ds.features.max(axis=0))
    X = np.clip(scaler.transform(ds.features), 0.0, 1.0)
    return LabeledDataset(X, ds.labels, scaler)


def _stratified_counts(class_sizes, n_test):
    """Largest-remainder allocation of ``n_test`` rows across classes."""
    n = sum(class_sizes)
    exact = [n_test * c / n for c in class_sizes]
    alloc = [int(np.floor(e)) for e in exact]
    rest = n_test - sum(alloc)
    order = sorted(range(len(exact)), key=lambda i: (-(exact[i] - alloc[i]), i))
    for i in order[:rest]:
        alloc[i] += 1
    return alloc


def split(ds: LabeledDataset, test_fraction=0.25, seed=0):
    """Stratified train/test partition; test size is ``round(n * test_fraction)``."""
    if not 0.0 < test_fraction < 1.0:
        raise DataError(f"test_fraction must be in (0, 1), got {test_fraction}")
    n = len(ds)
    n_test = int(np.floor(n * test_fraction + 0.5))
    if n_test < 1 or n - n_test < 1:
        raise DataError(f"split of {n} rows at {test_fraction} leaves an empty side")
    rng = np.random.default_rng(seed)
    classes = [np.flatnonzero(ds.labels == c) for c in (0, 1)]
    alloc = _stratified_counts([len(c) for c in classes], n_test)
    test_idx, train_idx = [], []
    for idx, k in zip(classes, alloc):
        perm = rng.permutation(idx)
        test_idx.append(perm[:k])
        train_idx.append(perm[k:])
    test_idx = rng.permutation(np.concatenate(test_idx))
    train_idx = rng.permutation(np.concatenate(train_idx))
    return ds.take(train_idx), ds.take(test_idx)


def prepare(path, seed, test_fraction=0.25):
    """load -> balance -> scale -> split, with sub-seeds drawn from ``seed``."""
    ss = np.random.SeedSequence(seed)
    balance_seed, split_seed = (int(s.generate_state(1)[0]) for s in ss.spawn(2))
    balanced = balance_undersample(load_csv(path), balance_seed)
    scaled = minmax_fit_transform(balanced)
    train, test = split(scaled, test_fraction, split_seed)
    return train, test


def write_labeled_csv(ds: LabeledDataset, path, feature_names=None):
    names = feature_names or [f"x{i}" for i in range(ds.features.shape[1])]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(names) + ["label"])
        for row, y in zip(ds.features, ds.labels):
            w.writerow([repr(float(v)) for v in row] + [int(y)])
