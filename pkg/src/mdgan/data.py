"""Dataset ingestion, preprocessing, partitioning, and synthetic generators.

The protocol: anomalies never enter train or validation, 10% of the
training pool becomes the validation set, and features are scaled to
[-1, 1] using statistics from the training pool only (test values may
fall outside that range; they are not clipped).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

MAX_CATEGORICAL_CARDINALITY = 3


@dataclass
class DatasetSchema:
    label_column: str
    positive_label: str | None = None  # default: minority class is the anomaly
    partition_column: str | None = None
    train_tag: str = "train"


@dataclass
class Column:
    name: str
    values: np.ndarray  # float array if numeric, object array of strings otherwise
    is_numeric: bool


@dataclass
class RawDataset:
    columns: list[Column]
    labels: np.ndarray  # (n,) ints, 1 = anomaly
    partition: np.ndarray | None = None  # bool mask, True = predefined train row

    @property
    def n_samples(self) -> int:
        return len(self.labels)

    def feature_matrix(self) -> np.ndarray:
        bad = [c.name for c in self.columns if not c.is_numeric]
        if bad:
            raise ConfigurationError(
                f"categorical columns still present (encode them first): {bad}"
            )
        if not self.columns:
            raise ConfigurationError("dataset has no feature columns")
        return np.column_stack([c.values for c in self.columns]).astype(float)

    def feature_names(self) -> list[str]:
        return [c.name for c in self.columns]


@dataclass
class NormalizationSpec:
    """Per-feature min/max of the training pool, mapping it onto [-1, 1]."""

    minimum: np.ndarray
    maximum: np.ndarray

    def apply(self, x: np.ndarray) -> np.ndarray:
        span = self.maximum - self.minimum
        out = np.zeros_like(x, dtype=float)
        ok = span > 0
        out[:, ok] = 2.0 * (x[:, ok] - self.minimum[ok]) / span[ok] - 1.0
        return out


@dataclass
class DatasetSplit:
    train: np.ndarray
    validation: np.ndarray
    test: np.ndarray
    test_labels: np.ndarray
    feature_names: list[str] = field(default_factory=list)
    normalization: NormalizationSpec | None = None

    @property
    def dim(self) -> int:
        return self.train.shape[1]


def load_csv(path, schema: DatasetSchema) -> RawDataset:
    """Parse a headered CSV into typed columns plus labels.

    Rows with missing (empty) fields are rejected; rows with the wrong field
    count raise with their 1-based line number.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigurationError(f"empty CSV file: {path}") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ConfigurationError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}"
                )
            if any(field_.strip() == "" for field_ in row):
                continue  # missing value: reject the row
            rows.append(row)
    if not rows:
        raise ConfigurationError(f"no data rows in {path}")
    if schema.label_column not in header:
        raise ConfigurationError(f"label column '{schema.label_column}' not in header")
    if schema.partition_column is not None and schema.partition_column not in header:
        raise ConfigurationError(
            f"partition column '{schema.partition_column}' not in header"
        )

    table = {name: [row[i].strip() for row in rows] for i, name in enumerate(header)}
    labels = _resolve_labels(table[schema.label_column], schema.positive_label)
    partition = None
    if schema.partition_column is not None:
        partition = np.array(
            [v == schema.train_tag for v in table[schema.partition_column]]
        )
    skip = {schema.label_column, schema.partition_column}
    columns = [
        _typed_column(name, values)
        for name, values in table.items()
        if name not in skip
    ]
    return RawDataset(columns=columns, labels=labels, partition=partition)


def _resolve_labels(raw: list[str], positive_label: str | None) -> np.ndarray:
    distinct = sorted(set(raw))
    if len(distinct) != 2:
        raise ConfigurationError(
            f"label column must be binary, found {len(distinct)} values"
        )
    if positive_label is None:
        counts = {v: raw.count(v) for v in distinct}
        positive_label = min(distinct, key=lambda v: (counts[v], v))
    elif positive_label not in distinct:
        raise ConfigurationError(f"positive label '{positive_label}' never occurs")
    return np.array([1 if v == positive_label else 0 for v in raw])


def _typed_column(name: str, values: list[str]) -> Column:
    try:
        data = np.array([float(v) for v in values])
        return Column(name, data, is_numeric=True)
    except ValueError:
        return Column(name, np.array(values, dtype=object), is_numeric=False)


def drop_wide_categoricals(data: RawDataset) -> RawDataset:
    """Remove categoricals with more than three values; one-hot encode the rest.

    Cardinality is measured on the full dataset, before any splitting.
    """
    columns: list[Column] = []
    for col in data.columns:
        if col.is_numeric:
            columns.append(col)
            continue
        levels = sorted(set(col.values))
        if len(levels) > MAX_CATEGORICAL_CARDINALITY:
            continue
        for level in levels:
            indicator = (col.values == level).astype(float)
            columns.append(Column(f"{col.name}={level}", indicator, is_numeric=True))
    return RawDataset(columns=columns, labels=data.labels, partition=data.partition)


def partition(
    data: RawDataset,
    seed,
    train_size: int | None = None,
    train_fraction: float | None = None,
    use_predefined: bool = False,
    validation_fraction: float = 0.10,
) -> DatasetSplit:
    """Split into all-normal train/validation and a labeled test set.

    Predefined partitions keep their test rows untouched; anomalies are
    stripped from the train rows before the validation draw.  Otherwise all
    anomalies go to test and ``train_size`` (or ``train_fraction``) normal
    samples form the training pool.
    """
    rng = np.random.default_rng(seed)
    x = data.feature_matrix()
    y = np.asarray(data.labels)
    if int(y.sum()) == 0:
        raise ConfigurationError("dataset contains no anomalies to evaluate")
    normal_count = int((y == 0).sum())
    if normal_count < 10:
        raise ConfigurationError(f"need at least 10 normal samples, got {normal_count}")

    if use_predefined:
        if data.partition is None:
            raise ConfigurationError("predefined partition requested but none present")
        train_mask = data.partition & (y == 0)
        pool_idx = np.flatnonzero(train_mask)
        test_idx = np.flatnonzero(~data.partition)
    else:
        normal_idx = rng.permutation(np.flatnonzero(y == 0))
        if train_size is None:
            if train_fraction is None:
                raise ConfigurationError("need train_size or train_fraction")
            train_size = int(round(train_fraction * len(normal_idx)))
        if train_size < 1 or train_size > len(normal_idx):
            raise ConfigurationError(
                f"train_size {train_size} out of range (have {len(normal_idx)} normals)"
            )
        pool_idx = normal_idx[:train_size]
        test_idx = np.concatenate([normal_idx[train_size:], np.flatnonzero(y == 1)])

    n_val = int(round(validation_fraction * len(pool_idx)))
    order = rng.permutation(len(pool_idx))
    val_idx = pool_idx[order[:n_val]]
    tr_idx = pool_idx[order[n_val:]]
    if len(tr_idx) == 0:
        raise ConfigurationError("training pool empty after validation draw")
    if len(test_idx) == 0 or int(y[test_idx].sum()) == 0:
        raise ConfigurationError("test set has no anomalies")

    return DatasetSplit(
        train=x[tr_idx],
        validation=x[val_idx],
        test=x[test_idx],
        test_labels=y[test_idx],
        feature_names=data.feature_names(),
    )


def fit_and_apply_normalization(split: DatasetSplit) -> DatasetSplit:
    """Scale every split with min/max from the training pool (train + validation).

    Degenerate features (min == max) map to 0; test values are not clipped.
    """
    if len(split.train) == 0:
        raise ConfigurationError("cannot normalize an empty training set")
    pool = (
        np.vstack([split.train, split.validation])
        if len(split.validation)
        else split.train
    )
    spec = NormalizationSpec(minimum=pool.min(axis=0), maximum=pool.max(axis=0))
    return DatasetSplit(
        train=spec.apply(split.train),
        validation=spec.apply(split.validation) if len(split.validation) else split.validation,
        test=spec.apply(split.test),
        test_labels=split.test_labels,
        feature_names=split.feature_names,
        normalization=spec,
    )


def make_synthetic(
    kind: str,
    n_normal: int,
    n_anomaly: int,
    dim: int,
    separation: float,
    seed,
) -> RawDataset:
    """Labeled synthetic datasets for deterministic testing.

    blob: unit-variance normal cluster at the origin, anomaly cluster displaced
    by ``separation`` along a seeded random direction.
    ring: normals on a shell of radius ``separation``+2 in the first two
    coordinates, anomalies near the origin.
    two_moons_like: interleaved half-circles in the first two coordinates,
    the anomaly moon offset vertically by ``separation``.
    """
    if n_normal < 20:
        raise ConfigurationError(f"need n_normal >= 20, got {n_normal}")
    rng = np.random.default_rng(seed)
    if kind == "blob":
        normal = rng.standard_normal((n_normal, dim))
        direction = rng.standard_normal(dim)
        direction /= np.linalg.norm(direction)
        anomaly = rng.standard_normal((n_anomaly, dim)) + separation * direction
    elif kind == "ring":
        radius = separation + 2.0
        theta = rng.uniform(0, 2 * np.pi, n_normal)
        normal = rng.standard_normal((n_normal, dim)) * 0.3
        normal[:, 0] += radius * np.cos(theta)
        normal[:, 1 % dim] += radius * np.sin(theta)
        anomaly = rng.standard_normal((n_anomaly, dim)) * 0.3
    elif kind == "two_moons_like":
        t = rng.uniform(0, np.pi, n_normal)
        normal = rng.standard_normal((n_normal, dim)) * 0.15
        normal[:, 0] += np.cos(t)
        normal[:, 1 % dim] += np.sin(t)
        s = rng.uniform(0, np.pi, n_anomaly)
        anomaly = rng.standard_normal((n_anomaly, dim)) * 0.15
        anomaly[:, 0] += 1.0 - np.cos(s)
        anomaly[:, 1 % dim] += separation - np.sin(s)
    else:
        raise ConfigurationError(f"unknown synthetic kind: {kind}")

    x = np.vstack([normal, anomaly])
    y = np.concatenate([np.zeros(n_normal, dtype=int), np.ones(n_anomaly, dtype=int)])
    columns = [Column(f"f{j}", x[:, j].copy(), is_numeric=True) for j in range(dim)]
    return RawDataset(columns=columns, labels=y)
