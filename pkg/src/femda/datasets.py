"""Labelled datasets: CSV ingestion, preprocessing and stratified splits."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import (
    AllClassesDropped,
    AllRowsDropped,
    ClassTooSmall,
    ConfigInvalid,
    DimensionMismatch,
    EmptyFile,
    ParseError,
)
from .kvfile import as_bool, as_list, read_kv

BUNDLED = ("ionosphere", "ecoli", "breast-cancer")


@dataclass
class LabeledDataset:
    """Points with integer class labels.

    ``points`` may hold NaN where a value was missing in the source file;
    :func:`preprocess` removes those rows.
    """

    points: np.ndarray
    labels: np.ndarray
    class_names: dict = field(default_factory=dict)
    feature_names: list = field(default_factory=list)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.points.ndim != 2:
            raise DimensionMismatch("points must be an (n, m) array")
        if self.points.shape[0] != self.labels.shape[0]:
            raise DimensionMismatch("points and labels have different lengths")
        if not self.class_names:
            self.class_names = {int(c): str(c) for c in np.unique(self.labels)}
        if not self.feature_names:
            self.feature_names = [f"x{j + 1}" for j in range(self.points.shape[1])]

    def __len__(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def classes(self):
        return np.unique(self.labels)

    def class_counts(self):
        labels, counts = np.unique(self.labels, return_counts=True)
        return dict(zip(labels.tolist(), counts.tolist()))

    def subset(self, index):
        return LabeledDataset(
            self.points[index], self.labels[index], dict(self.class_names), list(self.feature_names)
        )

    def with_points(self, points):
        return LabeledDataset(points, self.labels.copy(), dict(self.class_names), list(self.feature_names))


@dataclass
class CsvSchema:
    label_column: str = "-1"
    delimiter: str = ","
    missing_token: str = "?"
    header: bool = False
    feature_names: list = field(default_factory=list)
    file: str | None = None


@dataclass
class PreprocessPolicy:
    drop_missing_rows: bool = True
    drop_zero_variance_cols: bool = True
    min_class_size: int = 0
    drop_columns: list = field(default_factory=list)

    def __post_init__(self):
        if self.min_class_size < 0:
            raise ConfigInvalid("min_class_size must be >= 0")


def read_schema(path):
    """Read a dataset schema file into ``(CsvSchema, PreprocessPolicy)``.

    Keys: ``file``, ``delimiter``, ``label_column`` (index or header name),
    ``missing_token``, ``header``, ``feature_names`` and the preprocessing
    keys ``drop_columns``, ``drop_missing_rows``, ``drop_zero_variance_cols``,
    ``min_class_size``.
    """
    kv = read_kv(path)
    delimiter = kv.get("delimiter", ",")
    delimiter = {"tab": "\t", "\\t": "\t", "comma": ","}.get(delimiter, delimiter)
    schema = CsvSchema(
        label_column=kv.get("label_column", "-1"),
        delimiter=delimiter,
        missing_token=kv.get("missing_token", "?"),
        header=as_bool(kv.get("header", "false")),
        feature_names=as_list(kv.get("feature_names", "")),
        file=kv.get("file"),
    )
    policy = PreprocessPolicy(
        drop_missing_rows=as_bool(kv.get("drop_missing_rows", "true")),
        drop_zero_variance_cols=as_bool(kv.get("drop_zero_variance_cols", "true")),
        min_class_size=int(kv.get("min_class_size", "0")),
        drop_columns=as_list(kv.get("drop_columns", "")),
    )
    return schema, policy


def bundled_schema_path(name):
    """Path of the schema file shipped for one of :data:`BUNDLED`."""
    if name not in BUNDLED:
        raise KeyError(f"unknown bundled dataset {name!r}; choose from {BUNDLED}")
    return Path(str(resources.files("femda") / "data" / f"{name}.schema"))


def load_bundled(name):
    """Load and preprocess a bundled dataset; returns ``(dataset, report)``."""
    path = bundled_schema_path(name)
    schema, policy = read_schema(path)
    data = load_csv(path.parent / schema.file, schema)
    return preprocess(data, policy)


def load_csv(path, schema=None):
    """Parse a delimited file of numeric features plus one label column.

    Labels are mapped to dense ids ``1..K`` in order of first appearance.
    Cells equal to ``schema.missing_token`` become NaN.

    Raises
    ------
    ParseError
        A non-numeric feature cell, or a row with the wrong number of cells.
    EmptyFile
        No data rows.
    """
    schema = schema or CsvSchema()
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [(i, r) for i, r in enumerate(csv.reader(fh, delimiter=schema.delimiter), 1)]
    rows = [(i, [c.strip() for c in r]) for i, r in rows if any(c.strip() for c in r)]
    header = None
    if schema.header and rows:
        header = rows[0][1]
        rows = rows[1:]
    if not rows:
        raise EmptyFile(f"{path} has no data rows")

    width = len(rows[0][1])
    label_col = _resolve_column(schema.label_column, header, width)
    names = header or schema.feature_names
    if names and len(names) == width - 1 and header is None:
        names = list(names[:label_col]) + ["<label>"] + list(names[label_col:])
    if not names or len(names) != width:
        names = [f"x{j + 1}" for j in range(width)]
        names[label_col] = "<label>"
    feature_cols = [j for j in range(width) if j != label_col]

    points = np.empty((len(rows), width - 1))
    ids, label_ids = {}, []
    for r, (lineno, cells) in enumerate(rows):
        if len(cells) != width:
            raise ParseError(lineno, len(cells), f"expected {width} cells, found {len(cells)}")
        for out_j, j in enumerate(feature_cols):
            cell = cells[j]
            if cell == schema.missing_token or cell == "":
                points[r, out_j] = np.nan
                continue
            try:
                points[r, out_j] = float(cell)
            except ValueError:
                raise ParseError(lineno, j + 1, f"not a number: {cell!r}") from None
        label_ids.append(ids.setdefault(cells[label_col], len(ids) + 1))
    class_names = {v: k for k, v in ids.items()}
    return LabeledDataset(points, np.array(label_ids), class_names, [names[j] for j in feature_cols])


def _resolve_column(spec, header, width):
    spec = str(spec).strip()
    try:
        j = int(spec)
    except ValueError:
        if header is None or spec not in header:
            raise ConfigInvalid(f"label column {spec!r} not found") from None
        return header.index(spec)
    if not -width <= j < width:
        raise ConfigInvalid(f"label column {j} out of range for {width} columns")
    return j % width


def preprocess(data, policy):
    """Apply a :class:`PreprocessPolicy` and report what was removed.

    Steps, in order: drop named columns, drop rows with missing values,
    drop columns constant over the whole dataset, drop classes with fewer
    than ``min_class_size`` points. Surviving labels are renumbered
    ``1..K`` keeping their relative order.

    Returns
    -------
    dataset : LabeledDataset
    report : dict
        JSON-serialisable record of every removed row, column and class.
    """
    x = data.points
    y = data.labels
    names = list(data.feature_names)
    report = {"rows_in": int(x.shape[0]), "columns_in": len(names)}

    unknown = [c for c in policy.drop_columns if c not in names]
    if unknown:
        raise ConfigInvalid(f"cannot drop unknown columns {unknown}")
    keep = [j for j, n in enumerate(names) if n not in policy.drop_columns]
    report["dropped_columns"] = [n for n in names if n in policy.drop_columns]
    x = x[:, keep]
    names = [names[j] for j in keep]

    missing = np.isnan(x).any(axis=1)
    report["dropped_missing_rows"] = np.flatnonzero(missing).tolist() if policy.drop_missing_rows else []
    if policy.drop_missing_rows:
        x, y = x[~missing], y[~missing]
    if x.shape[0] == 0:
        raise AllRowsDropped("no rows left after dropping missing values")

    report["dropped_constant_columns"] = []
    if policy.drop_zero_variance_cols:
        constant = np.nanmax(x, axis=0) == np.nanmin(x, axis=0)
        report["dropped_constant_columns"] = [n for n, c in zip(names, constant) if c]
        x = x[:, ~constant]
        names = [n for n, c in zip(names, constant) if not c]

    labels, counts = np.unique(y, return_counts=True)
    small = labels[counts < policy.min_class_size]
    report["dropped_classes"] = {
        data.class_names[int(c)]: int(n) for c, n in zip(labels, counts) if c in small
    }
    rows_small = np.isin(y, small)
    x, y = x[~rows_small], y[~rows_small]
    if x.shape[0] == 0:
        raise AllClassesDropped("every class is smaller than min_class_size")

    kept = [int(c) for c in labels if c not in small]
    remap = {old: new for new, old in enumerate(kept, 1)}
    y = np.array([remap[int(c)] for c in y], dtype=int)
    class_names = {remap[c]: data.class_names[c] for c in kept}
    report.update(
        rows_dropped=report["rows_in"] - int(x.shape[0]),
        rows_out=int(x.shape[0]),
        columns_out=len(names),
        class_counts={class_names[c]: n for c, n in zip(*np.unique(y, return_counts=True))},
    )
    report["class_counts"] = {k: int(v) for k, v in report["class_counts"].items()}
    return LabeledDataset(x, y, class_names, names), report


def _round_half_up(x):
    return int(math.floor(x + 0.5))


def stratified_split(data, train_fraction, rng):
    """Per-class random split with ``round(train_fraction * n_k)`` training points.

    The count is kept within ``[1, n_k - 1]`` so both sides see every class.
    """
    if not 0 < train_fraction < 1:
        raise ConfigInvalid("train_fraction must lie strictly between 0 and 1")
    train_idx, test_idx = [], []
    for c in data.classes:
        idx = np.flatnonzero(data.labels == c)
        if idx.size < 2:
            raise ClassTooSmall(data.class_names.get(int(c), c), idx.size, 2)
        idx = rng.permutation(idx)
        k = min(max(_round_half_up(train_fraction * idx.size), 1), idx.size - 1)
        train_idx.append(idx[:k])
        test_idx.append(idx[k:])
    return data.subset(np.concatenate(train_idx)), data.subset(np.concatenate(test_idx))
