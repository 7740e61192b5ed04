"""Dataset loading, vertical partitioning and synthetic data.

A Dataset is a dense float matrix with named columns, integer row ids and a
0/1 label vector.  Vertical splitting hands disjoint column sets to the two
parties; rows stay aligned by position, which is how the protocol refers to
instances (bitmaps over row order).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np


class DataError(ValueError):
    """Malformed input data (non-numeric cells, bad labels, bad plans)."""


@dataclass(frozen=True)
class Dataset:
    columns: tuple[str, ...]
    X: np.ndarray
    y: np.ndarray
    ids: np.ndarray

    def __post_init__(self) -> None:
        if self.X.ndim != 2 or self.X.shape[1] != len(self.columns):
            raise DataError("feature matrix does not match column names")
        if self.y.shape != (self.X.shape[0],) or self.ids.shape != (self.X.shape[0],):
            raise DataError("labels/ids do not match the feature matrix")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.X[:, self.columns.index(name)]

    def take(self, idx: np.ndarray) -> "Dataset":
        return Dataset(columns=self.columns, X=self.X[idx], y=self.y[idx], ids=self.ids[idx])

    def feature_map(self) -> dict[str, np.ndarray]:
        return {name: self.X[:, i] for i, name in enumerate(self.columns)}


@dataclass(frozen=True)
class VerticalSplitPlan:
    """Disjoint column assignment; labels always stay with the active party."""

    ap_columns: tuple[str, ...]
    pp_columns: tuple[str, ...]


@dataclass(frozen=True)
class PartyView:
    """One party's slice of a dataset.  Only the active party sees labels."""

    party: str
    columns: tuple[str, ...]
    X: np.ndarray
    ids: np.ndarray
    y: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def feature_map(self) -> dict[str, np.ndarray]:
        return {name: self.X[:, i] for i, name in enumerate(self.columns)}


def load_csv(path, label_column: str) -> Dataset:
    """Read a numeric CSV with a header row.

    Every non-label cell must parse as a finite float and labels must be 0
    or 1; violations raise DataError naming the offending row and column.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if label_column not in header:
            raise DataError(f"{path}: no column named {label_column!r}")
        label_idx = header.index(label_column)
        feat_names = tuple(c for i, c in enumerate(header) if i != label_idx)
        rows = []
        labels = []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(f"{path}:{line_no}: expected {len(header)} cells, got {len(row)}")
            feats = []
            for col_name, cell in zip(header, row):
                try:
                    value = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}:{line_no}: column {col_name!r}: non-numeric cell {cell!r}"
                    ) from None
                if not math.isfinite(value):
                    raise DataError(f"{path}:{line_no}: column {col_name!r}: non-finite cell {cell!r}")
                if col_name == label_column:
                    if value not in (0.0, 1.0):
                        raise DataError(f"{path}:{line_no}: label must be 0 or 1, got {cell!r}")
                    labels.append(int(value))
                else:
                    feats.append(value)
            rows.append(feats)
    if not rows:
        raise DataError(f"{path}: no data rows")
    X = np.asarray(rows, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int8)
    return Dataset(columns=feat_names, X=X, y=y, ids=np.arange(len(rows), dtype=np.int64))


def write_csv(ds: Dataset, path, label_column: str = "label") -> None:
    """Write a dataset so that load_csv round-trips it bit-exactly."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(ds.columns) + [label_column])
        for i in range(ds.n):
            writer.writerow([repr(float(v)) for v in ds.X[i]] + [int(ds.y[i])])


def vertical_split(ds: Dataset, plan: VerticalSplitPlan) -> tuple[PartyView, PartyView]:
    """Slice a dataset into active and passive party views per the plan."""
    seen = set(plan.ap_columns) | set(plan.pp_columns)
    if len(plan.ap_columns) + len(plan.pp_columns) != len(seen):
        raise DataError("split plan assigns a column to both parties")
    missing = [c for c in plan.ap_columns + plan.pp_columns if c not in ds.columns]
    if missing:
        raise DataError(f"split plan names unknown columns: {missing}")
    if seen != set(ds.columns):
        unassigned = [c for c in ds.columns if c not in seen]
        raise DataError(f"split plan leaves columns unassigned: {unassigned}")
    ap_idx = [ds.columns.index(c) for c in plan.ap_columns]
    pp_idx = [ds.columns.index(c) for c in plan.pp_columns]
    ap = PartyView(party="active", columns=plan.ap_columns, X=ds.X[:, ap_idx], ids=ds.ids, y=ds.y)
    pp = PartyView(party="passive", columns=plan.pp_columns, X=ds.X[:, pp_idx], ids=ds.ids)
    return ap, pp


def train_test_split(ds: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Deterministic shuffled split; test gets round(n * test_fraction) rows."""
    if not 0.0 < test_fraction < 1.0:
        raise DataError(f"test_fraction must be in (0, 1), got {test_fraction}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(ds.n)
    n_test = round(ds.n * test_fraction)
    if n_test == 0 or n_test == ds.n:
        raise DataError("test_fraction leaves one side empty")
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    return ds.take(train_idx), ds.take(test_idx)


def synth_credit(n: int, d_ap: int, d_pp: int, seed: int) -> tuple[Dataset, VerticalSplitPlan]:
    """Synthetic credit-default-style data with signal on both parties.

    Labels are Bernoulli draws from a logistic model over a random linear
    combination of all features, with weights bounded away from zero so
    every column (active and passive alike) carries usable split gain.
    """
    if n < 2 or d_ap < 1 or d_pp < 1:
        raise DataError("need n >= 2 and at least one feature per party")
    rng = np.random.default_rng(seed)
    d = d_ap + d_pp
    X = rng.standard_normal((n, d))
    w = rng.uniform(0.5, 1.5, size=d) * rng.choice((-1.0, 1.0), size=d)
    logit = X @ w * (2.0 / math.sqrt(d)) + rng.normal(0.0, 0.25, size=n)
    prob = 1.0 / (1.0 + np.exp(-logit))
    y = (rng.random(n) < prob).astype(np.int8)
    ap_cols = tuple(f"a{i}" for i in range(d_ap))
    pp_cols = tuple(f"p{i}" for i in range(d_pp))
    ds = Dataset(columns=ap_cols + pp_cols, X=X, y=y, ids=np.arange(n, dtype=np.int64))
    return ds, VerticalSplitPlan(ap_columns=ap_cols, pp_columns=pp_cols)
