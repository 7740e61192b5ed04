"""CSV loading, split plans, train/test splitting, synthetic data."""

import numpy as np
import pytest

from vfxgb.data import (
    DataError,
    Dataset,
    VerticalSplitPlan,
    load_csv,
    synth_credit,
    train_test_split,
    vertical_split,
    write_csv,
)
from vfxgb.metrics import auc
from vfxgb.xgb_core import TrainParams, train_centralized


def test_csv_roundtrip_is_bit_exact(tmp_path):
    ds, _ = synth_credit(200, 3, 2, seed=9)
    path = tmp_path / "data.csv"
    write_csv(ds, path)
    back = load_csv(path, "label")
    assert back.columns == ds.columns
    assert np.array_equal(back.X, ds.X)
    assert np.array_equal(back.y, ds.y)


def _write(tmp_path, text):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    return path


def test_csv_rejects_non_numeric_cell(tmp_path):
    path = _write(tmp_path, "a,label\n1.5,0\noops,1\n")
    with pytest.raises(DataError, match=r"bad\.csv:3: column 'a': non-numeric cell 'oops'"):
        load_csv(path, "label")


def test_csv_rejects_bad_label(tmp_path):
    path = _write(tmp_path, "a,label\n1.5,2\n")
    with pytest.raises(DataError, match="label must be 0 or 1"):
        load_csv(path, "label")


def test_csv_rejects_non_finite(tmp_path):
    path = _write(tmp_path, "a,label\ninf,0\n")
    with pytest.raises(DataError, match="non-finite cell"):
        load_csv(path, "label")


def test_csv_rejects_ragged_row(tmp_path):
    path = _write(tmp_path, "a,b,label\n1,2,0\n1,0\n")
    with pytest.raises(DataError, match="expected 3 cells, got 2"):
        load_csv(path, "label")


def test_csv_requires_label_column(tmp_path):
    path = _write(tmp_path, "a,b\n1,2\n")
    with pytest.raises(DataError, match="no column named 'label'"):
        load_csv(path, "label")


def test_csv_rejects_empty_variants(tmp_path):
    with pytest.raises(DataError, match="empty file"):
        load_csv(_write(tmp_path, ""), "label")
    with pytest.raises(DataError, match="no data rows"):
        load_csv(_write(tmp_path, "a,label\n"), "label")


def test_vertical_split_views():
    ds, plan = synth_credit(50, 2, 3, seed=0)
    ap, pp = vertical_split(ds, plan)
    assert ap.party == "active" and pp.party == "passive"
    assert ap.columns == plan.ap_columns and pp.columns == plan.pp_columns
    assert ap.y is not None and pp.y is None
    assert ap.X.shape == (50, 2) and pp.X.shape == (50, 3)
    assert np.array_equal(ap.ids, pp.ids)
    # columns land in plan order
    assert np.array_equal(ap.X[:, 1], ds.column("a1"))
    assert np.array_equal(pp.X[:, 0], ds.column("p0"))


def test_vertical_split_plan_errors():
    ds, _ = synth_credit(10, 2, 2, seed=1)
    with pytest.raises(DataError, match="both parties"):
        vertical_split(ds, VerticalSplitPlan(("a0", "a1"), ("a1", "p0", "p1")))
    with pytest.raises(DataError, match="unknown columns"):
        vertical_split(ds, VerticalSplitPlan(("a0", "a1"), ("p0", "nope")))
    with pytest.raises(DataError, match="unassigned"):
        vertical_split(ds, VerticalSplitPlan(("a0",), ("p0", "p1")))


def test_train_test_split_sizes_and_partition():
    ds, _ = synth_credit(100, 2, 2, seed=2)
    train, test = train_test_split(ds, 0.25, seed=3)
    assert test.n == 25 and train.n == 75
    assert set(train.ids) | set(test.ids) == set(range(100))
    assert set(train.ids) & set(test.ids) == set()


def test_train_test_split_rounds_half_to_even():
    ds, _ = synth_credit(30, 1, 1, seed=4)
    _, test = train_test_split(ds, 0.25, seed=0)  # 7.5 rounds to 8
    assert test.n == 8


def test_train_test_split_deterministic_per_seed():
    ds, _ = synth_credit(60, 2, 2, seed=5)
    a1, b1 = train_test_split(ds, 0.3, seed=11)
    a2, b2 = train_test_split(ds, 0.3, seed=11)
    a3, _ = train_test_split(ds, 0.3, seed=12)
    assert np.array_equal(a1.ids, a2.ids) and np.array_equal(b1.ids, b2.ids)
    assert not np.array_equal(a1.ids, a3.ids)


def test_train_test_split_rejects_empty_side():
    ds, _ = synth_credit(10, 1, 1, seed=6)
    with pytest.raises(DataError):
        train_test_split(ds, 0.01, seed=0)
    with pytest.raises(DataError):
        train_test_split(ds, 1.5, seed=0)


def test_synth_deterministic_and_exportable(tmp_path):
    a, plan_a = synth_credit(80, 2, 3, seed=7)
    b, plan_b = synth_credit(80, 2, 3, seed=7)
    c, _ = synth_credit(80, 2, 3, seed=8)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)
    assert plan_a == plan_b
    assert not np.array_equal(a.X, c.X)
    write_csv(a, tmp_path / "a.csv")
    write_csv(b, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_synth_column_naming():
    ds, plan = synth_credit(10, 2, 3, seed=0)
    assert plan.ap_columns == ("a0", "a1")
    assert plan.pp_columns == ("p0", "p1", "p2")
    assert ds.columns == plan.ap_columns + plan.pp_columns
    assert set(np.unique(ds.y)) <= {0, 1}


def test_synth_is_learnable():
    ds, _ = synth_credit(5000, 3, 3, seed=13)
    train, test = train_test_split(ds, 0.25, seed=13)
    params = TrainParams(trees=5, n_buckets=16, max_depth=3)
    model, _ = train_centralized(train.X, train.columns, train.y.astype(np.float64), params)
    p = model.predict_proba(test.feature_map())
    assert auc(test.y.astype(float), p) > 0.7


def test_shuffled_labels_are_not_learnable():
    ds, _ = synth_credit(3000, 3, 3, seed=14)
    rng = np.random.default_rng(0)
    shuffled = Dataset(columns=ds.columns, X=ds.X, y=ds.y[rng.permutation(ds.n)], ids=ds.ids)
    train, test = train_test_split(shuffled, 0.25, seed=14)
    params = TrainParams(trees=5, n_buckets=16, max_depth=3)
    model, _ = train_centralized(train.X, train.columns, train.y.astype(np.float64), params)
    p = model.predict_proba(test.feature_map())
    assert 0.4 < auc(test.y.astype(float), p) < 0.6
