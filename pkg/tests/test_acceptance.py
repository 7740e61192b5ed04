"""Acceptance suite: one test per advertised guarantee.

Each test records a one-line PASS/FAIL/SKIP verdict that the conftest
reporter prints after the run.  The key-size sweep defaults to {128, 256}
and extends to {512, 1024} when VFXGB_FULL_SWEEP=1; the real-data check
runs only when VFXGB_CREDIT_CSV points at a local file.
"""

from __future__ import annotations

import functools
import math
import os
import random

import numpy as np
import pytest

import _criteria

from vfxgb import paillier
from vfxgb.batch_codec import (
    BatchConfig,
    SlotBits,
    aggregate_plain,
    decode_sum,
    encode,
    format_slots,
    no_overflow_sufficient,
    overflow_threshold,
    signed_decode_sum,
    signed_encode,
)
from vfxgb.data import VerticalSplitPlan, load_csv, synth_credit, train_test_split, vertical_split
from vfxgb.federation import FederatedSession, TrainSettings, run_training
from vfxgb.metrics import auc, ks
from vfxgb.xgb_core import Split, TrainParams, compute_gradients, train_centralized

# shift -10, truncation at 20, range 1e6 over 30 bits: the credit-style
# defaults used by the full-size parity and sweep checks
CREDIT_BATCH = BatchConfig(d=2, r=30, shift=(-10.0, -10.0), alpha=20.0, alpha_max=1e6)

# resolution 16384/2^16 = 0.25 and 16384/2^14 = 1.0: lossless for gradients
# snapped to the quarter-integer and integer grids respectively
QUARTER_GRID = BatchConfig(d=2, r=16, shift=(-1.0, -1.0), alpha=4.0, alpha_max=16384.0)
INTEGER_GRID = BatchConfig(d=2, r=14, shift=(-2.0, -2.0), alpha=4.0, alpha_max=16384.0)


def criterion(number: int, title: str):
    """Wrap a test so it reports a verdict line besides the usual assert."""

    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            try:
                out = fn(*args, **kwargs)
            except pytest.skip.Exception:
                _criteria.record(number, title, "SKIP")
                raise
            except BaseException:
                _criteria.record(number, title, "FAIL")
                raise
            _criteria.record(number, title, "PASS")
            return out

        return run

    return wrap


@criterion(1, "batched mode exactly halves encryptions, gradient bytes, and additions")
def test_ledger_halving_is_exact():
    shapes = [
        (150, 2, 3, TrainParams(trees=3, n_buckets=8, max_depth=3), 0),
        (80, 1, 4, TrainParams(trees=2, n_buckets=4, max_depth=2), 1),
        (200, 3, 2, TrainParams(trees=4, n_buckets=16, max_depth=4), 2),
        (64, 2, 2, TrainParams(trees=5, n_buckets=5, max_depth=1), 3),
    ]
    for n, d_ap, d_pp, params, seed in shapes:
        ds, plan = synth_credit(n, d_ap, d_pp, seed=seed)
        ap, pp = vertical_split(ds, plan)
        ledgers = {}
        for mode in ("batched", "per_value"):
            settings = TrainSettings(params=params, mode=mode, key_bits=128, seed=seed)
            ledgers[mode] = run_training(ap, pp, settings).ledger
        batched, per_value = ledgers["batched"], ledgers["per_value"]
        assert per_value.encryptions == 2 * batched.encryptions
        assert per_value.gradient_ciphertext_bytes == 2 * batched.gradient_ciphertext_bytes
        assert per_value.homomorphic_adds == 2 * batched.homomorphic_adds
        # one ciphertext per instance per tree in batched mode
        assert batched.encryptions == n * params.trees


@criterion(2, "decoded sums respect the quantization error bound")
def test_codec_error_bound_never_violated():
    rng = random.Random(20240817)
    for _ in range(100_000):
        r = rng.choice((8, 16, 30))
        alpha_max = 10.0 ** rng.uniform(-2.0, 6.0)
        n = rng.randint(1, 8)
        alpha = alpha_max / n * rng.uniform(0.05, 0.9)
        shift = (-alpha_max * rng.uniform(0.0, 2.0), -alpha_max * rng.uniform(0.0, 2.0))
        cfg = BatchConfig(d=2, r=r, shift=shift, alpha=alpha, alpha_max=alpha_max)
        assert no_overflow_sufficient(cfg, n).loose
        first_col = []
        second_col = []
        z_sum = 0
        for _ in range(n):
            pair = (shift[0] + rng.uniform(0.0, alpha), shift[1] + rng.uniform(0.0, alpha))
            first_col.append(pair[0])
            second_col.append(pair[1])
            z_sum += encode(cfg, pair).z
        decoded = decode_sum(cfg, z_sum, n)
        assert not decoded.overflow
        bound = (n / 2) * (alpha_max / 2**r)
        assert abs(decoded.values[0] - math.fsum(first_col)) <= bound
        assert abs(decoded.values[1] - math.fsum(second_col)) <= bound


@criterion(3, "overflow is flagged exactly when a slot sum saturates")
def test_overflow_predicates_are_exact():
    rng = random.Random(3033)
    for _ in range(10_000):
        r = rng.choice((8, 16, 30))
        # sufficient condition holds: summing n worst-case encodings never flags
        alpha_max = 10.0 ** rng.uniform(-2.0, 4.0)
        alpha = alpha_max * rng.uniform(0.01, 1.0)
        cfg = BatchConfig(d=2, r=r, shift=(-rng.uniform(0.0, 10.0), -rng.uniform(0.0, 10.0)),
                          alpha=alpha, alpha_max=alpha_max)
        n = max(1, int(3 * 2**r / (2**r * alpha / alpha_max + 0.5)))
        while n > 1 and not no_overflow_sufficient(cfg, n).strict:
            n -= 1
        assert no_overflow_sufficient(cfg, n).strict
        worst = encode(cfg, (cfg.shift[0] + alpha, cfg.shift[1] + alpha))
        decoded = decode_sum(cfg, worst.z * n, n)
        assert decoded.overflow_flags == (False, False)
        # adversarial slot fields at or past the threshold always flag
        pad = rng.choice((2, 3))
        adv = BatchConfig(d=2, r=r, shift=(-1.0, -1.0), alpha=1.0,
                          alpha_max=float(2**r), pad=pad)
        limit = overflow_threshold(adv)
        slot_bits = r + pad
        inject = [rng.random() < 0.5, rng.random() < 0.5]
        if not any(inject):
            inject[rng.randrange(2)] = True
        fields = [rng.randrange(limit, 1 << slot_bits) if flag else rng.randrange(limit)
                  for flag in inject]
        z = (fields[0] << slot_bits) | fields[1]
        flagged = decode_sum(adv, z, rng.randint(1, 8))
        assert flagged.overflow
        assert flagged.overflow_flags == tuple(inject)


@criterion(4, "codec walkthrough bit patterns are exact")
def test_walkthrough_bit_patterns():
    # shifted codec: {-1, -6} encode cleanly and the sum decodes to exactly -7
    shifted = BatchConfig(d=1, r=8, shift=(-6.0,), alpha=20.0, alpha_max=256.0)
    first = encode(shifted, [-1.0])
    second = encode(shifted, [-6.0])
    assert format_slots(shifted, first) == [SlotBits(pad="00", value="00000101")]
    assert format_slots(shifted, second) == [SlotBits(pad="00", value="00000000")]
    total = aggregate_plain(shifted, [first, second])
    assert format_slots(shifted, total) == [SlotBits(pad="00", value="00000101")]
    decoded = decode_sum(shifted, total, 2)
    assert decoded.values == (-7.0,)
    assert not decoded.overflow
    # signed two's-complement codec: the same pair flips the protection bits
    signed = BatchConfig(d=1, r=6, shift=(0.0,), alpha=20.0, alpha_max=64.0)
    minus_one = signed_encode(signed, [-1.0])
    assert format_slots(signed, minus_one, signed=True) == [SlotBits(pad="00", value="1111111")]
    pair = aggregate_plain(signed, [minus_one, signed_encode(signed, [-6.0])])
    assert format_slots(signed, pair, signed=True)[0].pad == "01"
    # four or more negative ones exhaust the pads and must flag
    assert not signed_decode_sum(signed, minus_one.z * 3, 3).overflow
    assert signed_decode_sum(signed, minus_one.z * 4, 4).overflow
    assert signed_decode_sum(signed, minus_one.z * 5, 5).overflow


def _grid_gradients(scale: float):
    def snapped(y, raw):
        g, h = compute_gradients(y, raw)
        return np.round(g * scale) / scale, np.round(h * scale) / scale

    return snapped


@criterion(5, "federated training equals the centralized oracle")
def test_federated_matches_centralized_oracle():
    cases = [(QUARTER_GRID, _grid_gradients(4.0), 5), (INTEGER_GRID, _grid_gradients(1.0), 9)]
    for cfg, gradient_fn, seed in cases:
        ds, plan = synth_credit(180, 2, 3, seed=seed)
        ap, pp = vertical_split(ds, plan)
        settings = TrainSettings(params=TrainParams(trees=3, n_buckets=8, max_depth=3),
                                 batch=cfg, key_bits=128, seed=seed)
        with FederatedSession(ap, pp, settings) as session:
            result = session.train(gradient_fn=gradient_fn)
            fed_pred = session.predict_raw(result.model, ap.feature_map(), pp.X)
        columns = ap.columns + pp.columns
        X_all = np.hstack([ap.X, pp.X])
        oracle, oracle_raw = train_centralized(X_all, columns, ds.y.astype(np.float64),
                                               settings.params, gradient_fn=gradient_fn)
        assert np.array_equal(result.train_scores, oracle_raw)
        assert len(result.model.trees) == len(oracle.trees)
        for fed_tree, local_tree in zip(result.model.trees, oracle.trees):
            assert len(fed_tree.nodes) == len(local_tree.nodes)
            for fed_node, local_node in zip(fed_tree.nodes, local_tree.nodes):
                assert type(fed_node) is type(local_node)
                if isinstance(fed_node, Split):
                    assert fed_node.threshold_index == local_node.threshold_index
                    assert fed_node.left == local_node.left
                    assert fed_node.right == local_node.right
                else:
                    assert abs(fed_node.weight - local_node.weight) <= 1e-12
        oracle_pred = oracle.predict_raw({c: X_all[:, i] for i, c in enumerate(columns)})
        assert np.array_equal(fed_pred, oracle_pred)


@criterion(6, "batched and per-value modes score the same held-out data")
def test_accuracy_parity_full_size():
    ds, plan = synth_credit(20_000, 5, 10, seed=11)
    train, test = train_test_split(ds, test_fraction=0.25, seed=11)
    ap, pp = vertical_split(train, plan)
    ap_test, pp_test = vertical_split(test, plan)
    params = TrainParams(trees=50, reg_lambda=1.0, n_buckets=32, max_depth=3)
    quality = {}
    for mode in ("batched", "per_value"):
        settings = TrainSettings(params=params, batch=CREDIT_BATCH, mode=mode,
                                 key_bits=256, seed=11)
        with FederatedSession(ap, pp, settings) as session:
            result = session.train()
            raw = session.predict_raw(result.model, ap_test.feature_map(), pp_test.X)
        quality[mode] = (auc(test.y, raw), ks(test.y, raw))
    auc_b, ks_b = quality["batched"]
    auc_v, ks_v = quality["per_value"]
    assert auc_b > 0.6 and auc_v > 0.6
    assert abs(auc_b - auc_v) <= 0.005
    assert abs(ks_b - ks_v) <= 0.01


@criterion(7, "per-tree runtime ratio never worsens as keys grow")
def test_per_tree_runtime_ratio_trend():
    full = os.environ.get("VFXGB_FULL_SWEEP", "0") not in ("", "0")
    key_sizes = (128, 256, 512, 1024) if full else (128, 256)
    ds, plan = synth_credit(5000, 5, 10, seed=3)
    ap, pp = vertical_split(ds, plan)
    params = TrainParams(trees=10, n_buckets=32, max_depth=5)
    ratios = []
    for bits in key_sizes:
        best = {"batched": math.inf, "per_value": math.inf}
        # two interleaved repetitions per point; min absorbs scheduler noise
        for _ in range(2):
            for mode in ("batched", "per_value"):
                settings = TrainSettings(params=params, batch=CREDIT_BATCH, mode=mode,
                                         key_bits=bits, seed=3)
                ledger = run_training(ap, pp, settings).ledger
                assert ledger.per_tree_runtime_s > 0
                best[mode] = min(best[mode], ledger.per_tree_runtime_s)
        ratios.append(best["batched"] / best["per_value"])
    # past 256 bits every phase already runs at ~0.5x, so adjacent ratio
    # gaps shrink to the scheduler noise floor; allow that much in the
    # extended sweep (the operation counts are checked exactly elsewhere)
    tolerance = 0.01 if full else 0.0
    for earlier, later in zip(ratios, ratios[1:]):
        assert later <= earlier + tolerance, f"ratio rose along {key_sizes}: {ratios}"
    if key_sizes[-1] == 1024:
        assert ratios[-1] <= 0.75


@criterion(8, "homomorphic addition decrypts to the plaintext sum")
def test_homomorphic_addition_oracle():
    public, private = paillier.keygen(128, rng_seed=88)
    rng = random.Random(88)
    for _ in range(10_000):
        x = rng.randrange(public.n)
        y = rng.randrange(public.n)
        total = paillier.add_ciphertexts(public,
                                         paillier.encrypt(public, x, rng),
                                         paillier.encrypt(public, y, rng))
        assert paillier.decrypt(private, total) == (x + y) % public.n


@criterion(9, "real credit data reaches the reference test AUC")
def test_real_credit_data_auc():
    path = os.environ.get("VFXGB_CREDIT_CSV", "")
    if not path:
        pytest.skip("set VFXGB_CREDIT_CSV to run the real-data check")
    if not os.path.exists(path):
        pytest.skip(f"credit csv not found: {path}")
    label = os.environ.get("VFXGB_CREDIT_LABEL", "label")
    ds = load_csv(path, label_column=label)
    plan = VerticalSplitPlan(ap_columns=ds.columns[:5], pp_columns=ds.columns[5:])
    train, test = train_test_split(ds, test_fraction=0.25, seed=7)
    ap, pp = vertical_split(train, plan)
    ap_test, pp_test = vertical_split(test, plan)
    params = TrainParams(trees=50, reg_lambda=1.0, n_buckets=32, max_depth=3, eta=0.3)
    for mode in ("batched", "per_value"):
        settings = TrainSettings(params=params, batch=CREDIT_BATCH, mode=mode,
                                 key_bits=256, seed=7)
        with FederatedSession(ap, pp, settings) as session:
            result = session.train()
            raw = session.predict_raw(result.model, ap_test.feature_map(), pp_test.X)
        assert abs(auc(test.y, raw) - 0.788) <= 0.02, f"{mode} drifted from the reference"
