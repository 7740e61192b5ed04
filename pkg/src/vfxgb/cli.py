"""Command line entry points.

Subcommands:
    train       one federated training run; writes model/metrics/ledger JSON
    bench       sweep key size, sample count or tree count over both modes
    codec-demo  bit-level walkthrough of the batch codec and the signed baseline
    synth       write a synthetic vertically-split dataset to CSV

Exit codes: 0 success, 2 bad config or data, 3 overflow abort, 4 protocol
or I/O failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from vfxgb import batch_codec, report
from vfxgb.config import ConfigError, ResolvedConfig, load_config_file, resolve
from vfxgb.data import DataError, load_csv, synth_credit, train_test_split, vertical_split, write_csv
from vfxgb.data import VerticalSplitPlan
from vfxgb.federation.channel import ProtocolError
from vfxgb.federation.messages import WireError
from vfxgb.federation.parties import FederatedSession, OverflowAbortError
from vfxgb.metrics import auc, ks, log_loss
from vfxgb.xgb_core import sigmoid

log = logging.getLogger("vfxgb.cli")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_OVERFLOW = 3
EXIT_PROTOCOL = 4


def _load_dataset(cfg: ResolvedConfig):
    if "csv" in cfg.dataset:
        ds = load_csv(cfg.dataset["csv"], cfg.dataset["label"])
        plan = VerticalSplitPlan(ap_columns=tuple(cfg.split["ap"]),
                                 pp_columns=tuple(cfg.split["pp"]))
    else:
        synth = cfg.dataset["synth"]
        ds, plan = synth_credit(synth["n"], synth["d_ap"], synth["d_pp"], seed=cfg.seed)
        if cfg.split is not None:
            plan = VerticalSplitPlan(ap_columns=tuple(cfg.split["ap"]),
                                     pp_columns=tuple(cfg.split["pp"]))
    return ds, plan


def _train_once(cfg: ResolvedConfig) -> dict:
    """Run one full train/evaluate cycle and return all artifacts."""
    ds, plan = _load_dataset(cfg)
    train_ds, test_ds = train_test_split(ds, cfg.test_fraction, cfg.seed)
    ap_train, pp_train = vertical_split(train_ds, plan)
    ap_test, pp_test = vertical_split(test_ds, plan)

    transport, address = cfg.transport()
    with FederatedSession(ap_train, pp_train, cfg.settings(),
                          transport=transport, tcp_address=address) as session:
        result = session.train()
        test_raw = session.predict_raw(result.model, ap_test.feature_map(), pp_test.X)

    train_p = sigmoid(result.train_scores)
    test_p = sigmoid(test_raw)
    y_train = train_ds.y.astype(np.float64)
    y_test = test_ds.y.astype(np.float64)
    metrics = {
        "auc_train": auc(y_train, train_p),
        "auc_test": auc(y_test, test_p),
        "ks_train": ks(y_train, train_p),
        "ks_test": ks(y_test, test_p),
        "log_loss_train": log_loss(y_train, train_p),
        "log_loss_test": log_loss(y_test, test_p),
    }
    return {"model": result.model, "ledger": result.ledger, "metrics": metrics}


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_train(args) -> int:
    cfg = resolve(load_config_file(args.config) if args.config else None, _overrides(args))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    run = _train_once(cfg)

    run["model"].save(out / "model.json")
    _write_json(out / "metrics.json", run["metrics"])
    _write_json(out / "ledger.json", run["ledger"].to_dict())
    _write_json(out / "config.resolved.json", cfg.to_dict())

    ledger = run["ledger"]
    summary = {
        "out": str(out),
        "mode": cfg.mode,
        "key_bits": cfg.key_bits,
        "trees": cfg.params.trees,
        "encryptions": ledger.encryptions,
        "ciphertext_bytes_sent": ledger.ciphertext_bytes_sent,
        "total_runtime_s": round(ledger.total_runtime_s, 3),
        **{k: round(v, 6) for k, v in run["metrics"].items()},
    }
    if args.json:
        print(json.dumps(summary))
    else:
        for key, value in summary.items():
            print(f"{key}: {value}")
    return EXIT_OK


_SWEEPS = ("key-bits", "samples", "trees")


def _sweep_config(base: dict, overrides: dict, sweep: str, value: int, mode: str) -> ResolvedConfig:
    merged = dict(overrides, mode=mode)
    if sweep == "key-bits":
        merged["key_bits"] = value
    elif sweep == "trees":
        merged["xgb.trees"] = value
    elif sweep == "samples":
        cfg0 = resolve(base, overrides)
        if "synth" not in cfg0.dataset:
            raise ConfigError("a samples sweep needs a synth dataset")
        merged["dataset"] = {"synth": dict(cfg0.dataset["synth"], n=value)}
    return resolve(base, merged)


def _bench_point(base: dict, overrides: dict, sweep: str, value: int) -> list[dict]:
    """Both modes at one sweep point; module level so it can run in a pool."""
    rows = []
    for mode in ("batched", "per_value"):
        cfg = _sweep_config(base, overrides, sweep, value, mode)
        run = _train_once(cfg)
        ledger = run["ledger"]
        rows.append({
            "sweep": sweep,
            "value": value,
            "mode": mode,
            "total_runtime_s": ledger.total_runtime_s,
            "per_tree_runtime_s": ledger.per_tree_runtime_s,
            "encryptions": ledger.encryptions,
            "ciphertext_bytes": ledger.ciphertext_bytes_sent,
            "auc_train": run["metrics"]["auc_train"],
            "auc_test": run["metrics"]["auc_test"],
            "ks_train": run["metrics"]["ks_train"],
            "ks_test": run["metrics"]["ks_test"],
        })
    return rows


def cmd_bench(args) -> int:
    base = load_config_file(args.config) if args.config else {}
    overrides = _overrides(args)
    try:
        values = [int(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--values must be comma-separated integers, got {args.values!r}") from None
    if not values:
        raise ConfigError("--values is empty")
    for value in values:
        for mode in ("batched", "per_value"):
            _sweep_config(base, overrides, args.sweep, value, mode)  # fail fast

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    warmup_rows: list[dict] = []
    if not args.no_warmup:
        log.info("warm-up run (excluded from results unless --include-warmup)")
        warm_base = dict(base, dataset={"synth": {"n": 200, "d_ap": 2, "d_pp": 2}},
                         split=None, xgb=dict(base.get("xgb") or {}, trees=2), key_bits=128)
        warm_overrides = dict(overrides)
        warm_overrides["key_bits"] = None
        warm_overrides["xgb.trees"] = None
        warmup_rows = _bench_point(warm_base, warm_overrides, "warmup", 0)

    rows: list[dict] = []
    started = time.perf_counter()
    if args.parallel > 1:
        with ProcessPoolExecutor(max_workers=args.parallel) as pool:
            futures = [pool.submit(_bench_point, base, overrides, args.sweep, v) for v in values]
            for future in futures:
                rows.extend(future.result())
    else:
        for value in values:
            log.info("bench point %s=%s", args.sweep, value)
            rows.extend(_bench_point(base, overrides, args.sweep, value))
    elapsed = time.perf_counter() - started

    measured = report.add_ratio_rows(rows)
    rows = warmup_rows + measured if args.include_warmup else measured
    csv_path = out / "bench.csv"
    report.write_bench_csv(rows, csv_path)
    _write_json(out / "bench.config.resolved.json",
                resolve(base, overrides).to_dict() | {"sweep": args.sweep, "values": values})
    written = [csv_path]
    if args.json:
        jsonl_path = out / "bench.jsonl"
        report.write_bench_jsonl(rows, jsonl_path)
        written.append(jsonl_path)
    if not args.no_figures:
        written.extend(report.render_figures(measured, out, args.sweep))

    if args.json:
        print(json.dumps({"out": str(out), "files": [str(p) for p in written],
                          "points": len(values), "elapsed_s": round(elapsed, 3)}))
    else:
        print(f"bench finished in {elapsed:.1f}s; wrote:")
        for path in written:
            print(f"  {path}")
    return EXIT_OK


def _demo_shifted() -> dict:
    cfg = batch_codec.BatchConfig(d=1, r=8, shift=(-6.0,), alpha=20.0, alpha_max=256.0)
    first = batch_codec.encode(cfg, [-1.0])
    second = batch_codec.encode(cfg, [-6.0])
    total = batch_codec.aggregate_plain(cfg, [first, second])
    decoded = batch_codec.decode_sum(cfg, total, n_terms=2)
    return {
        "codec": "shifted",
        "config": {"r": cfg.r, "pad": cfg.pad, "shift": cfg.shift[0],
                   "alpha": cfg.alpha, "alpha_max": cfg.alpha_max,
                   "resolution": cfg.resolution},
        "encodings": [
            {"value": -1.0, "slots": [tuple(s) for s in batch_codec.format_slots(cfg, first)]},
            {"value": -6.0, "slots": [tuple(s) for s in batch_codec.format_slots(cfg, second)]},
        ],
        "sum": {"slots": [tuple(s) for s in batch_codec.format_slots(cfg, total)],
                "decoded": decoded.values[0], "overflow": decoded.overflow},
    }


def _demo_signed() -> dict:
    cfg = batch_codec.BatchConfig(d=1, r=6, shift=(0.0,), alpha=20.0, alpha_max=64.0)
    steps = []
    total = 0
    for n in range(1, 6):
        total += batch_codec.signed_encode(cfg, [-1.0]).z
        decoded = batch_codec.signed_decode_sum(cfg, total, n_terms=n)
        slots = batch_codec.format_slots(cfg, total, signed=True)
        steps.append({"n_terms": n, "pad": slots[0].pad, "value_bits": slots[0].value,
                      "decoded": decoded.values[0], "flagged": decoded.overflow})
    return {
        "codec": "signed",
        "config": {"r": cfg.r, "pad": cfg.pad, "alpha": cfg.alpha,
                   "alpha_max": cfg.alpha_max, "resolution": cfg.resolution},
        "note": "summing -1 repeatedly walks the pad bits from 00 towards 11; "
                "the all-ones pad is indistinguishable from a real overflow",
        "steps": steps,
    }


def cmd_codec_demo(args) -> int:
    shifted = _demo_shifted()
    signed = _demo_signed()
    if args.json:
        print(json.dumps({"shifted": shifted, "signed": signed}, indent=2))
        return EXIT_OK

    print("shifted codec (gradients moved into [0, alpha] before quantizing)")
    c = shifted["config"]
    print(f"  r={c['r']} pad={c['pad']} shift={c['shift']} alpha={c['alpha']} "
          f"alpha_max={c['alpha_max']} resolution={c['resolution']}")
    for enc in shifted["encodings"]:
        pad, value = enc["slots"][0]
        print(f"  encode({enc['value']:+.1f}) -> pad {pad} | value {value}")
    pad, value = shifted["sum"]["slots"][0]
    print(f"  sum              -> pad {pad} | value {value} "
          f"decodes to {shifted['sum']['decoded']} (overflow={shifted['sum']['overflow']})")
    print()
    print("signed two's-complement baseline (no shift)")
    print(f"  {signed['note']}")
    for step in signed["steps"]:
        flag = "  <- flagged" if step["flagged"] else ""
        print(f"  after {step['n_terms']} x encode(-1.0): pad {step['pad']} | "
              f"value {step['value_bits']} decodes to {step['decoded']}{flag}")
    return EXIT_OK


def cmd_synth(args) -> int:
    ds, plan = synth_credit(args.n, args.d_ap, args.d_pp, seed=args.seed)
    out = Path(args.out)
    if out.parent != Path("."):
        out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(ds, out)
    info = {"path": str(out), "rows": ds.n, "label": "label",
            "ap_columns": list(plan.ap_columns), "pp_columns": list(plan.pp_columns)}
    if args.json:
        print(json.dumps(info))
    else:
        print(f"wrote {ds.n} rows to {out}")
        print(f"active party columns:  {', '.join(plan.ap_columns)}")
        print(f"passive party columns: {', '.join(plan.pp_columns)}")
    return EXIT_OK


def _overrides(args) -> dict:
    return {
        "mode": getattr(args, "mode", None),
        "key_bits": getattr(args, "key_bits", None),
        "xgb.trees": getattr(args, "trees", None),
        "seed": getattr(args, "seed", None),
        "channel": getattr(args, "channel", None),
    }


def _add_run_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON config file")
    sub.add_argument("--mode", choices=("batched", "per_value"), help="gradient encoding mode")
    sub.add_argument("--key-bits", dest="key_bits", type=int, help="Paillier modulus size")
    sub.add_argument("--trees", type=int, help="boosting rounds")
    sub.add_argument("--seed", type=int, help="master seed")
    sub.add_argument("--channel", help="'inproc' or 'tcp:HOST:PORT'")
    sub.add_argument("--json", action="store_true", help="machine-readable stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vfxgb",
                                     description="Vertically federated gradient boosting "
                                                 "over Paillier-encrypted gradients.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    subs = parser.add_subparsers(dest="command", required=True)

    train = subs.add_parser("train", help="run one federated training job")
    _add_run_flags(train)
    train.add_argument("--out", default="vfxgb-out", help="output directory")
    train.set_defaults(func=cmd_train)

    bench = subs.add_parser("bench", help="compare batched vs per-value over a sweep")
    _add_run_flags(bench)
    bench.add_argument("--sweep", choices=_SWEEPS, default="key-bits")
    bench.add_argument("--values", default="128,256", help="comma-separated sweep points")
    bench.add_argument("--out", default="vfxgb-bench", help="output directory")
    bench.add_argument("--no-figures", action="store_true", help="skip the PNG charts")
    bench.add_argument("--no-warmup", action="store_true", help="skip the untimed warm-up run")
    bench.add_argument("--include-warmup", action="store_true",
                       help="keep the warm-up measurements in the output rows")
    bench.add_argument("--parallel", type=int, default=1, metavar="N",
                       help="run sweep points in N worker processes")
    bench.set_defaults(func=cmd_bench)

    demo = subs.add_parser("codec-demo", help="show the codec bit patterns on tiny worked examples")
    demo.add_argument("--json", action="store_true", help="machine-readable stdout")
    demo.set_defaults(func=cmd_codec_demo)

    synth = subs.add_parser("synth", help="write a synthetic dataset to CSV")
    synth.add_argument("--n", type=int, default=2000)
    synth.add_argument("--d-ap", dest="d_ap", type=int, default=5)
    synth.add_argument("--d-pp", dest="d_pp", type=int, default=10)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--out", required=True, help="CSV path")
    synth.add_argument("--json", action="store_true", help="machine-readable stdout")
    synth.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OverflowAbortError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OVERFLOW
    except (ProtocolError, WireError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL


if __name__ == "__main__":
    sys.exit(main())
