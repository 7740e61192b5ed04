"""Run configuration: JSON file format, CLI overlays, validation.

A config file is a JSON object; every key is optional and falls back to a
default.  The resolved form (all defaults expanded) is written next to run
outputs so any run can be reproduced from its own artifacts.

{
  "dataset": {"csv": "path.csv", "label": "label"}        // or
  "dataset": {"synth": {"n": 2000, "d_ap": 5, "d_pp": 10}},
  "split": {"ap": ["col", ...], "pp": ["col", ...]},       // csv only
  "test_fraction": 0.25,
  "seed": 0,
  "mode": "batched" | "per_value",
  "key_bits": 256,
  "channel": "inproc" | "tcp:HOST:PORT",
  "overflow_policy": "abort" | "warn",
  "batch": {"r": 30, "pad": 2, "shift": [-10, -10], "alpha": 20, "alpha_max": 1e6},
  "xgb": {"trees": 10, "reg_lambda": 1.0, "gamma": 0.0, "n_buckets": 32,
          "max_depth": 5, "eta": 1.0, "base_score": 0.0}
}
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from vfxgb.batch_codec import BatchConfig
from vfxgb.federation.parties import MODES, TrainSettings
from vfxgb.paillier import ALLOWED_KEY_BITS
from vfxgb.xgb_core import TrainParams


class ConfigError(ValueError):
    """Unusable configuration; maps to CLI exit code 2."""


_DATASET_DEFAULT = {"synth": {"n": 2000, "d_ap": 5, "d_pp": 10}}

_BATCH_DEFAULTS = {"r": 30, "pad": 2, "shift": [-10.0, -10.0], "alpha": 20.0, "alpha_max": 1e6}

_XGB_DEFAULTS = {"trees": 10, "reg_lambda": 1.0, "gamma": 0.0, "n_buckets": 32,
                 "max_depth": 5, "eta": 1.0, "base_score": 0.0}

_TOP_KEYS = {"dataset", "split", "test_fraction", "seed", "mode", "key_bits",
             "channel", "overflow_policy", "batch", "xgb"}


@dataclass(frozen=True)
class ResolvedConfig:
    dataset: dict
    split: dict | None
    test_fraction: float
    seed: int
    mode: str
    key_bits: int
    channel: str
    overflow_policy: str
    batch: BatchConfig
    params: TrainParams

    def settings(self) -> TrainSettings:
        try:
            return TrainSettings(params=self.params, batch=self.batch, mode=self.mode,
                                 key_bits=self.key_bits, seed=self.seed,
                                 overflow_policy=self.overflow_policy)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def transport(self) -> tuple[str, tuple[str, int] | None]:
        """("inproc", None) or ("tcp", (host, port))."""
        if self.channel == "inproc":
            return "inproc", None
        parts = self.channel.split(":")
        host = parts[1]
        port = int(parts[2])
        return "tcp", (host, port)

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "split": self.split,
            "test_fraction": self.test_fraction,
            "seed": self.seed,
            "mode": self.mode,
            "key_bits": self.key_bits,
            "channel": self.channel,
            "overflow_policy": self.overflow_policy,
            "batch": {
                "r": self.batch.r,
                "pad": self.batch.pad,
                "shift": list(self.batch.shift),
                "alpha": self.batch.alpha,
                "alpha_max": self.batch.alpha_max,
            },
            "xgb": {
                "trees": self.params.trees,
                "reg_lambda": self.params.reg_lambda,
                "gamma": self.params.gamma,
                "n_buckets": self.params.n_buckets,
                "max_depth": self.params.max_depth,
                "eta": self.params.eta,
                "base_score": self.params.base_score,
            },
        }


def load_config_file(path) -> dict:
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON: {exc}") from None
    if not isinstance(payload, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return payload


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


def _merge_section(defaults: dict, given: object, name: str) -> dict:
    if given is None:
        return dict(defaults)
    _require(isinstance(given, dict), f"{name} must be an object")
    unknown = set(given) - set(defaults)
    _require(not unknown, f"unknown {name} keys: {sorted(unknown)}")
    merged = dict(defaults)
    merged.update(given)
    return merged


def resolve(raw: dict | None, overrides: dict | None = None) -> ResolvedConfig:
    """Validate a config dict (file content) with CLI overrides applied.

    ``overrides`` uses dotted keys for nested fields, e.g. "xgb.trees".
    """
    cfg = dict(raw or {})
    unknown = set(cfg) - _TOP_KEYS
    _require(not unknown, f"unknown config keys: {sorted(unknown)}")
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if "." in key:
            section, sub = key.split(".", 1)
            cfg.setdefault(section, {})
            _require(isinstance(cfg[section], dict), f"{section} must be an object")
            cfg[section] = dict(cfg[section])
            cfg[section][sub] = value
        else:
            cfg[key] = value

    dataset = cfg.get("dataset", _DATASET_DEFAULT)
    _require(isinstance(dataset, dict), "dataset must be an object")
    if "csv" in dataset:
        _require("synth" not in dataset, "dataset cannot be both csv and synth")
        _require(isinstance(dataset.get("csv"), str), "dataset.csv must be a path")
        dataset = {"csv": dataset["csv"], "label": dataset.get("label", "label")}
    elif "synth" in dataset:
        synth = _merge_section({"n": 2000, "d_ap": 5, "d_pp": 10}, dataset["synth"], "dataset.synth")
        for k in ("n", "d_ap", "d_pp"):
            _require(isinstance(synth[k], int) and synth[k] > 0, f"dataset.synth.{k} must be a positive integer")
        dataset = {"synth": synth}
    else:
        raise ConfigError("dataset needs either a 'csv' or a 'synth' entry")

    split = cfg.get("split")
    if split is not None:
        _require(isinstance(split, dict) and set(split) == {"ap", "pp"},
                 "split must be an object with 'ap' and 'pp' column lists")
        for side in ("ap", "pp"):
            _require(isinstance(split[side], list) and all(isinstance(c, str) for c in split[side]),
                     f"split.{side} must be a list of column names")
    if "csv" in dataset:
        _require(split is not None, "csv datasets need an explicit split plan")

    test_fraction = cfg.get("test_fraction", 0.25)
    _require(isinstance(test_fraction, (int, float)) and 0 < test_fraction < 1,
             "test_fraction must be in (0, 1)")
    seed = cfg.get("seed", 0)
    _require(isinstance(seed, int), "seed must be an integer")

    mode = str(cfg.get("mode", "batched")).replace("-", "_")
    _require(mode in MODES, f"mode must be one of {MODES}")

    key_bits = cfg.get("key_bits", 256)
    _require(key_bits in ALLOWED_KEY_BITS, f"key_bits must be one of {ALLOWED_KEY_BITS}")

    channel = cfg.get("channel", "inproc")
    if channel != "inproc":
        parts = str(channel).split(":")
        _require(len(parts) == 3 and parts[0] == "tcp" and parts[2].isdigit(),
                 "channel must be 'inproc' or 'tcp:HOST:PORT'")

    overflow_policy = cfg.get("overflow_policy", "abort")
    _require(overflow_policy in ("abort", "warn"), "overflow_policy must be 'abort' or 'warn'")

    batch_raw = _merge_section(_BATCH_DEFAULTS, cfg.get("batch"), "batch")
    shift = batch_raw["shift"]
    _require(isinstance(shift, (list, tuple)) and len(shift) == 2,
             "batch.shift must be a two-element list: offsets for g and h")
    try:
        batch = BatchConfig(d=2, r=int(batch_raw["r"]), shift=tuple(float(s) for s in shift),
                            alpha=float(batch_raw["alpha"]), alpha_max=float(batch_raw["alpha_max"]),
                            pad=int(batch_raw["pad"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad batch config: {exc}") from None

    xgb_raw = _merge_section(_XGB_DEFAULTS, cfg.get("xgb"), "xgb")
    try:
        params = TrainParams(trees=int(xgb_raw["trees"]), reg_lambda=float(xgb_raw["reg_lambda"]),
                             gamma=float(xgb_raw["gamma"]), n_buckets=int(xgb_raw["n_buckets"]),
                             max_depth=int(xgb_raw["max_depth"]), eta=float(xgb_raw["eta"]),
                             base_score=float(xgb_raw["base_score"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad xgb config: {exc}") from None

    resolved = ResolvedConfig(dataset=dataset, split=split, test_fraction=float(test_fraction),
                              seed=seed, mode=mode, key_bits=key_bits, channel=str(channel),
                              overflow_policy=overflow_policy, batch=batch, params=params)
    resolved.settings()  # surface cross-field problems (layout vs key size) now
    return resolved
