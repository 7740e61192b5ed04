"""Benchmark output: delimited rows plus rendered runtime figures.

Rows are plain dicts keyed by BENCH_COLUMNS.  For every sweep point the
table carries one row per encoding mode and one derived "ratio" row whose
numeric cells are batched divided by per_value, computed from the table
itself so the CSV is self-consistent.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

BENCH_COLUMNS = (
    "sweep",
    "value",
    "mode",
    "total_runtime_s",
    "per_tree_runtime_s",
    "encryptions",
    "ciphertext_bytes",
    "auc_train",
    "auc_test",
    "ks_train",
    "ks_test",
)

_RATIO_COLUMNS = ("total_runtime_s", "per_tree_runtime_s", "encryptions", "ciphertext_bytes")


def add_ratio_rows(rows: list[dict]) -> list[dict]:
    """Return rows with a batched/per_value ratio row after each sweep point."""
    by_point: dict[tuple, dict[str, dict]] = {}
    for row in rows:
        by_point.setdefault((row["sweep"], row["value"]), {})[row["mode"]] = row
    out = []
    for (sweep, value), modes in by_point.items():
        out.extend(modes[m] for m in ("batched", "per_value") if m in modes)
        if "batched" in modes and "per_value" in modes:
            ratio = {"sweep": sweep, "value": value, "mode": "ratio"}
            for col in BENCH_COLUMNS[3:]:
                if col in _RATIO_COLUMNS and modes["per_value"][col]:
                    ratio[col] = modes["batched"][col] / modes["per_value"][col]
                else:
                    ratio[col] = ""
            out.append(ratio)
    return out


def write_bench_csv(rows: list[dict], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=BENCH_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)


def write_bench_jsonl(rows: list[dict], path: Path) -> None:
    with open(path, "w") as fh:
        for row in rows:
            fh.write(json.dumps({k: (None if v == "" else v) for k, v in row.items()}) + "\n")


def _runtime_figure(points, batched, per_value, ratios, ylabel, title, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    x = range(len(points))
    width = 0.38
    bars_b = ax.bar([i - width / 2 for i in x], batched, width, label="batched", color="#2c7fb8")
    ax.bar([i + width / 2 for i in x], per_value, width, label="per_value", color="#d95f0e")
    for bar, ratio in zip(bars_b, ratios):
        if ratio is not None:
            ax.annotate(f"{ratio:.2f}x", (bar.get_x() + bar.get_width() / 2, bar.get_height()),
                        ha="center", va="bottom", fontsize=8)
    ax.set_xticks(list(x))
    ax.set_xticklabels([str(p) for p in points])
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_figures(rows: list[dict], out_dir: Path, sweep: str) -> list[Path]:
    """Render runtime bar charts next to the CSV; returns the written paths."""
    points: list = []
    series: dict[str, dict] = {}
    for row in rows:
        if row["mode"] not in ("batched", "per_value", "ratio"):
            continue
        if row["value"] not in points:
            points.append(row["value"])
        series.setdefault(row["mode"], {})[row["value"]] = row
    if "batched" not in series or "per_value" not in series:
        return []

    written = []
    for col, label, stem in (
        ("total_runtime_s", "total training runtime (s)", "bench_total_runtime"),
        ("per_tree_runtime_s", "per-tree runtime (s)", "bench_per_tree_runtime"),
    ):
        batched = [series["batched"][p][col] for p in points]
        per_value = [series["per_value"][p][col] for p in points]
        ratios = [series.get("ratio", {}).get(p, {}).get(col) or None for p in points]
        path = out_dir / f"{stem}.png"
        _runtime_figure(points, batched, per_value, ratios, label,
                        f"{label} by {sweep}", path)
        written.append(path)
    return written
