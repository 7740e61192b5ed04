"""Gradient-boosted tree core shared by centralized and federated training.

The builder grows one tree at a time, breadth first.  At every node it asks
a SplitFinder for the best candidate; the finder is the seam between plain
single-machine training (LocalSplitFinder over all features) and the
two-party protocol (the active party's finder, which folds in remote
histograms).  Keeping the node loop, histogram prefix scan and tie-breaking
in one place is what makes the federated run reproduce the centralized one
decision for decision.

Candidate order is parties first (active before passive), then feature
order, then ascending threshold index; on equal gain the earliest candidate
wins.  A node splits only when the best gain is strictly positive.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Mapping, Protocol, Sequence

import numpy as np

GradientFn = Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]

MODEL_FORMAT = 1


@dataclass(frozen=True)
class GradientPair:
    """First and second order gradient of the loss for one instance or sum."""

    g: float
    h: float


@dataclass(frozen=True)
class TrainParams:
    trees: int = 10
    reg_lambda: float = 1.0
    gamma: float = 0.0
    n_buckets: int = 32
    max_depth: int = 5
    eta: float = 1.0
    base_score: float = 0.0

    def __post_init__(self) -> None:
        if self.trees < 0:
            raise ValueError("trees must be >= 0")
        if self.reg_lambda < 0:
            raise ValueError("reg_lambda must be >= 0")
        if self.n_buckets < 1:
            raise ValueError("n_buckets must be >= 1")
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if not 0 < self.eta <= 1:
            raise ValueError("eta must be in (0, 1]")


def sigmoid(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def compute_gradients(labels: np.ndarray, raw_scores: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Logistic-loss gradients: g = p - y, h = p * (1 - p) with p = sigmoid(raw)."""
    y = np.asarray(labels, dtype=np.float64)
    raw = np.asarray(raw_scores, dtype=np.float64)
    if y.shape != raw.shape:
        raise ValueError("labels and raw scores must align")
    p = sigmoid(raw)
    return p - y, p * (1.0 - p)


def split_gain(g_left: float, h_left: float, g_right: float, h_right: float,
               reg_lambda: float, gamma: float) -> float:
    """Gain of a candidate split relative to keeping the node whole."""
    parent_g = g_left + g_right
    parent_h = h_left + h_right
    return 0.5 * (
        g_left * g_left / (h_left + reg_lambda)
        + g_right * g_right / (h_right + reg_lambda)
        - parent_g * parent_g / (parent_h + reg_lambda)
    ) - gamma


def leaf_weight(g_sum: float, h_sum: float, reg_lambda: float) -> float:
    return -g_sum / (h_sum + reg_lambda)


@dataclass(frozen=True)
class FeatureBins:
    """Quantile binning of one feature over the training rows.

    thresholds are the deduplicated i/L quantiles that actually separate
    values; bucket k holds rows with value <= thresholds[k] (and greater
    than the previous threshold), the last bucket holds the rest.  A
    constant column ends up with no thresholds and a single bucket.
    """

    feature: str
    thresholds: np.ndarray
    buckets: np.ndarray

    @property
    def n_buckets(self) -> int:
        return len(self.thresholds) + 1


def bin_feature(values: np.ndarray, n_buckets: int, feature: str = "") -> FeatureBins:
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or values.size == 0:
        raise ValueError("values must be a non-empty 1-d array")
    if not np.isfinite(values).all():
        raise ValueError(f"feature {feature!r} has non-finite values")
    if n_buckets < 1:
        raise ValueError("n_buckets must be >= 1")
    qs = [i / n_buckets for i in range(1, n_buckets)]
    raw = np.quantile(values, qs, method="lower") if qs else np.empty(0)
    top = values.max()
    thresholds = np.unique(raw[raw < top])
    buckets = np.searchsorted(thresholds, values, side="left").astype(np.int32)
    return FeatureBins(feature=feature, thresholds=thresholds, buckets=buckets)


def bin_matrix(X: np.ndarray, columns: Sequence[str], n_buckets: int) -> list[FeatureBins]:
    return [bin_feature(X[:, i], n_buckets, feature=name) for i, name in enumerate(columns)]


def bucket_stats(bins: FeatureBins, idx: np.ndarray, g: np.ndarray, h: np.ndarray
                 ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-bucket gradient sums and counts over the rows in ``idx``."""
    b = bins.buckets[idx]
    n = bins.n_buckets
    g_hist = np.bincount(b, weights=g[idx], minlength=n)
    h_hist = np.bincount(b, weights=h[idx], minlength=n)
    counts = np.bincount(b, minlength=n)
    return g_hist, h_hist, counts


def best_threshold(g_hist: np.ndarray, h_hist: np.ndarray, g_total: float, h_total: float,
                   n_thresholds: int, reg_lambda: float, gamma: float) -> tuple[float, int] | None:
    """Scan thresholds left to right; first candidate wins ties.

    The right-hand side is always the complement against the node totals,
    so a decode error in one bucket cannot contaminate both sides.
    """
    if n_thresholds < 1:
        return None
    best_gain = -np.inf
    best_t = -1
    gl = 0.0
    hl = 0.0
    for t in range(n_thresholds):
        gl += float(g_hist[t])
        hl += float(h_hist[t])
        gain = split_gain(gl, hl, g_total - gl, h_total - hl, reg_lambda, gamma)
        if gain > best_gain:
            best_gain = gain
            best_t = t
    return best_gain, best_t


@dataclass(frozen=True)
class BestSplit:
    """Winning candidate at a node, with enough detail to apply it."""

    gain: float
    owner: str
    feature_index: int
    threshold_index: int
    feature: str | None = None
    threshold: float | None = None
    lookup_id: int | None = None


class SplitFinder(Protocol):
    def best_split(self, node_id: int, idx: np.ndarray, g_total: float, h_total: float
                   ) -> BestSplit | None: ...

    def partition(self, node_id: int, best: BestSplit, idx: np.ndarray) -> np.ndarray: ...


class LocalSplitFinder:
    """Exhaustive scan over locally held, pre-binned features."""

    def __init__(self, owner: str, bins: Sequence[FeatureBins], g: np.ndarray, h: np.ndarray,
                 reg_lambda: float, gamma: float) -> None:
        self.owner = owner
        self.bins = list(bins)
        self.g = g
        self.h = h
        self.reg_lambda = reg_lambda
        self.gamma = gamma

    def best_split(self, node_id: int, idx: np.ndarray, g_total: float, h_total: float
                   ) -> BestSplit | None:
        best: BestSplit | None = None
        for f_idx, fb in enumerate(self.bins):
            n_thr = len(fb.thresholds)
            if n_thr == 0:
                continue
            g_hist, h_hist, _ = bucket_stats(fb, idx, self.g, self.h)
            found = best_threshold(g_hist, h_hist, g_total, h_total, n_thr,
                                   self.reg_lambda, self.gamma)
            if found is None:
                continue
            gain, t = found
            if best is None or gain > best.gain:
                best = BestSplit(gain=gain, owner=self.owner, feature_index=f_idx,
                                 threshold_index=t, feature=fb.feature,
                                 threshold=float(fb.thresholds[t]))
        return best

    def partition(self, node_id: int, best: BestSplit, idx: np.ndarray) -> np.ndarray:
        return self.bins[best.feature_index].buckets[idx] <= best.threshold_index


@dataclass
class Split:
    owner: str
    left: int
    right: int
    threshold_index: int
    feature: str | None = None
    threshold: float | None = None
    lookup_id: int | None = None


@dataclass
class Leaf:
    weight: float


@dataclass
class Tree:
    nodes: list = field(default_factory=list)

    def n_leaves(self) -> int:
        return sum(1 for n in self.nodes if isinstance(n, Leaf))


def grow_tree(g: np.ndarray, h: np.ndarray, finder: SplitFinder, params: TrainParams
              ) -> tuple[Tree, np.ndarray]:
    """Grow one tree breadth first; returns it with per-row leaf weights."""
    n = len(g)
    leaf_values = np.zeros(n, dtype=np.float64)
    tree = Tree(nodes=[None])
    queue: deque = deque([(0, np.arange(n, dtype=np.int64), 0)])
    while queue:
        node_id, idx, depth = queue.popleft()
        g_total = float(g[idx].sum())
        h_total = float(h[idx].sum())
        best = None
        if depth < params.max_depth:
            best = finder.best_split(node_id, idx, g_total, h_total)
        if best is not None and best.gain > 0.0:
            go_left = finder.partition(node_id, best, idx)
            left_id = len(tree.nodes)
            right_id = left_id + 1
            tree.nodes.append(None)
            tree.nodes.append(None)
            tree.nodes[node_id] = Split(owner=best.owner, left=left_id, right=right_id,
                                        threshold_index=best.threshold_index,
                                        feature=best.feature, threshold=best.threshold,
                                        lookup_id=best.lookup_id)
            queue.append((left_id, idx[go_left], depth + 1))
            queue.append((right_id, idx[~go_left], depth + 1))
        else:
            w = leaf_weight(g_total, h_total, params.reg_lambda)
            tree.nodes[node_id] = Leaf(weight=w)
            leaf_values[idx] = w
    return tree, leaf_values


PpRouter = Callable[[int, int], bool]


@dataclass
class BoostedModel:
    """Trained ensemble.  Splits owned by the passive party carry only an
    opaque lookup id; resolving them at inference time needs a router."""

    trees: list[Tree]
    params: TrainParams
    loss: str = "logistic"

    def predict_raw(self, features: Mapping[str, np.ndarray], pp_router: PpRouter | None = None,
                    n_rows: int | None = None) -> np.ndarray:
        if n_rows is None:
            if not features:
                raise ValueError("cannot infer row count from empty feature map")
            n_rows = len(next(iter(features.values())))
        out = np.full(n_rows, self.params.base_score, dtype=np.float64)
        for tree in self.trees:
            nodes = tree.nodes
            for i in range(n_rows):
                node = nodes[0]
                while isinstance(node, Split):
                    if node.lookup_id is not None:
                        if pp_router is None:
                            raise ValueError("model has passive-party splits; a router is required")
                        left = pp_router(node.lookup_id, i)
                    else:
                        left = features[node.feature][i] <= node.threshold
                    node = nodes[node.left if left else node.right]
                out[i] += self.params.eta * node.weight
        return out

    def predict_proba(self, features: Mapping[str, np.ndarray], pp_router: PpRouter | None = None,
                      n_rows: int | None = None) -> np.ndarray:
        return sigmoid(self.predict_raw(features, pp_router=pp_router, n_rows=n_rows))

    def to_json_dict(self) -> dict:
        trees = []
        for tree in self.trees:
            nodes = []
            for node in tree.nodes:
                if isinstance(node, Leaf):
                    nodes.append({"kind": "leaf", "weight": node.weight})
                else:
                    entry = {"kind": "split", "owner": node.owner, "left": node.left,
                             "right": node.right, "threshold_index": node.threshold_index}
                    if node.lookup_id is not None:
                        entry["lookup_id"] = node.lookup_id
                    else:
                        entry["feature"] = node.feature
                        entry["threshold"] = node.threshold
                    nodes.append(entry)
            trees.append({"nodes": nodes})
        return {
            "format": MODEL_FORMAT,
            "loss": self.loss,
            "params": {
                "trees": self.params.trees,
                "reg_lambda": self.params.reg_lambda,
                "gamma": self.params.gamma,
                "n_buckets": self.params.n_buckets,
                "max_depth": self.params.max_depth,
                "eta": self.params.eta,
                "base_score": self.params.base_score,
            },
            "trees_built": trees,
        }

    @classmethod
    def from_json_dict(cls, payload: dict) -> "BoostedModel":
        if payload.get("format") != MODEL_FORMAT:
            raise ValueError(f"unsupported model format {payload.get('format')!r}")
        params = TrainParams(**payload["params"])
        trees = []
        for tree_payload in payload["trees_built"]:
            nodes: list = []
            for entry in tree_payload["nodes"]:
                if entry["kind"] == "leaf":
                    nodes.append(Leaf(weight=entry["weight"]))
                else:
                    nodes.append(Split(owner=entry["owner"], left=entry["left"],
                                       right=entry["right"],
                                       threshold_index=entry["threshold_index"],
                                       feature=entry.get("feature"),
                                       threshold=entry.get("threshold"),
                                       lookup_id=entry.get("lookup_id")))
            trees.append(Tree(nodes=nodes))
        return cls(trees=trees, params=params, loss=payload.get("loss", "logistic"))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)

    @classmethod
    def load(cls, path) -> "BoostedModel":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


def train_centralized(X: np.ndarray, columns: Sequence[str], y: np.ndarray, params: TrainParams,
                      gradient_fn: GradientFn | None = None) -> tuple[BoostedModel, np.ndarray]:
    """Single-machine training over all features; the federated oracle.

    ``gradient_fn`` defaults to logistic loss; tests inject alternatives to
    pin gradients to exactly representable grids.
    """
    grad = gradient_fn or compute_gradients
    bins = bin_matrix(X, columns, params.n_buckets)
    raw = np.full(len(y), params.base_score, dtype=np.float64)
    trees = []
    for _ in range(params.trees):
        g, h = grad(np.asarray(y, dtype=np.float64), raw)
        finder = LocalSplitFinder("local", bins, g, h, params.reg_lambda, params.gamma)
        tree, leaf_vals = grow_tree(g, h, finder, params)
        raw = raw + params.eta * leaf_vals
        trees.append(tree)
    return BoostedModel(trees=trees, params=params), raw
