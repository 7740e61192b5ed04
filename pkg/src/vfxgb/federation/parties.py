"""Two-party training protocol: active party drives, passive party serves.

Per training session the active party (AP) generates a Paillier keypair and
sends the public half; both sides bin their own features once.  Each
boosting round the AP computes logistic gradients, encodes every (g, h)
pair with the batch codec (one ciphertext per instance; the per-value
baseline ships two) and broadcasts the ciphertexts.  For every tree node
the AP sends the node's instance bitmap; the passive party (PP) returns,
per feature and bucket, the homomorphic sum of member ciphertexts plus the
member count, padding empty buckets with fresh Enc(0) so the message shape
never reveals emptiness.  The AP decrypts and decodes bucket sums, scans
thresholds exactly like the centralized trainer, and compares the best
passive candidate against its own local one.  Winning passive splits are
registered at the PP, which returns an opaque lookup id; the AP's model
never contains passive feature indices or thresholds, and partition bitmaps
and inference routing go back through that id.

What the PP learns: per-node instance bitmaps and tree shape.  What it
never sees: labels, gradients, AP feature values.  What the AP learns about
PP features: bucket-level gradient sums and counts under its own key, which
is precisely the leakage this protocol is scoped to accept.
"""

from __future__ import annotations

import hashlib
import logging
import random
from dataclasses import dataclass, field
from math import gcd
from time import perf_counter
from typing import Mapping

import numpy as np

from vfxgb import batch_codec, paillier, xgb_core
from vfxgb.data import PartyView
from vfxgb.federation.channel import (
    BaseChannel,
    InProcChannel,
    PassiveServer,
    ProtocolError,
    TcpChannel,
)
from vfxgb.federation.ledger import CostLedger, PartyCounters, timed
from vfxgb.federation.messages import WireError, b64_to_bitmap, bitmap_to_b64, decode_frame, encode_frame, Message

logger = logging.getLogger(__name__)

MODE_BATCHED = "batched"
MODE_PER_VALUE = "per_value"
MODES = (MODE_BATCHED, MODE_PER_VALUE)

OVERFLOW_ABORT = "abort"
OVERFLOW_WARN = "warn"


def _derive_seed(seed: int, tag: str) -> int:
    digest = hashlib.sha256(f"{tag}:{seed}".encode("ascii")).digest()
    return int.from_bytes(digest[:8], "big")


def _default_batch_config() -> batch_codec.BatchConfig:
    return batch_codec.BatchConfig(d=2, r=30, shift=(-10.0, -10.0), alpha=20.0, alpha_max=1e6)


class OverflowAbortError(RuntimeError):
    """A decoded histogram slot hit the overflow pattern; results are unsafe."""

    def __init__(self, node_id: int, feature_index: int, bucket: int, slot: int) -> None:
        super().__init__(
            f"slot overflow while aggregating node {node_id}, passive feature "
            f"{feature_index}, bucket {bucket}, slot {slot}; shrink alpha or raise r"
        )
        self.node_id = node_id
        self.feature_index = feature_index
        self.bucket = bucket
        self.slot = slot


@dataclass(frozen=True)
class TrainSettings:
    """Shared session parameters both parties must agree on.

    The batch config always has two slots: slot 1 carries g, slot 2 h.  The
    per-value mode derives two single-slot configs from it, so both modes
    quantize identically and produce identical models.
    """

    params: xgb_core.TrainParams = field(default_factory=xgb_core.TrainParams)
    batch: batch_codec.BatchConfig = field(default_factory=_default_batch_config)
    mode: str = MODE_BATCHED
    key_bits: int = 256
    seed: int = 0
    overflow_policy: str = OVERFLOW_ABORT

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.key_bits not in paillier.ALLOWED_KEY_BITS:
            raise ValueError(f"key_bits must be one of {paillier.ALLOWED_KEY_BITS}")
        if self.batch.d != 2:
            raise ValueError("batch config needs exactly two slots: (g, h)")
        if self.batch.total_bits > self.key_bits - 1:
            raise ValueError(
                f"batch layout needs {self.batch.total_bits} plaintext bits, "
                f"key offers {self.key_bits - 1}"
            )
        if self.overflow_policy not in (OVERFLOW_ABORT, OVERFLOW_WARN):
            raise ValueError("overflow_policy must be 'abort' or 'warn'")


@dataclass
class TrainResult:
    model: xgb_core.BoostedModel
    ledger: CostLedger
    train_scores: np.ndarray


class PassiveParty:
    """Feature-only party.  Answers one request at a time, no label access."""

    def __init__(self, view: PartyView, n_buckets: int, seed: int = 0) -> None:
        if view.y is not None:
            raise ValueError("passive party must not hold labels")
        self.view = view
        self.counters = PartyCounters()
        self._n_buckets = n_buckets
        self._bins = xgb_core.bin_matrix(view.X, view.columns, n_buckets)
        self._rng = random.Random(_derive_seed(seed, "pp-nonce"))
        self._seq = 0
        self._pk: paillier.PaillierPublicKey | None = None
        self._mode: str | None = None
        self._enc: list[int] = []
        self._enc_g: list[int] = []
        self._enc_h: list[int] = []
        self._lookup: dict[int, tuple[int, int]] = {}
        self._next_lookup_id = 0
        self._routing_X: np.ndarray | None = None

    # -- transport glue ------------------------------------------------

    def handle_frame(self, frame: bytes) -> bytes:
        try:
            msg = decode_frame(frame)
        except WireError as exc:
            return self._reply("error", {"message": str(exc)}, reply_to=None)
        try:
            reply_type, body = self._dispatch(msg)
        except Exception as exc:
            logger.debug("passive party rejected %s: %s", msg.type, exc)
            reply_type, body = "error", {"message": f"{type(exc).__name__}: {exc}"}
        return self._reply(reply_type, body, reply_to=msg.seq)

    def _reply(self, reply_type: str, body: dict, reply_to: int | None) -> bytes:
        msg = Message(type=reply_type, body=body, seq=self._seq, reply_to=reply_to)
        self._seq += 1
        frame = encode_frame(msg)
        self.counters.wire_bytes_sent += len(frame)
        return frame

    def _dispatch(self, msg: Message) -> tuple[str, dict]:
        handler = getattr(self, f"_on_{msg.type}", None)
        if handler is None:
            raise ProtocolError(f"unknown message type {msg.type!r}")
        return handler(msg.body)

    # -- local-only steps ----------------------------------------------

    def load_routing_view(self, X: np.ndarray) -> None:
        """Stage this party's rows for an upcoming prediction pass."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != len(self.view.columns):
            raise ValueError("routing matrix width must match this party's features")
        self._routing_X = X

    def resolve_lookup(self, lookup_id: int) -> tuple[str, float]:
        """Feature name and threshold behind a lookup id.  Local use only:
        tests and PP-side audits; never sent to the active party."""
        f_idx, t_idx = self._lookup[lookup_id]
        fb = self._bins[f_idx]
        return fb.feature, float(fb.thresholds[t_idx])

    # -- message handlers ------------------------------------------------

    def _on_session_start(self, body: dict) -> tuple[str, dict]:
        if int(body["n"]) != self.view.n:
            raise ProtocolError(f"row count mismatch: peer has {body['n']}, local {self.view.n}")
        if int(body["buckets"]) != self._n_buckets:
            raise ProtocolError("bucket count mismatch")
        mode = body["mode"]
        if mode not in MODES:
            raise ProtocolError(f"unknown mode {mode!r}")
        self._mode = mode
        self._pk = paillier.PaillierPublicKey(n=int(body["key"]["n"], 16),
                                              key_bits=int(body["key"]["bits"]))
        self._enc = []
        self._enc_g = []
        self._enc_h = []
        self._lookup = {}
        self._next_lookup_id = 0
        return "session_ack", {"features": len(self.view.columns)}

    def _require_session(self) -> paillier.PaillierPublicKey:
        if self._pk is None or self._mode is None:
            raise ProtocolError("no active session")
        return self._pk

    def _on_encrypted_gradients(self, body: dict) -> tuple[str, dict]:
        self._require_session()
        cts = [int(t, 16) for t in body["ciphertexts"]]
        if self._mode == MODE_BATCHED:
            if len(cts) != self.view.n:
                raise ProtocolError(f"expected {self.view.n} ciphertexts, got {len(cts)}")
            self._enc = cts
        else:
            if len(cts) != 2 * self.view.n:
                raise ProtocolError(f"expected {2 * self.view.n} ciphertexts, got {len(cts)}")
            self._enc_g = cts[0::2]
            self._enc_h = cts[1::2]
        return "gradients_ack", {"tree": body["tree"]}

    def _fold(self, cts: list[int], rows: np.ndarray, n_sq: int) -> int | None:
        """Homomorphic sum over the given rows; None when there are none."""
        acc: int | None = None
        adds = 0
        for i in rows:
            c = cts[i]
            if acc is None:
                acc = c
            else:
                acc = acc * c % n_sq
                adds += 1
        self.counters.homomorphic_adds += adds
        return acc

    def _encrypt_zero(self, pk: paillier.PaillierPublicKey) -> int:
        # Enc(0) = r^n mod n^2 with a fresh nonce; same shape as any other
        # ciphertext so empty buckets are not distinguishable on the wire.
        n = pk.n
        while True:
            r = self._rng.randrange(1, n)
            if gcd(r, n) == 1:
                break
        self.counters.zero_encryptions += 1
        return paillier.powmod(r, n, pk.n_squared)

    def _on_aggregate_request(self, body: dict) -> tuple[str, dict]:
        pk = self._require_session()
        if self._mode == MODE_BATCHED and not self._enc:
            raise ProtocolError("no encrypted gradients for this tree yet")
        if self._mode == MODE_PER_VALUE and not self._enc_g:
            raise ProtocolError("no encrypted gradients for this tree yet")
        node_id = int(body["node"])
        mask = b64_to_bitmap(body["bitmap"], self.view.n)
        features = [int(f) for f in body["features"]]
        if any(not 0 <= f < len(self._bins) for f in features):
            raise ProtocolError("aggregate request names an unknown feature")
        t0 = perf_counter()
        idx = np.flatnonzero(mask)
        n_sq = pk.n_squared
        hex_width = pk.key_bits // 2
        out = []
        ct_count = 0
        for f in features:
            fb = self._bins[f]
            b = fb.buckets[idx]
            counts = np.bincount(b, minlength=fb.n_buckets)
            order = np.argsort(b, kind="stable")
            rows_sorted = idx[order]
            buckets_payload = []
            pos = 0
            for k in range(fb.n_buckets):
                cnt = int(counts[k])
                rows = rows_sorted[pos:pos + cnt]
                pos += cnt
                if self._mode == MODE_BATCHED:
                    acc = self._fold(self._enc, rows, n_sq)
                    cts = [acc if acc is not None else self._encrypt_zero(pk)]
                else:
                    acc_g = self._fold(self._enc_g, rows, n_sq)
                    acc_h = self._fold(self._enc_h, rows, n_sq)
                    cts = [acc_g if acc_g is not None else self._encrypt_zero(pk),
                           acc_h if acc_h is not None else self._encrypt_zero(pk)]
                ct_count += len(cts)
                buckets_payload.append({
                    "count": cnt,
                    "cts": [format(c, f"0{hex_width}x") for c in cts],
                })
            out.append({"feature": f, "buckets": buckets_payload})
        self.counters.add_time("aggregate", perf_counter() - t0)
        self.counters.ciphertext_bytes_sent += ct_count * pk.ciphertext_bytes
        return "aggregated_histograms", {"node": node_id, "features": out}

    def _on_register_split(self, body: dict) -> tuple[str, dict]:
        self._require_session()
        f_idx = int(body["feature"])
        t_idx = int(body["threshold_index"])
        fb = self._bins[f_idx]
        if not 0 <= t_idx < len(fb.thresholds):
            raise ProtocolError(f"feature {f_idx} has no threshold {t_idx}")
        lookup_id = self._next_lookup_id
        self._next_lookup_id += 1
        self._lookup[lookup_id] = (f_idx, t_idx)
        return "split_registered", {"node": body["node"], "lookup_id": lookup_id}

    def _lookup_split(self, lookup_id: int) -> tuple[xgb_core.FeatureBins, int]:
        if lookup_id not in self._lookup:
            raise ProtocolError(f"stale or unknown lookup id {lookup_id}")
        f_idx, t_idx = self._lookup[lookup_id]
        return self._bins[f_idx], t_idx

    def _on_partition_request(self, body: dict) -> tuple[str, dict]:
        self._require_session()
        fb, t_idx = self._lookup_split(int(body["lookup_id"]))
        mask = b64_to_bitmap(body["bitmap"], self.view.n)
        left = mask & (fb.buckets <= t_idx)
        return "partition_result", {"node": body["node"], "bitmap": bitmap_to_b64(left)}

    def _on_predict_begin(self, body: dict) -> tuple[str, dict]:
        if self._routing_X is None:
            raise ProtocolError("no routing view staged on the passive party")
        if int(body["rows"]) != len(self._routing_X):
            raise ProtocolError("routing view row count mismatch")
        return "predict_ack", {}

    def _on_routing_query(self, body: dict) -> tuple[str, dict]:
        if self._routing_X is None:
            raise ProtocolError("no routing view staged on the passive party")
        fb, t_idx = self._lookup_split(int(body["lookup_id"]))
        row = int(body["row"])
        if not 0 <= row < len(self._routing_X):
            raise ProtocolError(f"routing row {row} out of range")
        f_idx = self._lookup[int(body["lookup_id"])][0]
        value = self._routing_X[row, f_idx]
        return "routing_answer", {"left": bool(value <= fb.thresholds[t_idx])}

    def _on_done(self, body: dict) -> tuple[str, dict]:
        return "done_ack", {"counters": self.counters.to_dict()}


class _FederatedSplitFinder:
    """Active-party split finder: local features plus remote histograms.

    Candidate order is active features first, then passive features by
    index, thresholds ascending; strict comparisons make the earliest
    candidate win ties, matching the centralized scan order.
    """

    def __init__(self, ap: "ActiveParty", channel: BaseChannel, g: np.ndarray, h: np.ndarray) -> None:
        self._ap = ap
        self._channel = channel
        params = ap.settings.params
        self._local = xgb_core.LocalSplitFinder("active", ap.bins, g, h,
                                                params.reg_lambda, params.gamma)
        self._n = ap.view.n

    def best_split(self, node_id: int, idx: np.ndarray, g_total: float, h_total: float
                   ) -> xgb_core.BestSplit | None:
        best = self._local.best_split(node_id, idx, g_total, h_total)
        remote = self._best_remote(node_id, idx, g_total, h_total)
        if remote is not None and (best is None or remote.gain > best.gain):
            best = self._register_remote(node_id, remote)
        return best

    def _best_remote(self, node_id: int, idx: np.ndarray, g_total: float, h_total: float
                     ) -> xgb_core.BestSplit | None:
        ap = self._ap
        mask = np.zeros(self._n, dtype=bool)
        mask[idx] = True
        reply = self._channel.request("aggregate_request", {
            "node": node_id,
            "bitmap": bitmap_to_b64(mask),
            "features": list(range(ap.pp_feature_count)),
        })
        if reply.type != "aggregated_histograms":
            raise ProtocolError(f"expected histograms, got {reply.type!r}")
        best: xgb_core.BestSplit | None = None
        params = ap.settings.params
        for feat in reply.body["features"]:
            f_idx = int(feat["feature"])
            buckets = feat["buckets"]
            n_thr = len(buckets) - 1
            if n_thr < 1:
                continue
            g_hist = np.zeros(len(buckets))
            h_hist = np.zeros(len(buckets))
            for k, bucket in enumerate(buckets):
                pair = ap.decode_bucket(node_id, f_idx, k, bucket)
                g_hist[k] = pair.g
                h_hist[k] = pair.h
            found = xgb_core.best_threshold(g_hist, h_hist, g_total, h_total, n_thr,
                                            params.reg_lambda, params.gamma)
            if found is None:
                continue
            gain, t = found
            if best is None or gain > best.gain:
                best = xgb_core.BestSplit(gain=gain, owner="passive", feature_index=f_idx,
                                          threshold_index=t)
        return best

    def _register_remote(self, node_id: int, best: xgb_core.BestSplit) -> xgb_core.BestSplit:
        reply = self._channel.request("register_split", {
            "node": node_id,
            "feature": best.feature_index,
            "threshold_index": best.threshold_index,
        })
        if reply.type != "split_registered":
            raise ProtocolError(f"expected split registration, got {reply.type!r}")
        return xgb_core.BestSplit(gain=best.gain, owner="passive",
                                  feature_index=best.feature_index,
                                  threshold_index=best.threshold_index,
                                  lookup_id=int(reply.body["lookup_id"]))

    def partition(self, node_id: int, best: xgb_core.BestSplit, idx: np.ndarray) -> np.ndarray:
        if best.owner == "active":
            return self._local.partition(node_id, best, idx)
        mask = np.zeros(self._n, dtype=bool)
        mask[idx] = True
        reply = self._channel.request("partition_request", {
            "node": node_id,
            "lookup_id": best.lookup_id,
            "bitmap": bitmap_to_b64(mask),
        })
        if reply.type != "partition_result":
            raise ProtocolError(f"expected partition result, got {reply.type!r}")
        left = b64_to_bitmap(reply.body["bitmap"], self._n)
        if (left & ~mask).any():
            raise ProtocolError("partition result includes rows outside the node")
        return left[idx]


class ActiveParty:
    """Label-holding party: key owner, gradient source, tree builder."""

    def __init__(self, view: PartyView, settings: TrainSettings) -> None:
        if view.y is None:
            raise ValueError("active party needs labels")
        self.view = view
        self.settings = settings
        self.counters = PartyCounters()
        self.public_key, self._private_key = paillier.keygen(
            settings.key_bits, rng_seed=_derive_seed(settings.seed, "keygen"))
        self._nonce_rng = random.Random(_derive_seed(settings.seed, "ap-nonce"))
        self.bins = xgb_core.bin_matrix(view.X, view.columns, settings.params.n_buckets)
        self._slot_cfgs = batch_codec.split_slots(settings.batch)
        self.encode_stats = batch_codec.EncodeStats()
        self.pp_feature_count = 0
        self._overflow_seen = 0

    # -- gradient distribution -------------------------------------------

    def _encrypt_gradients(self, g: np.ndarray, h: np.ndarray) -> list[str]:
        pk = self.public_key
        rng = self._nonce_rng
        width = pk.key_bits // 2
        out = []
        if self.settings.mode == MODE_BATCHED:
            cfg = self.settings.batch
            for gi, hi in zip(g, h):
                enc = batch_codec.encode(cfg, (gi, hi), stats=self.encode_stats)
                ct = paillier.encrypt(pk, enc.z, rng)
                out.append(format(ct.value, f"0{width}x"))
        else:
            cfg_g, cfg_h = self._slot_cfgs
            for gi, hi in zip(g, h):
                enc_g = batch_codec.encode(cfg_g, (gi,), stats=self.encode_stats)
                enc_h = batch_codec.encode(cfg_h, (hi,), stats=self.encode_stats)
                out.append(format(paillier.encrypt(pk, enc_g.z, rng).value, f"0{width}x"))
                out.append(format(paillier.encrypt(pk, enc_h.z, rng).value, f"0{width}x"))
        self.counters.encryptions += len(out)
        sent = len(out) * pk.ciphertext_bytes
        self.counters.gradient_ciphertext_bytes += sent
        self.counters.ciphertext_bytes_sent += sent
        return out

    # -- histogram decoding ------------------------------------------------

    def _handle_overflow(self, decoded: batch_codec.DecodedSum, node_id: int,
                         feature_index: int, bucket: int) -> None:
        for slot, flagged in enumerate(decoded.overflow_flags):
            if not flagged:
                continue
            self._overflow_seen += 1
            if self.settings.overflow_policy == OVERFLOW_ABORT:
                raise OverflowAbortError(node_id, feature_index, bucket, slot)
            logger.warning(
                "slot overflow at node %d, passive feature %d, bucket %d, slot %d; "
                "continuing because overflow_policy is 'warn'",
                node_id, feature_index, bucket, slot)

    def decode_bucket(self, node_id: int, feature_index: int, bucket_index: int,
                      bucket: dict) -> xgb_core.GradientPair:
        """Decrypt and decode one bucket of an aggregated histogram."""
        count = int(bucket["count"])
        if count == 0:
            return xgb_core.GradientPair(0.0, 0.0)
        pk = self.public_key
        with timed(self.counters, "decrypt"):
            values = [paillier.decrypt(self._private_key,
                                       paillier.Ciphertext(int(t, 16), pk.key_id))
                      for t in bucket["cts"]]
            self.counters.decryptions += len(values)
            if self.settings.mode == MODE_BATCHED:
                decoded = batch_codec.decode_sum(self.settings.batch, values[0], count)
                self._handle_overflow(decoded, node_id, feature_index, bucket_index)
                return xgb_core.GradientPair(decoded.values[0], decoded.values[1])
            cfg_g, cfg_h = self._slot_cfgs
            dec_g = batch_codec.decode_sum(cfg_g, values[0], count)
            dec_h = batch_codec.decode_sum(cfg_h, values[1], count)
            self._handle_overflow(dec_g, node_id, feature_index, bucket_index)
            self._handle_overflow(dec_h, node_id, feature_index, bucket_index)
            return xgb_core.GradientPair(dec_g.values[0], dec_h.values[0])

    # -- protocol driver ---------------------------------------------------

    def train(self, channel: BaseChannel, gradient_fn: xgb_core.GradientFn | None = None
              ) -> TrainResult:
        settings = self.settings
        params = settings.params
        grad = gradient_fn or xgb_core.compute_gradients
        t_start = perf_counter()
        ack = channel.request("session_start", {
            "n": self.view.n,
            "mode": settings.mode,
            "buckets": params.n_buckets,
            "key": self.public_key.export(),
        })
        if ack.type != "session_ack":
            raise ProtocolError(f"expected session ack, got {ack.type!r}")
        self.pp_feature_count = int(ack.body["features"])
        y = np.asarray(self.view.y, dtype=np.float64)
        raw = np.full(self.view.n, params.base_score, dtype=np.float64)
        trees: list[xgb_core.Tree] = []
        loop_t0 = perf_counter()
        for t in range(params.trees):
            g, h = grad(y, raw)
            with timed(self.counters, "encrypt"):
                cts = self._encrypt_gradients(g, h)
            reply = channel.request("encrypted_gradients",
                                    {"tree": t, "mode": settings.mode, "ciphertexts": cts})
            if reply.type != "gradients_ack":
                raise ProtocolError(f"expected gradients ack, got {reply.type!r}")
            finder = _FederatedSplitFinder(self, channel, g, h)
            with timed(self.counters, "tree_build"):
                tree, leaf_values = xgb_core.grow_tree(g, h, finder, params)
            raw = raw + params.eta * leaf_values
            trees.append(tree)
        build_seconds = perf_counter() - loop_t0
        done = channel.request("done", {})
        if done.type != "done_ack":
            raise ProtocolError(f"expected done ack, got {done.type!r}")
        ledger = CostLedger(
            active=self.counters,
            passive=PartyCounters.from_dict(done.body["counters"]),
            trees=params.trees,
            total_runtime_s=perf_counter() - t_start,
            per_tree_runtime_s=build_seconds / params.trees if params.trees else 0.0,
        )
        model = xgb_core.BoostedModel(trees=trees, params=params)
        return TrainResult(model=model, ledger=ledger, train_scores=raw)


def federated_predict(model: xgb_core.BoostedModel, ap_features: Mapping[str, np.ndarray],
                      channel: BaseChannel, n_rows: int) -> np.ndarray:
    """Raw scores with passive splits resolved one routing query at a time.

    The passive party must already have staged its rows for these ids via
    load_routing_view; predict_begin verifies the row count before any
    routing happens.
    """
    ack = channel.request("predict_begin", {"rows": n_rows})
    if ack.type != "predict_ack":
        raise ProtocolError(f"expected predict ack, got {ack.type!r}")

    def route(lookup_id: int, row: int) -> bool:
        reply = channel.request("routing_query", {"lookup_id": lookup_id, "row": int(row)})
        if reply.type != "routing_answer":
            raise ProtocolError(f"expected routing answer, got {reply.type!r}")
        return bool(reply.body["left"])

    return model.predict_raw(ap_features, pp_router=route, n_rows=n_rows)


class FederatedSession:
    """Both parties plus a channel, for desk-scale runs and tests.

    transport is "inproc" (default) or "tcp"; TCP hosts the passive party
    behind a localhost socket server, exercising real stream framing.
    """

    def __init__(self, ap_view: PartyView, pp_view: PartyView, settings: TrainSettings,
                 transport: str = "inproc", record_trace: bool = False,
                 tcp_address: tuple[str, int] | None = None) -> None:
        if ap_view.n != pp_view.n or not np.array_equal(ap_view.ids, pp_view.ids):
            raise ValueError("party views must cover the same rows in the same order")
        self.settings = settings
        self.passive = PassiveParty(pp_view, settings.params.n_buckets, seed=settings.seed)
        self.active = ActiveParty(ap_view, settings)
        self._server: PassiveServer | None = None
        if transport == "inproc":
            self.channel: BaseChannel = InProcChannel(
                self.passive.handle_frame, counters=self.active.counters,
                record_trace=record_trace)
        elif transport == "tcp":
            bind_host, bind_port = tcp_address if tcp_address else ("127.0.0.1", 0)
            self._server = PassiveServer(self.passive.handle_frame, host=bind_host, port=bind_port)
            self._server.start()
            host, port = self._server.address
            self.channel = TcpChannel(host, port, counters=self.active.counters,
                                      record_trace=record_trace)
        else:
            raise ValueError(f"unknown transport {transport!r}")

    def train(self, gradient_fn: xgb_core.GradientFn | None = None) -> TrainResult:
        return self.active.train(self.channel, gradient_fn=gradient_fn)

    def predict_raw(self, model: xgb_core.BoostedModel, ap_features: Mapping[str, np.ndarray],
                    pp_matrix: np.ndarray) -> np.ndarray:
        self.passive.load_routing_view(pp_matrix)
        return federated_predict(model, ap_features, self.channel, n_rows=len(pp_matrix))

    def close(self) -> None:
        self.channel.close()
        if self._server is not None:
            self._server.close()

    def __enter__(self) -> "FederatedSession":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def run_training(ap_view: PartyView, pp_view: PartyView, settings: TrainSettings,
                 transport: str = "inproc",
                 gradient_fn: xgb_core.GradientFn | None = None) -> TrainResult:
    """Train one model over a fresh session and close it."""
    with FederatedSession(ap_view, pp_view, settings, transport=transport) as session:
        return session.train(gradient_fn=gradient_fn)
