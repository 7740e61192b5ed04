"""Cost accounting for a federated run.

Counters are kept per party and rolled up into headline numbers:

  encryptions            gradient encryptions at the active party; exactly
                         one per shipped gradient ciphertext, so n per tree
                         in batched mode and 2n in per-value mode
  zero_encryptions       Enc(0) fillers the passive party creates for empty
                         histogram buckets, kept separate so the headline
                         count stays one-per-ciphertext-shipped
  decryptions            bucket decryptions at the active party
  homomorphic_adds       ciphertext multiplications while folding buckets
  ciphertext_bytes_sent  bytes of ciphertext material (serialized size is
                         2*key_bits per ciphertext), both directions
  gradient_ciphertext_bytes  the subset of the above spent distributing
                         encrypted gradients each tree

phase_seconds entries time what their name says and may overlap: tree_build
wraps the whole node loop including waits, while encrypt/decrypt/aggregate/
transfer isolate the crypto and serialization work inside it.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field
from time import perf_counter

PHASES = ("encrypt", "transfer", "aggregate", "decrypt", "tree_build")


@dataclass
class PartyCounters:
    encryptions: int = 0
    zero_encryptions: int = 0
    decryptions: int = 0
    homomorphic_adds: int = 0
    ciphertext_bytes_sent: int = 0
    gradient_ciphertext_bytes: int = 0
    wire_bytes_sent: int = 0
    phase_seconds: dict = field(default_factory=dict)

    def add_time(self, phase: str, seconds: float) -> None:
        self.phase_seconds[phase] = self.phase_seconds.get(phase, 0.0) + seconds

    def to_dict(self) -> dict:
        return {
            "encryptions": self.encryptions,
            "zero_encryptions": self.zero_encryptions,
            "decryptions": self.decryptions,
            "homomorphic_adds": self.homomorphic_adds,
            "ciphertext_bytes_sent": self.ciphertext_bytes_sent,
            "gradient_ciphertext_bytes": self.gradient_ciphertext_bytes,
            "wire_bytes_sent": self.wire_bytes_sent,
            "phase_seconds": dict(self.phase_seconds),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "PartyCounters":
        return cls(
            encryptions=int(payload.get("encryptions", 0)),
            zero_encryptions=int(payload.get("zero_encryptions", 0)),
            decryptions=int(payload.get("decryptions", 0)),
            homomorphic_adds=int(payload.get("homomorphic_adds", 0)),
            ciphertext_bytes_sent=int(payload.get("ciphertext_bytes_sent", 0)),
            gradient_ciphertext_bytes=int(payload.get("gradient_ciphertext_bytes", 0)),
            wire_bytes_sent=int(payload.get("wire_bytes_sent", 0)),
            phase_seconds=dict(payload.get("phase_seconds", {})),
        )


@contextmanager
def timed(counters: PartyCounters, phase: str):
    t0 = perf_counter()
    try:
        yield
    finally:
        counters.add_time(phase, perf_counter() - t0)


@dataclass
class CostLedger:
    active: PartyCounters = field(default_factory=PartyCounters)
    passive: PartyCounters = field(default_factory=PartyCounters)
    trees: int = 0
    total_runtime_s: float = 0.0
    per_tree_runtime_s: float = 0.0

    @property
    def encryptions(self) -> int:
        return self.active.encryptions

    @property
    def zero_encryptions(self) -> int:
        return self.passive.zero_encryptions

    @property
    def decryptions(self) -> int:
        return self.active.decryptions

    @property
    def homomorphic_adds(self) -> int:
        return self.passive.homomorphic_adds

    @property
    def ciphertext_bytes_sent(self) -> int:
        return self.active.ciphertext_bytes_sent + self.passive.ciphertext_bytes_sent

    @property
    def gradient_ciphertext_bytes(self) -> int:
        return self.active.gradient_ciphertext_bytes

    def to_dict(self) -> dict:
        return {
            "encryptions": self.encryptions,
            "zero_encryptions": self.zero_encryptions,
            "decryptions": self.decryptions,
            "homomorphic_adds": self.homomorphic_adds,
            "ciphertext_bytes_sent": self.ciphertext_bytes_sent,
            "gradient_ciphertext_bytes": self.gradient_ciphertext_bytes,
            "trees": self.trees,
            "total_runtime_s": self.total_runtime_s,
            "per_tree_runtime_s": self.per_tree_runtime_s,
            "per_party": {"active": self.active.to_dict(), "passive": self.passive.to_dict()},
        }
