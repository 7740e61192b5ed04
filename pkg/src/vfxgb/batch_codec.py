"""Batch encoding of signed floats into one additively homomorphic plaintext.

The encoder turns a vector of d floats into a single non-negative integer
laid out as d fixed-width slots (slot 1 most significant).  Each value is

  1. shifted by a per-slot offset s_j <= 0 so the working value u = m - s_j
     is non-negative,
  2. truncated to the window [0, alpha],
  3. quantized to r bits with round-half-up:  q = floor(2^r * u / alpha_max + 1/2),
  4. packed into a slot of r + pad bits, the pad bits sitting above the
     value bits as headroom for carries during aggregation.

Because the values are made non-negative *before* packing, adding encoded
integers only ever carries upward into the pad bits.  A slot has overflowed
its guaranteed range exactly when its running sum reaches 2^r + 2^(r+1)
(pad pattern '11' for the default pad of 2); the decoder reports that per
slot and the caller decides whether to abort.

Decoding a sum of n encodings extracts each slot, rescales by
alpha_max / 2^r and undoes the shift with + n * s_j.  The decoder never
consults alpha: truncation loss is the encoder's business and is surfaced
there through saturation counters.

A second, signed codec is included purely as a baseline: it packs
two's-complement (r+1)-bit values with the same pad idea.  Adding negative
values there carries into the pad on every sum, so a handful of negative
addends trips the '11' pattern even though the true sum is still in range.
That failure mode is what the shift-based layout above avoids.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

DEFAULT_PAD_BITS = 2


@dataclass(frozen=True)
class BatchConfig:
    """Layout and quantization parameters shared by encoder and decoder.

    d          number of slots per plaintext
    r          value bits per slot (quantization resolution is alpha_max / 2^r)
    shift      per-slot offsets s_j <= 0, subtracted before quantization
    alpha      truncation window: shifted values are capped at alpha
    alpha_max  full-scale value mapped to 2^r
    pad        protection bits per slot absorbing aggregation carries
    """

    d: int
    r: int
    shift: tuple[float, ...]
    alpha: float
    alpha_max: float
    pad: int = DEFAULT_PAD_BITS

    def __post_init__(self) -> None:
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.r < 1:
            raise ValueError("r must be >= 1")
        if self.pad < 1:
            raise ValueError("pad must be >= 1")
        object.__setattr__(self, "shift", tuple(float(s) for s in self.shift))
        if len(self.shift) != self.d:
            raise ValueError(f"need {self.d} shift values, got {len(self.shift)}")
        if any(not math.isfinite(s) or s > 0 for s in self.shift):
            raise ValueError("shifts must be finite and <= 0")
        if not 0 < self.alpha <= self.alpha_max:
            raise ValueError("alpha must satisfy 0 < alpha <= alpha_max")
        if not math.isfinite(self.alpha_max):
            raise ValueError("alpha_max must be finite")

    @property
    def slot_bits(self) -> int:
        return self.r + self.pad

    @property
    def total_bits(self) -> int:
        """Plaintext bits consumed; must stay below the key's capacity."""
        return self.d * self.slot_bits

    @property
    def resolution(self) -> float:
        """Value of one quantization step."""
        return self.alpha_max / (1 << self.r)

    @property
    def fingerprint(self) -> str:
        """Stable id tying encodings to the config that produced them."""
        return _fingerprint("shifted", self)


def _fingerprint(kind: str, cfg: BatchConfig) -> str:
    payload = repr((kind, cfg.d, cfg.r, cfg.pad, cfg.shift, cfg.alpha, cfg.alpha_max))
    return hashlib.sha256(payload.encode("ascii")).hexdigest()[:16]


@dataclass(frozen=True)
class BatchedPlaintext:
    """Packed integer plus the fingerprint of the config that produced it."""

    z: int
    fingerprint: str

    def __post_init__(self) -> None:
        if self.z < 0:
            raise ValueError("packed value must be non-negative")


@dataclass(frozen=True)
class DecodedSum:
    """Per-slot decoded sums with overflow flags for a sum of n_terms encodings."""

    values: tuple[float, ...]
    n_terms: int
    overflow_flags: tuple[bool, ...]

    @property
    def overflow(self) -> bool:
        return any(self.overflow_flags)


@dataclass
class EncodeStats:
    """Mutable saturation counters; pass one to encode() to collect them."""

    below_shift: int = 0
    truncated: int = 0


class NoOverflowCheck(NamedTuple):
    strict: bool
    loose: bool


def encode(cfg: BatchConfig, values: Sequence[float], stats: EncodeStats | None = None) -> BatchedPlaintext:
    """Shift, truncate, quantize and pack ``values`` (one per slot).

    Values below their shift clamp to the bottom of the window, values above
    shift + alpha truncate to the top; both are counted in ``stats`` when
    given rather than treated as errors, since stray gradients are expected
    and harmless in small numbers.
    """
    if len(values) != cfg.d:
        raise ValueError(f"need {cfg.d} values, got {len(values)}")
    width = cfg.slot_bits
    scale = 1 << cfg.r
    q_cap = scale - 1
    z = 0
    for m, s in zip(values, cfg.shift):
        m = float(m)
        if not math.isfinite(m):
            raise ValueError(f"cannot encode non-finite value {m!r}")
        u = m - s
        if u < 0.0:
            u = 0.0
            if stats is not None:
                stats.below_shift += 1
        elif u > cfg.alpha:
            u = cfg.alpha
            if stats is not None:
                stats.truncated += 1
        q = math.floor(u * scale / cfg.alpha_max + 0.5)
        if q > q_cap:
            # Eq-style mapping sends u = alpha_max to 2^r, one past the top
            # code; keep the layout intact at the cost of one step of error.
            q = q_cap
        z = (z << width) | q
    return BatchedPlaintext(z=z, fingerprint=_fingerprint("shifted", cfg))


def aggregate_plain(cfg: BatchConfig, encodings: Iterable[BatchedPlaintext]) -> BatchedPlaintext:
    """Integer addition of encodings, mirroring the homomorphic path."""
    total = 0
    count = 0
    expected = None
    for enc in encodings:
        if expected is None:
            expected = enc.fingerprint
        elif enc.fingerprint != expected:
            raise ValueError("cannot aggregate encodings from different configs")
        total += enc.z
        count += 1
    if count == 0:
        raise ValueError("nothing to aggregate")
    return BatchedPlaintext(z=total, fingerprint=expected)


def overflow_threshold(cfg: BatchConfig) -> int:
    """Slot sum at which the pad pattern reaches '11': 2^r + 2^(r+1)."""
    return 3 << cfg.r


def _slot_fields(z: int, d: int, width: int) -> list[int]:
    """Split a packed integer into d fields, most significant slot first.

    The top slot keeps any bits above its nominal width so that carries out
    of it remain visible to the overflow check; lower slots are masked.
    """
    fields = []
    mask = (1 << width) - 1
    for j in range(d):
        shift_amt = (d - 1 - j) * width
        f = z >> shift_amt
        if j > 0:
            f &= mask
        fields.append(f)
    return fields


def decode_sum(cfg: BatchConfig, z_sum: int | BatchedPlaintext, n_terms: int) -> DecodedSum:
    """Decode the packed sum of ``n_terms`` encodings.

    Per slot: value = field * alpha_max / 2^r + n_terms * s_j.  The overflow
    flag marks slots whose accumulated field reached the '11' pad pattern;
    flagged values are unreliable and callers should treat them as poisoned.
    """
    if n_terms < 1:
        raise ValueError("n_terms must be >= 1")
    z = z_sum.z if isinstance(z_sum, BatchedPlaintext) else int(z_sum)
    if z < 0:
        raise ValueError("packed sum must be non-negative")
    threshold = overflow_threshold(cfg)
    res = cfg.resolution
    values = []
    flags = []
    for f, s in zip(_slot_fields(z, cfg.d, cfg.slot_bits), cfg.shift):
        flags.append(f >= threshold)
        values.append(f * res + n_terms * s)
    return DecodedSum(values=tuple(values), n_terms=n_terms, overflow_flags=tuple(flags))


def no_overflow_sufficient(cfg: BatchConfig, n_terms: int) -> NoOverflowCheck:
    """Analytic guarantees that summing n_terms encodings cannot overflow.

    strict: n * (2^r * alpha / alpha_max + 1/2) < 2^r + 2^(r+1), the exact
            worst case of the quantizer.
    loose:  n * alpha < alpha_max, an easier sizing rule that implies a
            comfortable margin whenever n is small next to 2^r.
    """
    if n_terms < 1:
        raise ValueError("n_terms must be >= 1")
    scale = 1 << cfg.r
    strict = n_terms * (scale * cfg.alpha / cfg.alpha_max + 0.5) < overflow_threshold(cfg)
    loose = n_terms * cfg.alpha < cfg.alpha_max
    return NoOverflowCheck(strict=strict, loose=loose)


def precision_bound(cfg: BatchConfig, n_terms: int, truncation_excess: float = 0.0) -> float:
    """Worst-case |decoded - true| for a sum of n_terms in-window values.

    ``truncation_excess`` is the summed amount by which shifted inputs
    exceeded alpha; it is zero when every input lay inside its window.
    """
    if n_terms < 1:
        raise ValueError("n_terms must be >= 1")
    if truncation_excess < 0:
        raise ValueError("truncation_excess must be >= 0")
    return n_terms / 2 * cfg.resolution + truncation_excess


def split_slots(cfg: BatchConfig) -> tuple[BatchConfig, ...]:
    """One single-slot config per slot, sharing quantizer parameters.

    This is how the unbatched baseline reuses the exact same quantizer: each
    value goes into its own plaintext with d = 1.
    """
    return tuple(
        BatchConfig(d=1, r=cfg.r, shift=(s,), alpha=cfg.alpha, alpha_max=cfg.alpha_max, pad=cfg.pad)
        for s in cfg.shift
    )


# --- signed reference codec -------------------------------------------------
#
# Slots hold (r+1)-bit two's-complement values (r value bits plus sign) under
# the same pad-bits idea.  Negative addends carry into the pad on every
# addition, so the '11' alarm fires after a few of them; kept here to make
# that comparison reproducible.


def signed_encode(cfg: BatchConfig, values: Sequence[float]) -> BatchedPlaintext:
    """Truncate to [-alpha, alpha], quantize to r+1 signed bits, pack."""
    if len(values) != cfg.d:
        raise ValueError(f"need {cfg.d} values, got {len(values)}")
    width = cfg.r + 1 + cfg.pad
    scale = 1 << cfg.r
    q_cap = scale - 1
    tc_mod = 1 << (cfg.r + 1)
    z = 0
    for m in values:
        m = float(m)
        if not math.isfinite(m):
            raise ValueError(f"cannot encode non-finite value {m!r}")
        t = min(max(m, -cfg.alpha), cfg.alpha)
        q = math.floor(t * scale / cfg.alpha_max + 0.5)
        q = min(max(q, -q_cap), q_cap)
        z = (z << width) | (q % tc_mod)
    return BatchedPlaintext(z=z, fingerprint=_fingerprint("signed", cfg))


def signed_decode_sum(cfg: BatchConfig, z_sum: int | BatchedPlaintext, n_terms: int) -> DecodedSum:
    """Decode a sum of signed encodings.

    A slot is flagged once its pad bits are all ones (or it carried beyond
    them): from that point the neighbouring slot may be corrupted.  The
    value is read from the low r+1 bits as two's complement, which is only
    trustworthy while the true sum fits that range.
    """
    if n_terms < 1:
        raise ValueError("n_terms must be >= 1")
    z = z_sum.z if isinstance(z_sum, BatchedPlaintext) else int(z_sum)
    if z < 0:
        raise ValueError("packed sum must be non-negative")
    width = cfg.r + 1 + cfg.pad
    tc_mod = 1 << (cfg.r + 1)
    half = 1 << cfg.r
    pad_full = (1 << cfg.pad) - 1
    res = cfg.resolution
    values = []
    flags = []
    for f in _slot_fields(z, cfg.d, width):
        flags.append(f >> (cfg.r + 1) >= pad_full)
        low = f % tc_mod
        q = low - tc_mod if low >= half else low
        values.append(q * res)
    return DecodedSum(values=tuple(values), n_terms=n_terms, overflow_flags=tuple(flags))


class SlotBits(NamedTuple):
    pad: str
    value: str


def format_slots(cfg: BatchConfig, z: int | BatchedPlaintext, signed: bool = False) -> list[SlotBits]:
    """Render each slot's pad and value bits as strings, for demos and tests.

    Values are shown masked to the nominal slot width even for the top slot.
    """
    value_bits = cfg.r + 1 if signed else cfg.r
    width = value_bits + cfg.pad
    raw = z.z if isinstance(z, BatchedPlaintext) else int(z)
    out = []
    mask = (1 << width) - 1
    for j in range(cfg.d):
        f = (raw >> ((cfg.d - 1 - j) * width)) & mask
        bits = format(f, f"0{width}b")
        out.append(SlotBits(pad=bits[: cfg.pad], value=bits[cfg.pad :]))
    return out
