"""Paillier additively homomorphic cryptosystem over Python integers.

Keys use the textbook construction: n = p * q with p, q random primes of
equal size, generator g = n + 1, private exponent lam = lcm(p-1, q-1) and
mu = lam^-1 mod n.  Encryption of m in [0, n) is

    c = (1 + n)^m * r^n  mod n^2

with a fresh nonce r coprime to n.  Multiplying two ciphertexts adds their
plaintexts mod n, which is the only homomorphic operation this module
exposes.  Ciphertext-times-plaintext scaling is deliberately left out: the
federation layer only ever needs sums.

Key sizes below 2048 bits are toy parameters for benchmarking the protocol
and must not be used to protect real data.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from functools import cached_property
from math import gcd

try:
    from gmpy2 import powmod as _gmp_powmod
except ImportError:  # pragma: no cover - exercised only where gmpy2 is absent
    _gmp_powmod = pow

ALLOWED_KEY_BITS = (128, 256, 512, 1024, 2048)

MILLER_RABIN_ROUNDS = 40

_SMALL_PRIMES = (
    3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67,
    71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127, 131, 137, 139,
    149, 151, 157, 163, 167, 173, 179, 181, 191, 193, 197, 199, 211, 223,
    227, 229, 233, 239, 241, 251,
)


def powmod(base: int, exponent: int, modulus: int) -> int:
    """``pow(base, exponent, modulus)``, through GMP when gmpy2 is installed.

    Modular exponentiation dominates encryption and decryption cost, and
    gmpy2 is roughly an order of magnitude faster than CPython's ``pow`` at
    benchmark key sizes.  The result is coerced back to ``int`` so nothing
    downstream ever sees an ``mpz``.
    """
    return int(_gmp_powmod(base, exponent, modulus))


@dataclass(frozen=True)
class PaillierPublicKey:
    """Public half of a keypair: the modulus and its nominal bit size."""

    n: int
    key_bits: int

    @cached_property
    def n_squared(self) -> int:
        return self.n * self.n

    @property
    def g(self) -> int:
        return self.n + 1

    @cached_property
    def key_id(self) -> str:
        """Short stable fingerprint of the modulus, carried by ciphertexts."""
        digest = hashlib.sha256(hex(self.n).encode("ascii")).hexdigest()
        return digest[:16]

    @property
    def ciphertext_bytes(self) -> int:
        """Serialized ciphertext size: values live in [0, n^2) < 2^(2*key_bits)."""
        return self.key_bits // 4

    @property
    def max_plaintext_bits(self) -> int:
        """Bit budget usable without risking wraparound mod n."""
        return self.key_bits - 1

    def export(self) -> dict:
        """Wire form of the key: lowercase hex modulus plus bit size."""
        return {"n": format(self.n, "x"), "bits": self.key_bits}


@dataclass(frozen=True)
class PaillierPrivateKey:
    lam: int
    mu: int
    public_key: PaillierPublicKey


@dataclass(frozen=True)
class Ciphertext:
    """An integer in [0, n^2) tagged with the key it was produced under."""

    value: int
    key_id: str


def is_probable_prime(candidate: int, rng: random.Random, rounds: int = MILLER_RABIN_ROUNDS) -> bool:
    """Miller-Rabin test with random bases drawn from ``rng``."""
    if candidate < 2:
        return False
    if candidate in (2, 3):
        return True
    if candidate % 2 == 0:
        return False
    for p in _SMALL_PRIMES:
        if candidate == p:
            return True
        if candidate % p == 0:
            return False
    # candidate - 1 = d * 2^s with d odd
    d = candidate - 1
    s = 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for _ in range(rounds):
        a = rng.randrange(2, candidate - 1)
        x = powmod(a, d, candidate)
        if x in (1, candidate - 1):
            continue
        for _ in range(s - 1):
            x = (x * x) % candidate
            if x == candidate - 1:
                break
        else:
            return False
    return True


def _random_prime(bits: int, rng: random.Random) -> int:
    """Random prime with the top two bits set, so products keep full width."""
    while True:
        candidate = rng.getrandbits(bits)
        candidate |= (1 << (bits - 1)) | (1 << (bits - 2)) | 1
        if is_probable_prime(candidate, rng):
            return candidate


def keygen(key_bits: int, rng_seed: int | None = None) -> tuple[PaillierPublicKey, PaillierPrivateKey]:
    """Generate a keypair.

    ``rng_seed`` makes prime selection deterministic, which the test suite
    and reproducible benchmark runs rely on.  Without a seed the system
    entropy source is used.
    """
    if key_bits not in ALLOWED_KEY_BITS:
        raise ValueError(f"key_bits must be one of {ALLOWED_KEY_BITS}, got {key_bits}")
    rng = random.Random(rng_seed) if rng_seed is not None else random.SystemRandom()
    half = key_bits // 2
    p = _random_prime(half, rng)
    while True:
        q = _random_prime(half, rng)
        if q != p:
            break
    return keypair_from_primes(p, q, key_bits=key_bits)


def keypair_from_primes(p: int, q: int, key_bits: int | None = None) -> tuple[PaillierPublicKey, PaillierPrivateKey]:
    """Build a keypair from given primes.

    Exists so tests can construct tiny keys (for exhaustive plaintext sweeps)
    and fixed keys (for frozen expected values).  ``keygen`` is the normal
    entry point and enforces the allowed key sizes; this helper does not.
    """
    if p == q:
        raise ValueError("p and q must differ")
    n = p * q
    if key_bits is None:
        key_bits = n.bit_length()
    elif n.bit_length() != key_bits:
        raise ValueError(f"primes give a {n.bit_length()}-bit modulus, expected {key_bits}")
    lam = (p - 1) * (q - 1) // gcd(p - 1, q - 1)
    # With g = n + 1, g^lam mod n^2 = 1 + lam*n, so L(g^lam) = lam mod n.
    mu = pow(lam % n, -1, n)
    public = PaillierPublicKey(n=n, key_bits=key_bits)
    return public, PaillierPrivateKey(lam=lam, mu=mu, public_key=public)


def encrypt(public_key: PaillierPublicKey, m: int, rng: random.Random) -> Ciphertext:
    """Encrypt ``m`` in [0, n) under a fresh nonce drawn from ``rng``."""
    n = public_key.n
    if not 0 <= m < n:
        raise ValueError(f"plaintext out of range [0, n): {m}")
    n_sq = public_key.n_squared
    while True:
        r = rng.randrange(1, n)
        if gcd(r, n) == 1:
            break
    # (1 + n)^m = 1 + m*n mod n^2, so one modular exponentiation suffices.
    c = ((1 + m * n) % n_sq) * powmod(r, n, n_sq) % n_sq
    return Ciphertext(value=c, key_id=public_key.key_id)


def decrypt(private_key: PaillierPrivateKey, ct: Ciphertext) -> int:
    """Recover the plaintext in [0, n)."""
    public = private_key.public_key
    if ct.key_id != public.key_id:
        raise ValueError("ciphertext was produced under a different key")
    n = public.n
    x = powmod(ct.value, private_key.lam, public.n_squared)
    l_of_x = (x - 1) // n
    return l_of_x * private_key.mu % n


def add_ciphertexts(public_key: PaillierPublicKey, a: Ciphertext, b: Ciphertext) -> Ciphertext:
    """Homomorphic addition: Dec(a*b) = Dec(a) + Dec(b) mod n."""
    if a.key_id != b.key_id:
        raise ValueError("cannot add ciphertexts from different keys")
    if a.key_id != public_key.key_id:
        raise ValueError("ciphertexts do not match the supplied public key")
    return Ciphertext(value=a.value * b.value % public_key.n_squared, key_id=a.key_id)


def ciphertext_to_hex(public_key: PaillierPublicKey, ct: Ciphertext) -> str:
    """Fixed-width lowercase hex (2*key_bits bits) for wire transport."""
    return format(ct.value, f"0{public_key.key_bits // 2}x")


def ciphertext_from_hex(public_key: PaillierPublicKey, text: str) -> Ciphertext:
    return Ciphertext(value=int(text, 16), key_id=public_key.key_id)
