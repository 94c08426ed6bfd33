"""Ideal-functionality stand-ins for the PKI, VRFs, signatures and committee sampling.

The VRF of process ``i`` on input ``x`` is a keyed 64-bit hash of the
process secret and a digest of ``x``.  Uniqueness and verifiability hold by
construction because verification recomputes the evaluation; nobody outside
this module ever touches a secret.  The simulator holds the full
:class:`Registry`; adversaries only receive :class:`PublicRegistry` plus a
:class:`KeyHandle` for each process they have corrupted.

Scalar (per-process) and vectorised (all processes at once) evaluation use
the same integer mixing, so both paths agree bit for bit.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = [
    "VALUE_BITS",
    "VALUE_DOMAIN",
    "INFINITY",
    "VrfOutput",
    "SampleProof",
    "Signature",
    "KeyPair",
    "Registry",
    "PublicRegistry",
    "KeyHandle",
    "setup_registry",
    "encode_string",
    "sample_threshold",
    "mix64",
    "mix64_array",
    "digest64",
]

VALUE_BITS = 64
VALUE_DOMAIN = 1 << VALUE_BITS
# Strictly above every VRF value; stands for the "no value yet" initial state.
INFINITY = VALUE_DOMAIN
MASK64 = VALUE_DOMAIN - 1

SAMPLE_PREFIX = b"sample"

_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_K_VALUE = 0x9E3779B97F4A7C15
_K_PROOF = 0xD1B54A32D192ED03
_K_SIG = 0x8CB92BA72F3D8DD7
_K_PUBLIC = 0xA0761D6478BD642F


def mix64(x: int) -> int:
    """SplitMix64 finaliser on a Python int."""
    x &= MASK64
    x ^= x >> 30
    x = (x * _M1) & MASK64
    x ^= x >> 27
    x = (x * _M2) & MASK64
    x ^= x >> 31
    return x


def mix64_array(x: np.ndarray) -> np.ndarray:
    """SplitMix64 finaliser on a ``uint64`` array (wrapping arithmetic)."""
    x = np.asarray(x, dtype=np.uint64)
    x = x ^ (x >> np.uint64(30))
    x = x * np.uint64(_M1)
    x = x ^ (x >> np.uint64(27))
    x = x * np.uint64(_M2)
    x = x ^ (x >> np.uint64(31))
    return x


def digest64(data: bytes) -> int:
    return int.from_bytes(hashlib.blake2b(data, digest_size=8).digest(), "big")


def encode_string(tag: str, instance: int = 0, round_: int = 0, value: int | None = None) -> bytes:
    """Bit-exact encoding of a sampling / VRF input string.

    Layout: 1-byte length ‖ UTF-8 tag ‖ 8-byte big-endian instance id ‖
    8-byte big-endian round ‖ optional value byte.
    """
    raw = tag.encode("utf-8")
    if len(raw) > 255:
        raise ValueError("tag too long")
    out = bytes([len(raw)]) + raw + struct.pack(">QQ", instance, round_)
    if value is not None:
        out += bytes([value])
    return out


def sample_threshold(lam: float, n: int) -> int:
    """Membership cut-off: a VRF value below it means "sampled"."""
    if lam >= n:
        return VALUE_DOMAIN
    return int(Fraction(lam) / n * VALUE_DOMAIN)


@dataclass(frozen=True)
class VrfOutput:
    value: int
    proof: int

    @property
    def lsb(self) -> int:
        return self.value & 1


@dataclass(frozen=True)
class SampleProof:
    member: bool
    proof: VrfOutput


@dataclass(frozen=True)
class Signature:
    signer: int
    payload_digest: int


@dataclass(frozen=True)
class KeyPair:
    process_id: int
    secret_seed: bytes
    public_id: bytes


def _vrf_value(secret: int, d: int) -> int:
    return mix64(mix64(secret ^ d) ^ _K_VALUE)


def _vrf_proof(secret: int, d: int, value: int) -> int:
    return mix64(mix64(secret ^ d ^ _K_PROOF) ^ value)


class Registry:
    """Trusted PKI plus the oracle that evaluates every process's keyed functions."""

    def __init__(self, n: int, trial_seed: int):
        if n < 1:
            raise ValueError(f"registry needs n >= 1, got {n}")
        self.n = n
        self.trial_seed = trial_seed
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([trial_seed & MASK64, 0x5EED])))
        self._secrets = rng.integers(0, np.iinfo(np.uint64).max, size=n, dtype=np.uint64, endpoint=True)
        self._secret_ints = [int(s) for s in self._secrets]
        self.public_ids = mix64_array(self._secrets ^ np.uint64(_K_PUBLIC))
        self.public = PublicRegistry(self)
        # Verification is pure, and broadcast copies of one message are checked
        # by every receiver, so results are memoised.
        self._verified: dict = {}

    def _check(self, i: int) -> None:
        if not 0 <= i < self.n:
            raise KeyError(f"unknown process id {i}")

    def keypair(self, i: int) -> KeyPair:
        self._check(i)
        return KeyPair(i, self._secret_ints[i].to_bytes(8, "big"), int(self.public_ids[i]).to_bytes(8, "big"))

    def handle(self, i: int) -> "KeyHandle":
        self._check(i)
        return KeyHandle(self, i)

    # -- evaluation (private side) --------------------------------------

    def vrf_eval(self, i: int, data: bytes) -> VrfOutput:
        self._check(i)
        d = digest64(data)
        s = self._secret_ints[i]
        value = _vrf_value(s, d)
        return VrfOutput(value, _vrf_proof(s, d, value))

    def sample(self, i: int, s: bytes, lam: float) -> SampleProof:
        if not 0 < lam <= self.n:
            raise ValueError(f"lambda={lam} outside (0, n]")
        out = self.vrf_eval(i, SAMPLE_PREFIX + s)
        return SampleProof(out.value < sample_threshold(lam, self.n), out)

    def sign(self, i: int, payload: bytes) -> Signature:
        self._check(i)
        return Signature(i, mix64(self._secret_ints[i] ^ digest64(payload) ^ _K_SIG))

    def vrf_values_all(self, data: bytes) -> np.ndarray:
        """VRF values of every process on ``data`` as a ``uint64`` array."""
        d = np.uint64(digest64(data))
        return mix64_array(mix64_array(self._secrets ^ d) ^ np.uint64(_K_VALUE))

    def sample_all(self, s: bytes, lam: float) -> np.ndarray:
        """Membership bit of every process for committee string ``s``."""
        thr = sample_threshold(lam, self.n)
        if thr >= VALUE_DOMAIN:
            return np.ones(self.n, dtype=bool)
        return self.vrf_values_all(SAMPLE_PREFIX + s) < np.uint64(thr)

    # -- verification (public side) -------------------------------------

    def vrf_verify(self, i: int, data: bytes, output: VrfOutput) -> bool:
        if not 0 <= i < self.n or not isinstance(output, VrfOutput):
            return False
        key = (i, data, output)
        hit = self._verified.get(key)
        if hit is None:
            hit = self._verified[key] = self._vrf_check(i, data, output)
        return hit

    def _vrf_check(self, i: int, data: bytes, output: VrfOutput) -> bool:
        d = digest64(data)
        s = self._secret_ints[i]
        value = _vrf_value(s, d)
        return output.value == value and output.proof == _vrf_proof(s, d, value)

    def committee_val(self, s: bytes, lam: float, i: int, proof: SampleProof) -> bool:
        if not isinstance(proof, SampleProof) or not self.vrf_verify(i, SAMPLE_PREFIX + s, proof.proof):
            return False
        return proof.proof.value < sample_threshold(lam, self.n)

    def verify_sig(self, signature: Signature, payload: bytes) -> bool:
        if not isinstance(signature, Signature) or not 0 <= signature.signer < self.n:
            return False
        key = (signature, payload)
        hit = self._verified.get(key)
        if hit is None:
            hit = self._verified[key] = self._sig_check(signature, payload)
        return hit

    def _sig_check(self, signature: Signature, payload: bytes) -> bool:
        expected = mix64(self._secret_ints[signature.signer] ^ digest64(payload) ^ _K_SIG)
        return signature.payload_digest == expected


class PublicRegistry:
    """What anyone may do with the PKI: read public ids and verify."""

    def __init__(self, registry: Registry):
        self._registry = registry
        self.n = registry.n

    def public_id(self, i: int) -> bytes:
        return int(self._registry.public_ids[i]).to_bytes(8, "big")

    def vrf_verify(self, i: int, data: bytes, output: VrfOutput) -> bool:
        return self._registry.vrf_verify(i, data, output)

    def committee_val(self, s: bytes, lam: float, i: int, proof: SampleProof) -> bool:
        return self._registry.committee_val(s, lam, i, proof)

    def verify_sig(self, signature: Signature, payload: bytes) -> bool:
        return self._registry.verify_sig(signature, payload)


class KeyHandle:
    """Private-key operations of one process."""

    def __init__(self, registry: Registry, i: int):
        self._registry = registry
        self.process_id = i

    def vrf_eval(self, data: bytes) -> VrfOutput:
        return self._registry.vrf_eval(self.process_id, data)

    def sample(self, s: bytes, lam: float) -> SampleProof:
        return self._registry.sample(self.process_id, s, lam)

    def sign(self, payload: bytes) -> Signature:
        return self._registry.sign(self.process_id, payload)


def setup_registry(n: int, trial_seed: int) -> Registry:
    return Registry(n, trial_seed)
