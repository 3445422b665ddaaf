"""Qubit-cost accounting: direct key stream versus an expanded seed."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, fields

import numpy as np

from ..bb84 import _require

# Sifting keeps half the rounds and estimation spends half of the rest.
DIALOGUE_OVERHEAD = 4
# BB84 preparation overhead per raw key bit.
QUBITS_PER_RAW_BIT = 4
ROUNDING = ("nearest", "ceil")


@dataclass(frozen=True)
class CostQuery:
    security_bits: int
    dialogue_uses: int
    rate: float = 0.117
    qber: float = 0.01
    rounding: str = "nearest"

    def __post_init__(self):
        _require(self.security_bits >= 1, "security_bits", "must be >= 1")
        _require(self.dialogue_uses >= 1, "dialogue_uses", "must be >= 1")
        _require(self.rate != 0, "rate", "must be non-zero")
        _require(0.0 < self.rate <= 1.0, "rate", "must lie in (0, 1]")
        _require(0.0 <= self.qber <= 1.0, "qber", "must lie in [0, 1]")
        _require(self.rounding in ROUNDING, "rounding", f"must be one of {ROUNDING}")


@dataclass(frozen=True)
class CostReport:
    direct_key_bits: int
    direct_naive_qubits: int
    direct_finite_raw_bits: int
    direct_finite_qubits: int
    seed_bits: int
    seed_naive_qubits: int
    seed_finite_raw_bits: int
    seed_finite_qubits: int

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _raw_bits(key_bits: int, rate: float, rounding: str) -> int:
    x = key_bits / rate
    if rounding == "ceil":
        return math.ceil(x)
    return math.floor(x + 0.5)


def cost_compare(q: CostQuery) -> CostReport:
    direct = DIALOGUE_OVERHEAD * q.dialogue_uses
    seed = 2 * q.security_bits
    direct_raw = _raw_bits(direct, q.rate, q.rounding)
    seed_raw = _raw_bits(seed, q.rate, q.rounding)
    return CostReport(
        direct_key_bits=direct,
        direct_naive_qubits=QUBITS_PER_RAW_BIT * direct,
        direct_finite_raw_bits=direct_raw,
        direct_finite_qubits=QUBITS_PER_RAW_BIT * direct_raw,
        seed_bits=seed,
        seed_naive_qubits=QUBITS_PER_RAW_BIT * seed,
        seed_finite_raw_bits=seed_raw,
        seed_finite_qubits=QUBITS_PER_RAW_BIT * seed_raw,
    )


def expand_keystream(seed, length: int) -> np.ndarray:
    """Deterministically stretch ``seed`` bits to ``length`` bits with SHAKE-256.

    Not a vetted stream cipher; only determinism and mixing are relied on.
    """
    if isinstance(seed, str):
        seed = [int(c) for c in seed]
    bits = np.asarray(seed, dtype=np.uint8).ravel()
    if bits.size == 0:
        raise ValueError("seed must contain at least one bit")
    if not np.all(bits <= 1):
        raise ValueError("seed must contain only 0/1")
    _require(length >= 1, "length", "must be >= 1")
    # prefix the bit count so that e.g. "0" and "00" expand differently
    msg = bits.size.to_bytes(8, "big") + np.packbits(bits).tobytes()
    stream = hashlib.shake_256(msg).digest((length + 7) // 8)
    return np.unpackbits(np.frombuffer(stream, dtype=np.uint8))[:length]
