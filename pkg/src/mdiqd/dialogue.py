"""The measurement-device-independent dialogue phase.

Both parties encode their message bit in the basis fixed by the shared key,
an untrusted node Bell-measures the pair and announces the result, and each
party decodes the counterpart's bit from its own preparation plus the
announcement.  Only phi-/psi+ rounds carry messages.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .adversary import UtpStrategy
from .bb84 import _require
from .qubit import (
    BellOutcome,
    PrepBasis,
    apply_flip_noise_batch,
    bell_probabilities_batch,
    make_rng,
    prepare_batch,
)

log = logging.getLogger(__name__)

NO_GUESS = -1

# DECODE_FLIP[basis, outcome] == 1 when the counterpart's bit is the opposite
# of one's own prepared bit.
DECODE_FLIP = np.array(
    [
        [0, 0, 1, 1],  # Z: phi -> same, psi -> flipped
        [0, 1, 0, 1],  # X: phi+/psi+ -> same, phi-/psi- -> flipped
    ],
    dtype=np.int8,
)


def decode(prepared_bit: int, basis: PrepBasis, announcement: BellOutcome) -> int:
    """Infer the counterpart's bit from one's own preparation and the announcement."""
    if prepared_bit not in (0, 1):
        raise ValueError(f"prepared_bit must be 0 or 1, got {prepared_bit!r}")
    announcement = BellOutcome(announcement)
    if not announcement.conclusive:
        raise ValueError("cannot decode an inconclusive announcement")
    return int(prepared_bit) ^ int(DECODE_FLIP[int(PrepBasis(basis)), int(announcement)])


def decode_batch(prepared_bits, bases, announcements) -> np.ndarray:
    ann = np.asarray(announcements, dtype=np.int64)
    if np.any(ann >= BellOutcome.INCONCLUSIVE):
        raise ValueError("cannot decode an inconclusive announcement")
    bits = np.asarray(prepared_bits, dtype=np.int8)
    return bits ^ DECODE_FLIP[np.asarray(bases, dtype=np.int64), ann]


def serfling_deviation_nu(m: int, gamma: float, eps: float) -> float:
    """``sqrt((gamma m + 2) / (gamma^2 (1 - gamma) m^2) * ln(1/eps))``."""
    _require(m >= 2, "m", "must be >= 2")
    _require(0.0 < gamma < 1.0, "gamma", "must lie in (0, 1)")
    _require(0.0 < eps < 1.0, "eps", "must lie in (0, 1)")
    nu = math.sqrt((gamma * m + 2) / (gamma**2 * (1 - gamma) * m**2) * math.log(1.0 / eps))
    if nu > 1.0:
        log.warning("nu = %.3g exceeds 1: m = %d is too small for a meaningful estimate", nu, m)
    return nu


@dataclass(frozen=True)
class SecurityParams:
    m: int
    gamma: float = 0.1
    q_threshold: float = 0.11
    eps_qsdc: float = 1e-10
    # eps_qsdc = qkd_ratio * eps_qkd; only the proportionality is known.
    qkd_ratio: float = 1.0

    def __post_init__(self):
        _require(self.m >= 2, "m", "must be >= 2")
        _require(0.0 < self.gamma < 1.0, "gamma", "must lie in (0, 1)")
        _require(math.floor(self.gamma * self.m / 2) >= 1, "gamma", "floor(gamma*m/2) must be >= 1")
        _require(0.0 <= self.q_threshold <= 1.0, "q_threshold", "must lie in [0, 1]")
        _require(0.0 < self.eps_qsdc < 1.0, "eps", "must lie in (0, 1)")
        _require(self.qkd_ratio > 0, "qkd_ratio", "must be > 0")

    @property
    def eps_cor_qsdc(self) -> float:
        return self.eps_qsdc / 2

    @property
    def eps_sec_qsdc(self) -> float:
        return self.eps_qsdc / 2

    @property
    def eps_qkd(self) -> float:
        return self.eps_qsdc / self.qkd_ratio

    @property
    def nu(self) -> float:
        return serfling_deviation_nu(self.m, self.gamma, self.eps_qsdc)


@dataclass(frozen=True)
class RoundRecord:
    index: int
    a_bit: int
    a_prime_bit: int
    b_bit: int
    announcement: BellOutcome
    kept: bool
    g_A: int | None
    g_B: int | None
    revealed_for_estimation: bool


def _frozen(x, dtype) -> np.ndarray:
    arr = np.array(x, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SessionTranscript:
    """Column-oriented, read-only record of one dialogue session.

    ``g_a``/``g_b`` hold :data:`NO_GUESS` on discarded rounds.  ``g_a`` is
    Alice's guess of Bob's bit, ``g_b`` Bob's guess of Alice's bit.
    """

    params: SecurityParams
    a: np.ndarray
    a_prime: np.ndarray
    b: np.ndarray
    announcements: np.ndarray
    kept: np.ndarray
    g_a: np.ndarray
    g_b: np.ndarray
    revealed: np.ndarray
    observed_qber: float
    nu: float
    aborted: bool
    public_seed: int
    utp: UtpStrategy
    p_flip: float
    utp_records: np.ndarray | None = None

    @property
    def m(self) -> int:
        return int(self.a.size)

    @property
    def kept_count(self) -> int:
        return int(self.kept.sum())

    @property
    def revealed_count(self) -> int:
        return int(self.revealed.sum())

    @property
    def delivered_mask(self) -> np.ndarray:
        return self.kept & ~self.revealed

    @property
    def delivered_bits_alice_to_bob(self) -> np.ndarray:
        """Bob's decoded copy of Alice's message on delivered rounds."""
        if self.aborted:
            return np.zeros(0, dtype=np.int8)
        return self.g_b[self.delivered_mask]

    @property
    def delivered_bits_bob_to_alice(self) -> np.ndarray:
        if self.aborted:
            return np.zeros(0, dtype=np.int8)
        return self.g_a[self.delivered_mask]

    @property
    def guess_error_rate(self) -> float:
        """Ground-truth error over both directions on kept, unrevealed rounds."""
        mask = self.delivered_mask
        n = int(mask.sum())
        if n == 0:
            return 0.0
        errors = np.sum(self.g_a[mask] != self.a_prime[mask]) + np.sum(
            self.g_b[mask] != self.a[mask]
        )
        return float(errors) / (2 * n)

    @property
    def rounds(self) -> list[RoundRecord]:
        out = []
        for j in range(self.m):
            kept = bool(self.kept[j])
            out.append(
                RoundRecord(
                    index=j,
                    a_bit=int(self.a[j]),
                    a_prime_bit=int(self.a_prime[j]),
                    b_bit=int(self.b[j]),
                    announcement=BellOutcome(int(self.announcements[j])),
                    kept=kept,
                    g_A=int(self.g_a[j]) if kept else None,
                    g_B=int(self.g_b[j]) if kept else None,
                    revealed_for_estimation=bool(self.revealed[j]),
                )
            )
        return out

    @property
    def correctness_certified(self) -> bool:
        """Whether ``Q' + nu <= eps_cor`` holds, i.e. the run is eps_cor-correct."""
        return self.observed_qber + self.nu <= self.params.eps_cor_qsdc


def _as_bits(x, name: str) -> np.ndarray:
    if isinstance(x, str):
        x = [int(c) for c in x]
    arr = np.asarray(x, dtype=np.int8).ravel()
    if not np.all((arr == 0) | (arr == 1)):
        raise ValueError(f"{name} must contain only 0/1")
    return arr


def run_dialogue(
    b,
    a,
    a_prime,
    params: SecurityParams,
    utp: UtpStrategy,
    p_flip: float,
    rng: np.random.Generator,
) -> SessionTranscript:
    """Run every dialogue round, sift, estimate the error on a sample and decide abort."""
    b = _as_bits(b, "b")
    a = _as_bits(a, "a")
    a_prime = _as_bits(a_prime, "a_prime")
    if not (a.size == a_prime.size == b.size == params.m):
        raise ValueError(
            f"length mismatch: |a|={a.size}, |a'|={a_prime.size}, |b|={b.size}, m={params.m}"
        )

    alice_amps, _ = apply_flip_noise_batch(prepare_batch(a, b), b, p_flip, rng)
    bob_amps, _ = apply_flip_noise_batch(prepare_batch(a_prime, b), b, p_flip, rng)
    probs = bell_probabilities_batch(alice_amps, bob_amps)
    announced, measured = utp.announce(probs, rng)

    kept = np.isin(announced, [int(o) for o in utp.kept_outcomes])
    n_kept = int(kept.sum())
    if n_kept == 0:
        raise ValueError("no rounds survived sifting")

    g_a = np.full(params.m, NO_GUESS, dtype=np.int8)
    g_b = np.full(params.m, NO_GUESS, dtype=np.int8)
    g_a[kept] = decode_batch(a[kept], b[kept], announced[kept])
    g_b[kept] = decode_batch(a_prime[kept], b[kept], announced[kept])

    n_reveal = math.floor(params.gamma * n_kept)
    if n_reveal < 1:
        raise ValueError(f"only {n_kept} kept rounds: nothing to reveal at gamma={params.gamma}")
    public_seed = int(rng.integers(0, 2**63))
    kept_idx = np.flatnonzero(kept)
    chosen = make_rng(public_seed).choice(kept_idx, size=n_reveal, replace=False)
    revealed = np.zeros(params.m, dtype=bool)
    revealed[chosen] = True

    errors = np.sum(g_a[revealed] != a_prime[revealed]) + np.sum(g_b[revealed] != a[revealed])
    observed_qber = float(errors) / (2 * n_reveal)

    return SessionTranscript(
        params=params,
        a=_frozen(a, np.int8),
        a_prime=_frozen(a_prime, np.int8),
        b=_frozen(b, np.int8),
        announcements=_frozen(announced, np.int8),
        kept=_frozen(kept, bool),
        g_a=_frozen(g_a, np.int8),
        g_b=_frozen(g_b, np.int8),
        revealed=_frozen(revealed, bool),
        observed_qber=observed_qber,
        nu=params.nu,
        aborted=observed_qber > params.q_threshold,
        public_seed=public_seed,
        utp=utp,
        p_flip=float(p_flip),
        utp_records=_frozen(measured, np.int8) if utp.keeps_records else None,
    )


@dataclass(frozen=True)
class CorrectnessReport:
    empirical_error: float
    bound: float
    satisfied: bool


def correctness_bound_check(t: SessionTranscript) -> CorrectnessReport:
    """Compare the true error on delivered rounds against ``Q' + nu``."""
    if t.aborted:
        raise ValueError("correctness is only defined for non-aborted sessions")
    err = t.guess_error_rate
    bound = t.observed_qber + t.nu
    return CorrectnessReport(err, bound, err <= bound)
