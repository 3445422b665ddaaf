"""Adversary strategies and information-leakage accounting.

Leakage over announcements is computed by exact enumeration with
:class:`fractions.Fraction`.  Every protocol amplitude is an integer vector
times a power of ``1/sqrt(2)``, so ``|<Bell|a b>|^2`` is an integer over a
power of two and no floating point is involved.
"""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product

import numpy as np

from .bb84 import _require, truncated_binary_entropy
from .qubit import (
    CONCLUSIVE,
    BellOutcome,
    PrepBasis,
    measure_in_basis_batch,
    prepare_batch,
    sample_categorical_batch,
)

# ---------------------------------------------------------------------------
# UTP strategies


UTP_KINDS = ("honest", "honest-restricted", "random", "biased-lie", "measure-record")


@dataclass(frozen=True)
class UtpStrategy:
    """How the untrusted Bell-measurement node turns states into announcements."""

    kind: str = "honest"
    target: BellOutcome = BellOutcome.PHI_MINUS
    p_lie: float = 0.0

    def __post_init__(self):
        _require(self.kind in UTP_KINDS, "utp", f"unknown strategy {self.kind!r}")
        _require(0.0 <= self.p_lie <= 1.0, "p_lie", "must lie in [0, 1]")
        _require(BellOutcome(self.target).conclusive, "target", "must be a conclusive outcome")

    @classmethod
    def honest(cls) -> "UtpStrategy":
        return cls("honest")

    @classmethod
    def honest_restricted(cls) -> "UtpStrategy":
        return cls("honest-restricted")

    @classmethod
    def random_announce(cls) -> "UtpStrategy":
        return cls("random")

    @classmethod
    def biased_lie(cls, target: BellOutcome, p_lie: float) -> "UtpStrategy":
        return cls("biased-lie", BellOutcome(target), p_lie)

    @classmethod
    def measure_and_record(cls) -> "UtpStrategy":
        return cls("measure-record")

    @property
    def restricted(self) -> bool:
        """The linear-optics analyzer only resolves psi+ and psi-."""
        return self.kind == "honest-restricted"

    @property
    def keeps_records(self) -> bool:
        return self.kind == "measure-record"

    @property
    def kept_outcomes(self) -> tuple[BellOutcome, ...]:
        if self.restricted:
            return (BellOutcome.PSI_PLUS,)
        return (BellOutcome.PHI_MINUS, BellOutcome.PSI_PLUS)

    def announce(self, probs: np.ndarray, rng: np.random.Generator):
        """Return ``(announced, measured)`` outcome codes for each row of ``probs``."""
        n = probs.shape[0]
        if self.kind == "random":
            measured = sample_categorical_batch(probs, rng)
            announced = rng.integers(0, 4, n)
            return announced.astype(np.int8), measured.astype(np.int8)
        measured = sample_categorical_batch(probs, rng).astype(np.int8)
        announced = measured.copy()
        if self.kind == "honest-restricted":
            phi = announced <= BellOutcome.PHI_MINUS
            announced[phi] = BellOutcome.INCONCLUSIVE
        elif self.kind == "biased-lie":
            lie = rng.random(n) < self.p_lie
            announced[lie] = int(self.target)
        return announced, measured


# ---------------------------------------------------------------------------
# Intercept-resend eavesdropper on the BB84 channel


@dataclass
class InterceptResendEve:
    """Measures every transit qubit in a random basis and resends the eigenstate."""

    last_bases: np.ndarray | None = None
    last_bits: np.ndarray | None = None
    intercepted: int = 0

    def intercept(self, amps: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        n = amps.shape[0]
        bases = rng.integers(0, 2, n, dtype=np.uint8)
        bits = measure_in_basis_batch(amps, bases, rng)
        self.last_bases = bases
        self.last_bits = bits
        self.intercepted += n
        return prepare_batch(bits, bases)


def empirical_mutual_information(x, y) -> float:
    """Plug-in estimate of I(X;Y) in bits for two aligned discrete samples."""
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != y.shape:
        raise ValueError("samples must be aligned")
    n = x.size
    if n == 0:
        return 0.0
    joint = Counter(zip(x.tolist(), y.tolist()))
    px = Counter(x.tolist())
    py = Counter(y.tolist())
    mi = 0.0
    for (a, b), c in joint.items():
        mi += c / n * math.log2(c * n / (px[a] * py[b]))
    return max(mi, 0.0)


# ---------------------------------------------------------------------------
# Exact Bell table


# (integer vector, power of 1/sqrt(2)) for |0>, |1>, |+>, |->
_EXACT_STATES = {
    (PrepBasis.Z, 0): ((1, 0), 0),
    (PrepBasis.Z, 1): ((0, 1), 0),
    (PrepBasis.X, 0): ((1, 1), 1),
    (PrepBasis.X, 1): ((1, -1), 1),
}
_EXACT_BELL = {
    BellOutcome.PHI_PLUS: (1, 0, 0, 1),
    BellOutcome.PHI_MINUS: (1, 0, 0, -1),
    BellOutcome.PSI_PLUS: (0, 1, 1, 0),
    BellOutcome.PSI_MINUS: (0, 1, -1, 0),
}


def exact_bell_probability(
    basis: PrepBasis, bit_a: int, bit_b: int, outcome: BellOutcome
) -> Fraction:
    """``P(outcome | Alice sends bit_a, Bob sends bit_b, both in basis)``."""
    va, sa = _EXACT_STATES[(PrepBasis(basis), bit_a)]
    vb, sb = _EXACT_STATES[(PrepBasis(basis), bit_b)]
    joint = (va[0] * vb[0], va[0] * vb[1], va[1] * vb[0], va[1] * vb[1])
    inner = sum(x * y for x, y in zip(_EXACT_BELL[outcome], joint))
    return Fraction(inner * inner, 2 ** (1 + sa + sb))


def _outcome_likelihood(outcome: BellOutcome, c_a: int, c_b: int, restricted: bool) -> Fraction:
    """Likelihood of an announcement given the message pair, averaged over the basis."""
    if outcome is BellOutcome.INCONCLUSIVE:
        if not restricted:
            return Fraction(0)
        parts = (BellOutcome.PHI_PLUS, BellOutcome.PHI_MINUS)
    elif restricted and outcome in (BellOutcome.PHI_PLUS, BellOutcome.PHI_MINUS):
        return Fraction(0)
    else:
        parts = (outcome,)
    total = Fraction(0)
    for basis in PrepBasis:
        for o in parts:
            total += Fraction(1, 2) * exact_bell_probability(basis, c_a, c_b, o)
    return total


def exact_entropy(probs) -> Fraction | float:
    """Shannon entropy in bits; exact :class:`Fraction` when every mass is dyadic."""
    total = Fraction(0)
    exact = True
    for p in probs:
        p = Fraction(p)
        if p == 0:
            continue
        if p.numerator == 1 and p.denominator & (p.denominator - 1) == 0:
            total += p * (p.denominator.bit_length() - 1)
        else:
            exact = False
            break
    if exact:
        return total
    return float(-sum(float(p) * math.log2(float(p)) for p in probs if p > 0))


PAIRS = ((0, 0), (0, 1), (1, 0), (1, 1))


@dataclass(frozen=True)
class AnnouncementLeak:
    outcome: BellOutcome
    probability: Fraction
    posterior: dict  # (c_a, c_b) -> Fraction
    entropy_bits: Fraction | float
    leak_bits: Fraction | float
    kept: bool


@dataclass(frozen=True)
class LeakageReport:
    """Per-announcement posterior entropies and the expected leak.

    ``expected_leak_bits = message_bits - sum_ann P(ann) H(pair | ann)``.
    """

    per_announcement_entropy: dict
    expected_leak_bits: Fraction | float
    message_bits: int = 2
    announcement_probability: dict = field(default_factory=dict)
    bound_2H: float | None = None
    empirical_frequency: dict = field(default_factory=dict)


def announcement_leakage(restricted: bool = False) -> list[AnnouncementLeak]:
    """Exact posterior over (C_A, C_B) for every announcement the analyzer can emit."""
    outcomes = (
        (BellOutcome.PSI_PLUS, BellOutcome.PSI_MINUS, BellOutcome.INCONCLUSIVE)
        if restricted
        else CONCLUSIVE
    )
    kept = (BellOutcome.PSI_PLUS,) if restricted else (BellOutcome.PHI_MINUS, BellOutcome.PSI_PLUS)
    prior = Fraction(1, 4)
    rows = []
    for o in outcomes:
        joint = {pair: prior * _outcome_likelihood(o, *pair, restricted) for pair in PAIRS}
        p_ann = sum(joint.values())
        posterior = {pair: v / p_ann for pair, v in joint.items()}
        h = exact_entropy(posterior.values())
        rows.append(AnnouncementLeak(o, p_ann, posterior, h, 2 - h, o in kept))
    return rows


def mdiqd_announcement_entropy(kept_only: bool = False, restricted: bool = False) -> LeakageReport:
    rows = announcement_leakage(restricted)
    if kept_only:
        rows = [r for r in rows if r.kept]
    norm = sum(r.probability for r in rows)
    probs = {r.outcome: r.probability / norm for r in rows}
    entropies = {r.outcome: r.entropy_bits for r in rows}
    expected_h = sum(probs[o] * entropies[o] for o in probs)
    return LeakageReport(
        per_announcement_entropy=entropies,
        expected_leak_bits=2 - expected_h,
        message_bits=2,
        announcement_probability=probs,
    )


def leakage_table() -> list[AnnouncementLeak]:
    """Rows for all five announcements.

    The four conclusive rows come from the full analyzer; ``inconclusive``
    only exists for the restricted analyzer and is taken from that analysis.
    """
    full = announcement_leakage(restricted=False)
    inconclusive = [r for r in announcement_leakage(restricted=True) if not r.outcome.conclusive]
    return full + inconclusive


def empirical_announcement_leakage(a, a_prime, announcements) -> dict:
    """Monte Carlo cross-check: plug-in H(C_A, C_B | ann) per announcement from samples."""
    a = np.asarray(a)
    a_prime = np.asarray(a_prime)
    ann = np.asarray(announcements)
    out = {}
    for code in np.unique(ann):
        sel = ann == code
        pair = 2 * a[sel].astype(np.int64) + a_prime[sel]
        counts = np.bincount(pair, minlength=4) / sel.sum()
        h = float(-sum(p * math.log2(p) for p in counts if p > 0))
        out[BellOutcome(int(code))] = h
    return out


# ---------------------------------------------------------------------------
# Eve's information bound


@dataclass(frozen=True)
class EveBound:
    mutual_information_bound: float
    residual_uncertainty: float
    clamped: bool


def eve_information_bound(q_prime: float, nu: float) -> EveBound:
    """Upper bound ``2 h(Q' + nu)`` on Eve's information per exchanged pair.

    ``residual_uncertainty`` is ``1 - 2 h(Q')`` clamped at zero; ``clamped``
    reports when the unclamped value was negative (Q' above about 0.11).
    """
    x = q_prime + nu
    _require(0.0 <= q_prime <= 1.0, "q_prime", "must lie in [0, 1]")
    _require(nu >= 0.0, "nu", "must be >= 0")
    _require(x <= 1.0, "q_prime + nu", "must lie in [0, 1]")
    raw = 1.0 - 2.0 * truncated_binary_entropy(q_prime)
    return EveBound(
        mutual_information_bound=2.0 * truncated_binary_entropy(x),
        residual_uncertainty=max(raw, 0.0),
        clamped=raw < 0.0,
    )


# ---------------------------------------------------------------------------
# Nguyen quantum-dialogue baseline


class PauliOp(enum.IntEnum):
    """Encoding operators; the value is the two-bit message they carry."""

    I = 0  # noqa: E741
    SIGMA_X = 1
    I_SIGMA_Y = 2
    SIGMA_Z = 3

    @property
    def bits(self) -> str:
        return format(int(self), "02b")


# Real integer matrices; i*sigma_y = [[0, 1], [-1, 0]].
_PAULI_INT = {
    PauliOp.I: ((1, 0), (0, 1)),
    PauliOp.SIGMA_X: ((0, 1), (1, 0)),
    PauliOp.I_SIGMA_Y: ((0, 1), (-1, 0)),
    PauliOp.SIGMA_Z: ((1, 0), (0, -1)),
}


def _matmul2(u, v):
    return tuple(
        tuple(sum(u[i][k] * v[k][j] for k in range(2)) for j in range(2)) for i in range(2)
    )


def nguyen_announcement(alice_op: PauliOp, bob_op: PauliOp) -> BellOutcome:
    """Bell outcome of ``(I (x) U_B U_A)|psi+>``; the travel qubit is the second one.

    Amplitudes are integers over sqrt(2), overlaps integers over 2, so the
    outcome with unit probability is found exactly.
    """
    u = _matmul2(_PAULI_INT[PauliOp(bob_op)], _PAULI_INT[PauliOp(alice_op)])
    # |psi+> ~ |0>|1> + |1>|0>; apply u to the second qubit.
    state = [0, 0, 0, 0]
    for first, second in ((0, 1), (1, 0)):
        for out in range(2):
            state[2 * first + out] += u[out][second]
    hits = []
    for o, vec in _EXACT_BELL.items():
        inner = sum(x * y for x, y in zip(vec, state))
        if inner * inner == 4:  # |<Bell|state>|^2 = inner^2 / 4
            hits.append(o)
    assert len(hits) == 1, "Pauli-encoded Bell states are Bell states"
    return hits[0]


@dataclass(frozen=True)
class NguyenRound:
    alice_op: PauliOp
    bob_op: PauliOp
    announced: BellOutcome

    @property
    def alice_bits(self) -> str:
        return self.alice_op.bits

    @property
    def bob_bits(self) -> str:
        return self.bob_op.bits


def nguyen_table() -> dict:
    """All 16 operator pairs mapped to their announcement."""
    return {(a, b): nguyen_announcement(a, b) for a, b in product(PauliOp, PauliOp)}


def nguyen_posterior(announcement: BellOutcome) -> dict:
    """Exact posterior over (Alice bits, Bob bits) given a public announcement."""
    table = nguyen_table()
    hits = [(a.bits, b.bits) for (a, b), o in table.items() if o == announcement]
    return {pair: Fraction(1, len(hits)) for pair in hits}


def nguyen_simulate_and_leak(rounds: int, rng: np.random.Generator) -> LeakageReport:
    _require(rounds >= 1, "rounds", "must be >= 1")
    table = nguyen_table()
    lookup = np.zeros((4, 4), dtype=np.int8)
    for (a, b), o in table.items():
        lookup[a, b] = o
    alice = rng.integers(0, 4, rounds)
    bob = rng.integers(0, 4, rounds)
    announced = lookup[alice, bob]
    freq = np.bincount(announced, minlength=4) / rounds

    entropies = {o: exact_entropy(nguyen_posterior(o).values()) for o in CONCLUSIVE}
    # each announcement arises from 4 of 16 equiprobable operator pairs
    probs = {o: Fraction(sum(1 for v in table.values() if v == o), 16) for o in CONCLUSIVE}
    expected_h = sum(probs[o] * entropies[o] for o in CONCLUSIVE)
    return LeakageReport(
        per_announcement_entropy=entropies,
        expected_leak_bits=4 - expected_h,
        message_bits=4,
        announcement_probability=probs,
        empirical_frequency={o: float(freq[o]) for o in CONCLUSIVE},
    )
