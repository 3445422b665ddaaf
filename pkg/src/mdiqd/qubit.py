"""Single-qubit amplitudes, Bell-basis projection and the flip-noise channel.

Scalar functions operate on :class:`QubitState` values; the ``*_batch``
variants take ``(N, 2)`` complex amplitude arrays and are what the protocol
engines use.  Both share the same sampling helpers, so a scalar call and a
one-row batch call consume the generator identically.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

NORM_TOL = 1e-12
SQRT_HALF = 1.0 / math.sqrt(2.0)


def make_rng(seed: int | None) -> np.random.Generator:
    """Return the generator type threaded through every sampling call."""
    return np.random.default_rng(seed)


class PrepBasis(enum.IntEnum):
    """Preparation basis; the value equals the shared key bit b_j."""

    Z = 0
    X = 1


class BellOutcome(enum.IntEnum):
    PHI_PLUS = 0
    PHI_MINUS = 1
    PSI_PLUS = 2
    PSI_MINUS = 3
    INCONCLUSIVE = 4

    @property
    def label(self) -> str:
        return _LABELS[self]

    @classmethod
    def from_label(cls, label: str) -> "BellOutcome":
        try:
            return _FROM_LABEL[label.strip().lower()]
        except KeyError:
            raise ValueError(f"unknown Bell outcome label {label!r}") from None

    @property
    def conclusive(self) -> bool:
        return self is not BellOutcome.INCONCLUSIVE


_LABELS = {
    BellOutcome.PHI_PLUS: "phi+",
    BellOutcome.PHI_MINUS: "phi-",
    BellOutcome.PSI_PLUS: "psi+",
    BellOutcome.PSI_MINUS: "psi-",
    BellOutcome.INCONCLUSIVE: "inconclusive",
}
_FROM_LABEL = {v: k for k, v in _LABELS.items()}

CONCLUSIVE = (
    BellOutcome.PHI_PLUS,
    BellOutcome.PHI_MINUS,
    BellOutcome.PSI_PLUS,
    BellOutcome.PSI_MINUS,
)


@dataclass(frozen=True)
class QubitState:
    """Pure single-qubit state ``amp0|0> + amp1|1>``."""

    amp0: complex
    amp1: complex

    def __post_init__(self):
        object.__setattr__(self, "amp0", complex(self.amp0))
        object.__setattr__(self, "amp1", complex(self.amp1))
        if not self.is_normalized():
            raise ValueError(f"state not normalized: norm^2 = {self.norm_squared()!r}")

    def norm_squared(self) -> float:
        return abs(self.amp0) ** 2 + abs(self.amp1) ** 2

    def is_normalized(self, tol: float = NORM_TOL) -> bool:
        return abs(self.norm_squared() - 1.0) <= tol

    def as_array(self) -> np.ndarray:
        return np.array([self.amp0, self.amp1], dtype=complex)

    def isclose(self, other: "QubitState", tol: float = NORM_TOL) -> bool:
        """Equality of amplitudes (global phase is *not* factored out)."""
        return abs(self.amp0 - other.amp0) <= tol and abs(self.amp1 - other.amp1) <= tol


@dataclass(frozen=True)
class BellDistribution:
    """Probabilities over (phi+, phi-, psi+, psi-)."""

    p: tuple[float, float, float, float]

    def __post_init__(self):
        p = tuple(float(x) for x in self.p)
        if len(p) != 4:
            raise ValueError("a Bell distribution has exactly four entries")
        if any(x < -NORM_TOL or x > 1 + NORM_TOL for x in p):
            raise ValueError(f"probabilities out of [0, 1]: {p}")
        if abs(sum(p) - 1.0) > NORM_TOL:
            raise ValueError(f"probabilities sum to {sum(p)!r}, not 1")
        object.__setattr__(self, "p", p)

    def __getitem__(self, outcome: BellOutcome) -> float:
        return self.p[int(outcome)]


# Rows indexed by 2*basis + bit: |0>, |1>, |+>, |->.
PROTOCOL_AMPLITUDES = np.array(
    [
        [1.0, 0.0],
        [0.0, 1.0],
        [SQRT_HALF, SQRT_HALF],
        [SQRT_HALF, -SQRT_HALF],
    ],
    dtype=complex,
)

# Bell vectors over |00>, |01>, |10>, |11>; row order fixed to (phi+, phi-, psi+, psi-).
BELL_VECTORS = SQRT_HALF * np.array(
    [
        [1, 0, 0, 1],
        [1, 0, 0, -1],
        [0, 1, 1, 0],
        [0, 1, -1, 0],
    ],
    dtype=complex,
)

# Basis eigenvectors; row = outcome bit.
BASIS_VECTORS = {
    PrepBasis.Z: PROTOCOL_AMPLITUDES[0:2],
    PrepBasis.X: PROTOCOL_AMPLITUDES[2:4],
}

_PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
_PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
# Maps a basis eigenstate onto its orthogonal partner in the same basis.
_FLIP_GATES = {PrepBasis.Z: _PAULI_X, PrepBasis.X: _PAULI_Z}


def _check_bit(bit) -> int:
    if bit not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {bit!r}")
    return int(bit)


def prepare(bit: int, basis: PrepBasis) -> QubitState:
    """Encode ``bit`` in ``basis``: Z gives |0>/|1>, X gives |+>/|->."""
    bit = _check_bit(bit)
    amps = PROTOCOL_AMPLITUDES[2 * int(PrepBasis(basis)) + bit]
    return QubitState(amps[0], amps[1])


def prepare_batch(bits, bases) -> np.ndarray:
    """Vectorised :func:`prepare`, returns an ``(N, 2)`` amplitude array."""
    bits = np.asarray(bits, dtype=np.int64)
    bases = np.asarray(bases, dtype=np.int64)
    return PROTOCOL_AMPLITUDES[2 * bases + bits]


def _check_normalized_batch(amps: np.ndarray) -> None:
    norms = np.sum(np.abs(amps) ** 2, axis=-1)
    if not np.all(np.abs(norms - 1.0) <= NORM_TOL):
        raise ValueError("input amplitudes are not normalized")


def bell_probabilities_batch(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``|<Bell_i| a (x) b>|^2`` row-wise for ``(N, 2)`` amplitude arrays."""
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    b = np.atleast_2d(np.asarray(b, dtype=complex))
    _check_normalized_batch(a)
    _check_normalized_batch(b)
    # product state over |00>,|01>,|10>,|11>
    joint = (a[:, :, None] * b[:, None, :]).reshape(-1, 4)
    overlaps = joint @ BELL_VECTORS.conj().T
    return np.abs(overlaps) ** 2


def bell_probabilities(a: QubitState, b: QubitState) -> BellDistribution:
    if not (a.is_normalized() and b.is_normalized()):
        raise ValueError("bell_probabilities requires normalized states")
    p = bell_probabilities_batch(a.as_array(), b.as_array())[0]
    return BellDistribution(tuple(p))


def sample_categorical_batch(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF draw of one index per row; zero-mass entries are never chosen."""
    probs = np.atleast_2d(probs)
    cdf = np.cumsum(probs, axis=1)
    cdf[:, -1] = 1.0
    u = rng.random(probs.shape[0])
    return np.sum(u[:, None] >= cdf, axis=1)


def sample_bell(d: BellDistribution, rng: np.random.Generator) -> BellOutcome:
    idx = sample_categorical_batch(np.array([d.p]), rng)[0]
    return BellOutcome(int(idx))


def measure_in_basis_batch(amps: np.ndarray, bases, rng: np.random.Generator) -> np.ndarray:
    """Born-rule outcome bits for each row of ``amps`` measured in ``bases``."""
    amps = np.atleast_2d(np.asarray(amps, dtype=complex))
    _check_normalized_batch(amps)
    bases = np.asarray(bases, dtype=np.int64)
    zero_vecs = PROTOCOL_AMPLITUDES[2 * bases]
    p0 = np.clip(np.abs(np.sum(zero_vecs.conj() * amps, axis=1)) ** 2, 0.0, 1.0)
    u = rng.random(amps.shape[0])
    return (u >= p0).astype(np.uint8)


def measure_in_basis(s: QubitState, basis: PrepBasis, rng: np.random.Generator) -> int:
    """Projective measurement of ``s``; the state is not returned (consumed)."""
    if not s.is_normalized():
        raise ValueError("measure_in_basis requires a normalized state")
    return int(measure_in_basis_batch(s.as_array(), [int(PrepBasis(basis))], rng)[0])


def _check_p_flip(p_flip: float) -> float:
    p_flip = float(p_flip)
    if not 0.0 <= p_flip <= 0.5:
        raise ValueError(f"p_flip must lie in [0, 0.5], got {p_flip!r}")
    return p_flip


def apply_flip_noise_batch(amps: np.ndarray, bases, p_flip: float, rng: np.random.Generator):
    """Flip each row to its orthogonal partner in its basis with prob ``p_flip``.

    Returns ``(new_amps, flipped_mask)``.
    """
    p_flip = _check_p_flip(p_flip)
    amps = np.atleast_2d(np.asarray(amps, dtype=complex))
    bases = np.asarray(bases, dtype=np.int64)
    flipped = rng.random(amps.shape[0]) < p_flip
    out = amps.copy()
    for basis, gate in _FLIP_GATES.items():
        rows = flipped & (bases == int(basis))
        out[rows] = amps[rows] @ gate.T
    return out, flipped


def apply_flip_noise(
    s: QubitState, basis: PrepBasis, p_flip: float, rng: np.random.Generator
) -> QubitState:
    out, _ = apply_flip_noise_batch(s.as_array(), [int(PrepBasis(basis))], p_flip, rng)
    return QubitState(out[0, 0], out[0, 1])
