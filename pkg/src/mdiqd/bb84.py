"""BB84 key establishment and the finite-key secure-length bound."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .qubit import (
    apply_flip_noise_batch,
    make_rng,
    measure_in_basis_batch,
    prepare_batch,
)

DEFAULT_EPS_Q = 1e-10
DEFAULT_F_EC = 1.1


class InvalidParameter(ValueError):
    """A parameter violates its domain; ``field`` names the offending input."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


def _require(cond: bool, field: str, message: str) -> None:
    if not cond:
        raise InvalidParameter(field, message)


def truncated_binary_entropy(x: float) -> float:
    """Binary Shannon entropy for ``x <= 1/2`` and exactly 1 above."""
    x = float(x)
    _require(0.0 <= x <= 1.0, "x", f"must lie in [0, 1], got {x!r}")
    if x > 0.5:
        return 1.0
    if x == 0.0:
        return 0.0
    return -(1.0 - x) * math.log2(1.0 - x) - x * math.log2(x)


def statistical_deviation_mu(n: int, k: int, eps_Q: float) -> float:
    """Deviation between the sampled error rate and the rate on the raw key.

    ``sqrt((n + k)/(n k) * (k + 1)/k * ln(1/eps_Q))``
    """
    _require(n >= 1, "n", "must be >= 1")
    _require(k >= 1, "k", "must be >= 1")
    _require(0.0 < eps_Q < 1.0, "eps_Q", "must lie in (0, 1)")
    return math.sqrt((n + k) / (n * k) * (k + 1) / k * math.log(1.0 / eps_Q))


@dataclass(frozen=True)
class FiniteKeyParams:
    n: int
    k: int
    Q: float
    leak_EC: float
    eps_cor_qkd: float
    eps_bar: float
    q: float = 1.0
    eps_Q: float = DEFAULT_EPS_Q

    def __post_init__(self):
        _require(self.n >= 1, "n", "must be >= 1")
        _require(self.k >= 1, "k", "must be >= 1")
        _require(0.0 < self.q <= 1.0, "q", "must lie in (0, 1]")
        _require(0.0 <= self.Q <= 1.0, "Q", "must lie in [0, 1]")
        _require(self.leak_EC >= 0, "leak_EC", "must be >= 0")
        _require(0.0 < self.eps_Q < 1.0, "eps_Q", "must lie in (0, 1)")
        # eps_cor_qkd and eps_bar may exceed 1 only as degenerate probes that
        # zero the log penalties (eps_cor = 2, eps_bar = 1/2).
        _require(self.eps_cor_qkd > 0, "eps_cor_qkd", "must be > 0")
        _require(self.eps_bar > 0, "eps_bar", "must be > 0")

    @classmethod
    def from_budget(
        cls,
        n: int,
        k: int,
        Q: float,
        eps_qkd: float,
        *,
        q: float = 1.0,
        eps_Q: float = DEFAULT_EPS_Q,
        f_EC: float = DEFAULT_F_EC,
    ) -> "FiniteKeyParams":
        """Default model: equal eps split and ``leak_EC = f_EC * n * h(Q)``."""
        _require(0.0 < eps_qkd < 1.0, "eps_qkd", "must lie in (0, 1)")
        _require(f_EC >= 0, "f_EC", "must be >= 0")
        return cls(
            n=n,
            k=k,
            Q=Q,
            leak_EC=f_EC * n * truncated_binary_entropy(Q),
            eps_cor_qkd=eps_qkd / 2,
            eps_bar=eps_qkd / 2,
            q=q,
            eps_Q=eps_Q,
        )

    @property
    def mu(self) -> float:
        return statistical_deviation_mu(self.n, self.k, self.eps_Q)


def secure_key_length_raw(p: FiniteKeyParams) -> float:
    """The bound before flooring and clamping; negative means abort."""
    h = truncated_binary_entropy(min(p.Q + p.mu, 1.0))
    return (
        p.n * (p.q - h)
        - p.leak_EC
        - math.log2(2.0 / p.eps_cor_qkd)
        - 2.0 * math.log2(1.0 / (2.0 * p.eps_bar))
    )


def secure_key_length(p: FiniteKeyParams) -> int:
    return max(math.floor(secure_key_length_raw(p)), 0)


def secure_length_at_security_rate(
    n: int,
    k: int,
    Q: float,
    eps_per_bit: float = 1e-14,
    *,
    q: float = 1.0,
    eps_Q: float = DEFAULT_EPS_Q,
    f_EC: float = DEFAULT_F_EC,
) -> int:
    """Largest ``l`` consistent with a total budget ``eps = eps_per_bit * l``.

    The budget shrinks with ``l``, so iterate downward from ``l = n`` until
    the bound reproduces itself.
    """
    _require(eps_per_bit > 0, "eps_per_bit", "must be > 0")
    length = n
    while length > 0:
        eps = min(eps_per_bit * length, 0.5)
        p = FiniteKeyParams.from_budget(n, k, Q, eps, q=q, eps_Q=eps_Q, f_EC=f_EC)
        new = min(secure_key_length(p), length)
        if new == length:
            break
        length = new
    return length


def symmetric_bb84_rate(n_signals: int, Q: float, eps_per_bit: float = 1e-14, **kw) -> float:
    """Secure bits per transmitted signal with symmetric BB84 bookkeeping.

    Half the signals survive sifting and half of those are spent on error
    estimation, so ``n = k = n_signals // 4``.
    """
    n = k = n_signals // 4
    return secure_length_at_security_rate(n, k, Q, eps_per_bit, **kw) / n_signals


EveStrategy = Literal["none", "intercept-resend"]


@dataclass(frozen=True)
class Bb84Config:
    n_signals: int = 10_000
    eve_strategy: EveStrategy = "none"
    p_flip_channel: float = 0.0
    sample_fraction: float = 0.1
    q_tolerable: float = 0.11
    eps_qkd: float = 1e-10
    eps_Q: float = DEFAULT_EPS_Q
    source_quality: float = 1.0
    f_EC: float = DEFAULT_F_EC

    def __post_init__(self):
        _require(self.n_signals >= 4, "n_signals", "must be >= 4")
        _require(
            self.eve_strategy in ("none", "intercept-resend"),
            "eve_strategy",
            f"unknown strategy {self.eve_strategy!r}",
        )
        _require(0.0 <= self.p_flip_channel <= 0.5, "p_flip_channel", "must lie in [0, 0.5]")
        _require(0.0 < self.sample_fraction < 1.0, "sample_fraction", "must lie in (0, 1)")
        _require(0.0 <= self.q_tolerable <= 1.0, "q_tolerable", "must lie in [0, 1]")
        _require(0.0 < self.eps_qkd < 1.0, "eps_qkd", "must lie in (0, 1)")
        _require(0.0 < self.eps_Q < 1.0, "eps_Q", "must lie in (0, 1)")
        _require(0.0 < self.source_quality <= 1.0, "source_quality", "must lie in (0, 1]")
        _require(self.f_EC >= 0, "f_EC", "must be >= 0")


@dataclass(frozen=True)
class Bb84Outcome:
    alice_bits: np.ndarray
    alice_bases: np.ndarray
    bob_bases: np.ndarray
    bob_bits: np.ndarray
    sifted_mask: np.ndarray
    sample_mask: np.ndarray  # over sifted positions
    observed_qber: float
    secure_length_l: int
    aborted: bool
    public_seed: int
    eve_bases: np.ndarray | None = None
    eve_bits: np.ndarray | None = None
    key: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.uint8))

    @property
    def sifted_bits_alice(self) -> np.ndarray:
        return self.alice_bits[self.sifted_mask]

    @property
    def sifted_bits_bob(self) -> np.ndarray:
        return self.bob_bits[self.sifted_mask]

    @property
    def sifted_count(self) -> int:
        return int(self.sifted_mask.sum())

    @property
    def sample_count(self) -> int:
        return int(self.sample_mask.sum())

    @property
    def raw_key_alice(self) -> np.ndarray:
        return self.sifted_bits_alice[~self.sample_mask]

    @property
    def raw_key_bob(self) -> np.ndarray:
        return self.sifted_bits_bob[~self.sample_mask]

    @property
    def eve_guesses_on_key(self) -> np.ndarray:
        """Eve's recorded bits aligned with :attr:`key` (empty when absent)."""
        if self.eve_bits is None:
            return np.zeros(0, dtype=np.uint8)
        eve_raw = self.eve_bits[self.sifted_mask][~self.sample_mask]
        return eve_raw[: self.secure_length_l]


def run_bb84(cfg: Bb84Config, rng: np.random.Generator, eve=None) -> Bb84Outcome:
    """One BB84 session: prepare, (intercept), noise, measure, sift, estimate.

    ``eve`` overrides the strategy named in ``cfg``; it must provide
    ``intercept(amps, rng) -> amps`` and record its own guesses.
    """
    n = cfg.n_signals
    alice_bits = rng.integers(0, 2, n, dtype=np.uint8)
    alice_bases = rng.integers(0, 2, n, dtype=np.uint8)
    amps = prepare_batch(alice_bits, alice_bases)

    if eve is None and cfg.eve_strategy == "intercept-resend":
        from .adversary import InterceptResendEve

        eve = InterceptResendEve()
    if eve is not None:
        amps = eve.intercept(amps, rng)

    amps, _ = apply_flip_noise_batch(amps, alice_bases, cfg.p_flip_channel, rng)
    bob_bases = rng.integers(0, 2, n, dtype=np.uint8)
    bob_bits = measure_in_basis_batch(amps, bob_bases, rng)

    sifted = alice_bases == bob_bases
    n_sifted = int(sifted.sum())
    k = int(math.floor(cfg.sample_fraction * n_sifted))
    if k < 1 or n_sifted - k < 1:
        raise ValueError(
            f"too few sifted bits ({n_sifted}) to sample with fraction {cfg.sample_fraction}"
        )

    # Public randomness: both parties (and a verifier) can re-derive the sample.
    public_seed = int(rng.integers(0, 2**63))
    sample_idx = make_rng(public_seed).choice(n_sifted, size=k, replace=False)
    sample_mask = np.zeros(n_sifted, dtype=bool)
    sample_mask[sample_idx] = True

    sa = alice_bits[sifted]
    sb = bob_bits[sifted]
    observed_qber = float(np.mean(sa[sample_mask] != sb[sample_mask]))

    aborted = observed_qber > cfg.q_tolerable
    length = 0
    key = np.zeros(0, dtype=np.uint8)
    if not aborted:
        params = FiniteKeyParams.from_budget(
            n_sifted - k,
            k,
            cfg.q_tolerable,
            cfg.eps_qkd,
            q=cfg.source_quality,
            eps_Q=cfg.eps_Q,
            f_EC=cfg.f_EC,
        )
        length = secure_key_length(params)
        key = sa[~sample_mask][:length].copy()

    eve_bases = getattr(eve, "last_bases", None) if eve is not None else None
    eve_bits = getattr(eve, "last_bits", None) if eve is not None else None
    return Bb84Outcome(
        alice_bits=alice_bits,
        alice_bases=alice_bases,
        bob_bases=bob_bases,
        bob_bits=bob_bits,
        sifted_mask=sifted,
        sample_mask=sample_mask,
        observed_qber=observed_qber,
        secure_length_l=length,
        aborted=aborted,
        public_seed=public_seed,
        eve_bases=eve_bases,
        eve_bits=eve_bits,
        key=key,
    )
