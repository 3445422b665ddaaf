import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mdiqd.adversary import (
    InterceptResendEve,
    PauliOp,
    UtpStrategy,
    announcement_leakage,
    empirical_announcement_leakage,
    empirical_mutual_information,
    eve_information_bound,
    exact_bell_probability,
    exact_entropy,
    leakage_table,
    mdiqd_announcement_entropy,
    nguyen_announcement,
    nguyen_posterior,
    nguyen_simulate_and_leak,
    nguyen_table,
)
from mdiqd.bb84 import Bb84Config, run_bb84
from mdiqd.dialogue import SecurityParams, run_dialogue
from mdiqd.qubit import CONCLUSIVE, BellOutcome, PrepBasis, make_rng

from . import oracles

PHI_P, PHI_M, PSI_P, PSI_M = CONCLUSIVE
INC = BellOutcome.INCONCLUSIVE


class TestExactTable:
    @pytest.mark.parametrize("basis,a,b", list(itertools.product(PrepBasis, (0, 1), (0, 1))))
    def test_matches_float_oracle(self, basis, a, b):
        want = oracles.bell_projection(oracles.STATE[(a, int(basis))], oracles.STATE[(b, int(basis))])
        got = [exact_bell_probability(basis, a, b, o) for o in CONCLUSIVE]
        assert all(g in (0, Fraction(1, 2)) for g in got)
        np.testing.assert_allclose([float(g) for g in got], want, atol=1e-12)

    def test_exact_entropy(self):
        assert exact_entropy([Fraction(1, 2)] * 2) == 1
        assert exact_entropy([Fraction(1, 4)] * 4) == 2
        assert isinstance(exact_entropy([Fraction(3, 4), Fraction(1, 4)]), float)


class TestMdiqdLeakage:
    def _row(self, o, restricted=False):
        return next(r for r in announcement_leakage(restricted) if r.outcome is o)

    def test_phi_plus_leaks_one_bit(self):
        r = self._row(PHI_P)
        assert r.posterior == {(0, 0): Fraction(1, 2), (0, 1): 0, (1, 0): 0, (1, 1): Fraction(1, 2)}
        assert r.entropy_bits == 1 and r.leak_bits == 1

    def test_phi_minus_leaks_nothing(self):
        r = self._row(PHI_M)
        assert set(r.posterior.values()) == {Fraction(1, 4)}
        assert r.entropy_bits == 2 and r.leak_bits == 0

    def test_psi_minus_candidates(self):
        r = self._row(PSI_M)
        assert {k for k, v in r.posterior.items() if v} == {(0, 1), (1, 0)}
        assert r.leak_bits == 1

    def test_kept_only_zero(self):
        rep = mdiqd_announcement_entropy(kept_only=True)
        assert rep.expected_leak_bits == 0
        assert isinstance(rep.expected_leak_bits, Fraction)
        assert set(rep.per_announcement_entropy) == {PHI_M, PSI_P}

    def test_unsifted_average_is_half_bit(self):
        rep = mdiqd_announcement_entropy()
        assert rep.expected_leak_bits == Fraction(1, 2)
        assert all(p == Fraction(1, 4) for p in rep.announcement_probability.values())

    def test_restricted_kept_zero(self):
        assert mdiqd_announcement_entropy(kept_only=True, restricted=True).expected_leak_bits == 0

    def test_posteriors_normalised_and_bounded(self):
        for r in leakage_table():
            assert sum(r.posterior.values()) == 1
            assert 0 <= r.entropy_bits <= 2

    def test_table_has_five_rows(self):
        rows = leakage_table()
        assert [r.outcome for r in rows] == [PHI_P, PHI_M, PSI_P, PSI_M, INC]
        inc = rows[-1]
        assert inc.posterior[(0, 0)] == Fraction(3, 8) and inc.posterior[(0, 1)] == Fraction(1, 8)
        assert not inc.kept

    def test_monte_carlo_cross_check(self):
        m = 200_000
        rng = make_rng(5)
        b, a, ap = (rng.integers(0, 2, m) for _ in range(3))
        t = run_dialogue(b, a, ap, SecurityParams(m=m), UtpStrategy.measure_and_record(), 0.0, rng)
        emp = empirical_announcement_leakage(t.a, t.a_prime, t.utp_records)
        for r in announcement_leakage():
            assert emp[r.outcome] == pytest.approx(float(r.entropy_bits), abs=0.01)


class TestNguyen:
    def test_bob_identity_alice_sigma_z(self):
        assert nguyen_announcement(alice_op=PauliOp.SIGMA_Z, bob_op=PauliOp.I) is PSI_M

    def test_psi_minus_candidate_list(self):
        post = nguyen_posterior(PSI_M)
        assert set(post) == {("00", "11"), ("01", "10"), ("10", "01"), ("11", "00")}
        assert set(post.values()) == {Fraction(1, 4)}

    def test_partition(self):
        table = nguyen_table()
        assert len(table) == 16
        counts = {o: sum(1 for v in table.values() if v is o) for o in CONCLUSIVE}
        assert counts == {o: 4 for o in CONCLUSIVE}

    def test_partition_against_matrix_oracle(self):
        # complex Paulis with np.kron, independent of the integer shortcut
        paulis = {
            PauliOp.I: np.eye(2),
            PauliOp.SIGMA_X: np.array([[0, 1], [1, 0]]),
            PauliOp.I_SIGMA_Y: 1j * np.array([[0, -1j], [1j, 0]]),
            PauliOp.SIGMA_Z: np.diag([1, -1]),
        }
        psi_plus = oracles.BELL[2]
        for (ua, ub), o in nguyen_table().items():
            state = np.kron(np.eye(2), paulis[ub] @ paulis[ua]) @ psi_plus
            probs = [abs(np.vdot(v, state)) ** 2 for v in oracles.BELL]
            assert probs[int(o)] == pytest.approx(1.0, abs=1e-12)

    def test_leak_two_of_four_bits(self):
        rep = nguyen_simulate_and_leak(100_000, make_rng(3))
        assert rep.message_bits == 4
        assert rep.expected_leak_bits == 2
        assert all(h == 2 for h in rep.per_announcement_entropy.values())
        for f in rep.empirical_frequency.values():
            assert abs(f - 0.25) <= 0.01

    def test_rounds_validated(self):
        with pytest.raises(ValueError):
            nguyen_simulate_and_leak(0, make_rng(0))


class TestEveBound:
    def test_no_error(self):
        assert eve_information_bound(0.0, 0.0).mutual_information_bound == 0.0

    def test_half(self):
        assert eve_information_bound(0.5, 0.0).mutual_information_bound == 2.0

    def test_pinned_composition(self):
        nu = oracles.nu(10**4, 0.1, 1e-10)
        got = eve_information_bound(0.01, nu).mutual_information_bound
        assert got == pytest.approx(1.3159160603843778, abs=1e-12)
        assert got == pytest.approx(2 * oracles.h(0.01 + nu), abs=1e-12)

    def test_residual_uncertainty_clamped(self):
        low = eve_information_bound(0.01, 0.0)
        assert not low.clamped
        assert low.residual_uncertainty == pytest.approx(1 - 2 * oracles.h(0.01))
        high = eve_information_bound(0.2, 0.0)
        assert high.clamped and high.residual_uncertainty == 0.0

    @given(st.floats(0, 1 / 3), st.floats(0, 1 / 3), st.floats(0, 1 / 3))
    def test_monotone(self, q, nu, d):
        base = eve_information_bound(q, nu).mutual_information_bound
        assert eve_information_bound(q + d, nu).mutual_information_bound >= base
        assert eve_information_bound(q, nu + d).mutual_information_bound >= base

    def test_domain(self):
        with pytest.raises(ValueError):
            eve_information_bound(0.8, 0.3)


class TestInterceptResend:
    def test_qber_signature(self):
        eve = InterceptResendEve()
        cfg = Bb84Config(n_signals=100_000, sample_fraction=0.5)
        out = run_bb84(cfg, make_rng(1), eve=eve)
        assert abs(out.observed_qber - 0.25) <= 0.02
        assert eve.last_bits.size == 100_000 and eve.intercepted == 100_000

    def test_abort_probability(self):
        # oracle: P(sample QBER <= 0.11) at p = 0.25 with ~500 samples
        assert oracles.binom_upper_tail(500, 500 - 55, 0.75) < 1e-12
        cfg = Bb84Config(n_signals=10_000, eve_strategy="intercept-resend", q_tolerable=0.11)
        assert all(run_bb84(cfg, make_rng(s)).aborted for s in range(200))

    def test_eve_learns_key_bits(self):
        # below the abort threshold Eve's guesses correlate with the key
        cfg = Bb84Config(n_signals=100_000, eve_strategy="intercept-resend",
                         q_tolerable=0.3, sample_fraction=0.5)
        out = run_bb84(cfg, make_rng(2))
        n = min(out.raw_key_alice.size, 20_000)
        eve = out.eve_bits[out.sifted_mask][~out.sample_mask][:n]
        # half the time Eve's basis matches: I = 1 - h(1/4) for the mixed channel
        mi = empirical_mutual_information(out.raw_key_alice[:n], eve)
        assert mi == pytest.approx(1 - oracles.h(0.25), abs=0.02)

    def test_not_attached(self):
        out = run_bb84(Bb84Config(n_signals=2000), make_rng(3))
        assert out.eve_bits is None
        assert out.eve_guesses_on_key.size == 0
        assert empirical_mutual_information(out.key, out.eve_guesses_on_key) == 0.0


def test_mutual_information_estimator():
    rng = make_rng(0)
    x = rng.integers(0, 2, 50_000)
    assert empirical_mutual_information(x, x) == pytest.approx(1.0, abs=1e-3)
    assert empirical_mutual_information(x, rng.integers(0, 2, 50_000)) < 1e-3


def test_strategy_validation():
    with pytest.raises(ValueError):
        UtpStrategy("collective")
    with pytest.raises(ValueError):
        UtpStrategy.biased_lie(INC, 0.5)
    with pytest.raises(ValueError):
        UtpStrategy.biased_lie(PHI_P, 1.5)
