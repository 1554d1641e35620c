from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import stats

from fraccount.laplace import OperatorTerm, l1_threshold, residual_governing
from fraccount.processes import (
    ComplexRootsError,
    FactoredPolynomial,
    GcpParams,
    PmfTable,
    RegimeError,
    TimeChangeParams,
    binomial_tc_pmf,
    clock_poisson_pmf,
    compound_weights,
    enumerate_omega,
    factor_rate_polynomial,
    frac_gcp_pmf,
    frac_poisson_pmf,
    gcp_pmf,
    general_tc_pmf,
    inverse_clock_laplace,
    pgf,
    pgf_square_case,
    pmf_table,
    tc_gcp_pmf,
    tc_gcp_pmf_vector,
    tc_pmf_via_inversion,
    tc_poisson_pmf,
    tempered_tc_pmf,
)
from fraccount.specialfn import mittag_leffler


class TestOmega:
    def test_examples(self):
        assert enumerate_omega(1, 3) == [(3,)]
        assert enumerate_omega(2, 2) == [(2, 0), (0, 1)]
        assert enumerate_omega(3, 4) == [(4, 0, 0), (2, 1, 0), (0, 2, 0), (1, 0, 1)]

    @pytest.mark.parametrize("k, n", [(2, 7), (3, 9), (4, 6)])
    def test_against_brute_force(self, k, n):
        brute = {
            x
            for x in np.ndindex(*(n + 1,) * k)
            if sum((j + 1) * xj for j, xj in enumerate(x)) == n
        }
        got = enumerate_omega(k, n)
        assert len(got) == len(set(got)) == len(brute)
        assert set(got) == brute

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            enumerate_omega(0, 1)
        with pytest.raises(ValueError):
            enumerate_omega(2, -1)


class TestGcp:
    def test_single_rate_is_poisson(self):
        for n in range(6):
            assert gcp_pmf(GcpParams((1.7,)), 0.8, n) == pytest.approx(stats.poisson.pmf(n, 1.7 * 0.8), rel=1e-13)

    def test_zero_count(self):
        assert gcp_pmf(GcpParams((0.3, 0.2, 0.5)), 1.3, 0) == pytest.approx(math.exp(-1.3), rel=1e-14)

    def test_example(self):
        assert gcp_pmf(GcpParams((1, 1)), 1.0, 2) == pytest.approx(math.exp(-2) * 1.5, rel=1e-14)
        assert gcp_pmf(GcpParams((1, 1)), 1.0, 2) == pytest.approx(0.2030, abs=5e-5)

    def test_normalised(self):
        p = [gcp_pmf(GcpParams((0.4, 0.6)), 2.0, n) for n in range(60)]
        assert sum(p) == pytest.approx(1.0, abs=1e-13)

    def test_params_validation(self):
        with pytest.raises(ValueError):
            GcpParams(())
        with pytest.raises(ValueError):
            GcpParams((1.0, 0.0))
        g = GcpParams((0.4, 0.6))
        assert g.k == 2 and g.Lambda == 1.0 and g.mean_jump_rate == pytest.approx(1.6)
        np.testing.assert_allclose(g.jump_law, [0, 0.4, 0.6])


class TestFractional:
    def test_order_one_is_poisson(self):
        for n in range(6):
            assert frac_poisson_pmf(1.0, 1.3, 0.9, n) == pytest.approx(stats.poisson.pmf(n, 1.3 * 0.9), abs=1e-10)

    def test_survival(self):
        assert frac_poisson_pmf(0.6, 1.2, 0.7, 0) == pytest.approx(mittag_leffler(-1.2 * 0.7**0.6, 0.6), rel=1e-12)

    def test_normalisation(self):
        assert sum(frac_poisson_pmf(0.5, 1.0, 1.0, n) for n in range(31)) >= 1 - 1e-8

    def test_gcp_single_rate(self):
        for n in range(5):
            assert frac_gcp_pmf(0.6, GcpParams((1.5,)), 1.0, n) == pytest.approx(frac_poisson_pmf(0.6, 1.5, 1.0, n), rel=1e-12)

    def test_gcp_order_one(self):
        g = GcpParams((0.5, 0.3, 0.2))
        for n in range(6):
            assert frac_gcp_pmf(1.0, g, 1.5, n) == pytest.approx(gcp_pmf(g, 1.5, n), abs=1e-10)

    def test_gcp_compound_identity(self):
        g = GcpParams((0.4, 0.6))
        W = compound_weights(g, 8)
        q = np.array([frac_poisson_pmf(0.7, g.Lambda, 1.0, r) for r in range(9)])
        for n in range(9):
            assert frac_gcp_pmf(0.7, g, 1.0, n) == pytest.approx(W[:, n] @ q, abs=1e-12)

    def test_vector_times(self):
        t = np.array([0.5, 1.0, 2.0])
        v = frac_poisson_pmf(0.4, 1.0, t, 2)
        assert v.shape == (3,)
        assert v[1] == pytest.approx(frac_poisson_pmf(0.4, 1.0, 1.0, 2))

    def test_validation(self):
        with pytest.raises(ValueError):
            frac_poisson_pmf(0.5, 1.0, 1.0, 1.5)
        with pytest.raises(ValueError):
            frac_poisson_pmf(1.5, 1.0, 1.0, 1)
        with pytest.raises(ValueError):
            frac_poisson_pmf(0.5, 1.0, -1.0, 1)


class TestTimeChangeParams:
    def test_validation(self):
        with pytest.raises(ValueError):
            TimeChangeParams.stable_pair(0.6, 1.0)
        with pytest.raises(ValueError):
            TimeChangeParams.stable_pair(0.3, -1.0)
        with pytest.raises(ValueError):
            TimeChangeParams.tempered_pair(0.4, 0.0)
        with pytest.raises(ValueError):
            TimeChangeParams.general([1.0], [1.0])
        with pytest.raises(ValueError):
            TimeChangeParams("weird")

    def test_exponents_match_subordinators(self):
        s = np.array([0.2, 1.0, 3.0])
        for tc in (
            TimeChangeParams.stable_pair(0.3, 1.2),
            TimeChangeParams.tempered_pair(0.4, 1.0),
            TimeChangeParams.general([5, 4, 1], [0.3, 0.6, 0.9]),
        ):
            np.testing.assert_allclose(tc.laplace_exponent(s), tc.subordinator().laplace_exponent(s), rtol=1e-14)

    def test_as_dict(self):
        assert TimeChangeParams.stable_pair(0.3, 1.0).as_dict() == {"kind": "stable_pair", "nu": 0.3, "lam": 1.0}
        assert TimeChangeParams.tempered_pair(0.4, 2.0).as_dict() == {"kind": "tempered_pair", "alpha": 0.4, "rho": 2.0}


class TestTcPoisson:
    def test_branches_collapse(self):
        # Lambda -> lam^2 limit of the two-root form equals the square-case form
        tc = TimeChangeParams.stable_pair(0.3, 1.0)
        for n in range(6):
            a = tc_poisson_pmf(tc, 1.0, 1.0, n)
            b = tc_poisson_pmf(tc, 1.0 - 1e-9, 1.0, n)
            assert abs(a - b) < 1e-8

    @pytest.mark.parametrize("Lambda", [0.5, 1.0])
    def test_matches_inversion(self, Lambda):
        tc = TimeChangeParams.stable_pair(0.3, 1.0)
        for n in range(9):
            assert abs(tc_poisson_pmf(tc, Lambda, 1.0, n) - tc_pmf_via_inversion(tc, Lambda, 1.0, n)) < 1e-6

    def test_initial_condition(self):
        tc = TimeChangeParams.stable_pair(0.3, 1.0)
        assert tc_poisson_pmf(tc, 0.5, 1e-12, 0) == pytest.approx(1.0, abs=1e-3)
        assert tc_pmf_via_inversion(tc, 0.5, 0.0, 0) == 1.0
        assert tc_pmf_via_inversion(tc, 0.5, 0.0, 3) == 0.0

    def test_single_order_reduction(self):
        tc = TimeChangeParams.stable_pair(0.3, 0.0)
        for n in range(4):
            assert tc_poisson_pmf(tc, 1.0, 1.0, n) == pytest.approx(frac_poisson_pmf(0.6, 1.0, 1.0, n), rel=1e-12)
            assert abs(tc_pmf_via_inversion(tc, 1.0, 1.0, n) - frac_poisson_pmf(0.6, 1.0, 1.0, n)) < 1e-6

    def test_complex_root_regime(self):
        tc = TimeChangeParams.stable_pair(0.3, 1.0)
        with pytest.raises(RegimeError):
            tc_poisson_pmf(tc, 2.0, 1.0, 1, route=False)
        assert tc_poisson_pmf(tc, 2.0, 1.0, 1) == tc_pmf_via_inversion(tc, 2.0, 1.0, 1)
        mass = sum(tc_pmf_via_inversion(tc, 2.0, 1.0, n) for n in range(40))
        assert mass >= 1 - 1e-5

    def test_wrong_clock(self):
        with pytest.raises(ValueError):
            tc_poisson_pmf(TimeChangeParams.tempered_pair(0.4, 1.0), 1.0, 1.0, 0)


class TestTcGcp:
    def test_single_rate(self):
        tc = TimeChangeParams.stable_pair(0.3, 1.0)
        for n in range(5):
            assert tc_gcp_pmf(tc, GcpParams((0.5,)), 1.0, n) == pytest.approx(tc_poisson_pmf(tc, 0.5, 1.0, n), rel=1e-13)

    def test_compound_structure(self):
        tc = TimeChangeParams.stable_pair(0.3, 1.0)
        g = GcpParams((0.4, 0.6))
        q = np.array([tc_poisson_pmf(tc, 1.0, 1.0, r) for r in range(11)])
        W = compound_weights(g, 10)
        np.testing.assert_allclose(tc_gcp_pmf_vector(tc, g, 1.0, 10), W.T @ q, atol=1e-12)

    def test_normalisation(self):
        v = tc_gcp_pmf_vector(TimeChangeParams.stable_pair(0.3, 1.1), GcpParams((0.4, 0.6)), 1.0, 60)
        assert v.sum() >= 1 - 1e-5
        assert np.all(v >= 0)

    def test_identity_clock(self):
        g = GcpParams((0.4, 0.6))
        v = tc_gcp_pmf_vector(TimeChangeParams.identity(), g, 1.3, 8)
        np.testing.assert_allclose(v, [gcp_pmf(g, 1.3, n) for n in range(9)], rtol=1e-12)


class TestGeneral:
    def test_factor_examples(self):
        assert factor_rate_polynomial([2, 1], 1) == FactoredPolynomial((-1.0,), (2,))
        fp = factor_rate_polynomial([3, 3, 1], 1)
        assert fp.multiplicities == (3,) and fp.roots[0] == pytest.approx(-1, abs=1e-9)
        assert factor_rate_polynomial([1], 5) == FactoredPolynomial((-5.0,), (1,))

    def test_factor_reproduces_coefficients(self):
        fp = factor_rate_polynomial([5, 4, 1], 2)
        assert fp.multiplicities == (1, 2)
        np.testing.assert_allclose(fp.coefficients(), [2, 5, 4, 1], rtol=1e-12)

    def test_complex_roots(self):
        with pytest.raises(ComplexRootsError):
            factor_rate_polynomial([1, 1], 1)

    def test_perfect_square_matches_pair(self):
        # s^{2nu} + 2 lam s^nu + lam^2: roots -lam (double)
        lam, nu = 1.0, 0.3
        fp = factor_rate_polynomial([2 * lam, 1], lam**2)
        tc = TimeChangeParams.stable_pair(nu, lam)
        for n in range(6):
            assert abs(general_tc_pmf(fp, [2 * lam, 1], lam**2, nu, 1.0, n) - tc_poisson_pmf(tc, lam**2, 1.0, n)) < 1e-8

    @pytest.mark.parametrize("lam", [1.0, 0.7])
    def test_binomial_case(self, lam):
        N, nu = 3, 0.3
        mus = [math.comb(N, j) * lam ** (N - j) for j in range(1, N + 1)]
        fp = factor_rate_polynomial(mus, lam**N)
        for n in range(4):
            a = general_tc_pmf(fp, mus, lam**N, nu, 1.0, n)
            assert abs(a - binomial_tc_pmf(N, lam, nu, 1.0, n)) < 1e-8

    def test_binomial_printed_form_at_unit_rate(self):
        # at lam = 1 the single-root formula sum_j C(N,j) (lam t)^{delta_j-1} E^{N(n+1)}_{nu,delta_j}(-lam t^nu)
        N, nu, t = 2, 0.4, 1.3
        for n in range(3):
            printed = sum(
                math.comb(N, j) * t ** (nu * (N * (n + 1) - j)) * mittag_leffler(-(t**nu), nu, nu * (N * (n + 1) - j) + 1, N * (n + 1))
                for j in range(1, N + 1)
            )
            assert binomial_tc_pmf(N, 1.0, nu, t, n) == pytest.approx(printed, abs=1e-10)

    @pytest.mark.parametrize("t", [0.5, 1.0, 2.0])
    def test_three_roots_against_inversion(self, t):
        mus, Lambda, nu = [5, 4, 1], 2.0, 0.3
        fp = factor_rate_polynomial(mus, Lambda)
        tc = TimeChangeParams.general(mus, [nu, 2 * nu, 3 * nu])
        for n in range(6):
            assert abs(general_tc_pmf(fp, mus, Lambda, nu, t, n) - tc_pmf_via_inversion(tc, Lambda, t, n)) < 1e-6

    def test_non_monic(self):
        mus, Lambda, nu = [10, 8, 2], 4.0, 0.3
        fp = factor_rate_polynomial(mus, Lambda)
        tc = TimeChangeParams.general(mus, [nu, 2 * nu, 3 * nu])
        assert abs(general_tc_pmf(fp, mus, Lambda, nu, 1.0, 2) - tc_pmf_via_inversion(tc, Lambda, 1.0, 2)) < 1e-6

    def test_regime_checks(self):
        fp = factor_rate_polynomial([5, 4, 1], 2)
        with pytest.raises(RegimeError):
            general_tc_pmf(fp, [5, 4, 1], 2, 0.4, 1.0, 0)
        with pytest.raises(ValueError):
            general_tc_pmf(fp, [5, 4], 2, 0.3, 1.0, 0)

    def test_dispatch(self):
        tc = TimeChangeParams.general([5, 4, 1], [0.3, 0.6, 0.9])
        fp = factor_rate_polynomial([5, 4, 1], 2)
        assert clock_poisson_pmf(tc, 2.0, 1.0, 1) == general_tc_pmf(fp, [5, 4, 1], 2.0, 0.3, 1.0, 1)
        # complex roots fall back to inversion
        tc2 = TimeChangeParams.general([1, 1], [0.3, 0.6])
        assert clock_poisson_pmf(tc2, 1.0, 1.0, 1) == tc_pmf_via_inversion(tc2, 1.0, 1.0, 1)

    def test_normalisation(self):
        tc = TimeChangeParams.general([5, 4, 1], [0.3, 0.6, 0.9])
        assert sum(clock_poisson_pmf(tc, 2.0, 0.5, n) for n in range(40)) >= 1 - 1e-5


class TestTempered:
    @pytest.mark.parametrize("n", [0, 1, 2, 3])
    def test_against_inversion(self, n):
        tc = TimeChangeParams.tempered_pair(0.4, 1.0)
        assert abs(tempered_tc_pmf(0.4, 1.0, 1.0, 1.0, n) - tc_pmf_via_inversion(tc, 1.0, 1.0, n)) < 1e-5

    def test_complex_roots_against_inversion(self):
        # lam > C + 1/4 makes r_{1,2} complex conjugate
        tc = TimeChangeParams.tempered_pair(0.3, 0.5)
        for n in range(3):
            assert abs(tempered_tc_pmf(0.3, 0.5, 3.0, 1.0, n) - tc_pmf_via_inversion(tc, 3.0, 1.0, n)) < 1e-6

    def test_vanishing_tempering(self):
        # s^{2 alpha} + s^alpha is the stable pair with lam = 1/2
        tc = TimeChangeParams.stable_pair(0.4, 0.5)
        for n in range(4):
            assert abs(tempered_tc_pmf(0.4, 1e-4, 1.0, 1.0, n) - tc_poisson_pmf(tc, 1.0, 1.0, n)) < 1e-2

    def test_nonnegative(self):
        for t in (0.5, 1.0, 2.0):
            p = np.array([tempered_tc_pmf(0.4, 1.0, 1.0, t, n) for n in range(11)])
            assert np.all(p >= 0)

    @pytest.mark.parametrize("t", [0.5, 1.0])
    def test_normalisation(self, t):
        p = [tempered_tc_pmf(0.4, 1.0, 1.0, t, n) for n in range(30)]
        assert sum(p) >= 1 - 1e-5

    def test_validation(self):
        with pytest.raises(ValueError):
            tempered_tc_pmf(0.6, 1.0, 1.0, 1.0, 0)
        with pytest.raises(ValueError):
            tempered_tc_pmf(0.4, 0.0, 1.0, 1.0, 0)


class TestPgf:
    def test_total_mass(self):
        tc = TimeChangeParams.stable_pair(0.3, 1.0)
        g = GcpParams((0.4, 0.6))
        assert pgf(tc, g, 1.0, np.array([0.5, 1.0, 3.0])) == pytest.approx(1.0)

    def test_forms_agree(self):
        tc = TimeChangeParams.stable_pair(0.3, 1.0)
        gamma = 0.5 * (1 - 0.5)
        a = inverse_clock_laplace(tc, gamma, 1.0, form="ml")
        b = inverse_clock_laplace(tc, gamma, 1.0, form="roots")
        assert abs(a - b) < 1e-8
        assert abs(pgf(tc, GcpParams((0.5,)), 0.5, 1.0) - a) < 1e-15

    def test_forms_agree_with_inversion_beyond_real_roots(self):
        tc = TimeChangeParams.stable_pair(0.4, 0.5)
        for gamma in (0.1, 0.25, 1.0, 3.0):
            a = inverse_clock_laplace(tc, gamma, 1.0, form="ml")
            b = inverse_clock_laplace(tc, gamma, 1.0, form="inversion")
            assert abs(a - b) < 1e-8

    def test_roots_form_domain(self):
        with pytest.raises(RegimeError):
            inverse_clock_laplace(TimeChangeParams.stable_pair(0.3, 1.0), 2.0, 1.0, form="roots")

    def test_square_case(self):
        tc = TimeChangeParams.stable_pair(0.4, 1.0)
        a = pgf_square_case(0.4, 1.0, 0.25, 1.0)
        assert abs(a - pgf(tc, GcpParams((1.0,)), 0.25, 1.0)) < 1e-8

    @pytest.mark.parametrize("u", [0.25, 0.5, 0.9])
    def test_power_series(self, u):
        tc = TimeChangeParams.stable_pair(0.3, 1.1)
        g = GcpParams((0.4, 0.6))
        p = tc_gcp_pmf_vector(tc, g, 1.0, 60)
        assert abs(np.polynomial.polynomial.polyval(u, p) - pgf(tc, g, u, 1.0)) < 1e-6

    def test_negative_u(self):
        tc = TimeChangeParams.stable_pair(0.3, 1.0)
        g = GcpParams((0.7,))
        p = tc_gcp_pmf_vector(tc, g, 1.0, 60)
        assert abs(np.polynomial.polynomial.polyval(-0.5, p) - pgf(tc, g, -0.5, 1.0)) < 1e-6

    def test_domain(self):
        with pytest.raises(ValueError):
            pgf(TimeChangeParams.stable_pair(0.3, 1.0), GcpParams((1.0,)), 1.5, 1.0)
        with pytest.raises(ValueError):
            inverse_clock_laplace(TimeChangeParams.stable_pair(0.3, 1.0), -1.0, 1.0)


class TestPmfTable:
    def test_adaptive_truncation(self):
        tc = TimeChangeParams.stable_pair(0.3, 1.0)
        g = GcpParams((0.4, 0.6))
        tab = pmf_table(lambda m: tc_gcp_pmf_vector(tc, g, 1.0, m), 1.0)
        assert tab.mass_covered >= 1 - 1e-5
        assert tab.probs[:-1].sum() < 1 - 1e-5
        assert tab.meta["reached_target"]

    def test_cap(self):
        tab = pmf_table(lambda m: np.full(m + 1, 1e-4), 1.0, n_cap=20)
        assert tab.truncation_n == 20 and not tab.meta["reached_target"]

    def test_json_round_trip(self):
        tab = PmfTable(1.0, np.array([0.5, 0.25, 0.125]), {"nu": 0.3})
        back = PmfTable.from_json(tab.to_json())
        np.testing.assert_array_equal(back.probs, tab.probs)
        assert back.meta == {"nu": 0.3} and back.t == 1.0
        assert '"schema_version": 1' in tab.to_json()

    def test_csv(self):
        tab = PmfTable(1.0, np.array([0.1, 0.2]))
        lines = tab.to_csv().splitlines()
        assert lines[0] == "n,p_n"
        assert float(lines[2].split(",")[1]) == 0.2
        assert len(lines[2].split(",")[1].replace("0.", "").lstrip("0")) <= 17

    def test_invariants(self):
        with pytest.raises(ValueError):
            PmfTable(1.0, np.array([0.7, 0.6]))
        with pytest.raises(ValueError):
            PmfTable(1.0, np.array([-0.1]))


class TestGoverningEquations:
    def test_telegraph_equation(self):
        tc = TimeChangeParams.stable_pair(0.25, 1.0)
        r = residual_governing(lambda n, t: tc_poisson_pmf(tc, 1.0, t, n), 2.0, 1e-2, nu=0.25, lam=1.0, Lambda=1.0)
        assert r < 1e-2

    def test_general_three_term_equation(self):
        mus, Lambda, nu = [5, 4, 1], 2.0, 0.3
        fp = factor_rate_polynomial(mus, Lambda)
        ops = [OperatorTerm(m, (j + 1) * nu) for j, m in enumerate(mus)]
        r = residual_governing(lambda n, t: general_tc_pmf(fp, mus, Lambda, nu, t, n), 2.0, 1e-2, operator=ops, Lambda=Lambda)
        assert r < l1_threshold(ops, 1e-2)

    def test_gcp_equation(self):
        # f(D) p_n = -Lambda p_n + sum_j lambda_j p_{n-j}
        tc = TimeChangeParams.stable_pair(0.3, 1.0)
        g = GcpParams((0.4, 0.6))
        ops = [OperatorTerm(1.0, 0.6), OperatorTerm(2.0, 0.3)]
        W = compound_weights(g, 5)

        def pmf(n, t):
            return sum(W[r, n] * tc_poisson_pmf(tc, g.Lambda, t, r) for r in range(n + 1))

        r = residual_governing(pmf, 2.0, 1e-2, operator=ops, rates=g.rates)
        assert r < l1_threshold(ops, 1e-2)

    def test_clock_transform_is_completely_monotone_in_time(self):
        tc = TimeChangeParams.stable_pair(0.3, 1.0)
        v = inverse_clock_laplace(tc, 0.5, np.linspace(0.1, 2, 20))
        assert np.all(v > 0) and np.all(np.diff(v) < 0)
