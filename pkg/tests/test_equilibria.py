import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize

import oracles
from phaselab import ConsistencyError, DomainError
from phaselab.equilibria import (
    Stability,
    critical_densities,
    critical_exponent_fit,
    crossing_density,
    equilibrium_free_energy,
    phase_diagram,
    ratio_j_over_c,
    ratio_slope,
    solve_compatibility,
    uniform_stability,
    unimodality_violations,
)
from phaselab.model import custom_beta, hysteresis, linear, regularized_1, regularized_2
from phaselab.vmf import log_vmf_normalization, order_parameter

HYST = hysteresis()


def hysteresis_ratio_oracle(kappa, n):
    """``j/c`` for ``k = r + r^2`` built from the Bessel or Langevin oracle."""
    j = 0.5 * (math.sqrt(1 + 4 * kappa) - 1)
    c = oracles.c_circle(kappa) if n == 2 else oracles.c_sphere(kappa)
    return j / c


class TestRatio:
    @pytest.mark.parametrize("n", [2, 3])
    def test_limit_at_zero_is_rho_c(self, n):
        assert ratio_j_over_c(HYST, n, 0.0) == n
        assert ratio_j_over_c(HYST, n, 1e-7) == pytest.approx(n, rel=1e-6)

    def test_small_kappa_expansion(self):
        # n (1 - kappa) + O(kappa^2) for the hysteresis model
        for k in (1e-3, 1e-2):
            assert ratio_j_over_c(HYST, 2, k) == pytest.approx(2 * (1 - k), abs=5 * k**2)

    @pytest.mark.parametrize("n", [2, 3])
    def test_against_oracle(self, n):
        for k in (0.3, 1.2619, 4.0, 15.0):
            assert ratio_j_over_c(HYST, n, k) == pytest.approx(hysteresis_ratio_oracle(k, n), rel=1e-11)

    def test_linear_model(self):
        for k in (0.5, 3.0):
            assert ratio_j_over_c(linear(), 2, k) == pytest.approx(k / oracles.c_circle(k), rel=1e-11)

    def test_slope_matches_finite_difference(self):
        for k in (0.4, 1.0, 3.0):
            h = 1e-5
            fd = (ratio_j_over_c(HYST, 2, k + h) - ratio_j_over_c(HYST, 2, k - h)) / (2 * h)
            assert ratio_slope(HYST, 2, k) == pytest.approx(fd, rel=1e-6, abs=1e-9)

    def test_blows_up_at_kappa_max(self):
        m = regularized_1(0.5, 1.0 / 3.0)
        assert ratio_j_over_c(m, 2, 3.0 * (1 - 1e-9)) > 1e7


class TestCriticalDensities:
    @pytest.mark.parametrize(
        "n, rho_star, kappa_star", [(2, 1.3726, 1.2619), (3, 1.8602, 1.9014)]
    )
    def test_hysteresis(self, n, rho_star, kappa_star):
        cd = critical_densities(HYST, n)
        assert cd.rho_c == n
        assert cd.rho_star == pytest.approx(rho_star, abs=1e-4)
        assert cd.kappa_star == pytest.approx(kappa_star, abs=1e-4)

    @pytest.mark.parametrize("n", [2, 3])
    def test_hysteresis_against_oracle_minimizer(self, n):
        res = optimize.minimize_scalar(
            lambda k: hysteresis_ratio_oracle(k, n), bounds=(0.5, 4.0), method="bounded", options={"xatol": 1e-10}
        )
        cd = critical_densities(HYST, n)
        assert cd.rho_star == pytest.approx(res.fun, abs=1e-10)
        assert cd.kappa_star == pytest.approx(res.x, abs=1e-6)

    def test_linear_is_second_order(self):
        cd = critical_densities(linear(), 2)
        assert (cd.rho_c, cd.rho_star, cd.kappa_star) == (2.0, 2.0, 0.0)

    @pytest.mark.parametrize(
        "model",
        [linear(), HYST, regularized_1(0.5, 1 / 3), regularized_2(0.2, 0.5), custom_beta(0.4, 2)],
        ids=lambda m: m.name,
    )
    def test_ordering(self, model):
        cd = critical_densities(model, 2)
        assert cd.rho_star <= cd.rho_c


class TestCompatibility:
    def test_below_rho_star(self):
        roots = solve_compatibility(HYST, 2, 1.2)
        assert [r.kappa for r in roots] == [0.0]
        assert roots[0].stability is Stability.STABLE

    def test_bistable(self):
        roots = solve_compatibility(HYST, 2, 1.5)
        assert len(roots) == 3
        _, low, high = roots
        assert 0 < low.kappa < 1.2619 < high.kappa
        assert low.stability is Stability.UNSTABLE and high.stability is Stability.STABLE
        assert roots[0].stability is Stability.STABLE

    def test_above_rho_c(self):
        roots = solve_compatibility(HYST, 2, 3.0)
        assert len(roots) == 2
        assert roots[0].stability is Stability.UNSTABLE
        assert roots[1].stability is Stability.STABLE

    @pytest.mark.parametrize("rho", [1.4, 1.8, 2.5, 6.0])
    def test_residual(self, rho):
        for r in solve_compatibility(HYST, 2, rho)[1:]:
            j = float(HYST.j(r.kappa))
            assert abs(rho * order_parameter(r.kappa, 2) - j) <= 1e-10 * max(1.0, j)

    def test_stability_matches_slope_sign(self):
        for rho in np.linspace(1.38, 4.0, 15):
            for r in solve_compatibility(HYST, 2, float(rho))[1:]:
                assert (r.stability is Stability.STABLE) == (ratio_slope(HYST, 2, r.kappa) > 0)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(1.38, 2.6).filter(lambda x: abs(x - 2.0) > 1e-3))
    def test_parity_across_rho_c(self, rho):
        positive = len(solve_compatibility(HYST, 2, rho)) - 1
        assert positive == (2 if rho < 2.0 else 1)

    @pytest.mark.parametrize(
        "rho, expected", [(1.9, Stability.STABLE), (2.1, Stability.UNSTABLE), (1e-9, Stability.STABLE)]
    )
    def test_uniform_stability(self, rho, expected):
        assert uniform_stability(HYST, 2, rho) is expected

    def test_uniform_stability_marginal(self):
        assert uniform_stability(HYST, 2, 2.0) is Stability.MARGINAL

    def test_rejects_bad_density(self):
        with pytest.raises(DomainError):
            solve_compatibility(HYST, 2, -1.0)


class TestPhaseDiagram:
    def test_hysteresis_structure(self):
        grid = np.linspace(1.0, 3.0, 81)
        d = phase_diagram(HYST, 2, grid)
        assert d.branch_range(0) == (1.0, 3.0)
        lo_u, hi_u = d.branch_range(1)
        lo_s, hi_s = d.branch_range(2)
        step = grid[1] - grid[0]
        assert 1.3726 <= lo_s < 1.3726 + step and hi_s == 3.0
        assert 1.3726 <= lo_u and hi_u < 2.0
        assert all(p[3] is Stability.UNSTABLE for p in d.branches[1])
        assert all(p[3] is Stability.STABLE for p in d.branches[2])
        kappas = [p[1] for p in d.branches[2]]
        assert np.all(np.diff(kappas) > 0)
        assert np.all(np.diff([p[1] for p in d.branches[1]]) < 0)

    def test_linear_single_branch(self):
        d = phase_diagram(linear(), 2, np.linspace(1.0, 3.0, 21))
        assert sorted(d.branches) == [0, 1]
        assert d.branch_range(1)[0] > 2.0

    def test_custom_beta_half_law(self):
        m = custom_beta(0.5, 2)
        for rho in (1.001, 1.01, 1.05):
            k = solve_compatibility(m, 2, rho)[1].kappa
            assert k == pytest.approx((rho - 1) ** 0.5, rel=1e-8)

    def test_rows_and_free_energy(self):
        d = phase_diagram(HYST, 2, [1.5, 2.5])
        rows = d.rows()
        assert [r[0] for r in rows] == sorted(r[0] for r in rows)
        assert all(len(r) == 6 for r in rows)

    @pytest.mark.parametrize("grid", [[], [2.0, 1.0], [-1.0, 1.0]])
    def test_bad_grids(self, grid):
        with pytest.raises(DomainError):
            phase_diagram(HYST, 2, grid)


class TestFreeEnergy:
    def test_uniform(self):
        assert equilibrium_free_energy(HYST, 2, 1.0, 0.0) == 0.0
        assert equilibrium_free_energy(HYST, 2, 2.5, 0.0) == pytest.approx(2.5 * math.log(2.5))

    @pytest.mark.parametrize("rho", [1.5, 2.5, 4.0])
    def test_hysteresis_closed_form(self, rho):
        for r in solve_compatibility(HYST, 2, rho)[1:]:
            k = r.kappa
            j = 0.5 * (math.sqrt(1 + 4 * k) - 1)
            log_z = math.log(oracles.z_circle(k))
            closed = rho * math.log(rho) - rho * log_z - (k - j) / 6 + 2 * j * k / 3
            assert equilibrium_free_energy(HYST, 2, rho, k) == pytest.approx(closed, abs=1e-10)

    def test_unstable_branch_above_uniform(self):
        for rho in np.linspace(1.38, 1.99, 12):
            roots = solve_compatibility(HYST, 2, float(rho))
            unstable = [r for r in roots if r.stability is Stability.UNSTABLE and r.kappa > 0]
            for r in unstable:
                assert equilibrium_free_energy(HYST, 2, float(rho), r.kappa) > rho * math.log(rho)

    def test_crossing_density(self):
        rho1, kappa1, changes = crossing_density(HYST, 2)
        assert changes == 1
        assert 1.3726 < rho1 < 2.0
        f_branch = equilibrium_free_energy(HYST, 2, rho1, kappa1)
        assert f_branch == pytest.approx(rho1 * math.log(rho1), abs=1e-10)
        # below rho_1 the stable branch has the larger free energy, above it the smaller
        for rho, sign in ((rho1 - 0.02, 1), (rho1 + 0.02, -1)):
            k = solve_compatibility(HYST, 2, rho)[-1].kappa
            diff = equilibrium_free_energy(HYST, 2, rho, k) - rho * math.log(rho)
            assert np.sign(diff) == sign

    def test_crossing_density_needs_first_order(self):
        with pytest.raises(DomainError):
            crossing_density(linear(), 2)

    def test_rejects_non_equilibrium(self):
        with pytest.raises(ConsistencyError):
            equilibrium_free_energy(HYST, 2, 1.5, 3.0)

    def test_uses_log_normalization(self):
        k = solve_compatibility(HYST, 3, 4.0)[-1].kappa
        c = order_parameter(k, 3)
        j = float(HYST.j(k))
        expected = 4.0 * math.log(4.0) + 4.0 * (k * c - log_vmf_normalization(k, 3)) - (j**2 / 2 + j**3 / 3)
        assert equilibrium_free_energy(HYST, 3, 4.0, k) == pytest.approx(expected, rel=1e-13)


class TestStructure:
    def test_hysteresis_unimodal(self):
        assert unimodality_violations(HYST, 2, 50.0) == []
        assert unimodality_violations(HYST, 3, 50.0) == []

    @pytest.mark.parametrize("model", [linear(), regularized_1(0.3, 1 / 3)], ids=lambda m: m.name)
    def test_nonincreasing_k_over_r_gives_positive_slope(self, model):
        top = min(30.0, model.kappa_max * 0.99)
        assert np.all(ratio_slope(model, 2, np.linspace(0.01, top, 200)) > 0)

    def test_first_order_has_no_exponent(self):
        fit = critical_exponent_fit(HYST, 2)
        assert not fit.ok
        assert "first-order" in fit.reason
