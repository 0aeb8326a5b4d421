import csv
import math
from types import SimpleNamespace

import numpy as np
import pytest
from scipy import stats

from phaselab import DomainError
from phaselab.equilibria import solve_compatibility
from phaselab.kinetic1d import HysteresisProtocol
from phaselab.model import hysteresis
from phaselab.particles import (
    init_from_angles,
    init_uniform,
    mean_current,
    rayleigh_baseline,
    run_fixed_density,
    run_hysteresis_particles,
    step_splitting,
    write_snapshot,
)
from phaselab.vmf import order_parameter

HYST = hysteresis()


def coefficients(nu, tau):
    """Minimal stand-in exposing constant ``nu`` and ``tau``."""
    return SimpleNamespace(nu=lambda r: nu, tau=lambda r: tau)


class TestEnsemble:
    def test_single_particle_is_aligned(self):
        e = init_from_angles([1.3])
        assert np.hypot(*e.current()) == pytest.approx(1.0, abs=1e-15)

    def test_symmetric_angles_cancel(self):
        J = mean_current(np.array([0.0, 0.5, 1.0, 1.5]) * np.pi)
        np.testing.assert_allclose(J, 0.0, atol=1e-15)

    def test_angles_wrapped(self):
        e = init_from_angles([-0.5, 7.0])
        assert np.all((e.angles >= 0) & (e.angles < 2 * np.pi))
        np.testing.assert_allclose(e.omegas, np.column_stack((np.cos([-0.5, 7.0]), np.sin([-0.5, 7.0]))), atol=1e-15)

    def test_seeded_initialization_is_reproducible(self):
        np.testing.assert_array_equal(init_uniform(100, 7).angles, init_uniform(100, 7).angles)
        assert not np.array_equal(init_uniform(100, 7).angles, init_uniform(100, 8).angles)

    @pytest.mark.parametrize("bad", [[], None])
    def test_rejects_empty(self, bad):
        with pytest.raises(DomainError):
            if bad is None:
                init_uniform(0)
            else:
                init_from_angles(bad)


class TestStep:
    def test_noise_free_aligned_ensemble_is_fixed(self):
        e = init_from_angles(np.full(50, 2.0))
        rng = np.random.default_rng(0)
        for _ in range(20):
            e = step_splitting(e, 1.5, 0.01, rng, coefficients(3.0, 0.0))
        np.testing.assert_allclose(e.angles, 2.0, atol=1e-14)
        assert e.t == pytest.approx(0.2)

    def test_pure_diffusion_variance(self):
        e = init_from_angles(np.full(20000, np.pi))
        rng = np.random.default_rng(1)
        for _ in range(10):
            e = step_splitting(e, 1.0, 0.01, rng, coefficients(0.0, 1.0))
        var = np.var(e.angles - np.pi)
        # variance 2 tau t = 0.2; sampling error about 0.2 * sqrt(2/N)
        assert var == pytest.approx(0.2, rel=0.03)

    def test_exact_drift_matches_ode(self):
        # noise-free relaxation toward phi: tan(psi/2) shrinks like exp(-nu t)
        e = init_from_angles([0.0, 0.0, 0.0, 1.0])
        phi = math.atan2(*mean_current(e.angles)[::-1])
        e1 = step_splitting(e, 1.0, 0.5, np.random.default_rng(0), coefficients(2.0, 0.0))
        psi = 1.0 - phi
        expected = phi + 2 * math.atan(math.tan(psi / 2) * math.exp(-1.0))
        assert e1.angles[3] == pytest.approx(expected, abs=1e-14)

    def test_euler_and_exact_agree_for_small_steps(self):
        e = init_uniform(200, 3)
        a = step_splitting(e, 2.0, 1e-4, np.random.default_rng(5), coefficients(2.0, 0.0), scheme="exact")
        b = step_splitting(e, 2.0, 1e-4, np.random.default_rng(5), coefficients(2.0, 0.0), scheme="euler")
        np.testing.assert_allclose(a.angles, b.angles, atol=1e-8)

    @pytest.mark.parametrize("kw", [dict(dt=0.0), dict(scheme="rk4")])
    def test_rejects(self, kw):
        args = dict(dt=0.01, scheme="exact") | kw
        with pytest.raises(DomainError):
            step_splitting(init_uniform(4, 0), 1.0, args["dt"], np.random.default_rng(0), HYST, scheme=args["scheme"])


class TestRuns:
    def test_deterministic_for_fixed_seed(self):
        e = init_uniform(300, 11)
        t1, e1 = run_fixed_density(HYST, e, 2.5, 1.0, seed=4)
        t2, e2 = run_fixed_density(HYST, e, 2.5, 1.0, seed=4)
        np.testing.assert_array_equal(e1.angles, e2.angles)
        np.testing.assert_array_equal(t1.order_parameter, t2.order_parameter)

    def test_ordered_plateau(self):
        k = solve_compatibility(HYST, 2, 3.0)[-1].kappa
        tr, _ = run_fixed_density(HYST, init_uniform(2000, 2), 3.0, 30.0, seed=2, record_every=50)
        plateau = tr.order_parameter[tr.times >= 20.0].mean()
        assert plateau == pytest.approx(order_parameter(k, 2), abs=0.02)

    def test_disordered_stays_near_baseline(self):
        tr, _ = run_fixed_density(HYST, init_uniform(2000, 3), 1.0, 20.0, seed=3, record_every=20)
        assert tr.order_parameter[tr.times >= 5.0].mean() < 3 * rayleigh_baseline(2000)

    def test_short_hysteresis_run(self):
        p = HysteresisProtocol(T=5.0, dt=0.01)
        tr = run_hysteresis_particles(HYST, p, N=200, seed=1, realizations=2)
        assert tr.meta["realizations"] == 2
        assert tr.times[-1] == pytest.approx(10.0)
        assert tr.rho[0] == pytest.approx(1.0, abs=1e-3)

    def test_realizations_validated(self):
        with pytest.raises(DomainError):
            run_hysteresis_particles(HYST, HysteresisProtocol(T=1.0), N=10, realizations=0)


class TestRayleighBaseline:
    @pytest.mark.parametrize("N, expected", [(1, 0.886226925), (10000, 0.00886226925)])
    def test_values(self, N, expected):
        assert rayleigh_baseline(N) == pytest.approx(expected, rel=1e-9)

    def test_independent_angles_follow_rayleigh(self):
        N = 1000
        samples = [np.hypot(*init_uniform(N, s).current()) for s in range(500)]
        res = stats.kstest(samples, stats.rayleigh(scale=1 / math.sqrt(2 * N)).cdf)
        assert res.pvalue > 0.01
        assert np.mean(samples) == pytest.approx(rayleigh_baseline(N), rel=0.05)


def test_snapshot(tmp_path):
    e = init_from_angles([0.25, 1.5, 3.0])
    path = tmp_path / "snap.csv"
    write_snapshot(e, path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["index", "theta"]
    np.testing.assert_array_equal([float(r[1]) for r in rows[1:]], e.angles)
