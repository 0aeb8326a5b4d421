import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from phaselab import DomainError
from phaselab.vmf import (
    VmfMoments,
    log_vmf_normalization,
    order_parameter,
    order_parameter_prime,
    vmf_moment,
    vmf_moments,
    vmf_normalization,
)

KAPPAS = np.concatenate([[0.0, 1e-8, 1e-4, 0.1], np.linspace(0.5, 30.0, 60)])


class TestClosedForms:
    def test_circle_matches_bessel_ratio(self):
        ours = order_parameter(KAPPAS, 2)
        ref = np.array([oracles.c_circle(k) for k in KAPPAS])
        np.testing.assert_allclose(ours, ref, atol=1e-10, rtol=0)

    def test_sphere_matches_langevin(self):
        ours = order_parameter(KAPPAS[1:], 3)
        ref = np.array([oracles.c_sphere(k) for k in KAPPAS[1:]])
        np.testing.assert_allclose(ours, ref, atol=1e-10, rtol=0)

    @pytest.mark.parametrize(
        "kappa, n, expected",
        [(1.0, 3, 1.1752011936), (1.0, 2, 1.2660658778), (0.0, 2, 1.0), (0.0, 5, 1.0)],
    )
    def test_normalization_values(self, kappa, n, expected):
        assert vmf_normalization(kappa, n) == pytest.approx(expected, abs=1e-10)

    @pytest.mark.parametrize("kappa", [0.3, 2.0, 12.0, 40.0])
    def test_normalization_against_oracles(self, kappa):
        assert vmf_normalization(kappa, 2) == pytest.approx(oracles.z_circle(kappa), rel=1e-12)
        assert vmf_normalization(kappa, 3) == pytest.approx(oracles.z_sphere(kappa), rel=1e-12)

    def test_spec_examples(self):
        assert order_parameter(1.0, 3) == pytest.approx(0.3130352855, abs=1e-10)
        assert order_parameter(1.0, 2) == pytest.approx(0.4463899659, abs=1e-10)

    def test_log_normalization_finite_for_huge_kappa(self):
        val = log_vmf_normalization(5000.0, 3)
        # log(sinh k / k) = k - log(2k) + log(1 - e^{-2k})
        assert val == pytest.approx(5000.0 - math.log(10000.0), rel=1e-12)


class TestDerivative:
    @pytest.mark.parametrize("n", [2, 3])
    def test_matches_finite_difference(self, n):
        for k in np.linspace(0.05, 20.0, 25):
            fd = oracles.c_prime_fd(lambda x: order_parameter(x, n), k)
            assert order_parameter_prime(k, n) == pytest.approx(fd, rel=1e-6)

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_value_at_zero(self, n):
        assert order_parameter_prime(0.0, n) == pytest.approx(1.0 / n, abs=1e-15)

    @pytest.mark.parametrize("n", [2, 3])
    def test_is_variance_of_cos(self, n):
        for k in (0.5, 5.0):
            var = vmf_moment(k, n, lambda u: u**2) - order_parameter(k, n) ** 2
            assert order_parameter_prime(k, n) == pytest.approx(var, abs=1e-12)

    @pytest.mark.parametrize("n", [2, 3])
    def test_large_kappa_decay_rate(self, n):
        ks = np.geomspace(50.0, 2000.0, 8)
        slope = np.polyfit(np.log(ks), np.log(order_parameter_prime(ks, n)), 1)[0]
        assert slope == pytest.approx(-2.0, abs=0.02)
        assert np.all(np.diff(order_parameter_prime(ks, n)) < 0)

    @pytest.mark.parametrize("n", [2, 3])
    def test_large_kappa_crossover_is_continuous(self, n):
        _, c_lo, cp_lo = vmf_moments(500.0, n)
        _, c_hi, cp_hi = vmf_moments(np.nextafter(500.0, 600.0), n)
        assert abs(c_lo - c_hi) < 1e-12
        assert abs(cp_lo - cp_hi) < 1e-12

    @pytest.mark.parametrize("kappa", [600.0, 5000.0])
    def test_large_kappa_series_matches_bessel_ratio(self, kappa):
        assert order_parameter(kappa, 2) == pytest.approx(oracles.c_circle(kappa), abs=1e-14)


class TestProperties:
    @pytest.mark.parametrize("n", [2, 3])
    @pytest.mark.parametrize("kappa", [0.0, 0.1, 1.0, 5.0, 20.0])
    def test_mean_of_one(self, n, kappa):
        assert vmf_moment(kappa, n, np.ones_like) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("n", [2, 3])
    def test_monotone(self, n):
        c = order_parameter(np.linspace(0.0, 50.0, 200), n)
        assert np.all(np.diff(c) > 0)
        assert c[0] == 0.0 and c[-1] < 1.0

    @pytest.mark.parametrize("n", [2, 3])
    def test_small_kappa_expansion_order(self, n):
        # below about 1e-2 the O(kappa^5) residual drops under round-off
        ks = np.geomspace(1e-2, 2e-1, 8)
        resid = np.abs(order_parameter(ks, n) - ks / n + ks**3 / (n**2 * (n + 2)))
        slope = np.polyfit(np.log(ks), np.log(resid), 1)[0]
        assert slope == pytest.approx(5.0, abs=0.15)

    def test_moment_of_cos_is_c(self):
        assert vmf_moment(3.0, 2, lambda u: u) == pytest.approx(order_parameter(3.0, 2), abs=1e-13)

    def test_bundle(self):
        m = VmfMoments(2.0, 3)
        assert m.c == pytest.approx(oracles.c_sphere(2.0), abs=1e-12)
        assert m.z == pytest.approx(math.sinh(2.0) / 2.0, rel=1e-12)
        assert "kappa=2.0" in repr(m)

    @settings(max_examples=60, deadline=None)
    @given(st.floats(0.0, 200.0), st.sampled_from([2, 3, 4]))
    def test_range(self, kappa, n):
        _, c, cp = vmf_moments(kappa, n)
        assert 0.0 <= c < 1.0
        assert cp > 0.0


class TestErrors:
    @pytest.mark.parametrize("bad", [-1.0, math.nan, math.inf])
    def test_bad_kappa(self, bad):
        with pytest.raises(DomainError):
            order_parameter(bad, 2)

    def test_bad_dimension(self):
        with pytest.raises(DomainError):
            order_parameter(1.0, 1)
