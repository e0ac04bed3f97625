import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from singfourier.exceptions import FitError
from singfourier.kernels import (BoundedWeight, DensityFunction, PowerLawExponent,
                                 SingularMeasure, ball_mass, cumulative_mass,
                                 estimate_holder_exponent, kernel_eval, measure_mass)


def kernel_by_quad(beta, f, x):
    """Independent oracle: int_0^1 y^-beta f(x - y) dy, split at the kinks of f."""
    lo, hi = max(0.0, x - f.support[1]), min(1.0, x - f.support[0])
    if hi <= lo:
        return 0.0
    cuts = sorted({lo, hi, *[p for p in (x - b for b in f.breakpoints) if lo < p < hi]})
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        if a == 0.0:
            val, _ = integrate.quad(lambda y: f(x - y), a, b, weight="alg", wvar=(-beta, 0.0),
                                    epsabs=1e-15, epsrel=1e-13)
        else:
            val, _ = integrate.quad(lambda y: y ** -beta * f(x - y), a, b,
                                    epsabs=1e-15, epsrel=1e-13)
        total += val
    return total


class TestExponent:
    @pytest.mark.parametrize("b", [-0.1, 1.0, 1.5, float("nan")])
    def test_rejects_out_of_range(self, b):
        with pytest.raises(ValueError):
            PowerLawExponent(b)

    @pytest.mark.parametrize("b,regime", [(0.2, "sub-critical"), (0.5, "critical"),
                                          (0.5 + 1e-13, "critical"), (0.5 + 1e-9, "super-critical")])
    def test_regime(self, b, regime):
        assert PowerLawExponent(b).regime == regime


class TestKernelValues:
    def test_disjoint_support_gives_zero(self, chi):
        assert kernel_eval(0.5, chi, -1.0) == 0.0

    def test_full_overlap(self, chi):
        assert kernel_eval(0.5, chi, 1.0) == pytest.approx(2.0, abs=1e-12)

    def test_partial_overlap(self, chi):
        assert kernel_eval(0.5, chi, 1.5) == pytest.approx(2 * (1 - math.sqrt(0.5)), abs=1e-12)

    def test_power_density_lower_bound_and_oracle(self):
        f = DensityFunction.power_law_delta(0.1)
        val = kernel_eval(0.75, f, 0.25)
        assert val >= 0.25 ** -0.65
        # int_0^x y^-b (x-y)^(d-1) dy = x^(d-b) B(1-b, d)
        assert val == pytest.approx(0.25 ** -0.65 * special.beta(0.25, 0.1), rel=1e-10)

    @pytest.mark.parametrize("x", [0.05, 0.4, 0.99, 1.0, 1.2, 1.7, 1.999])
    @pytest.mark.parametrize("beta,delta", [(0.3, 0.5), (0.75, 0.1), (0.9, 0.05)])
    def test_power_density_against_quadrature(self, beta, delta, x):
        f = DensityFunction.power_law_delta(delta)
        if x <= 1:
            oracle, _ = integrate.quad(lambda y: 1.0, 0.0, x, weight="alg",
                                       wvar=(-beta, delta - 1), epsabs=1e-14)
        else:
            # x - y stays in [x - 1, 1], so the integrand is smooth here
            oracle, _ = integrate.quad(lambda y: y ** -beta * (x - y) ** (delta - 1), x - 1, 1.0,
                                       epsabs=1e-14, limit=200)
        assert kernel_eval(beta, f, x) == pytest.approx(oracle, rel=1e-9, abs=1e-12)

    def test_tabulated_against_quadrature(self):
        grid = np.linspace(-0.3, 0.8, 12)
        f = DensityFunction.tabulated(grid, 1.0 + np.sin(5 * grid) ** 2)
        for x in [-0.2, 0.0, 0.33, 0.8, 1.1, 1.79]:
            assert kernel_eval(0.6, f, x) == pytest.approx(kernel_by_quad(0.6, f, x), abs=1e-10)

    def test_tabulated_indicator_reproduces_closed_form(self):
        f = DensityFunction.tabulated([0.0, 1e-12, 1.0], [0.0, 1.0, 1.0])
        x = np.linspace(-0.5, 2.5, 61)
        np.testing.assert_allclose(kernel_eval(0.4, f, x),
                                   kernel_eval(0.4, DensityFunction.indicator_unit(), x),
                                   atol=1e-10)

    def test_rejects_nonfinite(self, chi):
        with pytest.raises(ValueError):
            kernel_eval(0.5, chi, float("inf"))

    def test_array_and_scalar_agree(self, chi):
        x = np.array([0.1, 0.7, 1.3])
        np.testing.assert_array_equal(kernel_eval(0.3, chi, x),
                                      [kernel_eval(0.3, chi, v) for v in x])

    @pytest.mark.parametrize("c", [0.5, 2.0])
    def test_linear_in_density(self, c, rng):
        x = rng.uniform(-0.5, 2.5, 100)
        for f in (DensityFunction.indicator_unit(), DensityFunction.power_law_delta(0.3)):
            np.testing.assert_allclose(kernel_eval(0.7, f.scaled(c), x),
                                       c * kernel_eval(0.7, f, x), rtol=1e-14)

    @pytest.mark.parametrize("beta,delta", [(0.75, 0.1), (0.5, 0.02), (0.9, 0.5)])
    def test_power_density_lower_bound_on_grid(self, beta, delta):
        x = np.linspace(1e-3, 1.0, 1000)
        f = DensityFunction.power_law_delta(delta)
        assert np.all(kernel_eval(beta, f, x) >= x ** (delta - beta) * (1 - 1e-13))

    @settings(max_examples=50)
    @given(st.floats(0.0, 0.95), st.floats(-1.0, 3.0))
    def test_nonnegative(self, beta, x):
        assert kernel_eval(beta, DensityFunction.power_law_delta(0.2), x) >= 0.0


class TestMass:
    def test_indicator_half(self, chi):
        assert measure_mass(SingularMeasure(0.5, chi)) == pytest.approx(2.0, rel=1e-8)

    def test_lebesgue_convolution(self, chi):
        assert measure_mass(SingularMeasure(0.0, chi)) == pytest.approx(1.0, rel=1e-8)

    @pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
    def test_fubini_factorisation(self):
        mu = SingularMeasure(0.75, DensityFunction.power_law_delta(0.2))
        oracle, _ = integrate.dblquad(
            lambda y, x: y ** -0.75 * (x - y) ** -0.8 if 0 < x - y <= 1 else 0.0,
            0.0, 2.0, lambda x: max(0.0, x - 1.0), lambda x: min(1.0, x), epsabs=1e-6)
        assert measure_mass(mu) == pytest.approx(20.0, rel=1e-8)
        assert oracle == pytest.approx(20.0, rel=1e-3)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.0, 0.9), st.floats(0.05, 0.9), st.floats(0.1, 3.0))
    def test_young_bound(self, beta, delta, scale):
        grid = np.linspace(0.0, 2.0, 9)
        g = BoundedWeight.tabulated(grid, 0.5 + 0.5 * np.cos(3 * grid) ** 2, scale)
        mu = SingularMeasure(beta, DensityFunction.power_law_delta(delta), g)
        assert measure_mass(mu) <= mu.young_bound * (1 + 1e-10)


class TestBalls:
    def test_outside_support(self, chi):
        assert ball_mass(SingularMeasure(0.5, chi), 5.0, 0.01) == 0.0

    def test_lower_bound_near_singularity(self):
        mu = SingularMeasure(0.5, DensityFunction.power_law_delta(0.1))
        for eps in (1e-4, 1e-3, 1e-2, 0.1):
            a = 1 - 0.5 + 0.1
            assert ball_mass(mu, eps / 2, eps / 2) >= eps ** a / a

    def test_tent_closed_form(self, chi):
        # K_{0,chi} is the tent x on [0,1], 2 - x on [1,2]
        assert ball_mass(SingularMeasure(0.0, chi), 1.0, 0.25) == pytest.approx(0.4375, rel=1e-7)

    @pytest.mark.parametrize("eps", [0.0, 1.0, -0.1])
    def test_rejects_bad_radius(self, chi, eps):
        with pytest.raises(ValueError):
            ball_mass(SingularMeasure(0.5, chi), 0.5, eps)

    def test_monotone_and_additive(self):
        mu = SingularMeasure(0.8, DensityFunction.power_law_delta(0.3))
        radii = np.linspace(0.01, 0.9, 25)
        masses = [ball_mass(mu, 0.2, r) for r in radii]
        assert np.all(np.diff(masses) >= 0)
        whole = ball_mass(mu, 0.3, 0.3)
        parts = [ball_mass(mu, 0.05, 0.05), ball_mass(mu, 0.2, 0.1), ball_mass(mu, 0.45, 0.15)]
        assert sum(parts) == pytest.approx(whole, rel=1e-9)

    def test_cdf_consistent_with_balls(self):
        mu = SingularMeasure(0.6, DensityFunction.power_law_delta(0.4))
        c = cumulative_mass(mu, [0.1, 0.5, 3.0])
        assert c[1] - c[0] == pytest.approx(ball_mass(mu, 0.3, 0.2), rel=1e-9)
        assert c[2] == pytest.approx(measure_mass(mu), rel=1e-9)


class TestHolder:
    def test_lebesgue_like(self, chi):
        assert estimate_holder_exponent(SingularMeasure(0.0, chi)) == pytest.approx(1.0, abs=0.05)

    def test_power_law_singularity(self):
        mu = SingularMeasure(0.75, DensityFunction.power_law_delta(0.1))
        assert estimate_holder_exponent(mu) == pytest.approx(0.35, abs=0.05)

    def test_indicator_kernel_is_bounded_so_exponent_near_one(self, chi):
        # K_{0.5,chi} <= 2 everywhere, so the largest balls grow linearly
        mu = SingularMeasure(0.5, chi)
        assert estimate_holder_exponent(mu) == pytest.approx(1.0, abs=0.05)
        eps = np.geomspace(1e-3, 0.1, 8)
        at_origin = [ball_mass(mu, 0.0, e) for e in eps]
        slope = np.polyfit(np.log(eps), np.log(at_origin), 1)[0]
        assert slope == pytest.approx(1.5, abs=0.02)

    def test_needs_eight_scales(self, chi):
        with pytest.raises(ValueError):
            estimate_holder_exponent(SingularMeasure(0.5, chi), eps_grid=np.geomspace(0.01, 0.1, 5))

    def test_degenerate_fit_is_an_error(self, chi):
        with pytest.raises(FitError):
            estimate_holder_exponent(SingularMeasure(0.5, chi), x_grid=np.array([10.0, 11.0]))


class TestSerialisation:
    def test_measure_round_trip(self):
        g = BoundedWeight.tabulated([0, 1, 2], [1, 0.5, 1])
        mu = SingularMeasure(0.6, DensityFunction.tabulated([0, 0.5, 1], [0, 2, 0], 1.5), g)
        back = SingularMeasure.from_dict(mu.to_dict())
        x = np.linspace(-0.5, 2.5, 50)
        np.testing.assert_array_equal(back.density(x), mu.density(x))
        assert mu.to_dict()["support"] == [0.0, 2.0]

    def test_density_norms(self):
        assert DensityFunction.power_law_delta(0.25).l1_norm == 4.0
        f = DensityFunction.tabulated([0.0, 1.0, 3.0], [0.0, 2.0, 0.0])
        assert f.l1_norm == pytest.approx(3.0, rel=1e-12)

    @pytest.mark.parametrize("kw", [dict(kind="power_law_delta", delta=1.0),
                                    dict(kind="tabulated", grid=[0, 1], values=[1, -1]),
                                    dict(kind="tabulated", grid=[1, 0], values=[1, 1]),
                                    dict(kind="nope")])
    def test_invalid_densities(self, kw):
        with pytest.raises(ValueError):
            DensityFunction(**kw)

    def test_weight_sup_checked_on_grid(self):
        g = BoundedWeight.tabulated([0, 0.5, 1], [0.2, 0.9, 0.1])
        assert g.sup_norm == pytest.approx(0.9)
        with pytest.raises(ValueError):
            BoundedWeight.tabulated([0, 1], [1, -0.1])
