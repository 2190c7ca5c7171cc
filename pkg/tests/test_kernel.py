#!/usr/bin/env python3
"""
Tests for the closed-form kernels and sphere averages
"""

import math

import numpy as np
import pytest
from scipy.integrate import quad

try:
    from errors import DomainError
    from kernel import (
        KernelParams,
        bp_kernel,
        bp_kernel_laplacian,
        bp_kernel_radial_derivative,
        bp_sphere_avg,
        bracket_sphere_avg,
        coulomb_kernel,
        coulomb_sphere_avg,
        exp_sphere_avg,
        fourier_bp_kernel,
        fourier_exp_kernel,
        fourier_yukawa,
        kernel_bracket,
        sphere_average,
        yukawa_kernel,
        yukawa_sphere_avg,
    )
except ImportError:
    pytest.skip("kernel module not available", allow_module_level=True)


def angular_average(fn, r, s):
    """Sphere average of fn(|x-y|), integrated over d = |x-y| ∈ [|r-s|, r+s]"""
    value, _ = quad(lambda d: fn(d) * d, abs(r - s), r + s, epsabs=0.0, epsrel=1e-13, limit=200)
    return value / (2 * r * s)


class TestKernelParams:
    """Test cases for kernel parameter validation"""

    def test_rejects_non_positive_a(self):
        """a must be finite and positive"""
        for bad in (0.0, -1.0, math.inf, math.nan):
            with pytest.raises(DomainError):
                KernelParams(bad)

    def test_domain_error_is_value_error(self):
        """Library errors stay catchable as builtins"""
        with pytest.raises(ValueError):
            KernelParams(-2.0)


class TestPointKernels:
    """Test cases for K, ΔK and K'"""

    def test_bp_kernel_at_origin(self):
        assert bp_kernel(0.0, KernelParams(2.0)) == pytest.approx(0.5, rel=1e-14)

    def test_bp_kernel_at_unit_radius(self):
        assert bp_kernel(1.0, KernelParams(1.0)) == pytest.approx(1 - math.exp(-1), rel=1e-14)

    def test_bp_kernel_bounded_by_coulomb_and_inverse_a(self):
        """0 < K(r) <= min(1/a, 1/r)"""
        kp = KernelParams(0.7)
        r = np.logspace(-8, 3, 200)
        k = bp_kernel(r, kp)
        assert np.all(k > 0)
        assert np.all(k <= 1 / kp.a * (1 + 1e-15))
        assert np.all(k <= 1 / r * (1 + 1e-15))

    def test_bp_kernel_small_r_has_no_cancellation(self):
        """K(r) → 1/a - r/(2a²) for tiny r"""
        kp = KernelParams(1.0)
        r = 1e-9
        assert bp_kernel(r, kp) == pytest.approx(1.0 - r / 2, rel=1e-14)

    def test_bp_kernel_is_coulomb_minus_yukawa(self):
        kp = KernelParams(0.4)
        r = np.array([0.01, 0.5, 3.0, 40.0])
        np.testing.assert_allclose(bp_kernel(r, kp), coulomb_kernel(r) - yukawa_kernel(r, kp), rtol=1e-12)

    def test_coulomb_kernel_rejects_origin(self):
        assert coulomb_kernel(4.0) == 0.25
        with pytest.raises(DomainError):
            coulomb_kernel(0.0)

    def test_bp_kernel_rejects_negative_radius(self):
        with pytest.raises(DomainError):
            bp_kernel(-1.0, KernelParams(1.0))

    def test_bp_kernel_broadcasts(self):
        out = bp_kernel(np.array([0.0, 1.0, 2.0]), KernelParams(1.0))
        assert isinstance(out, np.ndarray)
        assert out.shape == (3,)

    def test_laplacian_values(self):
        assert bp_kernel_laplacian(1.0, KernelParams(1.0)) == pytest.approx(-math.exp(-1), rel=1e-14)
        assert bp_kernel_laplacian(1.0, KernelParams(2.0)) == pytest.approx(-math.exp(-0.5) / 2, rel=1e-14)

    def test_laplacian_singular_at_origin(self):
        with pytest.raises(DomainError):
            bp_kernel_laplacian(0.0, KernelParams(1.0))

    def test_laplacian_matches_finite_difference(self):
        """ΔK = K'' + 2K'/r away from the origin"""
        kp = KernelParams(1.3)
        r, h = 2.0, 1e-4
        d2 = (bp_kernel(r + h, kp) - 2 * bp_kernel(r, kp) + bp_kernel(r - h, kp)) / h ** 2
        d1 = (bp_kernel(r + h, kp) - bp_kernel(r - h, kp)) / (2 * h)
        assert d2 + 2 * d1 / r == pytest.approx(bp_kernel_laplacian(r, kp), rel=1e-5)

    def test_laplacian_is_scaled_yukawa(self):
        kp = KernelParams(0.4)
        r = np.linspace(0.1, 8.0, 40)
        np.testing.assert_allclose(bp_kernel_laplacian(r, kp), -yukawa_kernel(r, kp) / kp.a ** 2, rtol=1e-14)

    def test_monotone_in_a(self):
        r = np.logspace(-6, 3, 100)
        assert np.all(bp_kernel(r, KernelParams(0.1)) >= bp_kernel(r, KernelParams(1.0)))
        assert np.all(bp_kernel(r, KernelParams(1.0)) >= bp_kernel(r, KernelParams(10.0)))

    def test_radial_derivative_value(self):
        expected = -1 + 2 * math.exp(-1)
        assert bp_kernel_radial_derivative(1.0, KernelParams(1.0)) == pytest.approx(expected, rel=1e-13)

    def test_radial_derivative_bounded_near_origin(self):
        """K'(r) → -1/(2a²) as r → 0⁺"""
        kp = KernelParams(1.0)
        r = np.linspace(1e-12, 1e-3, 100)
        values = bp_kernel_radial_derivative(r, kp)
        assert np.all(np.isfinite(values))
        assert np.all(np.abs(values + 0.5) < 1e-3)


class TestBracket:
    """Test cases for the low-p bracket (1-e^{-t})/t - e^{-t}"""

    def test_value_at_one(self):
        assert kernel_bracket(1.0) == pytest.approx(1 - 2 * math.exp(-1), rel=1e-14)

    def test_zero_at_origin(self):
        assert kernel_bracket(0.0) == 0.0

    def test_nonnegative(self):
        t = np.concatenate([np.logspace(-12, -1, 50), np.linspace(0.1, 50, 500)])
        assert np.all(kernel_bracket(t) >= 0)

    def test_series_and_direct_forms_agree(self):
        """No jump where the evaluation switches to the power series"""
        below = kernel_bracket(0.05 * (1 - 1e-9))
        above = kernel_bracket(0.05 * (1 + 1e-9))
        assert below == pytest.approx(above, rel=1e-7)


class TestSphereAverages:
    """Test cases for sphere averages against angular quadrature"""

    def test_coulomb_values(self):
        assert coulomb_sphere_avg(2.0, 1.0) == 0.5
        assert coulomb_sphere_avg(1.0, 1.0) == 1.0
        assert coulomb_sphere_avg(0.0, 4.0) == 0.25

    def test_coulomb_rejects_double_origin(self):
        with pytest.raises(DomainError):
            coulomb_sphere_avg(0.0, 0.0)

    @pytest.mark.parametrize("r,s,a", [(1.0, 1.0, 1.0), (3.0, 0.5, 0.2), (0.3, 2.0, 5.0)])
    def test_yukawa_matches_quadrature(self, r, s, a):
        expected = angular_average(lambda d: math.exp(-d / a) / d, r, s)
        assert yukawa_sphere_avg(r, s, KernelParams(a)) == pytest.approx(expected, rel=1e-10)

    def test_yukawa_large_a_tends_to_coulomb(self):
        for r, s in [(1.0, 2.0), (0.5, 0.5), (3.0, 0.1)]:
            value = yukawa_sphere_avg(r, s, KernelParams(1e6))
            assert value == pytest.approx(coulomb_sphere_avg(r, s), rel=1e-5)

    def test_yukawa_point_value_at_origin(self):
        """s = 0 reduces to e^{-r/a}/r"""
        assert yukawa_sphere_avg(2.0, 0.0, KernelParams(1.0)) == pytest.approx(math.exp(-2) / 2, rel=1e-14)

    @pytest.mark.parametrize("r,s,a", [(1.0, 1.0, 1.0), (3.0, 0.5, 0.2), (0.01, 0.02, 1.0)])
    def test_bp_matches_quadrature(self, r, s, a):
        expected = angular_average(lambda d: -math.expm1(-d / a) / d if d > 0 else 1 / a, r, s)
        assert bp_sphere_avg(r, s, KernelParams(a)) == pytest.approx(expected, rel=1e-10)

    def test_bp_bounded_by_inverse_a(self):
        kp = KernelParams(1.0)
        for r, s in [(0.01, 0.01), (0.1, 0.05)]:
            value = bp_sphere_avg(r, s, kp)
            assert 0 < value <= 1.0 / kp.a
            assert value <= coulomb_sphere_avg(r, s)

    def test_bp_small_a_tends_to_coulomb(self):
        assert bp_sphere_avg(1.0, 2.0, KernelParams(1e-4)) == pytest.approx(0.5, abs=1e-3)

    def test_exp_matches_quadrature(self):
        expected = angular_average(lambda d: math.exp(-d / 0.8), 1.5, 0.7)
        assert exp_sphere_avg(1.5, 0.7, KernelParams(0.8)) == pytest.approx(expected, rel=1e-10)

    def test_bracket_average_nonnegative(self):
        r = np.linspace(0.0, 10.0, 41)
        s = np.linspace(0.05, 10.0, 41)
        values = bracket_sphere_avg(r[:, None], s[None, :], KernelParams(0.5))
        assert np.all(values >= -1e-15)

    def test_symmetric(self, rng):
        kp = KernelParams(0.6)
        r = rng.uniform(0.0, 5.0, 50)
        s = rng.uniform(0.01, 5.0, 50)
        for avg in (bp_sphere_avg, yukawa_sphere_avg, exp_sphere_avg):
            np.testing.assert_allclose(avg(r, s, kp), avg(s, r, kp), rtol=1e-14)
        np.testing.assert_array_equal(coulomb_sphere_avg(r, s), coulomb_sphere_avg(s, r))

    @pytest.mark.slow
    @pytest.mark.parametrize("a", [0.1, 1.0, 10.0])
    def test_full_grid_matches_quadrature(self, a):
        """Every (r, s) pair of a 20×20 log-spaced grid, for all three averages"""
        kp = KernelParams(a)
        radii = np.geomspace(0.01, 20.0, 20)
        oracles = {
            "coulomb": lambda d: 1.0 / d,
            "yukawa": lambda d: math.exp(-d / a) / d,
            "bp": lambda d: -math.expm1(-d / a) / d,
        }
        for name, fn in oracles.items():
            for r in radii:
                for s in radii:
                    expected = angular_average(fn, r, s)
                    value = sphere_average(name, r, s, None if name == "coulomb" else kp)
                    assert value == pytest.approx(expected, rel=1e-8), (name, r, s, a)

    def test_dispatch_by_name(self):
        kp = KernelParams(1.0)
        assert sphere_average("coulomb", 2.0, 1.0) == 0.5
        assert sphere_average("bp", 1.0, 1.0, kp) == bp_sphere_avg(1.0, 1.0, kp)
        with pytest.raises(DomainError):
            sphere_average("gauss", 1.0, 1.0, kp)
        with pytest.raises(DomainError):
            sphere_average("yukawa", 1.0, 1.0)


class TestFourierTransforms:
    """Test cases for the unitary Fourier transforms"""

    def test_yukawa_values(self):
        kp = KernelParams(1.0)
        assert fourier_yukawa(0.0, kp) == pytest.approx(math.sqrt(2 / math.pi), rel=1e-14)
        assert fourier_yukawa(1.0, kp) == pytest.approx(math.sqrt(2 / math.pi) / 2, rel=1e-14)

    @pytest.mark.parametrize("xi", [0.5, 1.0, 2.0])
    def test_yukawa_matches_radial_transform(self, xi):
        """(4π/ξ)∫ sin(ξr)e^{-r} dr / (2π)^{3/2}"""
        integral, _ = quad(lambda r: math.exp(-r), 0.0, np.inf, weight="sin", wvar=xi)
        expected = 4 * math.pi / xi * integral / (2 * math.pi) ** 1.5
        assert fourier_yukawa(xi, KernelParams(1.0)) == pytest.approx(expected, rel=1e-4)

    def test_exp_kernel_is_derivative_in_a(self):
        """e^{-r/a} = a² ∂_a(e^{-r/a}/r), so the transforms agree the same way"""
        xi, a, h = 0.7, 1.2, 1e-6
        d_da = (fourier_yukawa(xi, KernelParams(a + h)) - fourier_yukawa(xi, KernelParams(a - h))) / (2 * h)
        assert fourier_exp_kernel(xi, KernelParams(a)) == pytest.approx(a ** 2 * d_da, rel=1e-7)

    def test_bp_kernel_is_coulomb_minus_yukawa(self):
        kp = KernelParams(0.5)
        xi = np.array([0.1, 1.0, 10.0])
        coulomb = math.sqrt(2 / math.pi) / xi ** 2
        np.testing.assert_allclose(fourier_bp_kernel(xi, kp), coulomb - fourier_yukawa(xi, kp), rtol=1e-12)

    def test_bp_kernel_needs_positive_frequency(self):
        with pytest.raises(DomainError):
            fourier_bp_kernel(0.0, KernelParams(1.0))

    def test_negative_frequency_rejected(self):
        with pytest.raises(DomainError):
            fourier_yukawa(-1.0, KernelParams(1.0))
