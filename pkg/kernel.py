#!/usr/bin/env python3
"""
Closed-form kernels for the Bopp-Podolsky potential

This module evaluates the bounded Green's kernel K(r) = (1 - e^{-r/a})/r of
-Δ + a²Δ² (source 4πδ), its Laplacian and radial derivative, the Coulomb and
Yukawa kernels, and their sphere averages. The sphere average of a kernel k
over |y| = s seen from |x| = r is what turns a 3D convolution of radial
functions into a 1D double sum.

All functions accept scalars or numpy arrays and broadcast.

Every sphere average is written through M = max(r, s), m = min(r, s),
X = (M - m)/a and y = 2m/a, using

    φ1(y) = (1 - e^{-y})/y,     h(y) = 1 - φ1(y),     β(y) = φ1(y) - e^{-y}

so that no closed form subtracts two nearly equal exponentials and the
limits m → 0 come out of φ1(0) = 1, h(0) = β(0) = 0 without division by rs.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, Union

import numpy as np

from errors import DomainError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# Below this argument h and β switch to their power series
SERIES_CUTOFF = 0.05
SERIES_TERMS = 10

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


@dataclass(frozen=True)
class KernelParams:
    """Bopp-Podolsky length parameter"""
    a: float

    def __post_init__(self):
        if not (isinstance(self.a, (int, float)) and math.isfinite(self.a) and self.a > 0):
            raise DomainError(f"kernel length a must be finite and > 0, got {self.a!r}")


def _radii(value: ArrayLike, name: str, strictly_positive: bool = False) -> np.ndarray:
    """Validate radii and return them as a float array."""
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    if strictly_positive and np.any(arr <= 0):
        raise DomainError(f"{name} must be > 0 (kernel is singular at the origin)")
    if np.any(arr < 0):
        raise DomainError(f"{name} must be >= 0")
    return arr


def _result(values: np.ndarray, *inputs: ArrayLike) -> ArrayLike:
    if all(np.ndim(x) == 0 for x in inputs):
        return float(values)
    return values


def _series(y: np.ndarray, coefficient: Callable[[int], float]) -> np.ndarray:
    total = np.zeros_like(y)
    power = np.ones_like(y)
    for n in range(1, SERIES_TERMS + 1):
        power = power * y
        total = total + ((-1) ** (n + 1)) * coefficient(n) * power
    return total


def phi1(y: np.ndarray) -> np.ndarray:
    """(1 - e^{-y})/y with value 1 at y = 0."""
    y = np.asarray(y, dtype=float)
    safe = np.where(y > 0, y, 1.0)
    return np.where(y > 0, -np.expm1(-safe) / safe, 1.0)


def _h(y: np.ndarray) -> np.ndarray:
    """1 - φ1(y) without cancellation."""
    y = np.asarray(y, dtype=float)
    small = y < SERIES_CUTOFF
    safe = np.where(small, 1.0, y)
    direct = (np.expm1(-safe) + safe) / safe
    series = _series(np.where(small, y, 0.0), lambda n: 1.0 / math.factorial(n + 1))
    return np.where(small, series, direct)


def _beta(y: np.ndarray) -> np.ndarray:
    """φ1(y) - e^{-y} without cancellation."""
    y = np.asarray(y, dtype=float)
    small = y < SERIES_CUTOFF
    safe = np.where(small, 1.0, y)
    direct = -np.expm1(-safe) / safe - np.exp(-safe)
    series = _series(np.where(small, y, 0.0), lambda n: n / math.factorial(n + 1))
    return np.where(small, series, direct)


def kernel_bracket(t: ArrayLike) -> ArrayLike:
    """(1 - e^{-t})/t - e^{-t}, the bracket of the low-p sign computation.

    Nonnegative for every t >= 0 and 0 at t = 0.
    """
    arr = _radii(t, "t")
    return _result(_beta(arr), t)


# ---------------------------------------------------------------------------
# Point kernels
# ---------------------------------------------------------------------------

def bp_kernel(r: ArrayLike, kp: KernelParams) -> ArrayLike:
    """Evaluate K(r) = (1 - e^{-r/a})/r.

    Args:
        r: Radius (or array of radii), finite and >= 0
        kp: Kernel parameters

    Returns:
        K(r), continuously extended by 1/a at r = 0

    Raises:
        DomainError: If r is negative or not finite
    """
    arr = _radii(r, "r")
    return _result(phi1(arr / kp.a) / kp.a, r)


def bp_kernel_laplacian(r: ArrayLike, kp: KernelParams) -> ArrayLike:
    """ΔK(r) = -e^{-r/a}/(a² r), defined for r > 0."""
    arr = _radii(r, "r", strictly_positive=True)
    return _result(-np.exp(-arr / kp.a) / (kp.a ** 2 * arr), r)


def bp_kernel_radial_derivative(r: ArrayLike, kp: KernelParams) -> ArrayLike:
    """K'(r) = -1/r² + (r/a + 1)e^{-r/a}/r², written as -β(r/a)/(a r).

    The factored form stays bounded (→ -1/(2a²)) as r → 0⁺.
    """
    arr = _radii(r, "r", strictly_positive=True)
    return _result(-_beta(arr / kp.a) / (kp.a * arr), r)


def coulomb_kernel(r: ArrayLike) -> ArrayLike:
    arr = _radii(r, "r", strictly_positive=True)
    return _result(1.0 / arr, r)


def yukawa_kernel(r: ArrayLike, kp: KernelParams) -> ArrayLike:
    arr = _radii(r, "r", strictly_positive=True)
    return _result(np.exp(-arr / kp.a) / arr, r)


# ---------------------------------------------------------------------------
# Sphere averages
# ---------------------------------------------------------------------------

def _split(r: ArrayLike, s: ArrayLike):
    rr = _radii(r, "r")
    ss = _radii(s, "s")
    big = np.maximum(rr, ss)
    if np.any(big == 0):
        raise DomainError("sphere average undefined at r = s = 0")
    return big, np.minimum(rr, ss)


def coulomb_sphere_avg(r: ArrayLike, s: ArrayLike) -> ArrayLike:
    """Average of 1/|x-y| over |y| = s with |x| = r, i.e. 1/max(r, s).

    Raises:
        DomainError: If r = s = 0
    """
    big, _ = _split(r, s)
    return _result(1.0 / big, r, s)


def yukawa_sphere_avg(r: ArrayLike, s: ArrayLike, kp: KernelParams) -> ArrayLike:
    """Average of e^{-d/a}/d over |y| = s.

    Closed form (a/(2rs))(e^{-|r-s|/a} - e^{-(r+s)/a}), evaluated as
    e^{-X}φ1(y)/M. At m = 0 this is the point value e^{-M/a}/M.
    """
    big, small = _split(r, s)
    x = (big - small) / kp.a
    y = 2.0 * small / kp.a
    return _result(np.exp(-x) * phi1(y) / big, r, s)


def bp_sphere_avg(r: ArrayLike, s: ArrayLike, kp: KernelParams) -> ArrayLike:
    """Average of K(d) = (1 - e^{-d/a})/d over |y| = s.

    Coulomb minus Yukawa, regrouped as (1 - e^{-X} + e^{-X}h(y))/M so both
    terms are nonnegative.
    """
    big, small = _split(r, s)
    x = (big - small) / kp.a
    y = 2.0 * small / kp.a
    return _result((-np.expm1(-x) + np.exp(-x) * _h(y)) / big, r, s)


def exp_sphere_avg(r: ArrayLike, s: ArrayLike, kp: KernelParams) -> ArrayLike:
    """Average of e^{-d/a} over |y| = s.

    Closed form (a/(2rs))[(|r-s|+a)e^{-|r-s|/a} - (r+s+a)e^{-(r+s)/a}],
    evaluated as (a/M)e^{-X}(Xφ1(y) + β(y)).
    """
    big, small = _split(r, s)
    x = (big - small) / kp.a
    y = 2.0 * small / kp.a
    value = (kp.a / big) * np.exp(-x) * (x * phi1(y) + _beta(y))
    return _result(value, r, s)


def pohozaev_sphere_avg(r: ArrayLike, s: ArrayLike, kp: KernelParams) -> ArrayLike:
    """Average of 5(1 - e^{-d/a})/(d/a) + e^{-d/a}."""
    value = 5.0 * kp.a * np.asarray(bp_sphere_avg(r, s, kp)) + np.asarray(exp_sphere_avg(r, s, kp))
    return _result(value, r, s)


def bracket_sphere_avg(r: ArrayLike, s: ArrayLike, kp: KernelParams) -> ArrayLike:
    """Average of (1 - e^{-d/a})/(d/a) - e^{-d/a}; nonnegative."""
    value = kp.a * np.asarray(bp_sphere_avg(r, s, kp)) - np.asarray(exp_sphere_avg(r, s, kp))
    return _result(value, r, s)


SPHERE_AVERAGES: Dict[str, Callable[..., ArrayLike]] = {
    "bp": bp_sphere_avg,
    "yukawa": yukawa_sphere_avg,
    "exp": exp_sphere_avg,
    "pohozaev": pohozaev_sphere_avg,
    "bracket": bracket_sphere_avg,
}


def sphere_average(kind: str, r: ArrayLike, s: ArrayLike, kp: KernelParams = None) -> ArrayLike:
    """Dispatch a sphere average by name; 'coulomb' needs no parameters."""
    if kind == "coulomb":
        return coulomb_sphere_avg(r, s)
    if kind not in SPHERE_AVERAGES:
        raise DomainError(f"unknown kernel kind {kind!r}")
    if kp is None:
        raise DomainError(f"kernel kind {kind!r} needs KernelParams")
    return SPHERE_AVERAGES[kind](r, s, kp)


# ---------------------------------------------------------------------------
# Fourier transforms (unitary convention, (2π)^{-3/2})
# ---------------------------------------------------------------------------

def _frequency(xi: ArrayLike, strictly_positive: bool = False) -> np.ndarray:
    arr = np.asarray(xi, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise DomainError("frequency must be finite and >= 0")
    if strictly_positive and np.any(arr == 0):
        raise DomainError("frequency must be > 0")
    return arr


def fourier_yukawa(xi: ArrayLike, kp: KernelParams) -> ArrayLike:
    """√(2/π)·a²/(1 + a²ξ²), the transform of e^{-|x|/a}/|x|."""
    arr = _frequency(xi)
    return _result(SQRT_2_OVER_PI * kp.a ** 2 / (1.0 + (kp.a * arr) ** 2), xi)


def fourier_exp_kernel(xi: ArrayLike, kp: KernelParams) -> ArrayLike:
    """√(2/π)·2a³/(1 + a²ξ²)², the transform of e^{-|x|/a}."""
    arr = _frequency(xi)
    return _result(SQRT_2_OVER_PI * 2.0 * kp.a ** 3 / (1.0 + (kp.a * arr) ** 2) ** 2, xi)


def fourier_bp_kernel(xi: ArrayLike, kp: KernelParams) -> ArrayLike:
    """√(2/π)/(ξ²(1 + a²ξ²)), the transform of K; ξ > 0."""
    arr = _frequency(xi, strictly_positive=True)
    return _result(SQRT_2_OVER_PI / (arr ** 2 * (1.0 + (kp.a * arr) ** 2)), xi)
