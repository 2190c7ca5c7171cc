#!/usr/bin/env python3
"""
Electrostatic potentials of radial charge densities

φ_u = K ∗ u² solves -Δφ + a²Δ²φ = 4πu²; the Coulomb potential 1/|x| ∗ u²
solves -Δφ = 4πu². Both are evaluated as O(N²) sums

    φ(r_i) = 4π Σ_j Λ_ij · avg(r_i, r_j) · r_j² · u(r_j)²

with the split convolution weights Λ of the grid, so the kink of every
sphere average at s = r_i never falls inside a stencil. Δφ is the Yukawa
convolution -(1/a²)·(e^{-d/a}/d) ∗ u², ‖∇φ‖₂ comes from the staggered
gradient plus the analytic monopole tail beyond r_max.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Dict, Optional

import numpy as np

from errors import DomainError, NumericError
from kernel import KernelParams, sphere_average
from radial_space import (FOUR_PI, RadialFunction, RadialGrid, integrate, norm_grad_l2,
                          norm_lp, radial_derivative, radial_laplacian, same_grid)

logger = logging.getLogger(__name__)


@lru_cache(maxsize=64)
def kernel_matrix(grid: RadialGrid, kind: str, a: Optional[float] = None) -> np.ndarray:
    """Matrix M with (M f)_i ≈ ∫ avg_kind(r_i, s) f(s) s² ds.

    Column 0 vanishes because the r² factor is zero at the origin node.
    """
    r = grid.nodes
    kp = None if kind == "coulomb" else KernelParams(a)
    averages = np.zeros((grid.n, grid.n))
    averages[:, 1:] = sphere_average(kind, r[:, None], r[None, 1:], kp)
    matrix = averages * grid.convolution_weights * (r ** 2)[None, :]
    matrix.setflags(write=False)
    logger.debug(f"Built {kind} kernel matrix (a={a}) on n={grid.n}")
    return matrix


def convolve(density: RadialFunction, kind: str, kp: Optional[KernelParams] = None) -> RadialFunction:
    """k ∗ density for a radial density; 4π·M·density."""
    a = None if kind == "coulomb" else kp.a
    values = FOUR_PI * (kernel_matrix(density.grid, kind, a) @ density.values)
    if not np.all(np.isfinite(values)):
        raise NumericError(f"{kind} convolution produced non-finite values")
    return density.with_values(values)


def double_integral(u: RadialFunction, kind: str, kp: Optional[KernelParams] = None) -> float:
    """∬ k(x - y) u²(x) u²(y) dx dy."""
    density = u.with_values(u.values ** 2)
    field = convolve(density, kind, kp)
    return integrate(field.with_values(field.values * density.values))


def tail_charge(phi: RadialFunction) -> float:
    """Q = r_max·φ(r_max); φ ≈ Q/r beyond the truncation radius."""
    return phi.grid.r_max * float(phi.values[-1])


def field_energy(phi: RadialFunction) -> float:
    """‖∇φ‖₂² including ∫_{r_max}^∞ |Q/r²|² dx = 4πQ²/r_max."""
    q = tail_charge(phi)
    return norm_grad_l2(phi) ** 2 + FOUR_PI * q ** 2 / phi.grid.r_max


def potential_l6_norm(phi: RadialFunction) -> float:
    """‖φ‖₆ including the monopole tail 4πQ⁶/(3 r_max³)."""
    q = tail_charge(phi)
    inner = norm_lp(phi, 6) ** 6
    return (inner + FOUR_PI * q ** 6 / (3.0 * phi.grid.r_max ** 3)) ** (1.0 / 6.0)


@dataclass(frozen=True)
class PotentialResult:
    """A potential and its scalar energies."""
    phi: RadialFunction
    grad_phi_l2: float
    lap_phi_l2: float
    interaction: float
    lap_phi: Optional[RadialFunction] = None
    kind: str = "bp"
    a: Optional[float] = None

    @property
    def ne2_residual(self) -> float:
        """‖∇φ‖² + a²‖Δφ‖² - 4π∫φ·source, relative to 4π∫φ·source."""
        a = self.a or 0.0
        scale = FOUR_PI * self.interaction
        lhs = self.grad_phi_l2 ** 2 + a ** 2 * self.lap_phi_l2 ** 2
        return (lhs - scale) / scale if scale > 0 else lhs

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "a": self.a,
            "grad_phi_l2": self.grad_phi_l2,
            "lap_phi_l2": self.lap_phi_l2,
            "interaction": self.interaction,
            "ne2_residual": self.ne2_residual,
            "phi": [float(v) for v in self.phi.values],
        }


def _from_density(density: RadialFunction, kp: Optional[KernelParams]) -> PotentialResult:
    if kp is None:
        phi = convolve(density, "coulomb")
        lap = density.with_values(-FOUR_PI * density.values)
        kind, a = "coulomb", None
    else:
        phi = convolve(density, "bp", kp)
        yukawa = convolve(density, "yukawa", kp)
        lap = yukawa.scaled(-1.0 / kp.a ** 2)
        kind, a = "bp", kp.a

    interaction = integrate(phi.with_values(phi.values * density.values))
    grad = math.sqrt(field_energy(phi))
    lap_l2 = norm_lp(lap, 2)
    if not all(math.isfinite(x) for x in (interaction, grad, lap_l2)):
        raise NumericError("potential energies are not finite")
    return PotentialResult(phi=phi, grad_phi_l2=grad, lap_phi_l2=lap_l2,
                           interaction=interaction, lap_phi=lap, kind=kind, a=a)


def bp_potential(u: RadialFunction, kp: KernelParams) -> PotentialResult:
    """φ_u = K ∗ u² with its energies.

    Args:
        u: H¹-admissible radial function
        kp: Kernel parameters

    Returns:
        PotentialResult with ∫φ_u u² as the interaction

    Raises:
        AdmissibilityError: If u does not decay at r_max
        NumericError: If the quadrature overflows
    """
    u.require_admissible()
    return _from_density(u.with_values(u.values ** 2), kp)


def coulomb_potential(u: RadialFunction) -> PotentialResult:
    """1/|x| ∗ u²; Δφ = -4πu² exactly."""
    u.require_admissible()
    return _from_density(u.with_values(u.values ** 2), None)


def source_potential(f: RadialFunction, kp: Optional[KernelParams] = None) -> PotentialResult:
    """Potential of a prescribed nonnegative source f (Coulomb when kp is None)."""
    if np.any(f.values < 0):
        raise DomainError("source density must be nonnegative")
    return _from_density(f, kp)


def yukawa_potential(u: RadialFunction, kp: KernelParams) -> RadialFunction:
    """(e^{-d/a}/d) ∗ u²."""
    u.require_admissible()
    return convolve(u.with_values(u.values ** 2), "yukawa", kp)


def gradient_field(u: RadialFunction, kp: Optional[KernelParams] = None) -> RadialFunction:
    """Radial field φ'(r) of φ_u (Coulomb when kp is None)."""
    result = coulomb_potential(u) if kp is None else bp_potential(u, kp)
    return radial_derivative(result.phi)


def _laplacian_l2_inner(phi: RadialFunction, xi: RadialFunction) -> float:
    lap_phi = radial_laplacian(phi)
    lap_xi = radial_laplacian(xi)
    return integrate(lap_phi.with_values(lap_phi.values * lap_xi.values))


def weak_form_residual(phi: RadialFunction, u: RadialFunction, xi: RadialFunction,
                       kp: Optional[KernelParams] = None) -> float:
    """∫∇φ·∇ξ + a²∫ΔφΔξ - 4π∫u²ξ for a test function ξ decaying inside r_max."""
    grid = same_grid(phi, u, xi)
    s = grid.stagger_matrix
    grad_term = FOUR_PI * float(np.dot(grid.midpoint_weights, (s @ phi.values) * (s @ xi.values)))
    lap_term = 0.0 if kp is None else kp.a ** 2 * _laplacian_l2_inner(phi, xi)
    source = FOUR_PI * integrate(xi.with_values(u.values ** 2 * xi.values))
    return grad_term + lap_term - source


def potential_energy(phi: RadialFunction, u: RadialFunction,
                     kp: Optional[KernelParams] = None) -> float:
    """E(φ) = ½‖∇φ‖₂² + (a²/2)‖Δφ‖₂² - 4π∫φu².

    The source carries the same 4π as the field equation, so φ_u is the
    minimizer and E(φ_u) = -2π∫φ_u u².

    Raises:
        GridMismatchError: If phi and u live on different grids
    """
    same_grid(phi, u)
    energy = 0.5 * field_energy(phi)
    if kp is not None:
        energy += 0.5 * kp.a ** 2 * norm_lp(radial_laplacian(phi), 2) ** 2
    return energy - FOUR_PI * integrate(phi.with_values(phi.values * u.values ** 2))
