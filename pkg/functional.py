#!/usr/bin/env python3
"""
Reduced energy functional and its identities

    J_q(u) = ½‖∇u‖₂² + (ω/2)‖u‖₂² + (q²/4)∫φ_u u² - (1/p)‖u‖_p^p

Along a ray t ↦ tu the functional is At²/2 + Bt⁴/4 - Ct^p/p with
A = ‖u‖², B = q²∫φ_u u² and C = ‖u‖_p^p, because φ_{tu} = t²φ_u. Every
quantity here is assembled from those scalars (plus ‖∇φ‖₂, ‖Δφ‖₂ and a few
double integrals), all with the quadrature of radial_space, so discrete
identities such as J'(u)[u] = ⟨g, u⟩ hold to round-off.

The H¹ gradient g solves the banded SPD system
A_h g = A_h u + 4πW(q²φ_u u - |u|^{p-2}u) with A_h = 4π(SᵀGS + ωW), the
matrix of the discrete inner product.
"""

import logging
import math
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from errors import DomainError, NumericError, TruncationError
from kernel import KernelParams
from potential import PotentialResult, bp_potential, coulomb_potential, double_integral
from radial_space import FOUR_PI, RadialFunction, RadialGrid, norm_grad_l2, norm_lp

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Params:
    """Parameters (a, ω, q, p) of the coupled system.

    coulomb_limit evaluates the a → 0 system with the Coulomb potential;
    a is then ignored.
    """
    a: float = 1.0
    omega: float = 1.0
    q: float = 1.0
    p: float = 5.0
    coulomb_limit: bool = False

    def __post_init__(self):
        for name in ("a", "omega", "q", "p"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if self.a <= 0:
            raise DomainError(f"a must be > 0, got {self.a}")
        if self.omega <= 0:
            raise DomainError(f"omega must be > 0, got {self.omega}")
        if self.q < 0:
            raise DomainError(f"q must be >= 0, got {self.q}")
        if self.p <= 1:
            raise DomainError(f"p must be > 1, got {self.p}")

    @property
    def kernel(self) -> KernelParams:
        return KernelParams(self.a)

    def require_solver_range(self) -> "Params":
        if not 2 < self.p < 6:
            raise DomainError(f"p out of (2,6): {self.p}")
        return self

    def with_a(self, a: float) -> "Params":
        return replace(self, a=a, coulomb_limit=False)

    def with_q(self, q: float) -> "Params":
        return replace(self, q=q)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class Diagnostics:
    """Functional value, norms and identity residuals at a profile."""
    j_value: float
    nehari_residual: float
    pohozaev_residual: float
    pohozaev_alt_residual: float
    h1_norm: float
    l2_norm: float
    lp_norm: float
    grad_l2: float
    interaction: float
    ne2_residual: float = 0.0
    rel_grad: Optional[float] = None
    trace: List[Tuple[int, float, float, float]] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["trace"] = [list(item) for item in self.trace]
        return data


@dataclass(frozen=True)
class FunctionalTerms:
    """Scalar ingredients of J_q at one profile."""
    grad_sq: float
    l2_sq: float
    lp_p: float
    interaction: float
    potential: Optional[PotentialResult]
    params: Params

    @property
    def h1_sq(self) -> float:
        return self.grad_sq + self.params.omega * self.l2_sq

    @property
    def grad_phi_sq(self) -> float:
        return self.potential.grad_phi_l2 ** 2 if self.potential else 0.0

    @property
    def lap_phi_sq(self) -> float:
        if self.potential is None or self.params.coulomb_limit:
            return 0.0
        return self.potential.lap_phi_l2 ** 2


def potential_of(u: RadialFunction, prm: Params) -> PotentialResult:
    return coulomb_potential(u) if prm.coulomb_limit else bp_potential(u, prm.kernel)


def functional_terms(u: RadialFunction, prm: Params,
                     with_potential: Optional[bool] = None) -> FunctionalTerms:
    """Compute ‖∇u‖², ‖u‖², ‖u‖_p^p and (when needed) the potential.

    Args:
        u: H¹-admissible profile
        prm: Parameters
        with_potential: Force or skip the potential; by default it is only
            computed for q != 0
    """
    u.require_admissible()
    if with_potential is None:
        with_potential = prm.q != 0
    pot = potential_of(u, prm) if with_potential else None
    return FunctionalTerms(
        grad_sq=norm_grad_l2(u) ** 2,
        l2_sq=norm_lp(u, 2) ** 2,
        lp_p=norm_lp(u, prm.p) ** prm.p,
        interaction=pot.interaction if pot else 0.0,
        potential=pot,
        params=prm,
    )


def j_from_terms(t: FunctionalTerms, lam: float = 1.0) -> float:
    prm = t.params
    return (0.5 * t.h1_sq + 0.25 * prm.q ** 2 * t.interaction - lam * t.lp_p / prm.p)


def j_q(u: RadialFunction, prm: Params) -> float:
    """J_q(u)."""
    return j_from_terms(functional_terms(u, prm))


def j_q_lambda(u: RadialFunction, prm: Params, lam: float) -> float:
    """J_{q,λ}(u) = J_q(u) with the nonlinearity scaled by λ ∈ [1/2, 1]."""
    if not 0.5 <= lam <= 1.0:
        raise DomainError(f"lambda must lie in [1/2, 1], got {lam}")
    return j_from_terms(functional_terms(u, prm), lam)


# ---------------------------------------------------------------------------
# Gradient
# ---------------------------------------------------------------------------

def sobolev_matrix(grid: RadialGrid, omega: float) -> sparse.csc_matrix:
    """Matrix of ⟨u, v⟩ = ∫∇u·∇v + ω∫uv on the grid."""
    s = grid.stagger_matrix
    stiffness = s.T @ sparse.diags(grid.midpoint_weights) @ s
    mass = sparse.diags(grid.weights)
    return (FOUR_PI * (stiffness + omega * mass)).tocsc()


@lru_cache(maxsize=32)
def _sobolev_factor(grid: RadialGrid, omega: float):
    return splu(sobolev_matrix(grid, omega))


def sobolev_gradient(u: RadialFunction, omega: float, nonlinear: np.ndarray) -> RadialFunction:
    """Riesz representative of v ↦ ⟨u, v⟩ + 4π Σ w·nonlinear·v.

    Raises:
        NumericError: If the solve returns non-finite values
    """
    grid = u.grid
    rhs = FOUR_PI * grid.weights * nonlinear
    correction = _sobolev_factor(grid, omega).solve(rhs)
    g = u.values + correction
    if not np.all(np.isfinite(g)):
        raise NumericError("Sobolev gradient solve produced non-finite values")
    return u.with_values(g)


def _nonlinearity(u: RadialFunction, p: float) -> np.ndarray:
    return np.abs(u.values) ** (p - 2.0) * u.values


def gradient_from_terms(u: RadialFunction, t: FunctionalTerms, lam: float = 1.0) -> RadialFunction:
    prm = t.params
    nonlinear = -lam * _nonlinearity(u, prm.p)
    if t.potential is not None:
        nonlinear = nonlinear + prm.q ** 2 * t.potential.phi.values * u.values
    return sobolev_gradient(u, prm.omega, nonlinear)


def grad_j_q(u: RadialFunction, prm: Params) -> RadialFunction:
    """H¹ gradient g of J_q: ⟨g, v⟩ = J_q'(u)[v] for every grid function v."""
    return gradient_from_terms(u, functional_terms(u, prm))


def grad_j_q_lambda(u: RadialFunction, prm: Params, lam: float) -> RadialFunction:
    if not 0.5 <= lam <= 1.0:
        raise DomainError(f"lambda must lie in [1/2, 1], got {lam}")
    return gradient_from_terms(u, functional_terms(u, prm), lam)


# ---------------------------------------------------------------------------
# Nehari and Pohozaev
# ---------------------------------------------------------------------------

def _nehari_from_terms(t: FunctionalTerms) -> float:
    return t.h1_sq + t.params.q ** 2 * t.interaction - t.lp_p


def nehari_residual(u: RadialFunction, prm: Params) -> float:
    """J_q'(u)[u] = ‖∇u‖² + ω‖u‖² + q²∫φ_u u² - ‖u‖_p^p."""
    return _nehari_from_terms(functional_terms(u, prm))


def _pohozaev_from_terms(t: FunctionalTerms) -> float:
    prm = t.params
    q2 = prm.q ** 2
    a2 = 0.0 if prm.coulomb_limit else prm.a ** 2
    return (-0.5 * t.grad_sq - 1.5 * prm.omega * t.l2_sq
            + q2 / (16 * math.pi) * t.grad_phi_sq
            - q2 * a2 / (16 * math.pi) * t.lap_phi_sq
            - 1.5 * q2 * t.interaction
            + 3.0 / prm.p * t.lp_p)


def _pohozaev_alt_from_terms(u: RadialFunction, t: FunctionalTerms) -> float:
    prm = t.params
    q2 = prm.q ** 2
    if q2 == 0:
        pair = 0.0
    elif prm.coulomb_limit:
        pair = 5.0 * t.interaction
    else:
        pair = double_integral(u, "pohozaev", prm.kernel) / prm.a
    return (-0.5 * t.grad_sq - 1.5 * prm.omega * t.l2_sq
            - 0.25 * q2 * pair
            + 3.0 / prm.p * t.lp_p)


def pohozaev_residual(u: RadialFunction, prm: Params) -> float:
    """Pohozaev expression with ‖∇φ‖₂² and ‖Δφ‖₂²; zero at solutions."""
    return _pohozaev_from_terms(functional_terms(u, prm, with_potential=True))


def pohozaev_alt_residual(u: RadialFunction, prm: Params) -> float:
    """Pohozaev expression with the double integral of 5(1-e^{-d/a})/(d/a) + e^{-d/a}."""
    return _pohozaev_alt_from_terms(u, functional_terms(u, prm, with_potential=True))


def pohozaev_lambda_residual(u: RadialFunction, prm: Params, lam: float) -> float:
    """Pohozaev expression of J_{q,λ} in the sign convention of the boundedness argument.

    ½‖∇u‖² + (3/2)ω‖u‖² - q²/(16π)‖∇φ‖² + q²a²/(16π)‖Δφ‖² + (3/2)q²∫φu² - (3λ/p)‖u‖_p^p
    """
    if not 0.5 <= lam <= 1.0:
        raise DomainError(f"lambda must lie in [1/2, 1], got {lam}")
    t = functional_terms(u, prm, with_potential=True)
    return -_pohozaev_from_terms(t) + 3.0 * (1.0 - lam) / prm.p * t.lp_p


# ---------------------------------------------------------------------------
# Truncated functional
# ---------------------------------------------------------------------------

def cutoff(s: float) -> float:
    """Smoothstep χ: 1 on [0, 1], 0 on [2, ∞), |χ'| <= 3/2."""
    t = min(max(s - 1.0, 0.0), 1.0)
    return 1.0 - 3.0 * t ** 2 + 2.0 * t ** 3


def cutoff_derivative(s: float) -> float:
    t = min(max(s - 1.0, 0.0), 1.0)
    return -6.0 * t + 6.0 * t ** 2


def _check_truncation(T: float) -> None:
    if not (T > 0 and math.isfinite(T)):
        raise DomainError(f"truncation level T must be > 0, got {T}")


def j_q_truncated(u: RadialFunction, prm: Params, T: float) -> float:
    """J_{q,T}(u): the interaction term weighted by χ(‖u‖²/T²).

    Raises:
        DomainError: If T <= 0
    """
    _check_truncation(T)
    u.require_admissible()
    base = functional_terms(u, prm, with_potential=False)
    chi = cutoff(base.h1_sq / T ** 2)
    if chi == 0.0 or prm.q == 0:
        return j_from_terms(base)
    t = functional_terms(u, prm, with_potential=True)
    return 0.5 * t.h1_sq + 0.25 * chi * prm.q ** 2 * t.interaction - t.lp_p / prm.p


def truncated_ray_derivative(u: RadialFunction, prm: Params, T: float) -> float:
    """J_{q,T}'(u)[u]."""
    _check_truncation(T)
    t = functional_terms(u, prm, with_potential=True)
    s = t.h1_sq / T ** 2
    q2 = prm.q ** 2
    return (t.h1_sq + q2 * cutoff(s) * t.interaction
            + q2 / (2 * T ** 2) * cutoff_derivative(s) * t.h1_sq * t.interaction
            - t.lp_p)


def truncated_bound_identity(u: RadialFunction, prm: Params, T: float) -> Tuple[float, float]:
    """Both sides of pJ_{q,T}(u) - J_{q,T}'(u)[u] = (p/2-1)‖u‖² + (p/4-1)q²χI - (q²/2T²)χ'‖u‖²I."""
    _check_truncation(T)
    t = functional_terms(u, prm, with_potential=True)
    s = t.h1_sq / T ** 2
    q2, p = prm.q ** 2, prm.p
    lhs = p * j_q_truncated(u, prm, T) - truncated_ray_derivative(u, prm, T)
    rhs = ((p / 2 - 1) * t.h1_sq + (p / 4 - 1) * q2 * cutoff(s) * t.interaction
           - q2 / (2 * T ** 2) * cutoff_derivative(s) * t.h1_sq * t.interaction)
    return lhs, rhs


# ---------------------------------------------------------------------------
# Bounds used by the existence arguments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundCheck:
    lhs: float
    exact_rhs: float
    bound_rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.bound_rhs + 1e-10 * max(abs(self.lhs), abs(self.bound_rhs), 1.0)


def boundedness_bound(u: RadialFunction, prm: Params, level: Optional[float] = None) -> BoundCheck:
    """(p-3)‖∇u‖² + ((p-2)/2)ω‖u‖² against ((5p-12)/2)·level.

    exact_rhs is (5p/2 - 6)·level + (q²a²/4π)(p/4 - 1)‖Δφ‖², which equals the
    left side at a solution; for p < 4 the second term is <= 0 and the
    left side stays below bound_rhs.
    """
    t = functional_terms(u, prm, with_potential=True)
    p = prm.p
    if level is None:
        level = j_from_terms(t)
    a2 = 0.0 if prm.coulomb_limit else prm.a ** 2
    lhs = (p - 3) * t.grad_sq + (p - 2) / 2 * prm.omega * t.l2_sq
    exact = (2.5 * p - 6) * level + prm.q ** 2 * a2 / FOUR_PI * (p / 4 - 1) * t.lap_phi_sq
    return BoundCheck(lhs=lhs, exact_rhs=exact, bound_rhs=(5 * p - 12) / 2 * level)


def nehari_level_bound(u: RadialFunction, prm: Params) -> Tuple[float, float]:
    """Both sides of pJ_q(u) - J_q'(u)[u] = ((p-2)/2)‖u‖² + q²((p-4)/4)∫φu²."""
    t = functional_terms(u, prm)
    p = prm.p
    lhs = p * j_from_terms(t) - _nehari_from_terms(t)
    rhs = (p - 2) / 2 * t.h1_sq + prm.q ** 2 * (p - 4) / 4 * t.interaction
    return lhs, rhs


def fibering_coefficients(u: RadialFunction, prm: Params) -> Tuple[float, float, float]:
    """(A, B, C) = (‖u‖², q²∫φ_u u², ‖u‖_p^p)."""
    t = functional_terms(u, prm)
    return t.h1_sq, prm.q ** 2 * t.interaction, t.lp_p


def fibering_curve_value(u: RadialFunction, prm: Params, t: float) -> float:
    """J_q(tu) = At²/2 + Bt⁴/4 - Ct^p/p."""
    a_coef, b_coef, c_coef = fibering_coefficients(u, prm)
    return a_coef * t ** 2 / 2 + b_coef * t ** 4 / 4 - c_coef * abs(t) ** prm.p / prm.p


# ---------------------------------------------------------------------------
# Scaling curves
# ---------------------------------------------------------------------------

Profile = Union[RadialFunction, Callable[[np.ndarray], np.ndarray]]


def scaling_exponent(prm: Params, regime: str) -> float:
    if regime == "high_p":
        return 2.0
    if regime == "low_p":
        if prm.p <= 2:
            raise DomainError("low_p scaling needs p > 2")
        return prm.p / (prm.p - 2.0)
    raise DomainError(f"unknown scaling regime {regime!r}")


def rescaled_profile(u: Profile, grid: RadialGrid, tau: float, exponent: float) -> RadialFunction:
    """τ^α u(τr) on the grid; callables are evaluated exactly, grid functions by spline.

    Raises:
        TruncationError: If the rescaled profile has not decayed at r_max
    """
    if not tau > 0:
        raise DomainError(f"tau must be > 0, got {tau}")
    r = grid.nodes
    values = u(tau * r) if callable(u) else u.evaluate(tau * r)
    rescaled = RadialFunction(grid, tau ** exponent * np.asarray(values, dtype=float))
    if not rescaled.is_admissible:
        raise TruncationError(f"profile rescaled by tau={tau} leaves mass beyond r_max={grid.r_max}")
    return rescaled


def mp_curve_value(u: Profile, prm: Params, tau: float, regime: str,
                   grid: Optional[RadialGrid] = None) -> float:
    """J_q(u_τ) along u_τ = τ²u(τ·) (high_p) or τ^{p/(p-2)}u(τ·) (low_p)."""
    if grid is None:
        if callable(u):
            raise DomainError("a grid is required when the profile is a callable")
        grid = u.grid
    return j_q(rescaled_profile(u, grid, tau, scaling_exponent(prm, regime)), prm)


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------

def diagnostics(u: RadialFunction, prm: Params, trace: Optional[List[Tuple]] = None) -> Diagnostics:
    """Evaluate every residual and norm at u in one pass."""
    t = functional_terms(u, prm, with_potential=True)
    g = gradient_from_terms(u, t)
    h1 = math.sqrt(t.h1_sq)
    g_norm = math.sqrt(max(float(g.values @ (sobolev_matrix(u.grid, prm.omega) @ g.values)), 0.0))
    return Diagnostics(
        j_value=j_from_terms(t),
        nehari_residual=_nehari_from_terms(t),
        pohozaev_residual=_pohozaev_from_terms(t),
        pohozaev_alt_residual=_pohozaev_alt_from_terms(u, t),
        h1_norm=h1,
        l2_norm=math.sqrt(t.l2_sq),
        lp_norm=t.lp_p ** (1.0 / prm.p),
        grad_l2=math.sqrt(t.grad_sq),
        interaction=t.interaction,
        ne2_residual=t.potential.ne2_residual if t.potential else 0.0,
        rel_grad=g_norm / h1 if h1 > 0 else 0.0,
        trace=list(trace or []),
    )
