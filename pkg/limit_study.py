#!/usr/bin/env python3
"""
a → 0 convergence studies

Two sweeps compare Bopp-Podolsky quantities with their Coulomb (a = 0)
counterparts on one fixed grid, so every gap is a difference of co-sampled
vectors:

* fixed source: φ^a for a prescribed density f against the Coulomb φ⁰;
* full solution: ground states u^a warm-started down the a-sweep against the
  Schrödinger-Poisson ground state u⁰.

The smallest a must be at least five minimal grid spacings, otherwise the
e^{-r/a} boundary layer of the kernel is not resolved.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from errors import DomainError, ResolutionError
from functional import Params
from kernel import KernelParams
from potential import bp_potential, field_energy, source_potential
from radial_space import FOUR_PI, RadialFunction, RadialGrid, norm_h1, norm_lp
from solver import Solution, SolverConfig, solve_ground_state

logger = logging.getLogger(__name__)

RESOLUTION_FACTOR = 5.0
MODES = ("fixed_source", "full_solution")


@dataclass
class LimitReport:
    """Gaps between the a > 0 and a = 0 problems along a sweep"""
    mode: str
    a_values: List[float]
    d12_gaps: List[float] = field(default_factory=list)
    alap_norms: List[float] = field(default_factory=list)
    h1_gaps: List[float] = field(default_factory=list)
    relative_d12_gaps: List[float] = field(default_factory=list)
    relative_alap_norms: List[float] = field(default_factory=list)
    relative_h1_gaps: List[float] = field(default_factory=list)
    d12_norms: List[float] = field(default_factory=list)
    reference_d12_norm: float = 0.0
    energy_residuals: List[float] = field(default_factory=list)
    domination_ok: bool = True
    converged: bool = True

    def rows(self) -> List[Tuple[float, float, float, Optional[float]]]:
        """(a, d12_gap, alap_norm, h1_gap) per sweep entry."""
        h1 = self.h1_gaps if self.h1_gaps else [None] * len(self.a_values)
        return list(zip(self.a_values, self.d12_gaps, self.alap_norms, h1))

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def validate_a_values(a_values: Sequence[float], grid: RadialGrid) -> List[float]:
    """Check that the sweep is strictly decreasing, positive and resolved.

    Raises:
        DomainError: If the sweep is empty, non-positive or not decreasing
        ResolutionError: If some a is below five minimal grid spacings
    """
    values = [float(a) for a in a_values]
    if not values:
        raise DomainError("a_values must not be empty")
    if any(a <= 0 or not math.isfinite(a) for a in values):
        raise DomainError("a_values must be finite and > 0")
    if any(b >= a for a, b in zip(values, values[1:])):
        raise DomainError("a_values must be strictly decreasing")
    limit = RESOLUTION_FACTOR * grid.min_spacing
    if values[-1] < limit:
        raise ResolutionError(
            f"a={values[-1]} is below {RESOLUTION_FACTOR:g} grid spacings ({limit:.3e}); "
            f"refine the grid or lower core_scale")
    return values


def _relative(value: float, scale: float) -> float:
    return value / scale if scale > 0 else 0.0


def _dominated(phi: np.ndarray, reference: np.ndarray) -> bool:
    slack = 1e-12 * max(float(np.max(np.abs(reference))), 1e-300)
    return bool(np.all(phi <= reference + slack))


def potential_limit(f: RadialFunction, a_values: Sequence[float]) -> LimitReport:
    """Sweep φ^a of a fixed nonnegative source f toward the Coulomb potential.

    Args:
        f: Source density (plays the role of u²)
        a_values: Strictly decreasing sweep

    Returns:
        LimitReport in fixed_source mode; d12 gaps relative to ‖∇φ⁰‖₂ and
        aΔφ^a norms relative to ‖4πf‖_{6/5}
    """
    values = validate_a_values(a_values, f.grid)
    reference = source_potential(f, None)
    d12_scale = reference.grad_phi_l2
    f_scale = FOUR_PI * norm_lp(f, 6.0 / 5.0)

    report = LimitReport(mode="fixed_source", a_values=values, reference_d12_norm=d12_scale)
    for a in values:
        result = source_potential(f, KernelParams(a))
        gap = math.sqrt(max(field_energy(result.phi.with_values(result.phi.values - reference.phi.values)), 0.0))
        alap = a * result.lap_phi_l2
        report.d12_gaps.append(gap)
        report.alap_norms.append(alap)
        report.relative_d12_gaps.append(_relative(gap, d12_scale))
        report.relative_alap_norms.append(_relative(alap, f_scale))
        report.d12_norms.append(result.grad_phi_l2)
        report.energy_residuals.append(result.ne2_residual if result.interaction > 0 else 0.0)
        report.domination_ok &= _dominated(result.phi.values, reference.phi.values)
        logger.info(f"fixed source a={a:g}: d12 gap={gap:.4e}, a|Δφ|={alap:.4e}")
    return report


def solution_limit(prm_base: Params, a_values: Sequence[float],
                   cfg: Optional[SolverConfig] = None,
                   grid: Optional[RadialGrid] = None,
                   reference: Optional[Solution] = None) -> LimitReport:
    """Sweep ground states u^a toward the Schrödinger-Poisson ground state.

    Each a is warm-started from the previous solution. The reference is
    solved with the Coulomb potential unless one is given.

    Args:
        prm_base: ω, q and p of the sweep; its a is ignored
        a_values: Strictly decreasing sweep
        cfg: Solver settings
        grid: Grid (defaults to the reference's grid or the default grid)
        reference: Solution to measure gaps against
    """
    cfg = cfg or SolverConfig()
    grid = grid or (reference.u.grid if reference is not None else RadialGrid.create())
    values = validate_a_values(a_values, grid)

    if reference is None:
        sp_params = Params(a=values[-1], omega=prm_base.omega, q=prm_base.q,
                           p=prm_base.p, coulomb_limit=True)
        reference = solve_ground_state(sp_params, cfg, grid=grid)
    u0, phi0 = reference.u, reference.phi

    h1_scale = norm_h1(u0, prm_base.omega)
    d12_scale = math.sqrt(max(field_energy(phi0), 0.0))
    density = u0.with_values(u0.values ** 2)
    f_scale = FOUR_PI * norm_lp(density, 6.0 / 5.0)

    report = LimitReport(mode="full_solution", a_values=values, reference_d12_norm=d12_scale,
                         converged=reference.converged)
    warm = u0
    for a in values:
        prm = prm_base.with_a(a)
        sol = solve_ground_state(prm, cfg, grid=grid, initial=warm)
        warm = sol.u
        pot = bp_potential(sol.u, prm.kernel)

        h1_gap = norm_h1(sol.u.with_values(sol.u.values - u0.values), prm.omega)
        d12_gap = math.sqrt(max(field_energy(pot.phi.with_values(pot.phi.values - phi0.values)), 0.0))
        alap = a * pot.lap_phi_l2

        report.h1_gaps.append(h1_gap)
        report.d12_gaps.append(d12_gap)
        report.alap_norms.append(alap)
        report.relative_h1_gaps.append(_relative(h1_gap, h1_scale))
        report.relative_d12_gaps.append(_relative(d12_gap, d12_scale))
        report.relative_alap_norms.append(_relative(alap, f_scale))
        report.d12_norms.append(pot.grad_phi_l2)
        report.energy_residuals.append(pot.ne2_residual)
        report.domination_ok &= _dominated(source_potential(density, prm.kernel).phi.values,
                                           source_potential(density, None).phi.values)
        report.converged &= sol.converged
        if not sol.converged:
            logger.warning(f"solve at a={a:g} did not converge: {sol.message}")
        logger.info(f"full solution a={a:g}: H1 gap={h1_gap:.4e}, d12 gap={d12_gap:.4e}")
    return report
