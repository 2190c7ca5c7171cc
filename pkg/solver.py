#!/usr/bin/env python3
"""
Ground state solvers

* Nehari descent: Sobolev-gradient steps u ← |u - τg| followed by projection
  onto the Nehari manifold, with Armijo backtracking on J_q. Used for p > 4,
  where every ray meets the manifold exactly once.
* SCF: freeze V = q²φ_u, solve the local ground state of
  -Δv + ωv + Vv = v^{p-1} by the same descent, mix u ← (1-θ)u + θv, and
  finish with Newton-Krylov on the gradient once the mixing stalls. Starting
  from the seed, q is raised in continuation stages.
* Shooting: the q = 0 ground state of -u'' - (2/r)u' + ωu = u^{p-1} by
  bisection on u(0); the independent oracle for the other two.
"""

import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import NoConvergence, brentq, newton_krylov

from errors import (AdmissibilityError, DomainError, MethodError, NehariProjectionError,
                    NumericError, OracleError)
from functional import (Diagnostics, Params, diagnostics, functional_terms, grad_j_q,
                        gradient_from_terms, j_from_terms, potential_of, sobolev_gradient)
from radial_space import (FOUR_PI, RadialFunction, RadialGrid, gaussian_profile, inner_h1,
                          norm_grad_l2, norm_lp)

logger = logging.getLogger(__name__)

METHODS = ("nehari_descent", "scf")
NEHARI_TOLERANCE = 1e-6
MIN_STEP = 1e-10
STEP_GROWTH = 1.5
ROUND_OFF = 16 * np.finfo(float).eps
POLISH_THRESHOLD = 1e-3
DESCENT_HANDOFF = 1e-6


@dataclass
class SolverConfig:
    """Settings shared by the variational solvers"""
    method: str = "nehari_descent"
    max_iter: int = 2000
    grad_tol: float = 1e-8
    step: float = 1.0
    armijo_sigma: float = 1e-4
    armijo_shrink: float = 0.5
    max_step: float = 4.0
    damping: float = 1.0
    min_damping: float = 1.0 / 64
    inner_max_iter: int = 2000
    continuation_step: float = 0.1
    newton_max_iter: int = 40
    seed_profile: str = "gaussian"
    seed_width: float = 1.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise DomainError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if not self.grad_tol > 0:
            raise DomainError(f"grad_tol must be > 0, got {self.grad_tol}")
        if self.max_iter < 1 or self.inner_max_iter < 1:
            raise DomainError("iteration budgets must be >= 1")
        if not (self.step > 0 and self.max_step >= self.step):
            raise DomainError("need 0 < step <= max_step")
        if not 0 < self.armijo_shrink < 1 or not 0 < self.armijo_sigma < 1:
            raise DomainError("Armijo parameters must lie in (0, 1)")
        if not 0 < self.min_damping <= self.damping <= 1:
            raise DomainError("need 0 < min_damping <= damping <= 1")
        if self.continuation_step < 0:
            raise DomainError("continuation_step must be >= 0")
        if self.seed_profile != "gaussian":
            raise DomainError(f"unknown seed profile {self.seed_profile!r}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class Solution:
    """A computed (u, φ_u) pair with its certificates."""
    u: RadialFunction
    phi: RadialFunction
    params: Params
    diagnostics: Diagnostics
    iterations: int
    converged: bool
    method: str = "nehari_descent"
    message: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {
            "params": self.params.to_dict(),
            "method": self.method,
            "converged": self.converged,
            "iterations": self.iterations,
            "message": self.message,
            "diagnostics": self.diagnostics.to_dict(),
            "grid": self.u.grid.describe(),
            "r": [float(r) for r in self.u.grid.nodes],
            "u": [float(v) for v in self.u.values],
            "phi": [float(v) for v in self.phi.values],
        }


# ---------------------------------------------------------------------------
# Nehari projection
# ---------------------------------------------------------------------------

def nehari_scale(a_coef: float, b_coef: float, c_coef: float, p: float) -> float:
    """Positive root t of A + Bt² - Ct^{p-2} = 0 (the largest one when p < 4).

    Raises:
        NehariProjectionError: If no positive root exists
    """
    if not (a_coef > 0 and c_coef > 0):
        raise NehariProjectionError(f"degenerate ray: A={a_coef}, C={c_coef}")
    if b_coef == 0:
        return (a_coef / c_coef) ** (1.0 / (p - 2))
    if p == 4:
        if c_coef <= b_coef:
            raise NehariProjectionError("p = 4 and C <= B: the ray never meets the manifold")
        return math.sqrt(a_coef / (c_coef - b_coef))

    def f(t: float) -> float:
        return a_coef + b_coef * t ** 2 - c_coef * t ** (p - 2)

    if p > 4:
        lo = 0.0
        hi = (a_coef / c_coef) ** (1.0 / (p - 2))
        while f(hi) >= 0:
            hi *= 2.0
    else:
        lo = ((p - 2) * c_coef / (2 * b_coef)) ** (1.0 / (4 - p))
        if f(lo) >= 0:
            raise NehariProjectionError(
                f"fibering derivative stays positive (minimum {f(lo):.3e} at t={lo:.3e})")
        hi = 2.0 * lo
        while f(hi) <= 0:
            hi *= 2.0
    return brentq(f, lo, hi, xtol=1e-15 * hi, rtol=4 * np.finfo(float).eps, maxiter=500)


def nehari_project(u: RadialFunction, prm: Params) -> RadialFunction:
    """Scale u onto the Nehari manifold: t*u with J_q'(t*u)[t*u] = 0."""
    t = functional_terms(u, prm)
    return u.scaled(nehari_scale(t.h1_sq, prm.q ** 2 * t.interaction, t.lp_p, prm.p))


# ---------------------------------------------------------------------------
# Descent engine shared by the full and frozen-potential problems
# ---------------------------------------------------------------------------

@dataclass
class _State:
    u: RadialFunction
    h1_sq: float
    quad: float
    quartic: float
    lp_p: float
    p: float
    phi: Optional[np.ndarray] = None

    @property
    def j(self) -> float:
        return 0.5 * self.quad + 0.25 * self.quartic - self.lp_p / self.p


class _FullProblem:
    """J_q itself."""

    def __init__(self, prm: Params):
        self.prm = prm

    def evaluate(self, u: RadialFunction) -> _State:
        t = functional_terms(u, self.prm)
        phi = t.potential.phi.values if t.potential else None
        return _State(u, t.h1_sq, t.h1_sq, self.prm.q ** 2 * t.interaction, t.lp_p, self.prm.p, phi)

    def project(self, s: _State) -> _State:
        t = nehari_scale(s.quad, s.quartic, s.lp_p, s.p)
        phi = None if s.phi is None else t ** 2 * s.phi
        return _State(s.u.scaled(t), t ** 2 * s.h1_sq, t ** 2 * s.quad, t ** 4 * s.quartic,
                      t ** s.p * s.lp_p, s.p, phi)

    def gradient(self, s: _State) -> RadialFunction:
        nonlinear = -np.abs(s.u.values) ** (s.p - 2) * s.u.values
        if s.phi is not None:
            nonlinear = nonlinear + self.prm.q ** 2 * s.phi * s.u.values
        return sobolev_gradient(s.u, self.prm.omega, nonlinear)


class _FrozenProblem:
    """½‖u‖² + ½∫Vu² - (1/p)‖u‖_p^p for a fixed potential V."""

    def __init__(self, omega: float, p: float, potential: np.ndarray):
        self.omega = omega
        self.p = p
        self.potential = potential

    def evaluate(self, u: RadialFunction) -> _State:
        u.require_admissible()
        h1 = norm_grad_l2(u) ** 2 + self.omega * norm_lp(u, 2) ** 2
        v_term = FOUR_PI * float(np.dot(u.grid.weights, self.potential * u.values ** 2))
        return _State(u, h1, h1 + v_term, 0.0, norm_lp(u, self.p) ** self.p, self.p)

    def project(self, s: _State) -> _State:
        t = nehari_scale(s.quad, 0.0, s.lp_p, s.p)
        return _State(s.u.scaled(t), t ** 2 * s.h1_sq, t ** 2 * s.quad, 0.0, t ** s.p * s.lp_p, s.p)

    def gradient(self, s: _State) -> RadialFunction:
        nonlinear = self.potential * s.u.values - np.abs(s.u.values) ** (s.p - 2) * s.u.values
        return sobolev_gradient(s.u, self.omega, nonlinear)


@dataclass
class _DescentResult:
    state: _State
    iterations: int
    converged: bool
    message: str
    trace: List[Tuple[int, float, float, float]] = field(default_factory=list)


def _descend(problem, initial: RadialFunction, omega: float, cfg: SolverConfig,
             max_iter: int, tol: float, label: str) -> _DescentResult:
    state = problem.project(problem.evaluate(initial))
    tau = cfg.step
    trace: List[Tuple[int, float, float, float]] = []

    for iteration in range(max_iter):
        g = problem.gradient(state)
        g_sq = inner_h1(g, g, omega)
        rel = math.sqrt(max(g_sq, 0.0) / state.h1_sq)
        trace.append((iteration, state.j, rel, tau))
        logger.debug(f"{label} iter {iteration}: J={state.j:.12e} rel_grad={rel:.3e} step={tau:.3e}")
        if rel <= tol:
            return _DescentResult(state, iteration, True, "gradient tolerance reached", trace)

        allowance = ROUND_OFF * max(abs(state.j), state.h1_sq)
        while True:
            if tau < MIN_STEP:
                return _DescentResult(state, iteration, False, "line search stalled", trace)
            candidate = state.u.with_values(np.abs(state.u.values - tau * g.values))
            try:
                trial = problem.project(problem.evaluate(candidate))
            except (NehariProjectionError, AdmissibilityError):
                tau *= cfg.armijo_shrink
                continue
            if trial.j <= state.j - cfg.armijo_sigma * tau * g_sq + allowance:
                break
            tau *= cfg.armijo_shrink
        state = trial
        tau = min(tau * STEP_GROWTH, cfg.max_step)

    return _DescentResult(state, max_iter, False, f"max_iter={max_iter} reached", trace)


# ---------------------------------------------------------------------------
# Public solvers
# ---------------------------------------------------------------------------

def seed_profile(grid: RadialGrid, cfg: SolverConfig) -> RadialFunction:
    return gaussian_profile(grid, width=cfg.seed_width)


def _finish(u: RadialFunction, prm: Params, cfg: SolverConfig, iterations: int,
            method: str, message: str, trace: List[Tuple]) -> Solution:
    diag = diagnostics(u, prm, trace)
    scale = diag.h1_norm ** 2
    positive = bool(np.all(u.values[:-1] > 0))
    converged = (diag.rel_grad is not None and diag.rel_grad <= cfg.grad_tol
                 and abs(diag.nehari_residual) <= NEHARI_TOLERANCE * scale
                 and diag.j_value > 0 and positive)
    if diag.rel_grad is not None and diag.rel_grad <= cfg.grad_tol and not converged:
        message = f"{message}; certificate failed (J={diag.j_value:.3e}, positive={positive})"
    phi = potential_of(u, prm).phi
    status = "converged" if converged else "not converged"
    logger.info(f"{method}: {status} after {iterations} iterations ({message}); "
                f"J={diag.j_value:.10g}, rel_grad={diag.rel_grad:.3e}")
    return Solution(u=u, phi=phi, params=prm, diagnostics=diag, iterations=iterations,
                    converged=converged, method=method, message=message)


def _rel_grad(u: RadialFunction, prm: Params) -> float:
    g = grad_j_q(u, prm)
    return math.sqrt(inner_h1(g, g, prm.omega) / inner_h1(u, u, prm.omega))


def _solve_nehari(prm: Params, cfg: SolverConfig, grid: RadialGrid,
                  initial: Optional[RadialFunction]) -> Solution:
    """Descend to DESCENT_HANDOFF, then Newton-Krylov to grad_tol.

    The Armijo test compares J values, which stop resolving decrease once
    rel_grad² nears round-off. If the polish fails, the descent resumes with
    the remaining budget.
    """
    problem = _FullProblem(prm)
    start = initial if initial is not None else seed_profile(grid, cfg)
    handoff = max(cfg.grad_tol, DESCENT_HANDOFF)
    result = _descend(problem, start, prm.omega, cfg, cfg.max_iter, handoff, "nehari_descent")
    if not result.converged or handoff == cfg.grad_tol:
        return _finish(result.state.u, prm, cfg, result.iterations, "nehari_descent",
                       result.message, result.trace)

    polished = _polish(result.state.u, prm, cfg)
    if polished is not None and _rel_grad(polished, prm) <= cfg.grad_tol:
        return _finish(polished, prm, cfg, result.iterations, "nehari_descent",
                       f"{result.message}; Newton-Krylov polish converged", result.trace)

    logger.debug("Newton-Krylov polish did not reach grad_tol, resuming the descent")
    budget = max(cfg.max_iter - result.iterations, 1)
    rest = _descend(problem, result.state.u, prm.omega, cfg, budget, cfg.grad_tol, "nehari_descent")
    offset = result.iterations
    trace = result.trace[:-1] + [(offset + i, j, rel, tau) for i, j, rel, tau in rest.trace]
    return _finish(rest.state.u, prm, cfg, offset + rest.iterations, "nehari_descent",
                   rest.message, trace)


def solve_ground_state(prm: Params, cfg: Optional[SolverConfig] = None,
                       grid: Optional[RadialGrid] = None,
                       initial: Optional[RadialFunction] = None) -> Solution:
    """Compute a positive radial critical point of J_q.

    Args:
        prm: Parameters with p in (2, 6)
        cfg: Solver settings; p <= 4 always routes to SCF
        grid: Grid to solve on (taken from `initial` or the default grid)
        initial: Warm start

    Returns:
        Solution; `converged` is False if the budget ran out

    Raises:
        DomainError: If p is outside (2, 6)
        MethodError: If both methods fail to project onto the Nehari manifold
    """
    prm.require_solver_range()
    cfg = cfg or SolverConfig()
    grid = grid or (initial.grid if initial is not None else RadialGrid.create())

    if cfg.method == "scf" or prm.p <= 4:
        if cfg.method == "nehari_descent":
            logger.info(f"p={prm.p} <= 4: Nehari projection is not unique, using SCF")
        return solve_scf(prm, cfg, grid=grid, initial=initial)

    try:
        return _solve_nehari(prm, cfg, grid, initial)
    except NehariProjectionError as e:
        logger.warning(f"Nehari descent failed ({e}); falling back to SCF")
        try:
            return solve_scf(prm, cfg, grid=grid, initial=initial)
        except NehariProjectionError as inner:
            raise MethodError(f"both methods failed: {inner}") from inner


def local_ground_state(grid: RadialGrid, omega: float, p: float,
                       potential: Optional[np.ndarray] = None,
                       initial: Optional[RadialFunction] = None,
                       cfg: Optional[SolverConfig] = None,
                       tol: Optional[float] = None) -> Tuple[RadialFunction, int, bool]:
    """Ground state of -Δv + (ω + V)v = v^{p-1} with V frozen.

    Returns:
        (profile, iterations, converged)
    """
    cfg = cfg or SolverConfig()
    v = np.zeros(grid.n) if potential is None else np.asarray(potential, dtype=float)
    start = initial if initial is not None else seed_profile(grid, cfg)
    result = _descend(_FrozenProblem(omega, p, v), start, omega, cfg, cfg.inner_max_iter,
                      tol if tol is not None else 0.1 * cfg.grad_tol, "local")
    return result.state.u, result.iterations, result.converged


def _polish(u: RadialFunction, prm: Params, cfg: SolverConfig) -> Optional[RadialFunction]:
    """Newton-Krylov on the H¹ gradient; None if it does not converge."""
    def residual(x: np.ndarray) -> np.ndarray:
        return grad_j_q(u.with_values(x), prm).values

    f_tol = 0.1 * cfg.grad_tol * float(np.max(np.abs(u.values)))
    try:
        x = newton_krylov(residual, u.values, f_tol=f_tol, maxiter=cfg.newton_max_iter,
                          method="lgmres")
    except NoConvergence as e:
        logger.debug(f"Newton-Krylov polish stopped early: {e}")
        x = np.asarray(e.args[0]) if e.args else None
    except (AdmissibilityError, NumericError, ValueError) as e:
        logger.debug(f"Newton-Krylov polish failed: {e}")
        return None
    if x is None or not np.all(np.isfinite(x)):
        return None
    return u.with_values(np.abs(x))


def _scf_stage(prm: Params, u: RadialFunction, cfg: SolverConfig,
               trace: List[Tuple], offset: int) -> Tuple[RadialFunction, int, bool, str]:
    theta = cfg.damping
    previous = math.inf
    local: Optional[RadialFunction] = None
    best, best_residual = u, math.inf

    for outer in range(cfg.max_iter):
        terms = functional_terms(u, prm)
        if terms.potential is None:
            potential = np.zeros(u.grid.n)
        else:
            potential = prm.q ** 2 * terms.potential.phi.values
        local, _, _ = local_ground_state(u.grid, prm.omega, prm.p, potential,
                                         initial=local or u, cfg=cfg)
        norm_sq = terms.h1_sq
        step = local.with_values(local.values - u.values)
        residual = math.sqrt(inner_h1(step, step, prm.omega) / norm_sq)
        g = gradient_from_terms(u, terms)
        rel_grad = math.sqrt(inner_h1(g, g, prm.omega) / norm_sq)
        trace.append((offset + outer, j_from_terms(terms), rel_grad, theta))
        logger.debug(f"scf q={prm.q:.4g} iter {outer}: residual={residual:.3e} "
                     f"rel_grad={rel_grad:.3e} damping={theta:.3g}")
        if residual < best_residual:
            best, best_residual = u, residual
        if rel_grad <= cfg.grad_tol:
            return u, outer, True, "gradient tolerance reached"
        if residual > previous:
            theta *= 0.5
            if theta < cfg.min_damping:
                return best, outer + 1, False, "damping exhausted"
        previous = residual
        u = u.with_values(np.abs((1.0 - theta) * u.values + theta * local.values))
        if residual < POLISH_THRESHOLD:
            return u, outer + 1, False, "mixing reached the polish threshold"

    return best, cfg.max_iter, False, f"max_iter={cfg.max_iter} reached"


def solve_scf(prm: Params, cfg: Optional[SolverConfig] = None,
              grid: Optional[RadialGrid] = None,
              initial: Optional[RadialFunction] = None) -> Solution:
    """Self-consistent field iteration with damping, q-continuation and Newton polish."""
    prm.require_solver_range()
    cfg = cfg or SolverConfig(method="scf")
    grid = grid or (initial.grid if initial is not None else RadialGrid.create())

    if initial is not None or prm.q == 0 or cfg.continuation_step == 0:
        stages = [prm.q]
        u = initial if initial is not None else seed_profile(grid, cfg)
    else:
        count = max(1, math.ceil(prm.q / cfg.continuation_step))
        stages = [prm.q * (k + 1) / count for k in range(count)]
        u = seed_profile(grid, cfg)

    trace: List[Tuple] = []
    total = 0
    message = ""
    for q_stage in stages:
        stage_prm = prm.with_q(q_stage)
        u, iterations, converged, message = _scf_stage(stage_prm, u, cfg, trace, total)
        total += iterations
        if not converged:
            polished = _polish(u, stage_prm, cfg)
            if polished is not None:
                if _rel_grad(polished, stage_prm) <= cfg.grad_tol:
                    u, message = polished, f"{message}; Newton-Krylov polish converged"
                    continue
            logger.warning(f"SCF stage q={q_stage:.4g} did not converge: {message}")
            break

    return _finish(u, prm, cfg, total, "scf", message, trace)


def cross_check(prm: Params, cfg: Optional[SolverConfig] = None, grid: Optional[RadialGrid] = None,
                tol: float = 1e-3) -> float:
    """Relative H¹ gap between the Nehari descent and SCF solutions.

    A gap above tol is logged as a warning and returned, never raised.
    """
    cfg = cfg or SolverConfig()
    grid = grid or RadialGrid.create()
    descent = solve_ground_state(prm, replace(cfg, method="nehari_descent"), grid=grid)
    scf = solve_scf(prm, replace(cfg, method="scf"), grid=grid)
    diff = descent.u.with_values(descent.u.values - scf.u.values)
    scale = math.sqrt(inner_h1(descent.u, descent.u, prm.omega))
    gap = math.sqrt(inner_h1(diff, diff, prm.omega)) / scale if scale > 0 else 0.0
    if gap > tol:
        logger.warning(f"nehari_descent and scf disagree for q={prm.q}, p={prm.p}: relative H1 gap {gap:.3e}")
    else:
        logger.info(f"nehari_descent and scf agree: relative H1 gap {gap:.3e}")
    return gap


# ---------------------------------------------------------------------------
# Shooting oracle (q = 0)
# ---------------------------------------------------------------------------

def _shoot(u0: float, omega: float, p: float, r_end: float):
    r0 = 1e-4 / math.sqrt(omega)
    curvature = (omega * u0 - u0 ** (p - 1)) / 3.0

    def rhs(r, y):
        u, v = y
        return [v, -2.0 * v / r + omega * u - abs(u) ** (p - 2) * u]

    def crossing(r, y):
        return y[0]
    crossing.terminal = True
    crossing.direction = -1

    def turning(r, y):
        return y[1]
    turning.terminal = True
    turning.direction = 1

    y0 = [u0 + 0.5 * curvature * r0 ** 2, curvature * r0]
    sol = solve_ivp(rhs, (r0, r_end), y0, method="DOP853", rtol=1e-12, atol=1e-14 * u0,
                    events=[crossing, turning], dense_output=True)
    if sol.t_events[0].size:
        return "over", sol, r0, curvature
    return "under", sol, r0, curvature


def shooting_local(omega: float, p: float, grid: Optional[RadialGrid] = None,
                   match_level: float = 1e-4) -> RadialFunction:
    """Positive radial ground state of -Δu + ωu = u^{p-1} by shooting.

    Bisects on u(0) between undershoot (u' turns positive) and overshoot (u
    crosses zero), then replaces the tail beyond u = match_level·u(0) by the
    decaying solution u_m (r_m/r) e^{-√ω (r - r_m)} of the linearized equation.

    Raises:
        OracleError: If the bisection bracket cannot be established
    """
    if not 2 < p < 6:
        raise DomainError(f"p out of (2,6): {p}")
    if not omega > 0:
        raise DomainError(f"omega must be > 0, got {omega}")
    grid = grid or RadialGrid.create()
    r_end = grid.r_max

    lo = omega ** (1.0 / (p - 2)) * (1.0 + 1e-9)
    if _shoot(lo, omega, p, r_end)[0] != "under":
        raise OracleError(f"lower shooting value {lo} does not undershoot")
    hi = 2.0 * lo
    for _ in range(60):
        if _shoot(hi, omega, p, r_end)[0] == "over":
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise OracleError("could not find an overshooting initial value")

    for _ in range(200):
        if hi - lo <= 4 * np.finfo(float).eps * hi:
            break
        mid = 0.5 * (lo + hi)
        if _shoot(mid, omega, p, r_end)[0] == "over":
            hi = mid
        else:
            lo = mid
    logger.debug(f"shooting: u(0) bracketed in [{lo!r}, {hi!r}]")

    _, sol, r0, curvature = _shoot(lo, omega, p, r_end)
    samples = np.linspace(r0, sol.t[-1], 20001)
    values = sol.sol(samples)[0]
    below = np.nonzero(values <= match_level * lo)[0]
    idx = below[0] if below.size else int(np.argmin(values))
    r_match, u_match = samples[idx], values[idx]
    if not u_match > 0:
        raise OracleError("shooting profile is not positive at the matching radius")

    r = grid.nodes
    out = np.empty_like(r)
    core = r <= r0
    mid = (r > r0) & (r <= r_match)
    tail = r > r_match
    out[core] = lo + 0.5 * curvature * r[core] ** 2
    out[mid] = sol.sol(r[mid])[0]
    out[tail] = u_match * (r_match / r[tail]) * np.exp(-math.sqrt(omega) * (r[tail] - r_match))
    return RadialFunction(grid, out)
