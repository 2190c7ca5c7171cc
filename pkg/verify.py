#!/usr/bin/env python3
"""
Numerical probes of the identities and sign arguments behind the system

Every probe evaluates both sides of an identity or inequality on sampled
profiles and returns a ProbeReport. A passing probe demonstrates the
statement on those samples; it is not a proof and is never reported as one.

The suite fans the probes out over a thread pool. Each probe draws its
random profiles from its own seeded generator, so reports do not depend on
scheduling and come back sorted by name.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from errors import DomainError, SBPError, TruncationError
from functional import (Params, functional_terms, j_q, j_q_truncated,
                        mp_curve_value, nehari_level_bound, pohozaev_alt_residual,
                        pohozaev_residual, truncated_bound_identity)
from kernel import KernelParams, kernel_bracket, sphere_average
from potential import convolve, double_integral
from radial_space import (RadialFunction, RadialGrid, gaussian_profile, integrate,
                          norm_h1, random_profile)

logger = logging.getLogger(__name__)

FLOOR_FACTOR = 1e-14
IDENTITY_TOLERANCE = 1e-6
INEQUALITY_TOLERANCE = 1e-10
RANDOM_SAMPLES = 50
HIGH_P_POWERS = (6.0, 8.0)
LOW_P_POWERS = (1.5, 2.0)
BATCH_SCALES = (0.1, 1.0, 10.0)
SPHERE_RADIUS = 1e-2
SPHERE_DIRECTIONS = 50
TAU_RATIO = 1.05
TAU_BUDGET = 1e3
TAU_RESOLUTION = 0.2
BRACKET_SAMPLES = np.linspace(0.0, 50.0, 50001)[1:]

STATUS_PASSED = "passed"
STATUS_FAILED = "failed"
STATUS_INCONCLUSIVE = "inconclusive"
PROBE_NAMES = ("fourier_identity", "nonexistence_high_p", "nonexistence_low_p", "mp_geometry",
               "nehari_level_bound", "truncation", "pohozaev_forms", "bracket_positivity")


@dataclass
class ProbeReport:
    """Outcome of one probe.

    passed holds exactly when |residual| <= tolerance·max(|lhs|, |rhs|, floor),
    with floor = 1e-14·scale. status is "inconclusive" when a search ran out
    of budget without deciding.
    """
    name: str
    lhs: float
    rhs: float
    residual: float
    passed: bool
    tolerance: float
    status: str = STATUS_PASSED
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def csv_row(self) -> List[Any]:
        return [self.name, self.lhs, self.rhs, self.residual, self.passed]


def make_report(name: str, lhs: float, rhs: float, residual: float, tolerance: float,
                scale: float = 1.0, status: Optional[str] = None,
                details: Optional[Dict[str, Any]] = None) -> ProbeReport:
    floor = FLOOR_FACTOR * abs(scale)
    passed = abs(residual) <= tolerance * max(abs(lhs), abs(rhs), floor)
    if status is None:
        status = STATUS_PASSED if passed else STATUS_FAILED
    return ProbeReport(name=name, lhs=float(lhs), rhs=float(rhs), residual=float(residual),
                       passed=bool(passed and status == STATUS_PASSED), tolerance=tolerance,
                       status=status, details=dict(details or {}))


def _require_nonzero(u: RadialFunction) -> None:
    if not np.any(u.values):
        raise DomainError("probe needs a nonzero profile")


def _worst(name: str, reports: List[ProbeReport]) -> ProbeReport:
    """Collapse a batch into its worst member, keeping the batch verdict."""
    def badness(r: ProbeReport) -> float:
        allowed = r.tolerance * max(abs(r.lhs), abs(r.rhs), 1e-300)
        return abs(r.residual) / allowed

    worst = max(reports, key=badness)
    failed = sum(not r.passed for r in reports)
    details = dict(worst.details)
    details.update({"samples": len(reports), "failed_samples": failed})
    return ProbeReport(name=name, lhs=worst.lhs, rhs=worst.rhs, residual=worst.residual,
                       passed=failed == 0, tolerance=worst.tolerance,
                       status=STATUS_PASSED if failed == 0 else STATUS_FAILED, details=details)


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, stream])


# ---------------------------------------------------------------------------
# Fourier identity
# ---------------------------------------------------------------------------

def check_fourier_identity(u: RadialFunction, kp: KernelParams,
                           tolerance: float = IDENTITY_TOLERANCE,
                           name: str = "fourier_identity") -> ProbeReport:
    """∫(e^{-d/a}/d ∗ u²)² dx against 2πa∬e^{-|x-y|/a}u²(x)u²(y).

    Both sides are independent quadratures: the left squares the Yukawa
    convolution, the right uses the closed-form sphere average of e^{-d/a}.
    """
    u.require_admissible()
    density = u.with_values(u.values ** 2)
    yukawa = convolve(density, "yukawa", kp)
    lhs = integrate(yukawa.with_values(yukawa.values ** 2))
    rhs = 2.0 * math.pi * kp.a * double_integral(u, "exp", kp)
    return make_report(name, lhs, rhs, lhs - rhs, tolerance,
                       details={"a": kp.a, "ratio": lhs / rhs if rhs else None})


# ---------------------------------------------------------------------------
# Nonexistence probes
# ---------------------------------------------------------------------------

def probe_nonexistence_high_p(u: RadialFunction, prm: Params,
                              tolerance: float = INEQUALITY_TOLERANCE,
                              name: str = "nonexistence_high_p") -> ProbeReport:
    """(3/p-½)‖∇u‖² + (3/p-3/2)ω‖u‖² - (q²a²/8π)‖Δφ‖² + (3/p-5/4)q²∫φu² <= -ω‖u‖².

    A solution would make the left side vanish, so a pass on every sample
    is consistent with nonexistence for p >= 6.

    Raises:
        DomainError: If p < 6 or u ≡ 0
    """
    if prm.p < 6:
        raise DomainError(f"high-p nonexistence probe needs p >= 6, got {prm.p}")
    _require_nonzero(u)
    t = functional_terms(u, prm, with_potential=prm.q != 0)
    p, q2 = prm.p, prm.q ** 2
    a2 = 0.0 if prm.coulomb_limit else prm.a ** 2
    value = ((3 / p - 0.5) * t.grad_sq + (3 / p - 1.5) * prm.omega * t.l2_sq
             - q2 * a2 / (8 * math.pi) * t.lap_phi_sq + (3 / p - 1.25) * q2 * t.interaction)
    bound = -prm.omega * t.l2_sq
    return make_report(name, value, bound, max(0.0, value - bound), tolerance,
                       scale=t.h1_sq, details={"p": p, "q": prm.q, "a": prm.a})


def probe_nonexistence_low_p(u: RadialFunction, prm: Params,
                             tolerance: float = INEQUALITY_TOLERANCE,
                             name: str = "nonexistence_low_p") -> ProbeReport:
    """Nehari identity rewritten with the Pohozaev pair terms; strictly positive for p <= 2.

    value = (1-p/6)‖∇u‖² + (1-p/2)ω‖u‖² + q²(1-5p/12)∫φu² - (q²p/12a)∬e^{-d/a}u²u²
    is bounded below by (2/3)‖∇u‖² + (q²/6a)∬[a𝒦 - e^{-d/a}]u²u² > 0. The
    scalar bracket (1-e^{-t})/t - e^{-t} is also checked on (0, 50].

    Raises:
        DomainError: If p > 2 or u ≡ 0
    """
    if prm.p > 2:
        raise DomainError(f"low-p nonexistence probe needs p <= 2, got {prm.p}")
    _require_nonzero(u)
    t = functional_terms(u, prm, with_potential=prm.q != 0)
    p, q2 = prm.p, prm.q ** 2
    if q2 == 0:
        exp_pair = bracket_pair = 0.0
    elif prm.coulomb_limit:
        exp_pair, bracket_pair = 0.0, t.interaction
    else:
        exp_pair = double_integral(u, "exp", prm.kernel) / prm.a
        bracket_pair = double_integral(u, "bracket", prm.kernel) / prm.a

    value = ((1 - p / 6) * t.grad_sq + (1 - p / 2) * prm.omega * t.l2_sq
             + q2 * (1 - 5 * p / 12) * t.interaction - q2 * p / 12 * exp_pair)
    lower = 2.0 / 3.0 * t.grad_sq + q2 / 6.0 * bracket_pair
    bracket_min = float(np.min(kernel_bracket(BRACKET_SAMPLES)))

    residual = max(0.0, lower - value, -value) + max(0.0, -bracket_min)
    status = None if value > 0 and lower > 0 else STATUS_FAILED
    return make_report(name, value, lower, residual, tolerance, scale=t.h1_sq, status=status,
                       details={"p": p, "q": prm.q, "a": prm.a, "bracket_min": bracket_min})


# ---------------------------------------------------------------------------
# Mountain-pass geometry
# ---------------------------------------------------------------------------

def _reference_profile(r: np.ndarray) -> np.ndarray:
    return np.exp(-r ** 2 / 2.0)


def check_mp_geometry(prm: Params, grid: Optional[RadialGrid] = None, seed: int = 0,
                      rho: float = SPHERE_RADIUS, directions: int = SPHERE_DIRECTIONS,
                      tau_budget: float = TAU_BUDGET,
                      name: str = "mp_geometry") -> ProbeReport:
    """Check J_q(0) = 0, J_q > 0 on the sphere ‖u‖ = ρ and a negative point on a scaling curve.

    The curve is τ²u(τ·) for p > 3 and τ^{p/(p-2)}u(τ·) for p <= 3, scanned
    geometrically from τ = 1 while the rescaled bump stays resolved. An
    exhausted scan is inconclusive, not a failure. residual counts the parts
    not established.

    Raises:
        DomainError: If p is outside (2, 6)
    """
    prm.require_solver_range()
    grid = grid or RadialGrid.create()
    regime = "high_p" if prm.p > 3 else "low_p"

    origin = j_q(RadialFunction.zeros(grid), prm)
    origin_ok = origin == 0.0

    rng = _rng(seed, 0)
    sphere_values = []
    for _ in range(directions):
        v = random_profile(grid, rng)
        sphere_values.append(j_q(v.scaled(rho / norm_h1(v, prm.omega)), prm))
    sphere_min = min(sphere_values)
    sphere_ok = sphere_min > 0

    tau_limit = min(tau_budget, TAU_RESOLUTION / grid.min_spacing)
    tau, best_tau, best_value = 1.0, None, math.inf
    while tau <= tau_limit:
        try:
            value = mp_curve_value(_reference_profile, prm, tau, regime, grid=grid)
        except TruncationError:
            break
        if value < best_value:
            best_tau, best_value = tau, value
        if value < 0:
            break
        tau *= TAU_RATIO
    curve_ok = best_value < 0

    missing = sum(not ok for ok in (origin_ok, sphere_ok, curve_ok))
    if not (origin_ok and sphere_ok):
        status = STATUS_FAILED
    elif not curve_ok:
        status = STATUS_INCONCLUSIVE
        logger.info(f"{name}: no negative value up to tau={tau_limit:.3g} (budget report)")
    else:
        status = STATUS_PASSED
    return make_report(name, sphere_min, best_value, missing, 0.0, status=status, details={
        "p": prm.p, "q": prm.q, "a": prm.a, "regime": regime, "rho": rho,
        "origin_value": origin, "sphere_min": sphere_min, "tau": best_tau,
        "tau_limit": tau_limit, "parts": {"origin": origin_ok, "sphere": sphere_ok, "curve": curve_ok},
    })


# ---------------------------------------------------------------------------
# Identities of the functional
# ---------------------------------------------------------------------------

def check_nehari_level_bound(u: RadialFunction, prm: Params,
                             tolerance: float = IDENTITY_TOLERANCE,
                             name: str = "nehari_level_bound") -> ProbeReport:
    """pJ_q(u) - J_q'(u)[u] = ((p-2)/2)‖u‖² + q²((p-4)/4)∫φu²."""
    lhs, rhs = nehari_level_bound(u, prm)
    return make_report(name, lhs, rhs, lhs - rhs, tolerance, details={"p": prm.p})


def check_truncation(prm: Params, grid: Optional[RadialGrid] = None, seed: int = 0,
                     count: int = RANDOM_SAMPLES, tolerance: float = INEQUALITY_TOLERANCE,
                     name: str = "truncation") -> ProbeReport:
    """J_{q,T} <= J_q, with equality when ‖u‖² <= T², plus the truncated ray identity.

    Each random profile is tested at T = 2‖u‖ (χ = 1), T = ‖u‖/√1.5
    (transition zone) and T = ‖u‖/2 (χ = 0).
    """
    grid = grid or RadialGrid.create()
    rng = _rng(seed, 1)
    worst, total_truncated, total_full = 0.0, 0.0, 0.0
    for _ in range(count):
        u = random_profile(grid, rng)
        full = j_q(u, prm)
        norm = norm_h1(u, prm.omega)
        for T in (2.0 * norm, norm / math.sqrt(1.5), 0.5 * norm):
            truncated = j_q_truncated(u, prm, T)
            violation = abs(truncated - full) if T >= norm else max(0.0, truncated - full)
            lhs, rhs = truncated_bound_identity(u, prm, T)
            worst = max(worst, violation, abs(lhs - rhs))
            total_truncated += truncated
            total_full += full
    return make_report(name, total_truncated, total_full, worst, tolerance,
                       details={"samples": count, "q": prm.q, "p": prm.p})


def check_pohozaev_forms(u: RadialFunction, prm: Params,
                         tolerance: float = IDENTITY_TOLERANCE,
                         name: str = "pohozaev_forms") -> ProbeReport:
    """The potential-norm and double-integral Pohozaev expressions agree for every u.

    lhs and rhs are the q-dependent parts; the local parts are shared.
    """
    t = functional_terms(u, prm, with_potential=True)
    local = (-0.5 * t.grad_sq - 1.5 * prm.omega * t.l2_sq + 3.0 / prm.p * t.lp_p)
    lhs = pohozaev_residual(u, prm) - local
    rhs = pohozaev_alt_residual(u, prm) - local
    return make_report(name, lhs, rhs, lhs - rhs, tolerance, scale=t.h1_sq,
                       details={"a": prm.a, "q": prm.q})


def check_bracket_positivity(grid: Optional[RadialGrid] = None, kp: Optional[KernelParams] = None,
                             name: str = "bracket_positivity") -> ProbeReport:
    """(1-e^{-t})/t - e^{-t} >= 0 on (0, 50] and its sphere average >= 0 on grid pairs."""
    grid = grid or RadialGrid.create()
    kp = kp or KernelParams(1.0)
    scalar = kernel_bracket(BRACKET_SAMPLES)
    r = grid.nodes
    averaged = sphere_average("bracket", r[:, None], r[None, 1:], kp)
    scalar_min, averaged_min = float(np.min(scalar)), float(np.min(averaged))
    slack = FLOOR_FACTOR * float(np.max(np.abs(averaged)))
    residual = max(0.0, -scalar_min) + max(0.0, -averaged_min - slack)
    return make_report(name, scalar_min, averaged_min, residual, 0.0,
                       details={"a": kp.a, "samples": int(scalar.size), "pairs": int(averaged.size)})


# ---------------------------------------------------------------------------
# Batches and suite
# ---------------------------------------------------------------------------

def _random_high_p(grid: RadialGrid, seed: int, count: int = RANDOM_SAMPLES) -> ProbeReport:
    """count profiles for every p in HIGH_P_POWERS and every (q, a) pair of BATCH_SCALES."""
    rng = _rng(seed, 2)
    profiles = [random_profile(grid, rng) for _ in range(count)]
    reports = []
    for p in HIGH_P_POWERS:
        for q in BATCH_SCALES:
            for a in BATCH_SCALES:
                prm = Params(a=a, omega=1.0, q=q, p=p)
                reports.extend(probe_nonexistence_high_p(u, prm) for u in profiles)
    return _worst("nonexistence_high_p_random", reports)


def _random_low_p(grid: RadialGrid, seed: int, count: int = RANDOM_SAMPLES) -> ProbeReport:
    rng = _rng(seed, 3)
    profiles = [random_profile(grid, rng) for _ in range(count)]
    reports = [probe_nonexistence_low_p(u, Params(a=1.0, omega=1.0, q=1.0, p=p))
               for p in LOW_P_POWERS for u in profiles]
    return _worst("nonexistence_low_p_random", reports)


def suite_probes(grid: RadialGrid, seed: int = 0,
                 count: int = RANDOM_SAMPLES) -> Dict[str, Callable[[], ProbeReport]]:
    """Named zero-argument probes of the default suite; count sizes the random batches."""
    u = gaussian_profile(grid)
    probes: Dict[str, Callable[[], ProbeReport]] = {}
    for a in (0.5, 1.0, 2.0):
        key = f"fourier_identity_a{a:g}"
        probes[key] = lambda a=a, key=key: check_fourier_identity(u, KernelParams(a), name=key)
    probes["nonexistence_high_p"] = lambda: probe_nonexistence_high_p(u, Params(p=6.0))
    probes["nonexistence_high_p_random"] = lambda: _random_high_p(grid, seed, count)
    probes["nonexistence_low_p"] = lambda: probe_nonexistence_low_p(u, Params(p=2.0))
    probes["nonexistence_low_p_random"] = lambda: _random_low_p(grid, seed, count)
    probes["mp_geometry_p4"] = lambda: check_mp_geometry(Params(p=4.0), grid, seed, name="mp_geometry_p4")
    probes["mp_geometry_p5"] = lambda: check_mp_geometry(Params(p=5.0, q=1.0), grid, seed,
                                                         name="mp_geometry_p5")
    probes["mp_geometry_p2.5"] = lambda: check_mp_geometry(Params(p=2.5, q=1e-3), grid, seed,
                                                           name="mp_geometry_p2.5")
    probes["nehari_level_bound"] = lambda: check_nehari_level_bound(u, Params(p=5.0))
    probes["truncation"] = lambda: check_truncation(Params(p=5.0), grid, seed, count=count)
    probes["pohozaev_forms"] = lambda: check_pohozaev_forms(u, Params(p=5.0))
    probes["bracket_positivity"] = lambda: check_bracket_positivity(grid)
    return probes


def run_probe(name: str, u: Optional[RadialFunction] = None, prm: Optional[Params] = None,
              grid: Optional[RadialGrid] = None, seed: int = 0,
              count: int = RANDOM_SAMPLES) -> ProbeReport:
    """Run one probe by name.

    Suite names run their default setup. The base names fourier_identity,
    nonexistence_high_p, nonexistence_low_p, mp_geometry, nehari_level_bound,
    truncation, pohozaev_forms and bracket_positivity take explicit
    parameters, with the Gaussian reference profile when u is None; given
    parameters take precedence over a suite setup of the same name.

    Raises:
        DomainError: For an unknown probe name or parameters outside its range
    """
    grid = grid or (u.grid if u is not None else RadialGrid.create())
    if name not in PROBE_NAMES or prm is None:
        suite = suite_probes(grid, seed, count)
        if name in suite:
            return suite[name]()
    prm = prm or Params()
    u = u if u is not None else gaussian_profile(grid)

    explicit: Dict[str, Callable[[], ProbeReport]] = {
        "fourier_identity": lambda: check_fourier_identity(u, prm.kernel),
        "nonexistence_high_p": lambda: probe_nonexistence_high_p(u, prm),
        "nonexistence_low_p": lambda: probe_nonexistence_low_p(u, prm),
        "mp_geometry": lambda: check_mp_geometry(prm, grid, seed),
        "nehari_level_bound": lambda: check_nehari_level_bound(u, prm),
        "truncation": lambda: check_truncation(prm, grid, seed, count=count),
        "pohozaev_forms": lambda: check_pohozaev_forms(u, prm),
        "bracket_positivity": lambda: check_bracket_positivity(grid, prm.kernel),
    }
    if name not in explicit:
        raise DomainError(f"unknown probe {name!r}; choose from {sorted(explicit)} "
                          f"or a suite probe")
    return explicit[name]()


def _error_report(name: str, error: Exception) -> ProbeReport:
    return ProbeReport(name=name, lhs=math.nan, rhs=math.nan, residual=math.nan, passed=False,
                       tolerance=0.0, status=STATUS_FAILED,
                       details={"error": f"{type(error).__name__}: {error}"})


def run_suite(grid: Optional[RadialGrid] = None, seed: int = 0, max_workers: int = 4,
              count: int = RANDOM_SAMPLES,
              progress_callback: Optional[Callable[[ProbeReport], None]] = None) -> List[ProbeReport]:
    """Run every suite probe concurrently.

    Args:
        grid: Grid shared by all probes
        seed: Seed of the per-probe random streams
        max_workers: Thread pool size
        count: Profiles per random batch
        progress_callback: Called with each report as it completes

    Returns:
        Reports sorted by probe name
    """
    grid = grid or RadialGrid.create()
    probes = suite_probes(grid, seed, count)
    reports = []
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        future_to_name = {executor.submit(probe): name for name, probe in probes.items()}
        for future in as_completed(future_to_name):
            name = future_to_name[future]
            try:
                report = future.result()
            except SBPError as e:
                logger.error(f"probe {name} raised {e}")
                report = _error_report(name, e)
            reports.append(report)
            logger.debug(f"probe {name}: {report.status}")
            if progress_callback:
                progress_callback(report)
    return sorted(reports, key=lambda r: r.name)
