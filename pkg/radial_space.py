#!/usr/bin/env python3
"""
Radial grids and radial functions

A RadialGrid discretizes [0, r_max] with nodes r(t) = c·sinh(κt) on a uniform
parameter t ∈ [0, 1], κ = asinh(r_max/c). Nodes cluster near the origin with
spacing ≈ cκ·dt and grade geometrically toward r_max.

Three discrete operators live on the grid and are cached on first use:

* node quadrature: Σ w_i f(r_i) ≈ ∫ f(r) r² dr from 6-point local Lagrange
  interpolants of f·r² integrated interval by interval (w₀ = 0);
* node derivatives: finite differences in t (order 6 or 2) with even
  reflection at t = 0 and one-sided closure at t = 1;
* a staggered difference S to cell midpoints with midpoint weights, which
  defines ‖∇u‖₂² and the H¹ inner product.

The split convolution weights used by the potential module are built here
too, since they only depend on the grid.
"""

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Tuple, Union

import numpy as np
from scipy import sparse
from scipy.interpolate import CubicSpline

from errors import AdmissibilityError, DomainError, GridMismatchError, ResolutionError

logger = logging.getLogger(__name__)

MIN_NODES = 64
STENCIL = 6
GAUSS_POINTS = 4
ADMISSIBILITY_DECAY = 1e-6
FOUR_PI = 4.0 * math.pi


def fornberg_weights(z: float, x: np.ndarray, m: int) -> np.ndarray:
    """Finite difference weights for derivatives 0..m at z from nodes x.

    Returns:
        Array of shape (len(x), m + 1); column k holds the weights of the
        k-th derivative
    """
    n = len(x)
    c = np.zeros((n, m + 1))
    c1 = 1.0
    c4 = x[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c


def _lagrange_basis(stencil: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Values of the Lagrange basis of `stencil` at points x, shape (len(x), len(stencil))."""
    basis = np.ones((len(x), len(stencil)))
    for j, xj in enumerate(stencil):
        for m, xm in enumerate(stencil):
            if m != j:
                basis[:, j] *= (x - xm) / (xj - xm)
    return basis


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Discretization of [0, r_max]; hashes by identity so it can key caches."""
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    r_max: float
    core_scale: float
    derivative_order: int

    @classmethod
    def create(cls, n: int = 512, r_max: float = 30.0, core_scale: float = 1.0,
               derivative_order: int = 6) -> "RadialGrid":
        """Build a sinh-graded grid.

        Args:
            n: Number of nodes (>= 64)
            r_max: Truncation radius
            core_scale: Radius below which nodes are nearly uniform
            derivative_order: 6 (default) or 2

        Raises:
            ResolutionError: If n < 64
            DomainError: For non-positive lengths or an unsupported order
        """
        if n < MIN_NODES:
            raise ResolutionError(f"grid needs at least {MIN_NODES} nodes, got {n}")
        if not (r_max > 0 and math.isfinite(r_max)):
            raise DomainError(f"r_max must be finite and > 0, got {r_max}")
        if not (core_scale > 0 and math.isfinite(core_scale)):
            raise DomainError(f"core_scale must be finite and > 0, got {core_scale}")
        if derivative_order not in (2, 6):
            raise DomainError(f"derivative_order must be 2 or 6, got {derivative_order}")

        kappa = math.asinh(r_max / core_scale)
        t = np.linspace(0.0, 1.0, n)
        nodes = core_scale * np.sinh(kappa * t)
        nodes[0] = 0.0
        nodes[-1] = float(r_max)

        lam = cls._interval_quadrature(nodes)
        weights = lam * nodes ** 2
        grid = cls(nodes=nodes, weights=weights, r_max=float(r_max),
                   core_scale=float(core_scale), derivative_order=int(derivative_order))
        nodes.setflags(write=False)
        weights.setflags(write=False)
        logger.debug(f"Created radial grid: n={n}, r_max={r_max}, core_scale={core_scale}, "
                     f"min spacing={nodes[1]:.3e}, max spacing={nodes[-1] - nodes[-2]:.3e}")
        return grid

    # -- quadrature ---------------------------------------------------------

    @staticmethod
    def _interval_row(nodes: np.ndarray, k: int, lo: int, hi: int) -> Tuple[int, np.ndarray]:
        """Weights integrating the local interpolant over [r_k, r_{k+1}].

        The stencil is restricted to node indices lo..hi and has up to six
        points centred on the interval.
        """
        count = min(STENCIL, hi - lo + 1)
        start = int(np.clip(k - (STENCIL // 2 - 1), lo, hi + 1 - count))
        stencil = nodes[start:start + count]
        gx, gw = np.polynomial.legendre.leggauss(GAUSS_POINTS)
        left, right = nodes[k], nodes[k + 1]
        half = 0.5 * (right - left)
        points = left + half * (gx + 1.0)
        coeffs = half * gw @ _lagrange_basis(stencil, points)
        return start, coeffs

    @classmethod
    def _interval_quadrature(cls, nodes: np.ndarray) -> np.ndarray:
        n = len(nodes)
        lam = np.zeros(n)
        for k in range(n - 1):
            start, coeffs = cls._interval_row(nodes, k, 0, n - 1)
            lam[start:start + len(coeffs)] += coeffs
        return lam

    # -- derived geometry ---------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def min_spacing(self) -> float:
        return float(self.nodes[1] - self.nodes[0])

    @cached_property
    def kappa(self) -> float:
        return math.asinh(self.r_max / self.core_scale)

    @cached_property
    def dt(self) -> float:
        return 1.0 / (self.n - 1)

    @cached_property
    def jacobian(self) -> np.ndarray:
        """dr/dt at the nodes."""
        t = np.linspace(0.0, 1.0, self.n)
        return self.core_scale * self.kappa * np.cosh(self.kappa * t)

    @cached_property
    def jacobian_derivative(self) -> np.ndarray:
        """d²r/dt² at the nodes."""
        t = np.linspace(0.0, 1.0, self.n)
        return self.core_scale * self.kappa ** 2 * np.sinh(self.kappa * t)

    @cached_property
    def midpoint_weights(self) -> np.ndarray:
        """dt·r²/r_t at cell midpoints; ‖∇u‖₂² = 4π Σ gw (Su)²."""
        tm = (np.arange(self.n - 1) + 0.5) * self.dt
        r = self.core_scale * np.sinh(self.kappa * tm)
        rt = self.core_scale * self.kappa * np.cosh(self.kappa * tm)
        return self.dt * r ** 2 / rt

    # -- difference operators ------------------------------------------------

    def _node_derivative_matrix(self, order: int) -> sparse.csr_matrix:
        n = self.n
        half = self.derivative_order // 2
        size = 2 * half + 1
        rows, cols, vals = [], [], []
        for k in range(n):
            if k + half <= n - 1:
                offsets = np.arange(k - half, k + half + 1)
            else:
                offsets = np.arange(n - size, n)
            w = fornberg_weights(float(k), offsets.astype(float), order)[:, order]
            for j, wj in zip(offsets, w):
                rows.append(k)
                cols.append(abs(int(j)))  # even reflection u(-t) = u(t)
                vals.append(wj / self.dt ** order)
        return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))

    @cached_property
    def d1_matrix(self) -> sparse.csr_matrix:
        return self._node_derivative_matrix(1)

    @cached_property
    def d2_matrix(self) -> sparse.csr_matrix:
        return self._node_derivative_matrix(2)

    @cached_property
    def stagger_matrix(self) -> sparse.csr_matrix:
        """du/dt at cell midpoints t_{k+1/2}, shape (n-1, n)."""
        n = self.n
        rows, cols, vals = [], [], []
        if self.derivative_order == 2:
            for k in range(n - 1):
                rows += [k, k]
                cols += [k, k + 1]
                vals += [-1.0 / self.dt, 1.0 / self.dt]
            return sparse.csr_matrix((vals, (rows, cols)), shape=(n - 1, n))

        for k in range(n - 1):
            if k <= n - 3:
                offsets = np.arange(k - 1, k + 3)
            else:
                offsets = np.arange(n - 4, n)
            w = fornberg_weights(k + 0.5, offsets.astype(float), 1)[:, 1]
            for j, wj in zip(offsets, w):
                rows.append(k)
                cols.append(abs(int(j)))
                vals.append(wj / self.dt)
        return sparse.csr_matrix((vals, (rows, cols)), shape=(n - 1, n))

    @cached_property
    def convolution_weights(self) -> np.ndarray:
        """Split quadrature matrix Λ for kernels with a kink at s = r_i.

        Row i integrates over [0, r_i] with stencils confined to nodes 0..i
        and over [r_i, r_max] with stencils confined to nodes i..n-1, so
        Σ_j Λ_ij F_ij ≈ ∫ F_i(s) ds for integrands smooth on each side.
        """
        nodes = self.nodes
        n = self.n
        standard = np.zeros((n - 1, n))
        bottom = np.zeros(n - 1, dtype=int)
        top = np.zeros(n - 1, dtype=int)
        for k in range(n - 1):
            start, coeffs = self._interval_row(nodes, k, 0, n - 1)
            standard[k, start:start + len(coeffs)] = coeffs
            bottom[k] = start
            top[k] = start + len(coeffs) - 1
        cumulative = np.cumsum(standard, axis=0)
        total = cumulative[-1]

        lam = np.zeros((n, n))
        for i in range(n):
            if i > 0:
                # intervals k < i whose standard stencil stays inside 0..i
                first_bad = int(np.searchsorted(top[:i], i, side="right"))
                if first_bad > 0:
                    lam[i] += cumulative[first_bad - 1]
                for k in range(first_bad, i):
                    start, coeffs = self._interval_row(nodes, k, 0, i)
                    lam[i, start:start + len(coeffs)] += coeffs
            if i < n - 1:
                # intervals k >= i whose standard stencil stays inside i..n-1
                first_good = i + int(np.searchsorted(bottom[i:], i, side="left"))
                if first_good < n - 1:
                    lam[i] += total - (cumulative[first_good - 1] if first_good > 0 else 0.0)
                for k in range(i, first_good):
                    start, coeffs = self._interval_row(nodes, k, i, n - 1)
                    lam[i, start:start + len(coeffs)] += coeffs
        lam.setflags(write=False)
        return lam

    def describe(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "r_max": self.r_max,
            "core_scale": self.core_scale,
            "derivative_order": self.derivative_order,
        }


def same_grid(*functions: "RadialFunction") -> RadialGrid:
    """Return the shared grid or raise GridMismatchError."""
    grid = functions[0].grid
    for f in functions[1:]:
        if f.grid is not grid:
            raise GridMismatchError("radial functions live on different grids")
    return grid


@dataclass(frozen=True, eq=False)
class RadialFunction:
    """Real values at the nodes of a RadialGrid."""
    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.n,):
            raise GridMismatchError(
                f"expected {self.grid.n} values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DomainError("radial function values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_callable(cls, grid: RadialGrid, fn: Callable[[np.ndarray], np.ndarray]) -> "RadialFunction":
        return cls(grid, fn(grid.nodes))

    @classmethod
    def zeros(cls, grid: RadialGrid) -> "RadialFunction":
        return cls(grid, np.zeros(grid.n))

    def with_values(self, values: np.ndarray) -> "RadialFunction":
        return RadialFunction(self.grid, values)

    def scaled(self, factor: float) -> "RadialFunction":
        return RadialFunction(self.grid, factor * self.values)

    @property
    def is_admissible(self) -> bool:
        peak = float(np.max(np.abs(self.values)))
        return abs(self.values[-1]) <= ADMISSIBILITY_DECAY * peak

    def require_admissible(self, name: str = "u") -> "RadialFunction":
        if not self.is_admissible:
            raise AdmissibilityError(
                f"{name} does not decay at r_max={self.grid.r_max}: "
                f"|{name}(r_max)| = {abs(self.values[-1]):.3e}, max |{name}| = "
                f"{np.max(np.abs(self.values)):.3e}")
        return self

    def evaluate(self, radii: np.ndarray) -> np.ndarray:
        """Cubic spline interpolation with u'(0) = 0; zero beyond r_max."""
        radii = np.asarray(radii, dtype=float)
        spline = CubicSpline(self.grid.nodes, self.values, bc_type=((1, 0.0), (2, 0.0)))
        inside = radii <= self.grid.r_max
        return np.where(inside, spline(np.minimum(radii, self.grid.r_max)), 0.0)

    # -- serialization ---------------------------------------------------------

    def to_csv(self, path: Union[str, Path], header: Tuple[str, str] = ("r", "value")) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(list(header))
            for r, v in zip(self.grid.nodes, self.values):
                writer.writerow([repr(float(r)), repr(float(v))])

    @classmethod
    def from_csv(cls, path: Union[str, Path], grid: RadialGrid) -> "RadialFunction":
        with open(path, "r", newline="") as f:
            reader = csv.reader(f)
            next(reader)
            rows = [(float(r), float(v)) for r, v in reader]
        radii = np.array([r for r, _ in rows])
        if len(radii) != grid.n or not np.array_equal(radii, grid.nodes):
            raise GridMismatchError(f"radii in {path} do not match the grid nodes")
        return cls(grid, np.array([v for _, v in rows]))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "grid": self.grid.describe(),
            "r": [float(r) for r in self.grid.nodes],
            "values": [float(v) for v in self.values],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str, grid: Optional[RadialGrid] = None) -> "RadialFunction":
        data = json.loads(text)
        if grid is None:
            grid_data = data["grid"]
            grid = RadialGrid.create(n=grid_data["n"], r_max=grid_data["r_max"],
                                     core_scale=grid_data["core_scale"],
                                     derivative_order=grid_data["derivative_order"])
        if not np.array_equal(np.array(data["r"], dtype=float), grid.nodes):
            raise GridMismatchError("serialized radii do not match the grid nodes")
        return cls(grid, np.array(data["values"], dtype=float))


# ---------------------------------------------------------------------------
# Quadrature and norms
# ---------------------------------------------------------------------------

def integrate(f: RadialFunction) -> float:
    """4π Σ w_i f(r_i) ≈ ∫_{R³} f(|x|) dx."""
    return float(FOUR_PI * np.dot(f.grid.weights, f.values))


def _gradient_energy(grid: RadialGrid, u: np.ndarray, v: np.ndarray) -> float:
    return float(FOUR_PI * np.dot(grid.midpoint_weights, (grid.stagger_matrix @ u) * (grid.stagger_matrix @ v)))


def norm_grad_l2(u: RadialFunction) -> float:
    """‖∇u‖₂ over the truncated ball."""
    return math.sqrt(max(_gradient_energy(u.grid, u.values, u.values), 0.0))


def inner_h1(u: RadialFunction, v: RadialFunction, omega: float) -> float:
    """⟨u, v⟩ = ∫∇u·∇v + ω∫uv with the staggered gradient."""
    grid = same_grid(u, v)
    l2 = FOUR_PI * np.dot(grid.weights, u.values * v.values)
    return _gradient_energy(grid, u.values, v.values) + omega * float(l2)


def norm_h1(u: RadialFunction, omega: float) -> float:
    """√(‖∇u‖₂² + ω‖u‖₂²).

    Raises:
        AdmissibilityError: If u does not decay at r_max
    """
    if not omega > 0:
        raise DomainError(f"omega must be > 0, got {omega}")
    u.require_admissible()
    return math.sqrt(max(inner_h1(u, u, omega), 0.0))


def norm_lp(u: RadialFunction, p: float) -> float:
    """(4π Σ w_i |u_i|^p)^{1/p} for p >= 1."""
    if not p >= 1:
        raise DomainError(f"L^p norm needs p >= 1, got {p}")
    total = FOUR_PI * np.dot(u.grid.weights, np.abs(u.values) ** p)
    return float(total) ** (1.0 / p)


def norm_d(phi: RadialFunction, a: float, lap_l2: Optional[float] = None) -> float:
    """𝒟 norm √(‖∇φ‖₂² + a²‖Δφ‖₂²); the Laplacian is differenced unless given."""
    if lap_l2 is None:
        lap_l2 = norm_lp(radial_laplacian(phi), 2)
    return math.sqrt(norm_grad_l2(phi) ** 2 + a ** 2 * lap_l2 ** 2)


# ---------------------------------------------------------------------------
# Derivatives
# ---------------------------------------------------------------------------

def radial_derivative(u: RadialFunction) -> RadialFunction:
    grid = u.grid
    return u.with_values((grid.d1_matrix @ u.values) / grid.jacobian)


def radial_laplacian(u: RadialFunction) -> RadialFunction:
    """u'' + (2/r)u', with 3u''(0) at the origin.

    Raises:
        ResolutionError: If the grid has fewer than 64 nodes
    """
    grid = u.grid
    if grid.n < MIN_NODES:
        raise ResolutionError(f"radial Laplacian needs at least {MIN_NODES} nodes")
    ut = grid.d1_matrix @ u.values
    utt = grid.d2_matrix @ u.values
    ur = ut / grid.jacobian
    urr = (utt - grid.jacobian_derivative * ur) / grid.jacobian ** 2
    lap = np.empty_like(urr)
    lap[1:] = urr[1:] + 2.0 * ur[1:] / grid.nodes[1:]
    lap[0] = 3.0 * utt[0] / grid.jacobian[0] ** 2
    return u.with_values(lap)


# ---------------------------------------------------------------------------
# Profiles
# ---------------------------------------------------------------------------

def gaussian_profile(grid: RadialGrid, width: float = 1.0, amplitude: float = 1.0) -> RadialFunction:
    """amplitude·exp(-r²/(2 width²)); width = 1 is the reference profile."""
    return RadialFunction(grid, amplitude * np.exp(-grid.nodes ** 2 / (2.0 * width ** 2)))


def random_profile(grid: RadialGrid, rng: np.random.Generator) -> RadialFunction:
    """Sum of 1-4 even-symmetrized Gaussian bumps with random centre, width and amplitude.

    Bumps are e^{-(r-c)²/(2σ²)} + e^{-(r+c)²/(2σ²)} with c ∈ [0, 4],
    σ ∈ [0.4, 1.5] and |amplitude| ∈ [0.2, 2] with a random sign, so every
    profile is smooth at the origin and decays long before r_max >= 15.
    """
    r = grid.nodes
    values = np.zeros_like(r)
    for _ in range(int(rng.integers(1, 5))):
        centre = rng.uniform(0.0, 4.0)
        sigma = rng.uniform(0.4, 1.5)
        amplitude = rng.uniform(0.2, 2.0) * rng.choice([-1.0, 1.0])
        values += amplitude * (np.exp(-(r - centre) ** 2 / (2 * sigma ** 2))
                               + np.exp(-(r + centre) ** 2 / (2 * sigma ** 2)))
    return RadialFunction(grid, values).require_admissible()
