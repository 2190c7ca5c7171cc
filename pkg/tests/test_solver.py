#!/usr/bin/env python3
"""
Tests for the ground state solvers and the shooting oracle
"""

import logging
import math
from types import SimpleNamespace

import numpy as np
import pytest

try:
    import solver
    from errors import DomainError, NehariProjectionError
    from functional import Params, boundedness_bound, grad_j_q, nehari_residual, pohozaev_residual
    from radial_space import gaussian_profile, inner_h1, norm_grad_l2, norm_h1
    from solver import (
        SolverConfig,
        cross_check,
        local_ground_state,
        nehari_project,
        nehari_scale,
        seed_profile,
        shooting_local,
        solve_ground_state,
        solve_scf,
    )
except ImportError:
    pytest.skip("solver module not available", allow_module_level=True)


def h1_distance(u, v, omega=1.0):
    diff = u.with_values(u.values - v.values)
    return math.sqrt(inner_h1(diff, diff, omega))


@pytest.fixture(scope="module")
def coupled_solution(default_grid):
    return solve_ground_state(Params(q=0.5, p=5.0), grid=default_grid)


class TestNehariScale:
    """Test cases for the fibering root"""

    def test_closed_form_without_coupling(self):
        assert nehari_scale(2.0, 0.0, 3.0, 4.5) == pytest.approx((2.0 / 3.0) ** (1 / 2.5), rel=1e-15)

    def test_unit_root(self):
        assert nehari_scale(1.0, 0.0, 1.0, 6.0) == 1.0

    @pytest.mark.parametrize("p", [3.0, 4.0, 4.5, 5.5])
    def test_root_solves_fibering_equation(self, p):
        a_coef, b_coef, c_coef = 1.0, 0.05, 2.0
        t = nehari_scale(a_coef, b_coef, c_coef, p)
        assert t > 0
        assert abs(a_coef + b_coef * t ** 2 - c_coef * t ** (p - 2)) <= 1e-12 * a_coef

    def test_largest_root_below_four(self):
        """For p < 4 the fibering derivative has two roots; the outer one is returned"""
        a_coef, b_coef, c_coef, p = 1.0, 0.05, 2.0, 3.0
        t = nehari_scale(a_coef, b_coef, c_coef, p)
        assert t > ((p - 2) * c_coef / (2 * b_coef)) ** (1 / (4 - p))

    def test_no_root(self):
        with pytest.raises(NehariProjectionError):
            nehari_scale(1.0, 100.0, 0.1, 3.0)
        with pytest.raises(NehariProjectionError):
            nehari_scale(1.0, 2.0, 1.0, 4.0)
        with pytest.raises(NehariProjectionError):
            nehari_scale(0.0, 0.0, 1.0, 5.0)

    def test_projection_lands_on_manifold(self, gaussian):
        for prm in (Params(q=0.0, p=4.5), Params(q=1.0, p=5.0), Params(q=0.2, p=3.5)):
            projected = nehari_project(gaussian, prm)
            assert abs(nehari_residual(projected, prm)) <= 1e-12 * norm_h1(projected, prm.omega) ** 2


class TestSolverConfig:
    """Test cases for solver settings"""

    def test_defaults(self):
        cfg = SolverConfig()
        assert cfg.method == "nehari_descent"
        assert cfg.grad_tol == 1e-8

    @pytest.mark.parametrize("kwargs", [{"method": "newton"}, {"grad_tol": 0.0}, {"max_iter": 0},
                                        {"armijo_shrink": 1.0}, {"damping": 2.0}])
    def test_invalid(self, kwargs):
        with pytest.raises(DomainError):
            SolverConfig(**kwargs)


@pytest.mark.slow
class TestShootingOracle:
    """Test cases for the q = 0 shooting oracle"""

    def test_positive_and_decreasing(self, shooting_solution):
        values = shooting_solution.values
        assert np.all(values > 0)
        assert np.all(np.diff(values) <= 0)

    def test_pohozaev(self, shooting_solution):
        prm = Params(q=0.0, p=4.5)
        residual = pohozaev_residual(shooting_solution, prm)
        assert abs(residual) <= 1e-4 * norm_grad_l2(shooting_solution) ** 2

    def test_critical_point(self, shooting_solution):
        prm = Params(q=0.0, p=4.5)
        g = grad_j_q(shooting_solution, prm)
        assert math.sqrt(inner_h1(g, g, 1.0)) <= 1e-4 * norm_h1(shooting_solution, 1.0)

    def test_omega_scaling(self, shooting_solution, default_grid):
        """u_ω(r) = ω^{1/(p-2)} u_1(√ω r)"""
        p = 4.5
        scaled = shooting_local(4.0, p, default_grid)
        factor = 4.0 ** (1 / (p - 2))
        assert scaled.values[0] == pytest.approx(factor * shooting_solution.values[0], rel=1e-8)
        expected = factor * shooting_solution.evaluate(2.0 * default_grid.nodes)
        np.testing.assert_allclose(scaled.values, expected, atol=1e-6 * scaled.values[0])

    def test_boundedness_identity_at_solution(self, coarse_grid):
        """Nehari and Pohozaev together give lhs = (5p/2 - 6)J at a q = 0 solution"""
        u = shooting_local(1.0, 3.5, coarse_grid)
        check = boundedness_bound(u, Params(q=0.0, p=3.5))
        assert check.lhs == pytest.approx(check.exact_rhs, rel=1e-4)

    def test_rejects_supercritical_power(self):
        with pytest.raises(DomainError):
            shooting_local(1.0, 7.0)


def assert_certified(solution):
    """Nehari, Ne2 and Pohozaev certificates of a converged solution"""
    diag = solution.diagnostics
    assert solution.converged, solution.message
    assert np.all(solution.u.values[:-1] > 0)
    assert diag.j_value > 0
    assert diag.rel_grad <= SolverConfig().grad_tol
    assert abs(diag.nehari_residual) <= 1e-6 * diag.h1_norm ** 2
    assert abs(diag.ne2_residual) <= 1e-6
    assert abs(diag.pohozaev_residual) <= 1e-4 * diag.grad_l2 ** 2


@pytest.mark.slow
class TestSolveGroundState:
    """Test cases for the Nehari descent and SCF solvers"""

    @pytest.mark.parametrize("omega,p", [(1.0, 4.5), (1.0, 5.0), (4.0, 5.0)])
    def test_matches_shooting_oracle(self, default_grid, omega, p):
        solution = solve_ground_state(Params(q=0.0, omega=omega, p=p), grid=default_grid)
        assert solution.method == "nehari_descent"
        assert solution.converged, solution.message
        reference = shooting_local(omega, p, default_grid)
        diag = solution.diagnostics
        assert abs(diag.nehari_residual) <= 1e-6 * diag.h1_norm ** 2
        assert abs(diag.pohozaev_residual) <= 1e-4 * diag.grad_l2 ** 2
        gap = h1_distance(solution.u, reference, omega)
        assert gap <= 1e-4 * norm_h1(reference, omega)

    def test_coupled_solution_certificates(self, coupled_solution):
        assert coupled_solution.method == "nehari_descent"
        assert_certified(coupled_solution)

    def test_descent_hands_over_to_newton(self, coupled_solution):
        assert "Newton-Krylov polish converged" in coupled_solution.message
        assert coupled_solution.iterations < SolverConfig().max_iter

    def test_level_increases_with_coupling(self, coupled_solution, default_grid):
        uncoupled = solve_ground_state(Params(q=0.0, p=5.0), grid=default_grid)
        assert uncoupled.converged
        assert coupled_solution.diagnostics.j_value > uncoupled.diagnostics.j_value

    def test_descent_is_monotone(self, coupled_solution):
        values = [entry[1] for entry in coupled_solution.diagnostics.trace]
        for before, after in zip(values, values[1:]):
            assert after <= before + 1e-12 * abs(before)

    def test_scf_below_quartic_power(self, default_grid):
        prm = Params(q=1.0, p=3.5)
        solution = solve_ground_state(prm, grid=default_grid)
        assert solution.method == "scf"
        assert_certified(solution)
        check = boundedness_bound(solution.u, prm)
        assert check.lhs <= check.bound_rhs
        assert check.lhs == pytest.approx(check.exact_rhs, rel=1e-3)

    def test_low_power_routes_to_scf(self, default_grid):
        prm = Params(q=0.1, p=2.8)
        solution = solve_ground_state(prm, grid=default_grid)
        assert solution.method == "scf"
        assert solution.converged, solution.message
        assert abs(solution.diagnostics.nehari_residual) <= 1e-5 * solution.diagnostics.h1_norm ** 2

    def test_deterministic(self, coarse_grid):
        cfg = SolverConfig(max_iter=15)
        first = solve_ground_state(Params(q=0.5, p=5.0), cfg, grid=coarse_grid)
        second = solve_ground_state(Params(q=0.5, p=5.0), cfg, grid=coarse_grid)
        assert first.diagnostics.trace == second.diagnostics.trace
        np.testing.assert_array_equal(first.u.values, second.u.values)

    def test_budget_exhausted(self, coarse_grid):
        solution = solve_ground_state(Params(q=0.5, p=5.0), SolverConfig(max_iter=1), grid=coarse_grid)
        assert not solution.converged
        assert "max_iter" in solution.message

    def test_descent_resumes_when_polish_fails(self, coarse_grid, mocker):
        polish = mocker.patch.object(solver, "_polish", return_value=None)
        cfg = SolverConfig(grad_tol=1e-7, max_iter=3000)
        solution = solve_ground_state(Params(q=0.5, p=5.0), cfg, grid=coarse_grid)
        polish.assert_called_once()
        steps = [entry[0] for entry in solution.diagnostics.trace]
        assert steps == list(range(len(steps)))
        assert "Newton-Krylov" not in solution.message

    def test_out_of_range_power(self, coarse_grid):
        with pytest.raises(DomainError, match=r"p out of \(2,6\)"):
            solve_ground_state(Params(p=6.5), grid=coarse_grid)

    def test_scf_agrees_with_descent(self, coarse_grid):
        prm = Params(q=1.0, p=5.0)
        descent = solve_ground_state(prm, grid=coarse_grid)
        scf = solve_scf(prm, SolverConfig(method="scf", damping=1.0), grid=coarse_grid)
        assert descent.converged and scf.converged
        assert h1_distance(descent.u, scf.u) <= 1e-3 * norm_h1(descent.u, 1.0)

    def test_scf_continuation_in_q(self, coarse_grid):
        base = solve_scf(Params(q=0.0, p=4.5), grid=coarse_grid)
        gaps = []
        for q in (0.2, 0.1, 0.05):
            solution = solve_scf(Params(q=q, p=4.5), grid=coarse_grid)
            gaps.append(h1_distance(solution.u, base.u))
        assert gaps[0] > gaps[1] > gaps[2]

    def test_local_ground_state_without_potential(self, coarse_grid):
        u, iterations, converged = local_ground_state(coarse_grid, 1.0, 4.5)
        assert converged
        reference = shooting_local(1.0, 4.5, coarse_grid)
        assert h1_distance(u, reference) <= 1e-3 * norm_h1(reference, 1.0)

    def test_solution_serializes(self, coupled_solution, default_grid):
        data = coupled_solution.to_dict()
        assert data["converged"] is True
        assert len(data["u"]) == default_grid.n
        assert data["params"]["q"] == 0.5


class TestConvergenceGate:
    """Test cases for the certificates behind converged"""

    def test_sign_change_is_not_converged(self, gaussian, mocker):
        prm = Params(q=0.0, p=4.5)
        mocker.patch.object(solver, "NEHARI_TOLERANCE", 1.0)
        flipped = gaussian.with_values(np.where(gaussian.grid.nodes < 1.0, gaussian.values, -gaussian.values))
        solution = solver._finish(flipped, prm, SolverConfig(grad_tol=1e3), 0, "nehari_descent", "", [])
        assert not solution.converged
        assert "positive=False" in solution.message

    @pytest.mark.slow
    def test_certificate_failure_is_reported(self, shooting_solution, mocker):
        prm = Params(q=0.0, p=4.5)
        mocker.patch.object(solver, "NEHARI_TOLERANCE", 1.0)
        negative = shooting_solution.scaled(-1.0)
        solution = solver._finish(negative, prm, SolverConfig(grad_tol=1e-3), 0, "nehari_descent", "", [])
        assert not solution.converged
        assert "certificate failed" in solution.message
        assert "positive=False" in solution.message

    @pytest.mark.slow
    def test_positive_solution_passes_gate(self, shooting_solution, mocker):
        mocker.patch.object(solver, "NEHARI_TOLERANCE", 1.0)
        solution = solver._finish(shooting_solution, Params(q=0.0, p=4.5), SolverConfig(grad_tol=1e-3),
                                  0, "nehari_descent", "", [])
        assert solution.converged


class TestCrossCheck:
    """Test cases for the descent versus SCF comparison"""

    def test_disagreement_is_logged_not_raised(self, gaussian, mocker, caplog):
        mocker.patch.object(solver, "solve_ground_state", return_value=SimpleNamespace(u=gaussian))
        mocker.patch.object(solver, "solve_scf", return_value=SimpleNamespace(u=gaussian.scaled(1.1)))
        with caplog.at_level(logging.WARNING, logger="solver"):
            gap = cross_check(Params(q=0.5, p=5.0), grid=gaussian.grid)
        assert gap == pytest.approx(0.1, rel=1e-12)
        assert "disagree" in caplog.text

    def test_agreement(self, gaussian, mocker, caplog):
        mocker.patch.object(solver, "solve_ground_state", return_value=SimpleNamespace(u=gaussian))
        mocker.patch.object(solver, "solve_scf", return_value=SimpleNamespace(u=gaussian))
        with caplog.at_level(logging.WARNING, logger="solver"):
            assert cross_check(Params(q=0.5, p=5.0), grid=gaussian.grid) == 0.0
        assert "disagree" not in caplog.text


class TestSeed:
    """Test cases for the default seed"""

    def test_seed_is_reference_gaussian(self, coarse_grid):
        np.testing.assert_array_equal(seed_profile(coarse_grid, SolverConfig()).values,
                                      gaussian_profile(coarse_grid).values)
