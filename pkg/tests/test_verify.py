#!/usr/bin/env python3
"""
Tests for the identity checks and nonexistence probes
"""

import math

import numpy as np
import pytest

try:
    import verify
    from errors import DomainError, NumericError
    from functional import Params
    from kernel import KernelParams
    from radial_space import RadialFunction, random_profile
    from verify import (
        BATCH_SCALES,
        HIGH_P_POWERS,
        LOW_P_POWERS,
        PROBE_NAMES,
        RANDOM_SAMPLES,
        STATUS_FAILED,
        STATUS_INCONCLUSIVE,
        STATUS_PASSED,
        ProbeReport,
        check_bracket_positivity,
        check_fourier_identity,
        check_mp_geometry,
        check_nehari_level_bound,
        check_pohozaev_forms,
        check_truncation,
        make_report,
        probe_nonexistence_high_p,
        probe_nonexistence_low_p,
        run_probe,
        run_suite,
        suite_probes,
    )
except ImportError:
    pytest.skip("verify module not available", allow_module_level=True)


class TestMakeReport:
    """Test cases for the pass/fail rule"""

    def test_relative_tolerance(self):
        assert make_report("x", 1.0, 1.0 + 1e-7, 1e-7, 1e-6).passed
        assert not make_report("x", 1.0, 1.1, 0.1, 1e-6).passed

    def test_floor_uses_scale(self):
        """Two vanishing sides pass only within the floor 1e-14·scale"""
        assert make_report("x", 0.0, 0.0, 1e-9, 1e-6, scale=1e12).passed
        assert not make_report("x", 0.0, 0.0, 1e-9, 1e-6, scale=1.0).passed

    def test_status_overrides_pass(self):
        report = make_report("x", 1.0, 1.0, 0.0, 1e-6, status=STATUS_INCONCLUSIVE)
        assert report.status == STATUS_INCONCLUSIVE
        assert not report.passed

    def test_serialization(self):
        report = make_report("x", 1.0, 2.0, -1.0, 0.5, details={"p": 6.0})
        assert report.to_dict()["details"] == {"p": 6.0}
        assert report.csv_row() == ["x", 1.0, 2.0, -1.0, True]


class TestFourierIdentity:
    """Test cases for ∫(Yukawa ∗ u²)² = 2πa∬e^{-d/a}u²u²"""

    @pytest.mark.parametrize("a", [0.5, 1.0, 2.0])
    def test_gaussian(self, gaussian, a):
        report = check_fourier_identity(gaussian, KernelParams(a))
        assert report.passed, report
        assert abs(report.residual) <= 1e-6 * report.rhs


class TestNonexistenceProbes:
    """Test cases for the high-p and low-p nonexistence probes"""

    def test_high_p_gaussian(self, gaussian):
        report = probe_nonexistence_high_p(gaussian, Params(p=6.0))
        assert report.passed
        assert report.lhs <= report.rhs

    @pytest.mark.slow
    @pytest.mark.parametrize("p", HIGH_P_POWERS)
    @pytest.mark.parametrize("q", BATCH_SCALES)
    @pytest.mark.parametrize("a", BATCH_SCALES)
    def test_high_p_random(self, coarse_grid, rng, p, q, a):
        prm = Params(a=a, q=q, p=p)
        for _ in range(RANDOM_SAMPLES):
            report = probe_nonexistence_high_p(random_profile(coarse_grid, rng), prm)
            assert report.passed, report
            assert report.lhs <= report.rhs

    @pytest.mark.slow
    def test_high_p_batch_covers_every_setup(self, coarse_grid):
        report = run_probe("nonexistence_high_p_random", grid=coarse_grid)
        assert report.passed
        assert report.details["samples"] == RANDOM_SAMPLES * len(HIGH_P_POWERS) * len(BATCH_SCALES) ** 2
        assert report.details["failed_samples"] == 0

    def test_high_p_rejects_low_power(self, gaussian):
        with pytest.raises(DomainError):
            probe_nonexistence_high_p(gaussian, Params(p=5.0))

    def test_rejects_zero_profile(self, default_grid):
        with pytest.raises(DomainError):
            probe_nonexistence_high_p(RadialFunction.zeros(default_grid), Params(p=6.0))
        with pytest.raises(DomainError):
            probe_nonexistence_low_p(RadialFunction.zeros(default_grid), Params(p=2.0))

    def test_low_p_gaussian(self, gaussian):
        report = probe_nonexistence_low_p(gaussian, Params(p=2.0))
        assert report.passed
        assert report.lhs > 0 and report.rhs > 0
        assert report.details["bracket_min"] >= 0

    @pytest.mark.slow
    @pytest.mark.parametrize("p", LOW_P_POWERS)
    def test_low_p_random(self, coarse_grid, rng, p):
        prm = Params(p=p)
        for _ in range(RANDOM_SAMPLES):
            report = probe_nonexistence_low_p(random_profile(coarse_grid, rng), prm)
            assert report.passed, report
            assert report.lhs > 0

    def test_low_p_batch_covers_both_powers(self, coarse_grid):
        report = run_probe("nonexistence_low_p_random", grid=coarse_grid, count=3)
        assert report.passed
        assert report.details["samples"] == 3 * len(LOW_P_POWERS)

    def test_low_p_coulomb_limit(self, gaussian):
        assert probe_nonexistence_low_p(gaussian, Params(p=2.0, coulomb_limit=True)).passed

    def test_low_p_rejects_high_power(self, gaussian):
        with pytest.raises(DomainError):
            probe_nonexistence_low_p(gaussian, Params(p=3.0))


class TestMountainPassGeometry:
    """Test cases for the mountain-pass geometry check"""

    @pytest.mark.parametrize("p", [4.0, 5.0])
    def test_high_p_regime(self, default_grid, p):
        report = check_mp_geometry(Params(p=p, q=1.0), default_grid)
        assert report.status == STATUS_PASSED
        assert report.details["regime"] == "high_p"
        assert report.details["origin_value"] == 0.0
        assert report.lhs > 0 and report.rhs < 0

    def test_low_p_small_coupling(self, default_grid):
        report = check_mp_geometry(Params(p=2.5, q=1e-3), default_grid)
        assert report.details["regime"] == "low_p"
        assert report.status == STATUS_PASSED

    def test_low_p_large_coupling_is_inconclusive(self, default_grid):
        report = check_mp_geometry(Params(p=2.5, q=1e3), default_grid)
        assert report.status == STATUS_INCONCLUSIVE
        assert not report.passed
        assert report.details["parts"]["curve"] is False

    def test_rejects_out_of_range_power(self, default_grid):
        with pytest.raises(DomainError):
            check_mp_geometry(Params(p=7.0), default_grid)


class TestFunctionalChecks:
    """Test cases for the identity checks of the functional"""

    def test_nehari_level_bound(self, gaussian):
        assert check_nehari_level_bound(gaussian, Params(p=5.0)).passed

    def test_truncation(self, coarse_grid):
        report = check_truncation(Params(p=5.0), coarse_grid, count=5)
        assert report.passed
        assert report.details["samples"] == 5

    def test_pohozaev_forms(self, gaussian):
        report = check_pohozaev_forms(gaussian, Params(p=5.0))
        assert report.passed, report

    def test_bracket_positivity(self, coarse_grid):
        report = check_bracket_positivity(coarse_grid)
        assert report.passed
        assert report.lhs >= 0


class TestRunProbe:
    """Test cases for probe dispatch by name"""

    def test_unknown_probe(self, coarse_grid):
        with pytest.raises(DomainError):
            run_probe("no_such_probe", grid=coarse_grid)

    def test_explicit_parameters_take_precedence(self, coarse_grid):
        report = run_probe("nonexistence_high_p", prm=Params(p=7.0), grid=coarse_grid)
        assert report.details["p"] == 7.0
        assert report.passed

    def test_suite_setup_without_parameters(self, coarse_grid):
        report = run_probe("nonexistence_high_p", grid=coarse_grid)
        assert report.details["p"] == 6.0

    def test_suite_name(self, coarse_grid):
        report = run_probe("fourier_identity_a1", grid=coarse_grid)
        assert report.name == "fourier_identity_a1"
        assert report.details["a"] == 1.0

    def test_suite_covers_geometry_setups(self, coarse_grid):
        names = suite_probes(coarse_grid)
        assert {"mp_geometry_p4", "mp_geometry_p5", "mp_geometry_p2.5"} <= set(names)
        assert run_probe("mp_geometry_p5", grid=coarse_grid).details["p"] == 5.0

    def test_every_base_name_dispatches(self):
        assert set(PROBE_NAMES) == {
            "fourier_identity", "nonexistence_high_p", "nonexistence_low_p", "mp_geometry",
            "nehari_level_bound", "truncation", "pohozaev_forms", "bracket_positivity",
        }


class TestRunSuite:
    """Test cases for the concurrent probe suite"""

    def test_error_becomes_failed_report(self, coarse_grid, mocker):
        def broken():
            raise NumericError("quadrature overflow")

        mocker.patch.object(verify, "suite_probes", return_value={
            "bracket_positivity": lambda: check_bracket_positivity(coarse_grid),
            "broken": broken,
        })
        seen = []
        reports = run_suite(coarse_grid, max_workers=2, progress_callback=seen.append)
        assert [r.name for r in reports] == ["bracket_positivity", "broken"]
        assert reports[0].passed
        assert reports[1].status == STATUS_FAILED
        assert "NumericError" in reports[1].details["error"]
        assert math.isnan(reports[1].residual)
        assert len(seen) == 2

    @pytest.mark.slow
    def test_default_suite_passes(self, default_grid):
        reports = run_suite(default_grid, seed=0, max_workers=4)
        assert [r.name for r in reports] == sorted(suite_probes(default_grid))
        failing = [r.name for r in reports if not r.passed]
        assert failing == []

    @pytest.mark.slow
    def test_deterministic_for_seed(self, coarse_grid):
        first = run_probe("nonexistence_low_p_random", grid=coarse_grid, seed=3)
        second = run_probe("nonexistence_low_p_random", grid=coarse_grid, seed=3)
        assert first.to_dict() == second.to_dict()
        assert isinstance(first, ProbeReport)
        assert np.isfinite(first.residual)
