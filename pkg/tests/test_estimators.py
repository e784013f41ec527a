"""Bracketed smoothness estimation: scan, refinement, sweeps, profiling."""

import math

import numpy as np
import pytest

from maternsmooth.analysis import builtin_test_functions, sample_gp_path
from maternsmooth.designs import Box, Design, van_der_corput
from maternsmooth.errors import ConditioningError, DomainError, EstimationError
from maternsmooth.estimators import (
    EstimatorConfig,
    bracketed_minimize,
    estimate_nu,
    profile_sigma,
    sweep_prefixes,
)
from maternsmooth.kernels import matern
from maternsmooth.objectives import ell_ml

UNIT = Box.unit(1)


@pytest.fixture(scope="module")
def sample_instance():
    design = van_der_corput(UNIT, 128)
    y = sample_gp_path(matern(1.5, 1.0, 1.0, d=1), design, seed=202)
    return design, y


class TestConfig:
    def test_defaults(self):
        cfg = EstimatorConfig()
        assert cfg.nu_min == 0.05 and cfg.nu_max == 15.0
        assert cfg.coarse_grid == 60 and cfg.objective == "ml"

    @pytest.mark.parametrize("kwargs", [
        dict(nu_min=0.0), dict(nu_min=2.0, nu_max=1.0), dict(coarse_grid=4),
        dict(refine_tol=0.0), dict(objective="map"),
    ])
    def test_validation(self, kwargs):
        with pytest.raises(DomainError):
            EstimatorConfig(**kwargs)


class TestBracketedMinimize:
    def test_quadratic_in_log_space(self):
        fn = lambda t: (math.log(t) - math.log(3.0)) ** 2
        scan = bracketed_minimize(fn, 0.5, 20.0, 30, 1e-5)
        assert scan.theta == pytest.approx(3.0, abs=1e-4)
        assert not scan.saturated_upper and not scan.non_unimodal

    def test_tie_breaks_toward_larger(self):
        scan = bracketed_minimize(lambda t: 1.0, 1.0, 2.0, 9, 1e-3)
        assert scan.theta == pytest.approx(2.0)
        assert scan.saturated_upper

    def test_all_failures_raise(self):
        def fn(t):
            raise ConditioningError("synthetic", 0, -1.0)

        with pytest.raises(EstimationError):
            bracketed_minimize(fn, 0.1, 1.0, 10, 1e-3)

    def test_failures_shrink_effective_bracket(self):
        def fn(t):
            if t > 5.0:
                raise ConditioningError("synthetic", 0, -1.0)
            return -t  # decreasing: minimum at the effective top

        scan = bracketed_minimize(fn, 0.5, 20.0, 20, 1e-3)
        assert scan.theta <= 5.0
        assert scan.saturated_upper
        assert len(scan.failures) > 0


class TestEstimateNu:
    def test_zero_data_minimises_log_det(self, sample_instance):
        design, _ = sample_instance
        cfg = EstimatorConfig(nu_min=0.1, nu_max=1.5, coarse_grid=24, lambda_=0.2)
        est = estimate_nu(design.prefix(32), np.zeros(32), cfg)
        # fine-grid oracle at 10x the coarse resolution
        fine = np.geomspace(cfg.nu_min, cfg.nu_max, 10 * cfg.coarse_grid)
        vals = [ell_ml(matern(nu, 1.0, 0.2, d=1), design.prefix(32), np.zeros(32)).total
                for nu in fine]
        assert est.objective_at_min <= min(vals) + 1e-6

    def test_refinement_beats_every_coarse_cell(self, sample_instance):
        design, y = sample_instance
        cfg = EstimatorConfig(coarse_grid=16, lambda_=1.0)
        est = estimate_nu(design, y, cfg)
        for nu in np.geomspace(cfg.nu_min, cfg.nu_max, cfg.coarse_grid):
            try:
                value = ell_ml(matern(float(nu), 1.0, 1.0, d=1), design, y).total
            except ConditioningError:
                continue
            assert est.objective_at_min <= value + 1e-9

    def test_bracket_honesty(self, sample_instance):
        design, y = sample_instance
        cfg = EstimatorConfig(nu_min=0.3, nu_max=0.9, coarse_grid=12, lambda_=1.0)
        est = estimate_nu(design, y, cfg)
        assert 0.3 <= est.nu_hat <= 0.9
        assert est.hit_upper_bracket  # truth is above this bracket

    def test_interior_estimate_does_not_flag_bracket(self, sample_instance):
        design, y = sample_instance
        est = estimate_nu(design, y, EstimatorConfig(lambda_=1.0))
        assert 1.0 < est.nu_hat < 2.5
        assert not est.hit_upper_bracket

    def test_failures_recorded_at_large_smoothness(self, sample_instance):
        design, y = sample_instance
        est = estimate_nu(design, y, EstimatorConfig(lambda_=1.0))
        assert est.failures
        assert all(nu > est.nu_hat for nu, _ in est.failures)

    def test_determinism(self, sample_instance):
        design, y = sample_instance
        cfg = EstimatorConfig(lambda_=1.0)
        a = estimate_nu(design, y, cfg)
        b = estimate_nu(design, y, cfg)
        assert a == b

    def test_cv_objective(self, sample_instance):
        design, y = sample_instance
        est = estimate_nu(design, y, EstimatorConfig(objective="cv", lambda_=1.0))
        assert 1.0 < est.nu_hat < 2.5

    def test_preconditions(self):
        design = Design([[0.5]], UNIT)
        with pytest.raises(DomainError):
            estimate_nu(design, [1.0], EstimatorConfig(objective="cv"))
        with pytest.raises(DomainError):
            estimate_nu(Design(np.zeros((0, 1)), UNIT), [], EstimatorConfig())


class TestProfileSigma:
    def test_zero_data_degenerate(self, sample_instance):
        design, _ = sample_instance
        assert profile_sigma(1.5, 1.0, design.prefix(16), np.zeros(16)) == 0.0

    def test_single_point_unit_kernel(self):
        design = Design([[0.5]], UNIT)
        assert profile_sigma(1.0, 1.0, design, [1.7]) == pytest.approx(1.7**2, rel=1e-12)

    def test_matches_scalar_minimisation(self, sample_instance):
        # the closed form minimises the objective over the magnitude
        design, y = sample_instance
        prefix, yn = design.prefix(48), y[:48]
        nu, lam = 1.2, 0.8
        s2_hat = profile_sigma(nu, lam, prefix, yn)
        grid = np.geomspace(math.sqrt(s2_hat) / 3.0, math.sqrt(s2_hat) * 3.0, 4001)
        vals = [ell_ml(matern(nu, float(s), lam, d=1), prefix, yn).total for s in grid]
        best = float(grid[int(np.argmin(vals))])
        assert best**2 == pytest.approx(s2_hat, rel=1e-3)
        direct = ell_ml(matern(nu, math.sqrt(s2_hat), lam, d=1), prefix, yn).total
        assert direct <= min(vals) + 1e-6

    def test_profiled_estimation_runs(self, sample_instance):
        design, y = sample_instance
        cfg = EstimatorConfig(lambda_=1.0, profile_sigma=True)
        est = estimate_nu(design, y, cfg)
        assert 0.8 < est.nu_hat < 3.0

    def test_profiled_zero_data_raises(self, sample_instance):
        design, _ = sample_instance
        cfg = EstimatorConfig(lambda_=1.0, profile_sigma=True)
        with pytest.raises(EstimationError):
            estimate_nu(design.prefix(16), np.zeros(16), cfg)


class TestSweeps:
    def test_singleton_schedule_reduces_to_estimate(self, sample_instance):
        design, y = sample_instance
        cfg = EstimatorConfig(lambda_=1.0)
        records = sweep_prefixes(design, y, [48], cfg)
        est = estimate_nu(design.prefix(48), y[:48], cfg)
        assert len(records) == 1
        assert records[0].nu_hat_ml == est.nu_hat
        assert records[0].ell_ml_min == est.objective_at_min

    def test_running_tail_minimum_is_monotone(self, sample_instance):
        # liminf proxy: the running minimum over the tail never decreases
        design, y = sample_instance
        records = sweep_prefixes(design, y, [16, 32, 64, 128],
                                 EstimatorConfig(lambda_=1.0))
        hats = [r.nu_hat_ml for r in records]
        tail_minima = [min(hats[i:]) for i in range(len(hats))]
        assert all(b >= a - 1e-12 for a, b in zip(tail_minima, tail_minima[1:]))

    def test_ratio_diagnostic_present_with_nu0(self, sample_instance):
        design, y = sample_instance
        records = sweep_prefixes(design, y, [16, 64], EstimatorConfig(lambda_=1.0),
                                 nu0=1.5, seed=202)
        assert all(math.isfinite(r.max_loo_var_ratio) for r in records)
        assert all(r.seed == 202 for r in records)

    def test_smooth_function_saturates_bracket(self):
        design = van_der_corput(UNIT, 64)
        gb = builtin_test_functions()["gauss_bump"]
        y = gb(design.points[:, 0])
        records = sweep_prefixes(design, y, [16, 64], EstimatorConfig(lambda_=1.0))
        assert all(r.hit_upper_ml and r.hit_upper_cv for r in records)

    def test_schedule_validation(self, sample_instance):
        design, y = sample_instance
        with pytest.raises(DomainError):
            sweep_prefixes(design, y, [32, 16], EstimatorConfig())
        with pytest.raises(DomainError):
            sweep_prefixes(design, y, [4096], EstimatorConfig())
        with pytest.raises(DomainError):
            sweep_prefixes(design, y[:10], [16], EstimatorConfig())
