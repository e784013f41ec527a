"""Experiment engines and the command-line front end."""

import csv
import math

import pytest

from maternsmooth.cli import main, parse_config_file, write_csv
from maternsmooth.errors import DomainError
from maternsmooth.experiments import (
    ExperimentConfig,
    run_gaussian_scale_probe,
    run_identity_suite,
    run_logdet_growth,
    run_non_undersmoothing,
    run_variance_decay,
)


class _DriftingKernel:
    """Fault-injection hook: answers drift slightly between calls, so the
    full matrix and the prefix refits see inconsistent kernels."""

    def __init__(self, kernel):
        self.kernel = kernel
        self.calls = 0

    def __call__(self, r):
        self.calls += 1
        return self.kernel(r) * (1.0 + 1e-5 * (self.calls % 3))

    @property
    def variance(self):
        return self.kernel.variance


class TestIdentitySuite:
    def test_passes_on_default_grid(self):
        result = run_identity_suite()
        assert result.ok
        assert len(result.rows) == 80
        assert all(row[-1] == "ok" for row in result.rows)

    def test_injected_fault_is_detected(self):
        result = run_identity_suite(kernel_fault=_DriftingKernel, include_loo=False)
        assert not result.ok

    def test_single_point_cells_included(self):
        result = run_identity_suite()
        assert any(row[3] == 1 for row in result.rows)


class TestEngines:
    def test_variance_decay_rows_and_slope(self):
        cfg = ExperimentConfig(experiment="variance-decay", nu_grid=(1.0,),
                               schedule=(16, 32, 64, 128), lambda_=1.0)
        result = run_variance_decay(cfg)
        assert result.header[0] == "d"
        slope = result.rows[0][5]
        assert slope == pytest.approx(-2.0, abs=0.3)
        assert all(row[5] == slope for row in result.rows)

    def test_non_undersmoothing_pass_counting(self):
        cfg = ExperimentConfig(experiment="non-undersmoothing", nu0=1.5,
                               schedule=(16, 32, 64), seeds=(101, 102),
                               lambda_=1.0)
        result = run_non_undersmoothing(cfg)
        assert result.ok is not None
        assert len(result.rows) == 6

    def test_non_undersmoothing_threads_deterministic(self):
        base = ExperimentConfig(experiment="x", nu0=1.5, schedule=(16, 32),
                                seeds=(1, 2, 3), lambda_=1.0)
        serial = run_non_undersmoothing(base)
        from dataclasses import replace

        threaded = run_non_undersmoothing(replace(base, threads=3))
        assert serial.rows == threaded.rows

    def test_zero_function_degenerate_flag(self):
        cfg = ExperimentConfig(experiment="x", f0="zero", schedule=(8, 16))
        result = run_non_undersmoothing(cfg)
        assert all("degenerate_zero_data" in row[-1] for row in result.rows)

    def test_logdet_growth_tracks_trend(self):
        cfg = ExperimentConfig(experiment="logdet-growth", nu0=1.0,
                               nu_grid=(0.5, 1.0), schedule=(16, 32, 64, 128, 256, 512),
                               lambda_=1.0)
        result = run_logdet_growth(cfg)
        # ratio log det / (n log n) within 30% of -2 nu / d at the last size
        for nu in (0.5, 1.0):
            last = [r for r in result.rows if r[0] == nu][-1]
            assert last[4] == pytest.approx(-2.0 * nu, rel=0.30)
        assert "conjecture probe" in result.summary

    def test_gaussian_probe_records_failures(self):
        cfg = ExperimentConfig(experiment="x", f0="gauss_bump", schedule=(8, 16, 64))
        result = run_gaussian_scale_probe(cfg)
        assert "no assertion" in result.summary
        # by n=64 the Gaussian matrices are numerically rank-deficient
        last = result.rows[-1]
        assert math.isnan(last[1]) or "failures" in last[3]

    def test_degenerate_lambda_bracket_returns_that_lambda(self):
        cfg = ExperimentConfig(experiment="x", f0="gauss_bump", schedule=(8,),
                               lambda_min=0.8, lambda_max=0.8)
        result = run_gaussian_scale_probe(cfg)
        assert result.rows[0][1] == pytest.approx(0.8)

    def test_config_validation(self):
        with pytest.raises(DomainError):
            ExperimentConfig(schedule=(32, 16))
        with pytest.raises(DomainError):
            ExperimentConfig(d=3)
        with pytest.raises(DomainError):
            ExperimentConfig(f0="nonexistent")
        with pytest.raises(DomainError):
            ExperimentConfig(lambda_min=1.0, lambda_max=0.5)


class TestCsv:
    def test_round_trip_floats_exact(self, tmp_path):
        path = tmp_path / "table.csv"
        rows = [[1, math.pi, "plain"], [2, 1e-17, "with,comma"]]
        write_csv(path, ("a", "b", "c"), rows)
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            back = list(reader)
        assert header == ["a", "b", "c"]
        assert float(back[0][1]) == math.pi
        assert float(back[1][1]) == 1e-17
        assert back[1][2] == "with,comma"

    def test_quotes_only_when_needed(self, tmp_path):
        path = tmp_path / "table.csv"
        write_csv(path, ("a", "b"), [[1.5, "note;ok"]])
        text = path.read_text()
        assert '"' not in text


class TestConfigFile:
    def test_parse_types(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "# comment\n"
            "nu0 = 1.5\n"
            "schedule = 16,32,64\n"
            "seeds=1,2\n"
            "design = van_der_corput\n"
            "profile_sigma = true\n"
        )
        values = parse_config_file(cfg)
        assert values["nu0"] == 1.5
        assert values["schedule"] == (16, 32, 64)
        assert values["seeds"] == (1, 2)
        assert values["profile_sigma"] is True

    def test_malformed_line(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("this is not a pair\n")
        with pytest.raises(DomainError):
            parse_config_file(cfg)


class TestCli:
    def test_verify_identities_exit_zero(self, tmp_path, capsys):
        out = tmp_path / "ids.csv"
        code = main(["verify-identities", "--out", str(out)])
        assert code == 0
        assert out.exists()
        captured = capsys.readouterr()
        assert "PASS" in captured.out

    def test_usage_error_exit_two(self):
        assert main(["no-such-command"]) == 2

    def test_unknown_config_key_exit_two(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("mystery_knob = 3\n")
        code = main(["variance-decay", "--config", str(cfg)])
        assert code == 2
        assert "configuration error" in capsys.readouterr().err

    def test_missing_config_file_exit_two(self, capsys):
        assert main(["variance-decay", "--config", "/nonexistent/run.cfg"]) == 2

    def test_variance_decay_deterministic_output(self, tmp_path):
        args = ["variance-decay", "--nu-grid", "0.5", "--schedule", "16,32,64"]
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(args + ["--out", str(out1)]) == 0
        assert main(args + ["--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_non_undersmoothing_check_flag(self, tmp_path):
        out = tmp_path / "sweep.csv"
        code = main([
            "non-undersmoothing", "--nu0", "1.5", "--schedule", "16,32,64",
            "--seed-list", "101,102", "--out", str(out), "--check",
        ])
        assert code == 0
        with open(out, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0][0] == "experiment"
        assert len(rows) == 7

    def test_smooth_f0_via_cli(self, capsys):
        code = main(["non-undersmoothing", "--f0", "gauss_bump",
                     "--schedule", "8,16"])
        assert code == 0

    def test_gaussian_probe_via_cli(self, capsys):
        code = main(["gaussian-scale-probe", "--schedule", "8,16"])
        assert code == 0
        assert "exploratory" in capsys.readouterr().out

    def test_config_file_drives_run(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        out = tmp_path / "rows.csv"
        cfg.write_text(
            "nu_grid = 1.0\nschedule = 16,32,64\nlambda = 1.0\n"
            f"output_path = {out}\n"
        )
        assert main(["variance-decay", "--config", str(cfg)]) == 0
        assert out.exists()
