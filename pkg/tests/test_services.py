"""
Service Layer Tests

Tests the DataService, FitService, EvalService and SweepService directly
(without the command line).
Run with: pytest tests/test_services.py -v
"""

import json

import numpy as np
import pandas as pd
import pytest

from opf_distill.domain.models import Method
from opf_distill.exceptions import CompatibilityError, ConfigError, StateError
from opf_distill.grid import save_feeder_csv
from opf_distill.scenarios import save_scenarios_csv
from opf_distill.serialization import load_map
from opf_distill.services import DataService, EvalService, FitService, FitTask, SweepService
from opf_distill.services.sweep_service import SUMMARY_COLUMNS


@pytest.fixture
def data_service(run_config):
    return DataService(run_config)


@pytest.fixture
def fit_service(run_config, data_service):
    return FitService(run_config, data_service)


@pytest.fixture
def eval_service(run_config, data_service):
    return EvalService(run_config, data_service)


class TestDataService:
    """Tests for input loading and dataset caching."""

    def test_synthetic_inputs(self, data_service):
        assert data_service.feeder().n == 5
        assert data_service.scenarios().theta.shape == (10, 10)

    def test_subsample(self, data_service):
        assert data_service.scenarios(4).t == 4

    def test_datasets_are_cached(self, data_service):
        assert data_service.distillation_set() is data_service.distillation_set()
        dataset = data_service.opf_dataset()
        assert data_service.opf_dataset() is dataset
        assert dataset.x_ref.shape == (3, 10)
        assert data_service.opf_dataset(4).t == 4

    def test_spec_uses_config_penalties(self, run_config):
        spec = DataService(run_config.model_copy(update={"nu": 50.0, "rho": 5.0})).spec()
        assert spec.nu == 50.0
        assert spec.rho == 5.0

    def test_files_match_generator(self, run_config, data_service, tmp_path):
        feeder_dir = tmp_path / "feeder"
        save_feeder_csv(data_service.feeder(), feeder_dir)
        save_scenarios_csv(data_service.scenarios(), tmp_path / "scenarios.csv")
        from_files = DataService(
            run_config.model_copy(update={"feeder_dir": feeder_dir, "scenarios": tmp_path / "scenarios.csv"})
        )
        assert from_files.feeder().n == 5
        np.testing.assert_array_equal(from_files.scenarios().theta, data_service.scenarios().theta)
        np.testing.assert_allclose(from_files.opf_dataset().x_ref, data_service.opf_dataset().x_ref, atol=1e-9)

    def test_feeder_needs_scenarios(self, run_config, tmp_path):
        service = DataService(run_config.model_copy(update={"feeder_dir": tmp_path}))
        with pytest.raises(ConfigError, match="a scenario file is required"):
            service.feeder()

    def test_missing_scenario_file(self, run_config, tmp_path):
        service = DataService(run_config.model_copy(update={"scenarios": tmp_path / "absent.csv"}))
        with pytest.raises(ConfigError, match="does not exist"):
            service.scenarios()

    def test_check_feeder(self, data_service):
        report = data_service.check_feeder()
        assert report["buses"] == 5
        assert report["ders"] == 2
        assert report["der_buses"] == [2, 4]
        assert report["no_load_max_dev"] == pytest.approx(0.0, abs=1e-12)
        assert report["r_min_eig"] > 0

    @pytest.mark.parametrize("hard", [False, True])
    def test_solve_batch(self, data_service, tmp_path, hard):
        path = tmp_path / "batch.csv"
        solutions = data_service.solve_batch(path, hard=hard)
        df = pd.read_csv(path)
        assert len(solutions) == 10
        assert len(df) == 10
        assert list(df.columns) == ["scenario", "qg_1", "qg_2", "s", "objective", "status"]


class TestFitService:
    """Tests for task expansion and fitting."""

    def test_task_expansion(self, run_config, data_service):
        cfg = run_config.model_copy(update={"lambdas": [0.1], "sample_sizes": [4, 8]})
        names = [task.name for task in FitService(cfg, data_service).tasks()]
        assert names == ["pca_k2_n4", "gl2_k2_n4", "gl2_lam0.1_n4", "pca_k2_n8", "gl2_k2_n8", "gl2_lam0.1_n8"]

    def test_task_names(self):
        task = FitTask(method=Method.BGL2, lam=0.05)
        assert task.name == "bgl2_lam0.05"
        assert task.describe == "bgl2 λ=0.05"
        assert FitTask(method=Method.DEIM, k=3, sample_size=20).describe == "deim K=3, T=20"

    def test_run_writes_artifacts(self, run_config, fit_service):
        results = fit_service.run()
        assert [outcome.task.name for outcome, _ in results] == ["pca_k2", "gl2_k2"]
        for outcome, dist_map in results:
            assert outcome.ok
            assert outcome.map_path.is_file()
            saved = load_map(outcome.map_path)
            np.testing.assert_array_equal(saved.c_matrix, dist_map.c_matrix)
        assert not (run_config.out_dir / "pca_k2" / "trace.csv").exists()
        trace = pd.read_csv(run_config.out_dir / "gl2_k2" / "trace.csv")
        assert trace["step_kind"][0] == "init"

    def test_failure_keeps_context(self, run_config, fit_service):
        outcome, dist_map = fit_service.run_task(FitTask(method=Method.GL2, lam=1e6))
        assert dist_map is None
        assert not outcome.ok
        assert outcome.error.startswith("gl2 λ=1e+06: GL selected no features")
        assert outcome.exit_code == StateError("x").exit_code
        assert outcome.map_path is None

    def test_parallel_matches_serial(self, run_config, data_service):
        cfg = run_config.model_copy(update={"jobs": 2, "lambdas": [0.2]})
        service = FitService(cfg, data_service)
        serial = service.run(parallel=False)
        parallel = service.run(parallel=True)
        for (_, a), (_, b) in zip(serial, parallel):
            np.testing.assert_array_equal(a.c_matrix, b.c_matrix)


class TestEvalService:
    """Tests for map evaluation."""

    def test_baseline_only(self, eval_service):
        reports = eval_service.evaluate([])
        assert [r.label for r in reports] == ["baseline"]

    def test_files(self, fit_service, eval_service, tmp_path):
        outcomes = fit_service.run()
        reports = eval_service.evaluate_files([outcome.map_path for outcome, _ in outcomes])
        assert [r.label for r in reports] == ["baseline", "pca", "gl2"]
        eval_service.write(reports, tmp_path / "eval")
        payload = json.loads((tmp_path / "eval" / "report.json").read_text())
        assert [row["label"] for row in payload] == ["baseline", "pca", "gl2"]
        assert (tmp_path / "eval" / "voltages.csv").is_file()

    def test_dimension_mismatch(self, eval_service, fit_service):
        _, dist_map = fit_service.run_task(FitTask(method=Method.PCA, k=2))
        wrong = dist_map.model_copy(update={"p": 3, "c_matrix": np.eye(3)})
        with pytest.raises(CompatibilityError, match="P=3"):
            eval_service.evaluate([wrong])


class TestSweepService:
    """Tests for the full K-grid."""

    def test_summary(self, run_config):
        result = SweepService(run_config).run()
        assert result.exit_code == 0
        summary = pd.read_csv(run_config.out_dir / "summary.csv")
        assert list(summary.columns) == SUMMARY_COLUMNS
        assert list(summary["label"]) == ["baseline", "pca", "gl2"]
        assert set(summary["status"]) == {"ok"}
        for name in ("baseline", "pca_k2", "gl2_k2"):
            assert (run_config.out_dir / name / "report.json").is_file()
        assert summary["data_error"][0] == 0.0

    def test_repeat_runs_are_identical(self, run_config, tmp_path):
        """Same config and seed give byte-identical maps and metrics."""
        outputs = []
        for name in ("first", "second"):
            cfg = run_config.model_copy(update={"out_dir": tmp_path / name})
            SweepService(cfg).run()
            outputs.append(cfg.out_dir)
        for relative in ("pca_k2/map.json", "gl2_k2/map.json", "gl2_k2/trace.csv", "summary.csv"):
            assert (outputs[0] / relative).read_bytes() == (outputs[1] / relative).read_bytes()

    def test_sample_sizes(self, run_config):
        cfg = run_config.model_copy(update={"methods": [Method.PCA], "sample_sizes": [5]})
        SweepService(cfg).run()
        assert (cfg.out_dir / "baseline_n5" / "report.json").is_file()
        summary = pd.read_csv(cfg.out_dir / "summary.csv")
        assert list(summary["sample_size"]) == [5, 5]

    def test_failed_task_is_reported(self, run_config):
        cfg = run_config.model_copy(update={"methods": [Method.GL2], "ks": [], "lambdas": [1e6]})
        result = SweepService(cfg).run()
        assert result.exit_code == StateError("x").exit_code
        summary = pd.read_csv(cfg.out_dir / "summary.csv")
        assert summary["status"][0] == "ok"
        assert summary["status"][1].startswith("failed: gl2 λ=1e+06")
