"""
Run Configuration Unit Tests

Tests RunConfig validation, command-line overrides and config file loading.
Run with: pytest tests/test_config.py -v
"""

import json
from pathlib import Path

import pytest
from pydantic import ValidationError

from opf_distill.domain.config import RunConfig, apply_overrides, decode_value, load_run_config
from opf_distill.domain.models import GroupMode, Method
from opf_distill.exceptions import EXIT_CONFIG, ConfigError


class TestRunConfig:
    """Tests for RunConfig validation."""

    def test_defaults(self):
        cfg = RunConfig()
        assert cfg.methods == [Method.GL2]
        assert cfg.groups == GroupMode.COLUMN
        assert cfg.nu == 1000.0
        assert cfg.rho == 100.0
        assert not cfg.has_targets()

    def test_spectral_methods_need_k(self):
        with pytest.raises(ValidationError, match="pca, deim need at least one K"):
            RunConfig(methods=[Method.PCA, Method.DEIM, Method.GL])

    @pytest.mark.parametrize("field, value", [("ks", [0]), ("sample_sizes", [-1])])
    def test_counts_positive(self, field, value):
        with pytest.raises(ValidationError, match="counts must be positive"):
            RunConfig(**{field: value})

    def test_lambdas_nonnegative(self):
        with pytest.raises(ValidationError, match="nonnegative"):
            RunConfig(lambdas=[0.1, -0.2])

    def test_unknown_field(self):
        with pytest.raises(ValidationError):
            RunConfig(max_iter=5)

    def test_seeded(self):
        cfg = RunConfig(seed=9).seeded()
        assert cfg.synthetic.seed == 9
        assert cfg.apg.seed == 9

    def test_check_paths(self, tmp_path):
        RunConfig(feeder_dir=tmp_path).check_paths()
        with pytest.raises(ConfigError, match="is not a directory"):
            RunConfig(feeder_dir=tmp_path / "missing").check_paths()
        with pytest.raises(ConfigError, match="does not exist"):
            RunConfig(scenarios=tmp_path / "missing.csv").check_paths()
        with pytest.raises(ConfigError, match="maps:"):
            RunConfig(maps=[tmp_path / "map.json"]).check_paths()


class TestOverrides:
    """Tests for --key value overrides."""

    @pytest.mark.parametrize(
        "text, expected",
        [
            ("50", 50),
            ("0.5", 0.5),
            ("true", True),
            ("[1, 2]", [1, 2]),
            ("2,4,6", [2, 4, 6]),
            ("pca,gl2", ["pca", "gl2"]),
            ("out/run", "out/run"),
        ],
    )
    def test_decode_value(self, text, expected):
        assert decode_value(text) == expected

    def test_nested_keys(self):
        merged = apply_overrides({"apg": {"tol": 1e-3}}, [("apg.max_iter", "50"), ("synthetic.n-buses", "5")])
        assert merged == {"apg": {"tol": 1e-3, "max_iter": 50}, "synthetic": {"n_buses": 5}}

    def test_list_fields_are_wrapped(self):
        assert apply_overrides({}, [("ks", "3"), ("methods", "pca")]) == {"ks": [3], "methods": ["pca"]}

    def test_document_is_not_modified(self):
        document = {"apg": {"tol": 1e-3}}
        apply_overrides(document, [("apg.tol", "1e-5")])
        assert document == {"apg": {"tol": 1e-3}}

    def test_nesting_into_scalar(self):
        with pytest.raises(ConfigError, match="not a nested setting"):
            apply_overrides({"nu": 10}, [("nu.value", "3")])


class TestLoadRunConfig:
    """Tests for config file loading."""

    def test_file_and_overrides(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"methods": ["pca", "gl2"], "ks": [2, 4], "seed": 3}))
        cfg = load_run_config(path, [("ks", "5"), ("out_dir", str(tmp_path / "out"))])
        assert cfg.methods == [Method.PCA, Method.GL2]
        assert cfg.ks == [5]
        assert cfg.out_dir == Path(tmp_path / "out")
        assert cfg.apg.seed == 3

    def test_overrides_only(self):
        assert load_run_config(None, [("lambdas", "0.1,0.2")]).lambdas == [0.1, 0.2]

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="does not exist") as excinfo:
            load_run_config(tmp_path / "absent.json")
        assert excinfo.value.exit_code == EXIT_CONFIG

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text('{\n  "ks": [1,\n}')
        with pytest.raises(ConfigError, match="invalid JSON"):
            load_run_config(path)

    def test_not_an_object(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text("[1, 2]")
        with pytest.raises(ConfigError, match="must be a JSON object"):
            load_run_config(path)

    def test_validation_errors_are_config_errors(self):
        with pytest.raises(ConfigError, match="invalid configuration: jobs"):
            load_run_config(None, [("jobs", "0")])

    def test_unknown_method(self):
        with pytest.raises(ConfigError, match="invalid configuration: methods"):
            load_run_config(None, [("methods", "lasso")])
