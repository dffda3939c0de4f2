"""Scenario sets: CSV I/O, normalization, the synthetic generator, OPF datasets and evaluation metrics."""

from opf_distill.scenarios.dataset import (
    FeatureLayout,
    build_opf_dataset,
    distillation_set,
    feature_layout,
    layout_spec,
)
from opf_distill.scenarios.io import load_scenarios_csv, save_scenarios_csv
from opf_distill.scenarios.metrics import (
    EvalReport,
    VoltageSummary,
    baseline_report,
    eval_data_error,
    eval_minimizer_error,
    eval_voltage_feasibility,
    evaluate_map,
    voltage_samples,
    write_voltage_csv,
)
from opf_distill.scenarios.scenario_set import ScenarioSet, feature_statistics, subsample_scenarios
from opf_distill.scenarios.synthetic import generate_synthetic

__all__ = [
    "EvalReport",
    "FeatureLayout",
    "ScenarioSet",
    "VoltageSummary",
    "baseline_report",
    "build_opf_dataset",
    "distillation_set",
    "eval_data_error",
    "eval_minimizer_error",
    "eval_voltage_feasibility",
    "evaluate_map",
    "feature_layout",
    "feature_statistics",
    "generate_synthetic",
    "layout_spec",
    "load_scenarios_csv",
    "save_scenarios_csv",
    "subsample_scenarios",
    "voltage_samples",
    "write_voltage_csv",
]
