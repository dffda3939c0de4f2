"""
OPF Distill - Select the OPF inputs that matter and reconstruct the rest.

A distribution operator solving an optimal power flow (OPF) over a feeder needs
the net injections of every bus. This package picks K of the P input features
and a linear map that reconstructs all P from them, so the OPF fed with the
reconstruction returns nearly the same DER setpoints.

It provides:
- Radial feeder models: linearized sensitivities and an exact AC sweep
- The soft-constrained OPF as a QP, with minimizer sensitivities
- Data-fidelity methods (PCA, DEIM, group lasso and its two-stage refit)
- Decision-fidelity methods (bilevel group lasso and its two-stage refit)
- Scenario generation, normalization and evaluation metrics
- A batch command line (``opf-distill``)

Quick Start:
    >>> from opf_distill import SyntheticConfig, create_distiller, generate_synthetic
    >>> from opf_distill.scenarios import build_opf_dataset, evaluate_map
    >>>
    >>> scenarios, feeder = generate_synthetic(SyntheticConfig(n_buses=10, n_scenarios=50))
    >>> data = build_opf_dataset(scenarios, feeder)
    >>> dist_map = create_distiller("gl2").fit(data, k=4)
    >>> report = evaluate_map(dist_map, data, feeder)
"""

__version__ = "0.1.0"

from opf_distill.distill import Distiller, OpfDataset, create_distiller, selection_summary
from opf_distill.domain import (
    ApgConfig,
    DistillationMap,
    FeatureInfo,
    FeatureKind,
    FeederModel,
    GroupMode,
    Method,
    OpfSpec,
    RunConfig,
    SyntheticConfig,
    load_run_config,
)
from opf_distill.exceptions import (
    ArgumentError,
    BatchSolveError,
    CompatibilityError,
    ConfigError,
    ConvergenceError,
    DataError,
    DistillError,
    NumericError,
    ParseError,
    RankError,
    ScenarioError,
    ShapeError,
    StateError,
    TopologyError,
)
from opf_distill.opf import build_opf_spec, minimizer_jacobian, solve_opf, solve_opf_batch
from opf_distill.scenarios import (
    EvalReport,
    ScenarioSet,
    build_opf_dataset,
    evaluate_map,
    generate_synthetic,
    load_scenarios_csv,
    save_scenarios_csv,
)
from opf_distill.serialization import load_map, save_map

__all__ = [
    "__version__",
    # Domain
    "ApgConfig",
    "DistillationMap",
    "FeatureInfo",
    "FeatureKind",
    "FeederModel",
    "GroupMode",
    "Method",
    "OpfSpec",
    "RunConfig",
    "SyntheticConfig",
    "load_run_config",
    # Distillation
    "Distiller",
    "OpfDataset",
    "create_distiller",
    "selection_summary",
    # OPF
    "build_opf_spec",
    "minimizer_jacobian",
    "solve_opf",
    "solve_opf_batch",
    # Scenarios
    "EvalReport",
    "ScenarioSet",
    "build_opf_dataset",
    "evaluate_map",
    "generate_synthetic",
    "load_scenarios_csv",
    "save_scenarios_csv",
    # Persistence
    "load_map",
    "save_map",
    # Exceptions
    "ArgumentError",
    "BatchSolveError",
    "CompatibilityError",
    "ConfigError",
    "ConvergenceError",
    "DataError",
    "DistillError",
    "NumericError",
    "ParseError",
    "RankError",
    "ScenarioError",
    "ShapeError",
    "StateError",
    "TopologyError",
]
