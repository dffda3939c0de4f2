"""Domain models and run configuration."""

from opf_distill.domain.config import RunConfig, apply_overrides, load_run_config
from opf_distill.domain.models import (
    ApgConfig,
    DistillationMap,
    FeatureInfo,
    FeatureKind,
    FeederModel,
    GridMatrices,
    GroupMode,
    IpmOptions,
    Line,
    Method,
    OpfSolution,
    OpfSpec,
    SolverStatus,
    SyntheticConfig,
)

__all__ = [
    "RunConfig",
    "apply_overrides",
    "load_run_config",
    "ApgConfig",
    "DistillationMap",
    "FeatureInfo",
    "FeatureKind",
    "FeederModel",
    "GridMatrices",
    "GroupMode",
    "IpmOptions",
    "Line",
    "Method",
    "OpfSolution",
    "OpfSpec",
    "SolverStatus",
    "SyntheticConfig",
]
