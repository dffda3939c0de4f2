"""
Wiring scenario sets to the OPF.

Features are matched to feeder buses through the feeder's original bus labels
and ordered as they appear in the full data vector [p; q^ℓ]. Constant features
carry no information; unless kept they move into the fixed part of the OPF data
vector at their constant value.
"""

import logging
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict

from opf_distill.distill.type2 import OpfDataset
from opf_distill.domain.models import FeederModel, OpfSpec
from opf_distill.exceptions import DataError, NumericError
from opf_distill.opf import build_opf_spec, solutions_matrix, solve_opf_batch
from opf_distill.opf.spec import feature_position
from opf_distill.scenarios.scenario_set import ScenarioSet

logger = logging.getLogger(__name__)


class FeatureLayout(BaseModel):
    """
    Placement of scenario rows inside the OPF data vector.

    Attributes:
        rows: Rows of the scenario set that form θ, in data-vector order
        feature_index: Data-vector position of each kept row (strictly increasing)
        fixed_theta: Values of every position outside feature_index
        dropped: Constant rows moved into fixed_theta
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    rows: List[int]
    feature_index: np.ndarray
    fixed_theta: np.ndarray
    dropped: List[int]


def _bus_lookup(model: FeederModel) -> Dict[int, int]:
    labels = model.bus_labels if model.bus_labels is not None else list(range(model.n_buses))
    return {label: bus for bus, label in enumerate(labels)}


def feature_layout(scenarios: ScenarioSet, model: FeederModel, keep_constant: bool = False) -> FeatureLayout:
    """
    Match scenario rows to data-vector positions.

    Raises:
        DataError: If a feature names an unknown bus or the substation, or two
            features share a position
    """
    lookup = _bus_lookup(model)
    n = model.n
    positions: List[int] = []
    owner: Dict[int, str] = {}
    for feature in scenarios.features:
        bus = lookup.get(feature.bus)
        if bus is None:
            raise DataError(f"feature {feature.feature_id!r} references unknown bus {feature.bus}")
        if bus == 0:
            raise DataError(f"feature {feature.feature_id!r} sits at the substation")
        pos = feature_position(feature.kind, bus, n)
        if pos in owner:
            raise DataError(f"features {owner[pos]!r} and {feature.feature_id!r} describe the same injection")
        owner[pos] = feature.feature_id
        positions.append(pos)

    raw = scenarios.raw_theta()
    constant = scenarios.constant_rows()
    fixed = np.zeros(2 * n)
    dropped = []
    if not keep_constant:
        for i in np.flatnonzero(constant):
            dropped.append(int(i))
            fixed[positions[i]] = raw[i, 0] if raw.shape[1] else 0.0

    rows = sorted((i for i in range(scenarios.p) if i not in set(dropped)), key=lambda i: positions[i])
    if dropped:
        names = [scenarios.features[i].feature_id for i in dropped]
        logger.info(f"Moved {len(dropped)} constant features into the fixed data: {names}")
    return FeatureLayout(
        rows=rows,
        feature_index=np.array([positions[i] for i in rows], dtype=int),
        fixed_theta=fixed,
        dropped=dropped,
    )


def layout_spec(layout: FeatureLayout, model: FeederModel, base: Optional[OpfSpec] = None) -> OpfSpec:
    """OPF definition over the layout, taking ν, ρ, grid matrices and solver settings from ``base``."""
    base = base or build_opf_spec(model)
    return build_opf_spec(
        model,
        nu=base.nu,
        rho=base.rho,
        feature_index=layout.feature_index,
        fixed_theta=layout.fixed_theta,
        grid=base.grid,
        ipm=base.ipm,
    )


def identity_normalized(scenarios: ScenarioSet) -> ScenarioSet:
    """Mark a raw set as normalized with m = 0 and σ = 1."""
    raw = scenarios.raw_theta()
    return scenarios.model_copy(
        update={
            "theta": raw,
            "mean": np.zeros(scenarios.p),
            "scale": np.ones(scenarios.p),
            "constant": scenarios.constant_rows(),
            "normalized": True,
        }
    )


def distillation_set(
    scenarios: ScenarioSet,
    model: FeederModel,
    keep_constant: bool = False,
    normalize: bool = True,
) -> ScenarioSet:
    """Normalized scenario set restricted to the rows that form θ, in data-vector order."""
    layout = feature_layout(scenarios, model, keep_constant)
    raw = scenarios.denormalize() if scenarios.normalized else scenarios
    subset = raw.select_features(layout.rows)
    return subset.normalize() if normalize else identity_normalized(subset)


def build_opf_dataset(
    scenarios: ScenarioSet,
    model: FeederModel,
    spec: Optional[OpfSpec] = None,
    keep_constant: bool = False,
    jobs: int = 1,
    normalize: bool = True,
) -> OpfDataset:
    """
    Normalize scenarios and solve their reference minimizers.

    Args:
        scenarios: Raw or normalized scenario set
        model: Feeder the scenarios belong to
        spec: Supplies ν, ρ, grid matrices and solver settings (defaults when omitted);
            its data-vector layout is replaced by the scenario layout
        keep_constant: Keep constant features in θ
        jobs: Worker threads for the reference batch
        normalize: False keeps the data in original units (m = 0, σ = 1)

    Raises:
        DataError: On features that do not fit the feeder
        NumericError: If a reference solve is not optimal
    """
    layout = feature_layout(scenarios, model, keep_constant)
    raw = scenarios.denormalize() if scenarios.normalized else scenarios
    subset = raw.select_features(layout.rows)
    normalized = subset.normalize() if normalize else identity_normalized(subset)

    spec = layout_spec(layout, model, spec)

    solutions = solve_opf_batch(spec, subset.theta, jobs)
    for t, sol in enumerate(solutions):
        if not sol.is_optimal:
            raise NumericError(f"reference OPF for scenario {t} ended with status {sol.status.value}")

    assert normalized.mean is not None and normalized.scale is not None
    logger.info(f"Built OPF dataset: P={normalized.p}, T={normalized.t}, G={spec.g}")
    return OpfDataset(
        theta=normalized.theta,
        mean=normalized.mean,
        scale=normalized.scale,
        x_ref=solutions_matrix(solutions),
        spec=spec,
        features=normalized.features,
    )
