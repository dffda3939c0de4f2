"""
Evaluation metrics for distillation maps.

- Normalized data error ‖Θ − WΘ‖²_F / ‖Θ‖²_F on normalized data
- Normalized minimizer error ‖X − X̂‖²_F / ‖X‖²_F against the reference decisions
- Voltage feasibility: the decisions x̂_t applied to the TRUE data θ_t, with
  voltages from the linearized model and from the exact AC sweep

Voltage samples are kept per (bus, scenario) so the distribution can be plotted
elsewhere; reports carry their summary statistics.
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from opf_distill.distill.summary import SelectionSummary, selection_summary
from opf_distill.distill.type2 import OpfDataset, OpfFitLoss
from opf_distill.domain.models import DistillationMap, FeederModel
from opf_distill.exceptions import ConvergenceError, ShapeError
from opf_distill.grid import ac_power_flow, feeder_tree, linear_voltage
from opf_distill.serialization import write_csv_atomic

logger = logging.getLogger(__name__)

VoltageModel = Literal["linear", "ac"]
BASELINE = "baseline"
BAND_TOL = 1e-9
PERCENTILES = (5, 25, 50, 75, 95)
VOLTAGE_COLUMNS = ["method", "k", "scenario", "bus", "model", "v_pu"]


def _ratio(num: float, den: float, what: str) -> float:
    if den == 0.0:
        if num != 0.0:
            logger.warning(f"{what}: reference is zero, reporting the unnormalized error")
        return num
    return num / den


def eval_data_error(W: np.ndarray, data: Any) -> float:
    """
    Normalized data reconstruction error.

    Args:
        W: P×P map
        data: Normalized ScenarioSet, OpfDataset or P×T array

    Raises:
        ShapeError: If W does not match the data
    """
    theta = np.asarray(getattr(data, "theta", data), dtype=float)
    p = theta.shape[0]
    if W.shape != (p, p):
        raise ShapeError(f"map must be {p}×{p}, got {W.shape}")
    residual = theta - W @ theta
    return _ratio(float(np.sum(residual**2)), float(np.sum(theta**2)), "data error")


def eval_minimizer_error(
    W: np.ndarray,
    data: OpfDataset,
    jobs: int = 1,
    loss: Optional[OpfFitLoss] = None,
) -> float:
    """Normalized distance between the decisions on reconstructed and on true data."""
    loss = loss or OpfFitLoss(data, jobs)
    x_hat = loss.minimizers(np.asarray(W, dtype=float))
    num = float(np.sum((data.x_ref - x_hat) ** 2))
    return _ratio(num, float(np.sum(data.x_ref**2)), "minimizer error")


class VoltageSummary(BaseModel):
    """
    Distribution of voltage magnitudes over all (bus, scenario) samples.

    Attributes:
        model: "linear" or "ac"
        samples: Number of samples (N per included scenario)
        percentiles: 5/25/50/75/95th percentiles, keyed by percent
        out_of_band: Samples with |v − v0| above the allowed deviation
        out_of_band_fraction: out_of_band / samples
        excluded_scenarios: Scenarios whose AC sweep did not converge
    """

    model_config = ConfigDict(frozen=True)

    model: VoltageModel
    samples: int
    min: Optional[float] = None
    max: Optional[float] = None
    percentiles: Dict[int, float] = Field(default_factory=dict)
    out_of_band: int = 0
    out_of_band_fraction: float = 0.0
    excluded_scenarios: List[int] = Field(default_factory=list)


class VoltageEval(BaseModel):
    """Voltage samples (N×T, NaN for excluded scenarios) and their summary."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    samples: np.ndarray
    summary: VoltageSummary


def summarize_voltages(
    samples: np.ndarray,
    model: VoltageModel,
    v0: float,
    v_max_dev: float,
    excluded: Sequence[int] = (),
) -> VoltageSummary:
    values = samples[:, [t for t in range(samples.shape[1]) if t not in set(excluded)]].ravel()
    if values.size == 0:
        return VoltageSummary(model=model, samples=0, excluded_scenarios=list(excluded))
    out = int(np.sum(np.abs(values - v0) > v_max_dev + BAND_TOL))
    return VoltageSummary(
        model=model,
        samples=int(values.size),
        min=float(values.min()),
        max=float(values.max()),
        percentiles={q: float(v) for q, v in zip(PERCENTILES, np.percentile(values, PERCENTILES))},
        out_of_band=out,
        out_of_band_fraction=out / values.size,
        excluded_scenarios=list(excluded),
    )


def voltage_samples(
    qg: np.ndarray,
    data: OpfDataset,
    feeder: FeederModel,
    model: VoltageModel = "linear",
) -> VoltageEval:
    """
    Voltages when the DER setpoints ``qg`` (G×T) meet the true loading.

    The AC sweep may fail to converge for extreme setpoints; such scenarios are
    excluded from the summary, logged, and left as NaN in the samples.

    Raises:
        ShapeError: If qg is not G×T
    """
    spec = data.spec
    if qg.shape != (spec.g, data.t):
        raise ShapeError(f"DER setpoints must be {spec.g}×{data.t}, got {qg.shape}")
    raw = data.raw_theta()
    E = spec.incidence
    tree = feeder_tree(feeder) if model == "ac" else None
    samples = np.full((spec.n, data.t), np.nan)
    excluded: List[int] = []
    for t in range(data.t):
        p, q_load = spec.split(raw[:, t])
        q = E @ qg[:, t] - q_load
        if model == "linear":
            samples[:, t] = linear_voltage(spec.grid, p, q, feeder.v0)
            continue
        try:
            samples[:, t] = ac_power_flow(feeder, p, q, tree=tree)
        except ConvergenceError as e:
            excluded.append(t)
            logger.warning(f"AC power flow failed for scenario {t}; excluded ({e.message})")

    summary = summarize_voltages(samples, model, feeder.v0, spec.v_max_dev, excluded)
    return VoltageEval(samples=samples, summary=summary)


def eval_voltage_feasibility(
    W: np.ndarray,
    data: OpfDataset,
    feeder: FeederModel,
    ac: bool = False,
    jobs: int = 1,
    loss: Optional[OpfFitLoss] = None,
) -> VoltageEval:
    """Voltage samples for the decisions made on WΘ, evaluated on the true data."""
    loss = loss or OpfFitLoss(data, jobs)
    x_hat = loss.minimizers(np.asarray(W, dtype=float))
    return voltage_samples(x_hat[: data.spec.g], data, feeder, "ac" if ac else "linear")


class EvalReport(BaseModel):
    """
    Metrics of one map (or of the full-data baseline).

    Attributes:
        label: Method name, or "baseline" for the OPF on the true data
        k: Selected feature count (P for the baseline)
        lam: Penalty weight of the map, when it has one
        data_error: Normalized data reconstruction error
        minimizer_error: Normalized minimizer error
        voltage: Summary per voltage model
        selection: Feature-location report (None for PCA and the baseline)
        samples: Voltage samples per model (not serialized)
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    label: str
    k: int
    lam: Optional[float] = None
    data_error: float = Field(..., ge=0)
    minimizer_error: float = Field(..., ge=0)
    voltage: Dict[str, VoltageSummary]
    selection: Optional[SelectionSummary] = None
    samples: Dict[str, np.ndarray] = Field(default_factory=dict, exclude=True)

    def to_dict(self) -> Dict[str, Any]:
        return self.model_dump(mode="json", exclude={"samples"})


def evaluate_map(
    dist_map: DistillationMap,
    data: OpfDataset,
    feeder: FeederModel,
    jobs: int = 1,
) -> EvalReport:
    """
    All metrics of a map; voltages under both the linearized and the AC model.

    Raises:
        ShapeError: If the map does not match the dataset
    """
    W = dist_map.W
    loss = OpfFitLoss(data, jobs)
    voltages = {
        model: eval_voltage_feasibility(W, data, feeder, model == "ac", jobs, loss)
        for model in ("linear", "ac")
    }
    selection = selection_summary(dist_map, data.features) if data.features and dist_map.selected_indices else None
    report = EvalReport(
        label=dist_map.method.value,
        k=dist_map.k,
        lam=dist_map.lam,
        data_error=eval_data_error(W, data),
        minimizer_error=eval_minimizer_error(W, data, jobs, loss),
        voltage={m: v.summary for m, v in voltages.items()},
        selection=selection,
        samples={m: v.samples for m, v in voltages.items()},
    )
    logger.info(
        f"{report.label} K={report.k}: data error {report.data_error:.4g}, "
        f"minimizer error {report.minimizer_error:.4g}"
    )
    return report


def baseline_report(data: OpfDataset, feeder: FeederModel) -> EvalReport:
    """Metrics of the OPF solved on the true data."""
    qg = data.x_ref[: data.spec.g]
    voltages = {model: voltage_samples(qg, data, feeder, model) for model in ("linear", "ac")}
    return EvalReport(
        label=BASELINE,
        k=data.p,
        data_error=0.0,
        minimizer_error=0.0,
        voltage={m: v.summary for m, v in voltages.items()},
        samples={m: v.samples for m, v in voltages.items()},
    )


def write_voltage_csv(reports: Sequence[EvalReport], feeder: FeederModel, path: Path) -> None:
    """Write all voltage samples as method,k,scenario,bus,model,v_pu (excluded samples omitted)."""
    records = []
    for report in reports:
        for model, samples in report.samples.items():
            n, t = samples.shape
            for scenario in range(t):
                if np.isnan(samples[:, scenario]).any():
                    continue
                for bus in range(n):
                    records.append(
                        (report.label, report.k, scenario, feeder.label(bus + 1), model, repr(float(samples[bus, scenario])))
                    )
    write_csv_atomic(pd.DataFrame(records, columns=VOLTAGE_COLUMNS), Path(path))
