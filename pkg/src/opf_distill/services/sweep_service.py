"""
Sweep Service - Fits every (method, K) task and evaluates the maps.

Outputs:
    <out_dir>/<task>/map.json, trace.csv, report.json, voltages.csv
    <out_dir>/baseline[_n<T>]/report.json, voltages.csv
    <out_dir>/summary.csv   one row per task plus the baselines
"""

import logging
from typing import Any, Dict, List, Optional

import pandas as pd
from pydantic import BaseModel, ConfigDict

from opf_distill.domain.config import RunConfig
from opf_distill.exceptions import EXIT_OK, DistillError
from opf_distill.scenarios import EvalReport
from opf_distill.serialization import write_csv_atomic
from opf_distill.services.data_service import DataService
from opf_distill.services.eval_service import EvalService
from opf_distill.services.fit_service import FitService, TaskOutcome

logger = logging.getLogger(__name__)

SUMMARY_FILE = "summary.csv"
SUMMARY_COLUMNS = [
    "label",
    "k",
    "lambda",
    "sample_size",
    "exact_k",
    "data_error",
    "minimizer_error",
    "linear_out_of_band",
    "ac_out_of_band",
    "status",
]


class SweepResult(BaseModel):
    """Outcomes of all tasks and the summary rows written for them."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    outcomes: List[TaskOutcome]
    rows: List[Dict[str, Any]]

    @property
    def exit_code(self) -> int:
        codes = [o.exit_code for o in self.outcomes if not o.ok]
        return max(codes) if codes else EXIT_OK


def _row(report: EvalReport, sample_size: Optional[int], exact_k: bool = True) -> Dict[str, Any]:
    return {
        "label": report.label,
        "k": report.k,
        "lambda": report.lam,
        "sample_size": sample_size,
        "exact_k": exact_k,
        "data_error": repr(report.data_error),
        "minimizer_error": repr(report.minimizer_error),
        "linear_out_of_band": repr(report.voltage["linear"].out_of_band_fraction),
        "ac_out_of_band": repr(report.voltage["ac"].out_of_band_fraction),
        "status": "ok",
    }


def _failed_row(outcome: TaskOutcome) -> Dict[str, Any]:
    task = outcome.task
    return {
        "label": task.method.value,
        "k": task.k,
        "lambda": task.lam,
        "sample_size": task.sample_size,
        "status": f"failed: {outcome.error}",
    }


class SweepService:
    """
    Service running a full K-grid over methods.
    """

    def __init__(self, config: RunConfig, data: Optional[DataService] = None) -> None:
        self._config = config
        self._data = data or DataService(config)
        self._fit = FitService(config, self._data)
        self._eval = EvalService(config, self._data)

    def run(self) -> SweepResult:
        cfg = self._config
        fitted = self._fit.run(parallel=True)
        rows: List[Dict[str, Any]] = []

        for size in cfg.sample_sizes or [None]:
            try:
                baseline = self._eval.evaluate([], sample_size=size)
            except DistillError as e:
                logger.error(f"Baseline for sample size {size} failed: {e.message}")
                continue
            name = "baseline" if size is None else f"baseline_n{size}"
            self._eval.write(baseline, cfg.out_dir / name)
            rows.append(_row(baseline[0], size))

        outcomes: List[TaskOutcome] = []
        for outcome, dist_map in fitted:
            task = outcome.task
            if dist_map is None:
                outcomes.append(outcome)
                rows.append(_failed_row(outcome))
                continue
            try:
                reports = self._eval.evaluate([dist_map], task.sample_size, include_baseline=False)
            except DistillError as e:
                logger.error(f"Evaluating {task.describe} failed: {e.message}")
                failed = outcome.model_copy(update={"error": f"{task.describe}: {e.message}", "exit_code": e.exit_code})
                outcomes.append(failed)
                rows.append(_failed_row(failed))
                continue
            self._eval.write(reports, outcome.directory)
            outcomes.append(outcome)
            rows.append(_row(reports[0], task.sample_size, dist_map.exact_k))

        write_csv_atomic(pd.DataFrame(rows, columns=SUMMARY_COLUMNS), cfg.out_dir / SUMMARY_FILE)
        n_failed = sum(1 for o in outcomes if not o.ok)
        logger.info(f"Sweep finished: {len(outcomes) - n_failed} of {len(outcomes)} tasks succeeded")
        return SweepResult(outcomes=outcomes, rows=rows)
