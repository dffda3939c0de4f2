"""
Orchestration services used by the command line.

Available Services:
- DataService: Load the feeder and scenarios and build the derived datasets
- FitService: Fit distillation tasks and write maps and traces
- EvalService: Score maps against the full-data OPF baseline
- SweepService: Fit and evaluate a K-grid over methods

Example:
    from pathlib import Path

    from opf_distill.domain import load_run_config
    from opf_distill.services import DataService, FitService

    config = load_run_config(Path("run.json"))
    data = DataService(config)
    outcomes = FitService(config, data).run()
"""

from opf_distill.services.data_service import DataService
from opf_distill.services.eval_service import EvalService
from opf_distill.services.fit_service import FitService, FitTask, TaskOutcome
from opf_distill.services.sweep_service import SweepResult, SweepService

__all__ = [
    "DataService",
    "EvalService",
    "FitService",
    "FitTask",
    "SweepResult",
    "SweepService",
    "TaskOutcome",
]
