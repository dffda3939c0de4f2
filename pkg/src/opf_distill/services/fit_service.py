"""
Fit Service - Runs distillation tasks and writes their artifacts.

A task is one (method, K or λ, sample size) combination. Each task writes its
map JSON and iteration trace CSV into its own subdirectory of the output
directory, so tasks never share files and can run in parallel.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict

from opf_distill.distill import create_distiller
from opf_distill.domain.config import RunConfig
from opf_distill.domain.models import DistillationMap, Method
from opf_distill.exceptions import EXIT_OK, DistillError
from opf_distill.proxalg import write_trace_csv
from opf_distill.serialization import save_map
from opf_distill.services.data_service import DataService

logger = logging.getLogger(__name__)

MAP_FILE = "map.json"
TRACE_FILE = "trace.csv"


class FitTask(BaseModel):
    """One distillation run: a method at a target K or a fixed λ."""

    model_config = ConfigDict(frozen=True)

    method: Method
    k: Optional[int] = None
    lam: Optional[float] = None
    sample_size: Optional[int] = None

    @property
    def name(self) -> str:
        target = f"k{self.k}" if self.k is not None else f"lam{self.lam:g}"
        suffix = f"_n{self.sample_size}" if self.sample_size is not None else ""
        return f"{self.method.value}_{target}{suffix}"

    @property
    def describe(self) -> str:
        target = f"K={self.k}" if self.k is not None else f"λ={self.lam:g}"
        size = f", T={self.sample_size}" if self.sample_size is not None else ""
        return f"{self.method.value} {target}{size}"


class TaskOutcome(BaseModel):
    """
    What a task produced.

    Attributes:
        task: The task
        directory: Output subdirectory
        map_path: Written map, None on failure
        k: Selected feature count of the map
        lam: λ of the map
        exact_k: False when a K target was only approximated
        error: Failure message with task context
        exit_code: 0 on success, the error's exit code otherwise
    """

    model_config = ConfigDict(frozen=True)

    task: FitTask
    directory: Path
    map_path: Optional[Path] = None
    k: Optional[int] = None
    lam: Optional[float] = None
    exact_k: bool = True
    error: Optional[str] = None
    exit_code: int = EXIT_OK

    @property
    def ok(self) -> bool:
        return self.error is None


class FitService:
    """
    Service fitting distillation maps for the tasks of a run configuration.
    """

    def __init__(self, config: RunConfig, data: DataService) -> None:
        """
        Initialize the fit service.

        Args:
            config: Run configuration (methods, targets, engine settings)
            data: Source of the datasets
        """
        self._config = config
        self._data = data

    def tasks(self) -> List[FitTask]:
        """All tasks of the configuration: per sample size, per method, every K then every λ."""
        cfg = self._config
        tasks = []
        for size in cfg.sample_sizes or [None]:
            for method in cfg.methods:
                tasks.extend(FitTask(method=method, k=k, sample_size=size) for k in cfg.ks)
                if method.uses_lambda:
                    tasks.extend(FitTask(method=method, lam=lam, sample_size=size) for lam in cfg.lambdas)
        return tasks

    def fit(self, task: FitTask, jobs: Optional[int] = None) -> DistillationMap:
        """Fit one task and write its map and trace."""
        cfg = self._config
        jobs = jobs or cfg.jobs
        distiller = create_distiller(task.method, config=cfg.apg, groups_mode=cfg.groups, jobs=jobs)
        if distiller.requires_opf:
            data = self._data.opf_dataset(task.sample_size)
        else:
            data = self._data.distillation_set(task.sample_size)

        logger.info(f"Fitting {task.describe}")
        dist_map = distiller.fit(data, k=task.k, lam=task.lam)

        directory = cfg.out_dir / task.name
        save_map(dist_map, directory / MAP_FILE)
        if distiller.trace:
            write_trace_csv(distiller.trace, directory / TRACE_FILE)
        return dist_map

    def run_task(self, task: FitTask, jobs: Optional[int] = None) -> Tuple[TaskOutcome, Optional[DistillationMap]]:
        """Fit one task, turning a failure into an outcome that carries the task context."""
        directory = self._config.out_dir / task.name
        try:
            dist_map = self.fit(task, jobs)
        except DistillError as e:
            logger.error(f"{task.describe} failed: {e.message}")
            return (
                TaskOutcome(task=task, directory=directory, error=f"{task.describe}: {e.message}", exit_code=e.exit_code),
                None,
            )
        outcome = TaskOutcome(
            task=task,
            directory=directory,
            map_path=directory / MAP_FILE,
            k=dist_map.k,
            lam=dist_map.lam,
            exact_k=dist_map.exact_k,
        )
        return outcome, dist_map

    def run(self, tasks: Optional[List[FitTask]] = None, parallel: bool = False) -> List[Tuple[TaskOutcome, Optional[DistillationMap]]]:
        """
        Run tasks in order; with ``parallel`` tasks run on ``config.jobs`` threads
        and each task's OPF batches stay single-threaded.
        """
        tasks = self.tasks() if tasks is None else tasks
        if parallel and self._config.jobs > 1 and len(tasks) > 1:
            with ThreadPoolExecutor(max_workers=self._config.jobs) as pool:
                return list(pool.map(lambda task: self.run_task(task, jobs=1), tasks))
        return [self.run_task(task) for task in tasks]
