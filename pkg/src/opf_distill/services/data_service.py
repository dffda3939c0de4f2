"""
Data Service - Loads the feeder and scenarios a run works on.

Inputs come from files named in the RunConfig or from the synthetic generator.
Derived datasets (normalized sets and OPF datasets with reference minimizers)
are built once per scenario sample size and shared by all tasks of a run.
"""

import logging
from pathlib import Path
from threading import RLock
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from opf_distill.distill.type2 import OpfDataset
from opf_distill.domain.config import RunConfig
from opf_distill.domain.models import FeederModel, OpfSolution, OpfSpec
from opf_distill.exceptions import ConfigError
from opf_distill.grid import ac_power_flow, build_grid_matrices, load_feeder_csv
from opf_distill.opf import build_opf_spec, export_batch_csv, solve_opf_batch, solve_opf_hard
from opf_distill.opf.solver import run_batch
from opf_distill.scenarios import (
    ScenarioSet,
    build_opf_dataset,
    distillation_set,
    feature_layout,
    generate_synthetic,
    layout_spec,
    load_scenarios_csv,
    subsample_scenarios,
)

logger = logging.getLogger(__name__)


class DataService:
    """
    Service providing the feeder, the raw scenarios and the datasets derived from them.

    Thread-safe: sweep workers share one instance.
    """

    def __init__(self, config: RunConfig) -> None:
        """
        Initialize the data service.

        Args:
            config: Run configuration naming the inputs
        """
        self._config = config
        self._lock = RLock()
        self._feeder: Optional[FeederModel] = None
        self._scenarios: Optional[ScenarioSet] = None
        self._sets: Dict[Optional[int], ScenarioSet] = {}
        self._datasets: Dict[Optional[int], OpfDataset] = {}

    def _load(self) -> Tuple[FeederModel, ScenarioSet]:
        with self._lock:
            if self._feeder is not None and self._scenarios is not None:
                return self._feeder, self._scenarios

            cfg = self._config
            cfg.check_paths()
            generated: Optional[Tuple[ScenarioSet, FeederModel]] = None
            if cfg.feeder_dir is None or cfg.scenarios is None:
                if cfg.feeder_dir is not None:
                    raise ConfigError("scenarios: a scenario file is required with feeder_dir")
                generated = generate_synthetic(cfg.synthetic)

            if cfg.feeder_dir is not None:
                feeder = load_feeder_csv(cfg.feeder_dir, cfg.substation_id, v_max_dev=cfg.synthetic.v_max_dev)
            else:
                assert generated is not None
                feeder = generated[1]

            if cfg.scenarios is not None:
                scenarios = load_scenarios_csv(cfg.scenarios)
            else:
                assert generated is not None
                scenarios = generated[0]

            logger.info(f"Inputs: {feeder.n} buses, {feeder.n_der} DERs, {scenarios.p}×{scenarios.t} scenarios")
            self._feeder, self._scenarios = feeder, scenarios
            return feeder, scenarios

    def feeder(self) -> FeederModel:
        return self._load()[0]

    def scenarios(self, sample_size: Optional[int] = None) -> ScenarioSet:
        """Raw scenarios, optionally subsampled with the run seed."""
        scenarios = self._load()[1]
        if sample_size is None:
            return scenarios
        return subsample_scenarios(scenarios, sample_size, self._config.seed)

    def spec(self) -> OpfSpec:
        cfg = self._config
        return build_opf_spec(self.feeder(), nu=cfg.nu, rho=cfg.rho, ipm=cfg.ipm)

    def distillation_set(self, sample_size: Optional[int] = None) -> ScenarioSet:
        """Normalized scenarios restricted to the rows that form θ."""
        with self._lock:
            if sample_size not in self._sets:
                self._sets[sample_size] = distillation_set(
                    self.scenarios(sample_size),
                    self.feeder(),
                    self._config.keep_constant,
                    self._config.normalize,
                )
            return self._sets[sample_size]

    def opf_dataset(self, sample_size: Optional[int] = None, jobs: Optional[int] = None) -> OpfDataset:
        """Normalized scenarios with reference minimizers."""
        with self._lock:
            if sample_size not in self._datasets:
                self._datasets[sample_size] = build_opf_dataset(
                    self.scenarios(sample_size),
                    self.feeder(),
                    self.spec(),
                    keep_constant=self._config.keep_constant,
                    jobs=jobs or self._config.jobs,
                    normalize=self._config.normalize,
                )
            return self._datasets[sample_size]

    def check_feeder(self) -> Dict[str, Any]:
        """
        Sanity report of the feeder: size, DERs, conditioning of R and X and the
        no-load AC voltages (which must all equal v0).
        """
        feeder = self.feeder()
        grid = build_grid_matrices(feeder)
        v_flat = ac_power_flow(feeder, np.zeros(feeder.n), np.zeros(feeder.n))
        return {
            "buses": feeder.n,
            "lines": len(feeder.lines),
            "ders": feeder.n_der,
            "der_buses": [feeder.label(b) for b in feeder.der_buses],
            "v0": feeder.v0,
            "v_max_dev": feeder.v_max_dev,
            "r_min_eig": float(np.linalg.eigvalsh(grid.R).min()),
            "x_min_eig": float(np.linalg.eigvalsh(grid.X).min()),
            "no_load_max_dev": float(np.max(np.abs(v_flat - feeder.v0))),
        }

    def solve_batch(self, path: Path, hard: bool = False, jobs: Optional[int] = None) -> List[OpfSolution]:
        """Solve the OPF for every scenario on the true data and export the batch CSV."""
        scenarios = self.scenarios()
        layout = feature_layout(scenarios, self.feeder(), self._config.keep_constant)
        spec = layout_spec(layout, self.feeder(), self.spec())
        theta = scenarios.raw_theta()[layout.rows]
        jobs = jobs or self._config.jobs
        if hard:
            solutions = run_batch(lambda t: solve_opf_hard(spec, theta[:, t]), theta.shape[1], jobs)
        else:
            solutions = solve_opf_batch(spec, theta, jobs)
        export_batch_csv(solutions, path)
        logger.info(f"Solved {len(solutions)} scenarios; results in {path}")
        return solutions
