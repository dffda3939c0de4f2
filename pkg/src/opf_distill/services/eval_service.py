"""
Eval Service - Scores distillation maps against the OPF on the true data.

Every evaluation includes the baseline row: the OPF solved on the true data,
whose voltage distribution the maps are compared against.
"""

import logging
from pathlib import Path
from typing import List, Optional, Sequence

from opf_distill.domain.config import RunConfig
from opf_distill.domain.models import DistillationMap
from opf_distill.exceptions import CompatibilityError
from opf_distill.scenarios import EvalReport, baseline_report, evaluate_map, write_voltage_csv
from opf_distill.serialization import load_map, write_json_atomic
from opf_distill.services.data_service import DataService

logger = logging.getLogger(__name__)

REPORT_FILE = "report.json"
VOLTAGE_FILE = "voltages.csv"


class EvalService:
    """
    Service computing EvalReports for maps.
    """

    def __init__(self, config: RunConfig, data: DataService) -> None:
        """
        Initialize the eval service.

        Args:
            config: Run configuration
            data: Source of the OPF datasets
        """
        self._config = config
        self._data = data

    def evaluate(
        self,
        maps: Sequence[DistillationMap],
        sample_size: Optional[int] = None,
        jobs: Optional[int] = None,
        include_baseline: bool = True,
    ) -> List[EvalReport]:
        """
        Evaluate maps on the dataset of a sample size.

        Returns:
            Reports, the baseline first when included

        Raises:
            CompatibilityError: If a map's P differs from the dataset's
        """
        data = self._data.opf_dataset(sample_size)
        for dist_map in maps:
            if dist_map.p != data.p:
                raise CompatibilityError(
                    f"{dist_map.method.value} map has P={dist_map.p} but the scenarios have P={data.p}"
                )
        feeder = self._data.feeder()
        jobs = jobs or self._config.jobs
        reports = [baseline_report(data, feeder)] if include_baseline else []
        reports.extend(evaluate_map(dist_map, data, feeder, jobs) for dist_map in maps)
        return reports

    def evaluate_files(self, paths: Sequence[Path]) -> List[EvalReport]:
        """Evaluate map files written by the fit command."""
        return self.evaluate([load_map(path) for path in paths])

    def write(self, reports: Sequence[EvalReport], directory: Path) -> None:
        """Write the report JSON (all rows) and the voltage-sample CSV."""
        directory = Path(directory)
        write_json_atomic([report.to_dict() for report in reports], directory / REPORT_FILE)
        write_voltage_csv(reports, self._data.feeder(), directory / VOLTAGE_FILE)
        logger.info(f"Wrote {len(reports)} evaluation rows to {directory}")
