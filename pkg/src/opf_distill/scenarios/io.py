"""
Scenario CSV files.

Format: header ``feature_id,kind,bus_id,t1,...,tT``, one feature per row,
``kind`` ∈ {p_net, q_load}. Lines starting with '#' are comments.
"""

import logging
from pathlib import Path

import numpy as np
import pandas as pd

from opf_distill.domain.models import FeatureInfo, FeatureKind
from opf_distill.exceptions import ParseError
from opf_distill.scenarios.scenario_set import ScenarioSet
from opf_distill.serialization import parse_float_cell, parse_int_cell, read_csv_table, write_csv_atomic

logger = logging.getLogger(__name__)

ID_COLUMNS = ["feature_id", "kind", "bus_id"]


def load_scenarios_csv(path: Path) -> ScenarioSet:
    """
    Read a raw (unnormalized) scenario set.

    Args:
        path: Scenario CSV

    Returns:
        ScenarioSet with rows in file order

    Raises:
        FileNotFoundError: If the file does not exist
        ParseError: On malformed rows, bad kinds, duplicate features or non-numeric cells
    """
    path = Path(path)
    df, lines = read_csv_table(path, ID_COLUMNS)
    scenario_columns = [c for c in df.columns if c not in ID_COLUMNS]
    for column in scenario_columns:
        if not (column.startswith("t") and column[1:].isdigit()):
            raise ParseError(f"unexpected column {column!r}", path=str(path), line=1)

    features = []
    seen = set()
    theta = np.zeros((len(df), len(scenario_columns)))
    for row, line in enumerate(lines[: len(df)]):
        cells = df.iloc[row]
        feature_id = str(cells["feature_id"]).strip()
        if feature_id in seen:
            raise ParseError(f"duplicate feature {feature_id!r}", path=str(path), line=line, column="feature_id")
        seen.add(feature_id)
        try:
            kind = FeatureKind(str(cells["kind"]).strip())
        except ValueError as e:
            raise ParseError(
                f"unknown kind {cells['kind']!r}", path=str(path), line=line, column="kind"
            ) from e
        bus = parse_int_cell(cells["bus_id"], path, line, "bus_id")
        features.append(FeatureInfo(feature_id=feature_id, kind=kind, bus=bus))
        for j, column in enumerate(scenario_columns):
            theta[row, j] = parse_float_cell(cells[column], path, line, column)

    logger.info(f"Loaded {theta.shape[0]} features × {theta.shape[1]} scenarios from {path}")
    return ScenarioSet(theta=theta, features=features)


def save_scenarios_csv(scenarios: ScenarioSet, path: Path) -> None:
    """Write the raw data of a scenario set (shortest round-trip floats)."""
    raw = scenarios.raw_theta()
    columns = ID_COLUMNS + [f"t{j + 1}" for j in range(scenarios.t)]
    records = []
    for i, feature in enumerate(scenarios.features):
        row = [feature.feature_id, feature.kind.value, feature.bus]
        row.extend(repr(float(v)) for v in raw[i])
        records.append(row)
    write_csv_atomic(pd.DataFrame(records, columns=columns), Path(path))
