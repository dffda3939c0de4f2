"""
Feeder CSV ingestion.

A feeder directory holds two files:

    buses.csv   bus_id,der_qmax     (der_qmax empty or 0 for non-DER buses)
    lines.csv   from,to,r_pu,x_pu

Bus ids are arbitrary nonnegative integers. They are remapped so the substation
becomes bus 0 and the remaining ids, ascending, become 1..N.
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import ValidationError

from opf_distill.domain.models import FeederModel, Line
from opf_distill.exceptions import DataError, ModelError, TopologyError
from opf_distill.serialization import (
    parse_float_cell,
    parse_int_cell,
    read_csv_table,
    write_csv_atomic,
)

logger = logging.getLogger(__name__)

BUSES_FILE = "buses.csv"
LINES_FILE = "lines.csv"


def _read_lines(path: Path) -> List[Tuple[int, int, float, float]]:
    df, lines = read_csv_table(path, ["from", "to", "r_pu", "x_pu"])
    rows = []
    for i, lineno in enumerate(lines[: len(df)]):
        rec = df.iloc[i]
        rows.append(
            (
                parse_int_cell(rec["from"], path, lineno, "from"),
                parse_int_cell(rec["to"], path, lineno, "to"),
                parse_float_cell(rec["r_pu"], path, lineno, "r_pu"),
                parse_float_cell(rec["x_pu"], path, lineno, "x_pu"),
            )
        )
    return rows


def _read_buses(path: Path) -> Dict[int, float]:
    df, lines = read_csv_table(path, ["bus_id", "der_qmax"])
    ratings: Dict[int, float] = {}
    for i, lineno in enumerate(lines[: len(df)]):
        rec = df.iloc[i]
        bus = parse_int_cell(rec["bus_id"], path, lineno, "bus_id")
        qmax = parse_float_cell(rec["der_qmax"], path, lineno, "der_qmax", allow_empty=True)
        if bus in ratings:
            raise DataError(f"{path}:{lineno}: bus {bus} listed twice")
        ratings[bus] = 0.0 if np.isnan(qmax) else qmax
    return ratings


def _find_root(rows: List[Tuple[int, int, float, float]], substation_id: Optional[int]) -> int:
    ids = {a for a, _, _, _ in rows} | {b for _, b, _, _ in rows}
    if substation_id is not None:
        if substation_id not in ids:
            raise TopologyError(f"substation {substation_id} does not appear in lines")
        return substation_id
    roots = sorted({a for a, _, _, _ in rows} - {b for _, b, _, _ in rows})
    if len(roots) != 1:
        raise TopologyError(
            f"cannot infer the substation: candidate roots {roots}; pass substation_id"
        )
    return roots[0]


def load_feeder_csv(
    directory: Path,
    substation_id: Optional[int] = None,
    v0: float = 1.0,
    v_max_dev: float = 0.03,
) -> FeederModel:
    """
    Load a feeder from buses.csv and lines.csv.

    Args:
        directory: Folder holding the two CSV files
        substation_id: Original id of the substation (inferred when omitted)
        v0: Substation voltage in pu
        v_max_dev: Voltage deviation limit in pu

    Returns:
        FeederModel with internal ids 0..N and the original ids in bus_labels

    Raises:
        ParseError: On malformed files (with file and line)
        TopologyError: If the substation cannot be determined
        DataError: If buses.csv names a bus that no line touches
        ModelError: If the assembled model violates feeder invariants
    """
    directory = Path(directory)
    rows = _read_lines(directory / LINES_FILE)
    if not rows:
        raise TopologyError(f"{directory / LINES_FILE}: no lines")
    ratings = _read_buses(directory / BUSES_FILE)

    root = _find_root(rows, substation_id)
    ids = sorted(({a for a, _, _, _ in rows} | {b for _, b, _, _ in rows}) - {root})
    labels = [root] + ids
    index = {label: i for i, label in enumerate(labels)}

    unknown = sorted(set(ratings) - set(index))
    if unknown:
        raise DataError(f"{directory / BUSES_FILE}: buses {unknown} are not connected by any line")
    if ratings.get(root, 0.0) > 0:
        raise DataError(f"substation {root} cannot host a DER")

    der = sorted((index[bus], q) for bus, q in ratings.items() if q > 0)
    try:
        model = FeederModel(
            n_buses=len(labels),
            lines=[Line(from_bus=index[a], to_bus=index[b], r=r, x=x) for a, b, r, x in rows],
            v0=v0,
            der_buses=[b for b, _ in der],
            der_qmax=[q for _, q in der],
            v_max_dev=v_max_dev,
            bus_labels=labels,
        )
    except ValidationError as e:
        raise ModelError(f"{directory}: invalid feeder ({e.errors()[0]['msg']})") from e

    logger.info(f"Loaded feeder {directory}: {model.n} buses, {model.n_der} DERs")
    return model


def save_feeder_csv(model: FeederModel, directory: Path) -> None:
    """Write a feeder as buses.csv and lines.csv using its original bus ids."""
    directory = Path(directory)
    qmax = dict(zip(model.der_buses, model.der_qmax))
    buses = pd.DataFrame(
        {
            "bus_id": [model.label(b) for b in range(model.n_buses)],
            "der_qmax": [repr(float(qmax[b])) if b in qmax else "" for b in range(model.n_buses)],
        }
    )
    lines = pd.DataFrame(
        {
            "from": [model.label(line.from_bus) for line in model.lines],
            "to": [model.label(line.to_bus) for line in model.lines],
            "r_pu": [repr(float(line.r)) for line in model.lines],
            "x_pu": [repr(float(line.x)) for line in model.lines],
        }
    )
    write_csv_atomic(buses, directory / BUSES_FILE)
    write_csv_atomic(lines, directory / LINES_FILE)
