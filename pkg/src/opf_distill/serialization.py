"""
Pure serialization functions for distillation artifacts.

This module provides stateless functions to read and write:
- DistillationMap JSON documents
- Generic JSON reports (with numpy-aware encoding)
- CSV tables with comment lines and line-numbered parse errors

All writes are atomic (temp file + rename) so an interrupted run never leaves
half-written artifacts behind.
"""

import json
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Tuple

import numpy as np
import pandas as pd

from opf_distill.domain.models import DistillationMap, GroupMode, Method
from opf_distill.exceptions import CompatibilityError, ParseError

MAP_FORMAT_VERSION = "1.0"


class NumpyEncoder(json.JSONEncoder):
    """
    Custom JSON encoder for numpy values, enums and paths.

    Converts:
    - ndarray -> nested lists
    - numpy scalars -> Python scalars
    - Enum -> value
    - Path -> string
    """

    def default(self, obj: Any) -> Any:
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, np.integer):
            return int(obj)
        if isinstance(obj, np.floating):
            return float(obj)
        if isinstance(obj, np.bool_):
            return bool(obj)
        if isinstance(obj, Enum):
            return obj.value
        if isinstance(obj, Path):
            return str(obj)
        return super().default(obj)


# ============================================================================
# JSON
# ============================================================================


def write_json_atomic(data: Any, file_path: Path) -> None:
    """
    Write a JSON document with an atomic rename.

    Args:
        data: JSON-serializable structure (numpy values allowed)
        file_path: Target path; parent directories are created
    """
    file_path = Path(file_path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    temp_path = file_path.parent / f"{file_path.name}.tmp"

    with open(temp_path, "w") as f:
        json.dump(data, f, indent=2, cls=NumpyEncoder)
        f.write("\n")

    temp_path.replace(file_path)


def read_json(file_path: Path) -> Any:
    """
    Read a JSON document.

    Raises:
        FileNotFoundError: If the file does not exist
        ParseError: If the JSON is malformed
    """
    file_path = Path(file_path)
    if not file_path.exists():
        raise FileNotFoundError(f"File not found: {file_path}")
    try:
        with open(file_path, "r") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, path=str(file_path), line=e.lineno) from e


def map_to_dict(dist_map: DistillationMap) -> Dict[str, Any]:
    """Convert a map to its JSON document (C stored row-major)."""
    return {
        "version": MAP_FORMAT_VERSION,
        "method": dist_map.method.value,
        "k": dist_map.k,
        "lambda": dist_map.lam,
        "selected_indices": list(dist_map.selected_indices),
        "C": dist_map.c_matrix.tolist(),
        "groups_mode": dist_map.groups_mode.value,
        "p": dist_map.p,
        "exact_k": dist_map.exact_k,
    }


def map_from_dict(data: Dict[str, Any], source: str = "<map>") -> DistillationMap:
    """
    Rebuild a map from its JSON document.

    Raises:
        CompatibilityError: If the format version is unknown
        ParseError: If required fields are missing or malformed
    """
    if data.get("version") != MAP_FORMAT_VERSION:
        raise CompatibilityError(f"{source}: incompatible map version {data.get('version')}")
    try:
        C = np.array(data["C"], dtype=float)
        p = int(data["p"])
        if C.size == 0:
            C = C.reshape(p, 0)
        return DistillationMap(
            method=Method(data["method"]),
            k=int(data["k"]),
            lam=None if data.get("lambda") is None else float(data["lambda"]),
            selected_indices=[int(i) for i in data["selected_indices"]],
            c_matrix=C,
            p=p,
            groups_mode=GroupMode(data.get("groups_mode", GroupMode.COLUMN.value)),
            exact_k=bool(data.get("exact_k", True)),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(f"invalid map document ({e})", path=source) from e


def save_map(dist_map: DistillationMap, file_path: Path) -> None:
    """Serialize a distillation map to JSON."""
    write_json_atomic(map_to_dict(dist_map), Path(file_path))


def load_map(file_path: Path) -> DistillationMap:
    """Load a distillation map written by save_map (values round-trip bitwise)."""
    return map_from_dict(read_json(Path(file_path)), source=str(file_path))


# ============================================================================
# CSV
# ============================================================================


def _data_line_numbers(file_path: Path) -> List[int]:
    """Physical line numbers of non-blank, non-comment lines (header first)."""
    numbers = []
    with open(file_path, "r") as f:
        for lineno, raw in enumerate(f, start=1):
            stripped = raw.strip()
            if stripped and not stripped.startswith("#"):
                numbers.append(lineno)
    return numbers


def read_csv_table(
    file_path: Path, required_columns: Iterable[str]
) -> Tuple[pd.DataFrame, List[int]]:
    """
    Read a CSV file as strings.

    Args:
        file_path: CSV path; lines starting with '#' are comments
        required_columns: Columns that must appear in the header

    Returns:
        Tuple of (string DataFrame, physical line number of every data row)

    Raises:
        FileNotFoundError: If the file does not exist
        ParseError: If the file is empty, ragged or misses required columns
    """
    file_path = Path(file_path)
    if not file_path.exists():
        raise FileNotFoundError(f"File not found: {file_path}")
    try:
        df = pd.read_csv(
            file_path,
            comment="#",
            dtype=str,
            keep_default_na=False,
            skipinitialspace=True,
            skip_blank_lines=True,
        )
    except pd.errors.EmptyDataError as e:
        raise ParseError("file is empty", path=str(file_path)) from e
    except pd.errors.ParserError as e:
        raise ParseError(f"inconsistent column count ({e})", path=str(file_path)) from e

    df.columns = [str(c).strip() for c in df.columns]
    missing = [c for c in required_columns if c not in df.columns]
    if missing:
        raise ParseError(f"missing columns {missing}", path=str(file_path), line=1)

    lines = _data_line_numbers(file_path)[1:]
    for row, lineno in zip(range(len(df)), lines):
        cells = df.iloc[row]
        if cells.isna().any():
            raise ParseError("inconsistent column count", path=str(file_path), line=lineno)
    return df, lines


def parse_float_cell(value: Any, file_path: Path, line: int, column: str, allow_empty: bool = False) -> float:
    """
    Parse one numeric CSV cell.

    Returns NaN for empty cells when allow_empty is set.

    Raises:
        ParseError: If the cell is empty, non-numeric or not finite
    """
    text = "" if value is None else str(value).strip()
    if text == "":
        if allow_empty:
            return float("nan")
        raise ParseError("empty cell", path=str(file_path), line=line, column=column)
    try:
        number = float(text)
    except ValueError as e:
        raise ParseError(f"non-numeric cell {text!r}", path=str(file_path), line=line, column=column) from e
    if not np.isfinite(number):
        raise ParseError(f"non-finite cell {text!r}", path=str(file_path), line=line, column=column)
    return number


def parse_int_cell(value: Any, file_path: Path, line: int, column: str) -> int:
    """Parse one nonnegative integer CSV cell."""
    text = str(value).strip()
    try:
        number = int(text)
    except ValueError as e:
        raise ParseError(f"non-integer cell {text!r}", path=str(file_path), line=line, column=column) from e
    if number < 0:
        raise ParseError(f"negative id {number}", path=str(file_path), line=line, column=column)
    return number


def write_csv_atomic(df: pd.DataFrame, file_path: Path) -> None:
    """Write a DataFrame to CSV (shortest round-trip float formatting) atomically."""
    file_path = Path(file_path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    temp_path = file_path.parent / f"{file_path.name}.tmp"
    df.to_csv(temp_path, index=False, float_format=None)
    temp_path.replace(file_path)
