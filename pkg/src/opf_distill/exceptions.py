"""
Custom exceptions for OPF data distillation.

Every exception carries the process exit code the CLI reports for it:
2 for usage/configuration problems, 3 for bad input data, 4 for numerical failures.
"""

from __future__ import annotations

from typing import Any, Dict, List, Optional, Sequence

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


class DistillError(Exception):
    """Base exception for all opf-distill errors."""

    def __init__(self, message: str, exit_code: int = EXIT_CONFIG) -> None:
        self.message = message
        self.exit_code = exit_code
        super().__init__(self.message)


# ============================================================================
# Usage / configuration (exit 2)
# ============================================================================


class ConfigError(DistillError):
    """Raised when a run configuration is inconsistent or unusable."""

    def __init__(self, message: str) -> None:
        super().__init__(message, exit_code=EXIT_CONFIG)


class ArgumentError(ConfigError, ValueError):
    """Raised when an operation is called outside its contract (e.g. K out of range)."""


# ============================================================================
# Input data (exit 3)
# ============================================================================


class DataError(DistillError):
    """Raised when input data is malformed or inconsistent."""

    def __init__(self, message: str) -> None:
        super().__init__(message, exit_code=EXIT_DATA)


class ParseError(DataError):
    """Raised when a CSV/JSON file cannot be parsed."""

    def __init__(
        self,
        message: str,
        path: Optional[str] = None,
        line: Optional[int] = None,
        column: Optional[str] = None,
    ) -> None:
        self.path = path
        self.line = line
        self.column = column
        location = ""
        if path is not None:
            location += f"{path}"
        if line is not None:
            location += f":{line}"
        if column is not None:
            location += f" [{column}]"
        super().__init__(f"{location}: {message}" if location else message)


class ShapeError(DataError, ValueError):
    """Raised when array dimensions do not match."""


class TopologyError(DataError):
    """Raised when the feeder lines do not form a tree rooted at the substation."""


class ModelError(DataError):
    """Raised when feeder parameters are invalid (e.g. nonpositive impedance)."""


class StateError(DataError):
    """Raised when an object is in the wrong state (e.g. normalizing twice)."""


class CompatibilityError(DataError):
    """Raised when two artifacts disagree (e.g. map dimension vs scenario features)."""


# ============================================================================
# Numerical failures (exit 4)
# ============================================================================


class NumericError(DistillError):
    """Raised when a numerical routine fails or produces non-finite values."""

    def __init__(self, message: str, iteration: Optional[int] = None) -> None:
        self.iteration = iteration
        if iteration is not None:
            message = f"{message} (iteration {iteration})"
        super().__init__(message, exit_code=EXIT_NUMERIC)


class ConvergenceError(NumericError):
    """Raised when an iterative solver exhausts its iteration budget."""

    def __init__(self, message: str, residual: float) -> None:
        self.residual = residual
        super().__init__(f"{message}; last residual {residual:.3e}")


class RankError(NumericError):
    """Raised when a linear system is singular."""

    def __init__(self, message: str, redundant_rows: Sequence[int] = ()) -> None:
        self.redundant_rows: List[int] = [int(r) for r in redundant_rows]
        if self.redundant_rows:
            message = f"{message}; redundant rows {self.redundant_rows}"
        super().__init__(message)


class ScenarioError(DistillError):
    """Wraps a failure raised while processing one scenario."""

    def __init__(self, scenario: int, cause: DistillError) -> None:
        self.scenario = scenario
        self.cause = cause
        super().__init__(f"scenario {scenario}: {cause.message}", exit_code=cause.exit_code)


class BatchSolveError(DistillError):
    """Raised after a batch finishes with one or more failed scenarios."""

    def __init__(self, failures: Dict[int, DistillError], results: List[Any]) -> None:
        self.failures = failures
        self.results = results
        first = min(failures)
        exit_code = failures[first].exit_code
        super().__init__(
            f"{len(failures)} of {len(results)} scenarios failed; first: "
            f"scenario {first}: {failures[first].message}",
            exit_code=exit_code,
        )
