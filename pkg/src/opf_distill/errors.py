"""
Error translation utilities.

Numerical routines call into numpy/scipy, which signal singular systems with their
own exception types. The decorators here convert those to the package hierarchy so
callers only handle DistillError subclasses.
"""

from __future__ import annotations

from functools import wraps
from typing import Any, Callable, TypeVar

import numpy as np
import scipy.linalg

from opf_distill.exceptions import NumericError, RankError

F = TypeVar("F", bound=Callable[..., Any])


def translate_numeric_errors(func: F) -> F:
    """
    Decorator converting numpy/scipy linear algebra failures to RankError.

    Example:
        >>> @translate_numeric_errors
        ... def refit(cov, selected):
        ...     return scipy.linalg.solve(cov[np.ix_(selected, selected)], ...)
    """

    @wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return func(*args, **kwargs)
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as e:
            raise RankError(f"{func.__name__}: singular linear system ({e})") from e
        except FloatingPointError as e:
            raise NumericError(f"{func.__name__}: floating point failure ({e})") from e

    return wrapper  # type: ignore[return-value]


def ensure_finite(value: Any, what: str, iteration: int | None = None) -> None:
    """Raise NumericError when an array or scalar holds NaN/Inf."""
    if not np.all(np.isfinite(value)):
        raise NumericError(f"non-finite {what}", iteration=iteration)
