"""
Scenario matrices and their normalization.

A ScenarioSet holds Θ (P×T): one row per OPF feature, one column per scenario.
Normalization centers every row and scales it to unit population variance;
rows with zero variance keep σ = 1, become all-zero, and are flagged constant.
"""

from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, model_validator
from sklearn.preprocessing import StandardScaler

from opf_distill.domain.models import FeatureInfo
from opf_distill.exceptions import ArgumentError, StateError


class ScenarioSet(BaseModel):
    """
    Scenario matrix with feature metadata and normalization statistics.

    Attributes:
        theta: P×T data (raw or normalized)
        features: Row metadata, P entries
        mean: Per-row mean m (set once normalized)
        scale: Per-row scale σ > 0 (set once normalized)
        constant: Rows with zero raw variance
        normalized: Whether theta holds normalized data
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    theta: np.ndarray
    features: List[FeatureInfo]
    mean: Optional[np.ndarray] = None
    scale: Optional[np.ndarray] = None
    constant: Optional[np.ndarray] = None
    normalized: bool = False

    @model_validator(mode="after")
    def validate_set(self) -> "ScenarioSet":
        if self.theta.ndim != 2:
            raise ValueError("theta must be a P×T matrix")
        if self.theta.shape[0] != len(self.features):
            raise ValueError(f"{len(self.features)} features for {self.theta.shape[0]} rows")
        if self.normalized and (self.mean is None or self.scale is None):
            raise ValueError("normalized sets carry mean and scale")
        if self.scale is not None and np.any(self.scale <= 0):
            raise ValueError("scales must be positive")
        return self

    @property
    def p(self) -> int:
        return int(self.theta.shape[0])

    @property
    def t(self) -> int:
        return int(self.theta.shape[1])

    @property
    def buses(self) -> List[int]:
        return [f.bus for f in self.features]

    def constant_rows(self) -> np.ndarray:
        """Boolean mask of rows with zero raw variance."""
        if self.constant is not None:
            return self.constant
        raw = self.raw_theta()
        if raw.shape[1] == 0:
            return np.zeros(self.p, dtype=bool)
        return np.ptp(raw, axis=1) == 0

    def normalize(self) -> "ScenarioSet":
        """
        Center and scale every row.

        Raises:
            StateError: If the set is already normalized
            ArgumentError: If the set has no scenarios
        """
        if self.normalized:
            raise StateError("scenario set is already normalized")
        if self.t == 0:
            raise ArgumentError("cannot normalize an empty scenario set")

        constant = np.ptp(self.theta, axis=1) == 0
        scaler = StandardScaler()
        normalized = scaler.fit_transform(self.theta.T).T
        mean = scaler.mean_.copy()
        scale = scaler.scale_.copy()
        scale[constant] = 1.0
        mean[constant] = self.theta[constant, 0]
        normalized[constant] = 0.0
        return self.model_copy(
            update={
                "theta": normalized,
                "mean": mean,
                "scale": scale,
                "constant": constant,
                "normalized": True,
            }
        )

    def denormalize(self) -> "ScenarioSet":
        """
        Undo normalization.

        Raises:
            StateError: If the set is not normalized
        """
        if not self.normalized:
            raise StateError("scenario set is not normalized")
        return self.model_copy(update={"theta": self.raw_theta(), "normalized": False})

    def raw_theta(self) -> np.ndarray:
        """Θ in original units."""
        if not self.normalized:
            return self.theta
        assert self.mean is not None and self.scale is not None
        return self.theta * self.scale[:, None] + self.mean[:, None]

    def select_features(self, rows: Sequence[int]) -> "ScenarioSet":
        """Subset (and reorder) the rows."""
        idx = np.asarray(rows, dtype=int)
        return self.model_copy(
            update={
                "theta": self.theta[idx],
                "features": [self.features[i] for i in idx],
                "mean": None if self.mean is None else self.mean[idx],
                "scale": None if self.scale is None else self.scale[idx],
                "constant": None if self.constant is None else self.constant[idx],
            }
        )

    def select_scenarios(self, columns: Sequence[int]) -> "ScenarioSet":
        """Subset the columns, keeping the normalization statistics."""
        return self.model_copy(update={"theta": self.theta[:, np.asarray(columns, dtype=int)]})


def subsample_scenarios(scenarios: ScenarioSet, n: int, seed: int = 0) -> ScenarioSet:
    """
    Draw n scenarios without replacement (column order preserved).

    The result is returned raw so it can be normalized on its own statistics.

    Raises:
        ArgumentError: If n is not in 1..T
    """
    if not 1 <= n <= scenarios.t:
        raise ArgumentError(f"sample size {n} outside 1..{scenarios.t}")
    raw = scenarios.denormalize() if scenarios.normalized else scenarios
    columns = np.sort(np.random.default_rng(seed).choice(scenarios.t, size=n, replace=False))
    return raw.model_copy(
        update={"theta": raw.theta[:, columns], "mean": None, "scale": None, "constant": None}
    )


def feature_statistics(scenarios: ScenarioSet) -> pd.DataFrame:
    """Per-feature mean, population σ, min and max of the raw data, with constant rows flagged."""
    raw = scenarios.raw_theta()
    empty = raw.shape[1] == 0
    return pd.DataFrame(
        {
            "feature_id": [f.feature_id for f in scenarios.features],
            "kind": [f.kind.value for f in scenarios.features],
            "bus": scenarios.buses,
            "mean": np.full(scenarios.p, np.nan) if empty else raw.mean(axis=1),
            "std": np.full(scenarios.p, np.nan) if empty else raw.std(axis=1),
            "min": np.full(scenarios.p, np.nan) if empty else raw.min(axis=1),
            "max": np.full(scenarios.p, np.nan) if empty else raw.max(axis=1),
            "constant": scenarios.constant_rows(),
        }
    )
