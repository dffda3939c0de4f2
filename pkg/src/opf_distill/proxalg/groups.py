"""
Column groups of a distillation map and the group-lasso proximal operator.

The penalty g(W) = Σ_g ‖W[:, g]‖_F sums Frobenius norms of disjoint column
blocks. Its proximal operator shrinks every block independently:

    prox(Y)[:, g] = (1 − β/‖Y[:, g]‖) · Y[:, g]   if ‖Y[:, g]‖ ≥ β
                  = 0                              otherwise
"""

from typing import Dict, List, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from opf_distill.domain.models import GroupMode
from opf_distill.exceptions import ArgumentError


class GroupStructure(BaseModel):
    """
    Partition of the P columns of W into disjoint groups.

    Attributes:
        p: Column count P
        groups: Column index lists; disjoint, covering 0..P-1
        mode: How the partition was built
    """

    model_config = ConfigDict(frozen=True)

    p: int = Field(..., ge=1)
    groups: List[List[int]]
    mode: GroupMode = GroupMode.COLUMN

    @model_validator(mode="after")
    def validate_partition(self) -> "GroupStructure":
        seen = sorted(i for g in self.groups for i in g)
        if any(not g for g in self.groups):
            raise ValueError("groups must be nonempty")
        if seen != list(range(self.p)):
            raise ValueError(f"groups must be disjoint and cover columns 0..{self.p - 1}")
        return self

    @classmethod
    def per_column(cls, p: int) -> "GroupStructure":
        """Every feature is its own group."""
        return cls(p=p, groups=[[i] for i in range(p)], mode=GroupMode.COLUMN)

    @classmethod
    def per_bus(cls, buses: Sequence[int]) -> "GroupStructure":
        """
        Group features located at the same bus.

        Args:
            buses: Bus of every feature, in feature order

        Groups are ordered by first appearance, so with θ = [p; q^ℓ] over all
        buses column n is grouped with column n+N.
        """
        order: List[int] = []
        members: Dict[int, List[int]] = {}
        for i, bus in enumerate(buses):
            if bus not in members:
                members[bus] = []
                order.append(bus)
            members[bus].append(i)
        return cls(p=len(buses), groups=[members[b] for b in order], mode=GroupMode.BUS)

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    def norms(self, W: np.ndarray) -> np.ndarray:
        """Frobenius norm of every column block of W."""
        if self.mode == GroupMode.COLUMN:
            return np.linalg.norm(W, axis=0)[[g[0] for g in self.groups]]
        return np.array([np.linalg.norm(W[:, g]) for g in self.groups])

    def support(self, W: np.ndarray, threshold: float) -> List[int]:
        """Ascending column indices of every group whose norm exceeds threshold."""
        norms = self.norms(W)
        return sorted(i for g, norm in zip(self.groups, norms) if norm > threshold for i in g)

    def nnz(self, W: np.ndarray, threshold: float) -> int:
        """Number of groups whose norm exceeds threshold."""
        return int(np.count_nonzero(self.norms(W) > threshold))


def group_penalty(W: np.ndarray, groups: GroupStructure) -> float:
    """g(W) = Σ_g ‖W[:, g]‖_F."""
    return float(np.sum(groups.norms(W)))


def group_prox(Y: np.ndarray, beta: float, groups: GroupStructure) -> np.ndarray:
    """
    Proximal operator of β·g evaluated at Y.

    Args:
        Y: P×P matrix
        beta: Shrinkage threshold (λ·μ)
        groups: Column partition

    Returns:
        New P×P matrix; Y is not modified

    Raises:
        ArgumentError: If beta is negative
    """
    if beta < 0:
        raise ArgumentError(f"prox threshold must be nonnegative, got {beta}")
    Y = np.asarray(Y, dtype=float)
    if beta == 0:
        return Y.copy()

    out = np.zeros_like(Y)
    norms = groups.norms(Y)
    for g, norm in zip(groups.groups, norms):
        if norm > 0 and norm >= beta:
            out[:, g] = (1.0 - beta / norm) * Y[:, g]
    return out
