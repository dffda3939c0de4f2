"""
Sensitivity of the OPF minimizer to its data.

Within a fixed active set the QP minimizer is affine in θ. Differentiating the
KKT conditions with the strongly active rows S held as equalities gives

    [ H    A_Sᵀ ] [ dx  ]     [ −∂c/∂θ  ]
    [ A_S   0   ] [ dz_S ]  =  [ ∂b_S/∂θ ] dθ

whose x-block is the Jacobian ∇θx. Rows that are tight but carry a zero
multiplier (weakly active) make x(θ) nondifferentiable; they are treated as
inactive and the result is flagged degenerate.
"""

import logging
from typing import List, Optional, Sequence

import numpy as np
import scipy.linalg
from pydantic import BaseModel, ConfigDict

from opf_distill.domain.models import OpfSolution, OpfSpec
from opf_distill.exceptions import RankError, StateError
from opf_distill.opf.qp import QpInstance, assemble_opf
from opf_distill.opf.solver import run_batch

logger = logging.getLogger(__name__)

DEFAULT_TOL_PRIMAL = 1e-7
DEFAULT_TOL_DUAL = 1e-7


class ActiveSet(BaseModel):
    """Tight inequality rows of an OPF solution."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    active: np.ndarray
    strongly_active: np.ndarray
    weakly_active: np.ndarray

    @property
    def degenerate(self) -> bool:
        return bool(self.weakly_active.size)


class SensitivitySet(BaseModel):
    """
    Jacobian of one OPF minimizer.

    Attributes:
        jacobian: (G+1)×P matrix, rows q^g then s, columns θ entries
        active_set: Rows used as equalities and rows flagged weakly active
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    jacobian: np.ndarray
    active_set: ActiveSet

    @property
    def degenerate(self) -> bool:
        return self.active_set.degenerate


def active_set(
    sol: OpfSolution,
    tol_primal: float = DEFAULT_TOL_PRIMAL,
    tol_dual: float = DEFAULT_TOL_DUAL,
) -> ActiveSet:
    """
    Classify tight rows of a solution.

    A row is active when its slack is at most tol_primal, strongly active when
    its multiplier is additionally at least tol_dual, weakly active otherwise.
    """
    active = np.flatnonzero(sol.slacks <= tol_primal)
    strong = active[sol.duals[active] >= tol_dual]
    weak = active[sol.duals[active] < tol_dual]
    return ActiveSet(active=active, strongly_active=strong, weakly_active=weak)


def _redundant_rows(A: np.ndarray, rows: np.ndarray) -> List[int]:
    kept: List[int] = []
    redundant: List[int] = []
    for row in rows:
        trial = kept + [int(row)]
        if np.linalg.matrix_rank(A[trial]) == len(trial):
            kept = trial
        else:
            redundant.append(int(row))
    return redundant


def minimizer_jacobian(
    spec: OpfSpec,
    sol: OpfSolution,
    theta: np.ndarray,
    tol_primal: float = DEFAULT_TOL_PRIMAL,
    tol_dual: float = DEFAULT_TOL_DUAL,
    qp: Optional[QpInstance] = None,
) -> SensitivitySet:
    """
    Differentiate the OPF minimizer with respect to θ.

    Args:
        spec: OPF definition
        sol: Optimal solution at θ
        theta: Data vector the solution belongs to
        tol_primal: Slack tolerance for active rows
        tol_dual: Multiplier tolerance for strongly active rows
        qp: Assembled instance at θ, reused when given

    Returns:
        SensitivitySet with the (G+1)×P Jacobian

    Raises:
        StateError: If the solution is not optimal
        RankError: If the strongly active rows are linearly dependent
    """
    if not sol.is_optimal:
        raise StateError(f"sensitivity requires an optimal solution, got {sol.status.value}")
    qp = qp or assemble_opf(spec, theta)
    act = active_set(sol, tol_primal, tol_dual)
    rows = act.strongly_active
    n_vars = qp.n_vars

    if rows.size:
        A_s = qp.A[rows]
        if np.linalg.matrix_rank(A_s) < rows.size:
            raise RankError("singular KKT system", _redundant_rows(qp.A, rows))
        k = rows.size
        K = np.zeros((n_vars + k, n_vars + k))
        K[:n_vars, :n_vars] = qp.H
        K[:n_vars, n_vars:] = A_s.T
        K[n_vars:, :n_vars] = A_s
        rhs = np.vstack([-qp.dc_dtheta, qp.db_dtheta[rows]])
        try:
            jac = scipy.linalg.solve(K, rhs, assume_a="sym")[:n_vars]
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as e:
            raise RankError(f"singular KKT system ({e})", _redundant_rows(qp.A, rows)) from e
    else:
        jac = scipy.linalg.cho_solve(scipy.linalg.cho_factor(qp.H), -qp.dc_dtheta)

    if act.degenerate:
        logger.debug(f"Degenerate active set: weakly active rows {act.weakly_active.tolist()}")
    return SensitivitySet(jacobian=jac, active_set=act)


def jacobian_batch(
    spec: OpfSpec,
    solutions: Sequence[OpfSolution],
    thetas: np.ndarray,
    jobs: int = 1,
    tol_primal: float = DEFAULT_TOL_PRIMAL,
    tol_dual: float = DEFAULT_TOL_DUAL,
) -> List[SensitivitySet]:
    """Jacobians for every column of a scenario matrix, in column order."""
    return run_batch(
        lambda t: minimizer_jacobian(spec, solutions[t], thetas[:, t], tol_primal, tol_dual),
        len(solutions),
        jobs,
    )
