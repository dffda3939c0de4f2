"""
Primal-dual interior point method for inequality-constrained convex QPs.

Solves

    min ½xᵀHx + cᵀx   subject to   Ax ≤ b

with H positive definite, using slacks w = b − Ax ≥ 0 and multipliers z ≥ 0.

Algorithm (Mehrotra predictor-corrector):
1. Affine-scaling step on the Newton system of the KKT conditions
2. Centering parameter σ = (μ_aff / μ)³ from the affine step
3. Corrector step with the second-order term Δw_aff∘Δz_aff
4. Common primal/dual step length, 0.995 of the distance to the boundary

The Newton system is reduced to (H + AᵀW⁻¹ZA)Δx = rhs and solved by Cholesky.

After termination the solution is polished: the KKT system is solved exactly on
the rows the interior point identified as active (w < z). The polished point is
kept when it stays primal feasible with nonnegative multipliers and its KKT
residual is within tolerance; it carries
exact zeros in slacks and multipliers, which the sensitivity analysis relies on.
"""

import logging

import numpy as np
import scipy.linalg
from pydantic import BaseModel, ConfigDict

from opf_distill.domain.models import IpmOptions, SolverStatus

logger = logging.getLogger(__name__)

STEP_FRACTION = 0.995
FEASIBILITY_TOL = 1e-10
KKT_TOL = 1e-8


class QpResult(BaseModel):
    """Interior point output: primal x, multipliers z, slacks w and status."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    x: np.ndarray
    z: np.ndarray
    w: np.ndarray
    status: SolverStatus
    iterations: int
    residual: float
    polished: bool = False


def _max_step(v: np.ndarray, dv: np.ndarray) -> float:
    neg = dv < 0
    if not np.any(neg):
        return 1.0
    return float(min(1.0, np.min(-v[neg] / dv[neg])))


def kkt_residual(H: np.ndarray, c: np.ndarray, A: np.ndarray, b: np.ndarray, x, z, w) -> float:
    """Largest of stationarity, primal infeasibility and complementarity violations."""
    r_d = H @ x + c + A.T @ z
    r_p = np.maximum(A @ x - b, 0.0)
    return float(max(np.max(np.abs(r_d)), np.max(r_p, initial=0.0), np.max(np.abs(w * z), initial=0.0)))


def _polish(H, c, A, b, x, z, w):
    """Solve the equality KKT system on the active rows; None when rejected."""
    active = np.flatnonzero(w < z)
    n = H.shape[0]
    k = active.size
    K = np.zeros((n + k, n + k))
    K[:n, :n] = H
    K[:n, n:] = A[active].T
    K[n:, :n] = A[active]
    rhs = np.concatenate([-c, b[active]])
    try:
        sol = scipy.linalg.solve(K, rhs, assume_a="sym")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
        return None
    if not np.all(np.isfinite(sol)):
        return None

    x_p = sol[:n]
    z_act = sol[n:]
    slack = b - A @ x_p
    scale = 1.0 + np.max(np.abs(b))
    if np.any(slack < -FEASIBILITY_TOL * scale) or np.any(z_act < -FEASIBILITY_TOL * (1.0 + np.max(np.abs(c)))):
        return None

    z_p = np.zeros_like(z)
    z_p[active] = np.maximum(z_act, 0.0)
    w_p = np.maximum(slack, 0.0)
    w_p[active] = 0.0
    return x_p, z_p, w_p


def solve_qp(
    H: np.ndarray,
    c: np.ndarray,
    A: np.ndarray,
    b: np.ndarray,
    options: IpmOptions | None = None,
) -> QpResult:
    """
    Solve a strictly convex inequality-constrained QP.

    Args:
        H: Positive definite Hessian (n×n)
        c: Linear term (n)
        A: Constraint matrix (m×n)
        b: Constraint bound (m)
        options: Interior point settings

    Returns:
        QpResult; status max_iter returns the last iterate, infeasible_numerics
        the last finite iterate before the factorization broke down
    """
    options = options or IpmOptions()
    n = H.shape[0]
    m = A.shape[0]

    try:
        x = scipy.linalg.cho_solve(scipy.linalg.cho_factor(H), -c)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
        x = np.zeros(n)
    w = np.maximum(b - A @ x, 1.0)
    z = np.ones(m)

    b_scale = 1.0 + np.max(np.abs(b), initial=0.0)
    c_scale = 1.0 + np.max(np.abs(c), initial=0.0)
    status = SolverStatus.MAX_ITER
    iteration = 0

    for iteration in range(1, options.max_iter + 1):
        r_d = H @ x + c + A.T @ z
        r_p = A @ x + w - b
        gap = float(w @ z)
        mu = gap / m

        if (
            gap <= options.gap_tol
            and np.max(np.abs(r_p)) <= options.gap_tol * b_scale
            and np.max(np.abs(r_d)) <= options.gap_tol * c_scale
        ):
            status = SolverStatus.OPTIMAL
            break

        try:
            M = H + A.T @ ((z / w)[:, None] * A)
            factor = scipy.linalg.cho_factor(M)
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, ValueError):
            status = SolverStatus.INFEASIBLE_NUMERICS
            break

        def newton(r_c: np.ndarray):
            rhs = -r_d - A.T @ ((-r_c + z * r_p) / w)
            dx = scipy.linalg.cho_solve(factor, rhs)
            dw = -r_p - A @ dx
            dz = (-r_c - z * dw) / w
            return dx, dw, dz

        # Predictor
        dx_a, dw_a, dz_a = newton(w * z)
        alpha_a = min(_max_step(w, dw_a), _max_step(z, dz_a))
        mu_aff = float((w + alpha_a * dw_a) @ (z + alpha_a * dz_a)) / m
        sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0

        # Corrector
        dx, dw, dz = newton(w * z + dw_a * dz_a - sigma * mu)
        alpha = STEP_FRACTION * min(_max_step(w, dw), _max_step(z, dz))
        alpha = min(alpha, 1.0)

        x_new = x + alpha * dx
        w_new = w + alpha * dw
        z_new = z + alpha * dz
        if not (np.all(np.isfinite(x_new)) and np.all(np.isfinite(z_new))) or np.any(w_new <= 0) or np.any(z_new <= 0):
            status = SolverStatus.INFEASIBLE_NUMERICS
            break
        x, w, z = x_new, w_new, z_new

    polished = False
    if options.polish and status != SolverStatus.INFEASIBLE_NUMERICS:
        result = _polish(H, c, A, b, x, z, w)
        polish_tol = KKT_TOL * max(b_scale, c_scale)
        if result is not None and kkt_residual(H, c, A, b, *result) <= polish_tol:
            x, z, w = result
            polished = True
        else:
            logger.debug("Active-set polish rejected; keeping interior point iterate")

    residual = kkt_residual(H, c, A, b, x, z, w)
    if status == SolverStatus.MAX_ITER and residual <= KKT_TOL:
        status = SolverStatus.OPTIMAL
    if status != SolverStatus.OPTIMAL:
        logger.warning(f"QP solve ended with status {status.value} after {iteration} iterations (residual {residual:.2e})")

    return QpResult(
        x=x,
        z=z,
        w=w,
        status=status,
        iterations=iteration,
        residual=residual,
        polished=polished,
    )
