"""
Accelerated proximal gradient engines for f(W) + λ·g(W).

apg_convex
    Momentum iterations for convex L-smooth f with fixed step μ ≤ 1/L:

        W̄ⁱ   = Wⁱ + ((αᵢ₋₁ − 1)/αᵢ)(Wⁱ − Wⁱ⁻¹)
        Wⁱ⁺¹ = prox_{λμg}(W̄ⁱ − μ∇f(W̄ⁱ))
        αᵢ₊₁ = (1 + √(4αᵢ² + 1)) / 2

    When ``restart`` is set and the extrapolated step raises the total cost, the
    step is retaken from Wⁱ without momentum and α is reset.

apg_nonconvex
    Monitored variant for nonconvex f. The prox step on the three-point
    extrapolation W̄ⁱ is accepted when it decreases the running average cᵢ of
    past costs by δ‖Zⁱ⁺¹ − W̄ⁱ‖²; otherwise a plain prox step from Wⁱ is taken
    and the better of the two candidates is kept. f has no known global
    Lipschitz constant, so every prox step backtracks, starting from a
    Barzilai-Borwein estimate built from the last two extrapolated points.

Both engines stop when the relative change of the total cost AND the relative
change of the iterate fall below ``tol``.
"""

import logging
import math
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict

from opf_distill.domain.models import ApgConfig
from opf_distill.errors import ensure_finite
from opf_distill.exceptions import ArgumentError, ShapeError
from opf_distill.proxalg.base import SmoothLoss
from opf_distill.proxalg.groups import GroupStructure, group_penalty, group_prox
from opf_distill.serialization import write_csv_atomic

logger = logging.getLogger(__name__)

MAX_STEP = 1e12

TRACE_COLUMNS = ["iter", "cost", "smooth_cost", "penalty", "nnz_groups", "step_kind"]


class TraceRow(BaseModel):
    """One iteration of an APG run."""

    model_config = ConfigDict(frozen=True)

    iter: int
    cost: float
    smooth_cost: float
    penalty: float
    nnz_groups: int
    step_kind: str


class ApgResult(BaseModel):
    """
    Output of an APG run.

    Attributes:
        W: Final iterate
        cost: Total cost f(W) + λg(W) at the final iterate
        iterations: Iterations performed
        converged: Whether the stopping rule fired before max_iter
        trace: Per-iteration records, starting with the initial point (iter 0)
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    W: np.ndarray
    cost: float
    iterations: int
    converged: bool
    trace: List[TraceRow]


def write_trace_csv(trace: Sequence[TraceRow], path: Path) -> None:
    """Write an iteration trace as iter,cost,smooth_cost,penalty,nnz_groups,step_kind."""
    records = [
        {
            "iter": row.iter,
            "cost": repr(row.cost),
            "smooth_cost": repr(row.smooth_cost),
            "penalty": repr(row.penalty),
            "nnz_groups": row.nnz_groups,
            "step_kind": row.step_kind,
        }
        for row in trace
    ]
    write_csv_atomic(pd.DataFrame(records, columns=TRACE_COLUMNS), Path(path))


class MonitoredAverage:
    """
    Running weighted average of past costs used by the nonconvex acceptance test.

    Starts at c₁ = F(W¹), q₁ = 1 and updates q ← ηq + 1, c ← (ηq_old·c + F)/q.
    """

    def __init__(self, first_cost: float, eta: float) -> None:
        self.eta = eta
        self.c = first_cost
        self.q = 1.0

    def update(self, cost: float) -> float:
        q_next = self.eta * self.q + 1.0
        self.c = (self.eta * self.q * self.c + cost) / q_next
        self.q = q_next
        return self.c


class _Objective:
    """Total cost f + λg with the bookkeeping shared by both engines."""

    def __init__(self, loss: SmoothLoss, groups: GroupStructure, cfg: ApgConfig) -> None:
        self.loss = loss
        self.groups = groups
        self.cfg = cfg

    def total(self, W: np.ndarray, iteration: int) -> float:
        smooth = self.loss.value(W)
        ensure_finite(smooth, "cost", iteration)
        return smooth + self.cfg.lam * group_penalty(W, self.groups)

    def gradient(self, W: np.ndarray, iteration: int) -> np.ndarray:
        grad = self.loss.gradient(W)
        ensure_finite(grad, "gradient", iteration)
        return grad

    def prox(self, V: np.ndarray, grad: np.ndarray, mu: float) -> np.ndarray:
        return group_prox(V - mu * grad, self.cfg.lam * mu, self.groups)

    def row(self, iteration: int, W: np.ndarray, cost: float, kind: str) -> TraceRow:
        penalty = self.cfg.lam * group_penalty(W, self.groups)
        return TraceRow(
            iter=iteration,
            cost=cost,
            smooth_cost=cost - penalty,
            penalty=penalty,
            nnz_groups=self.groups.nnz(W, self.cfg.zero_threshold),
            step_kind=kind,
        )


def _stalled(f_new: float, f_old: float, W_new: np.ndarray, W_old: np.ndarray, tol: float) -> bool:
    cost_change = abs(f_new - f_old) / max(abs(f_old), np.finfo(float).tiny)
    step_change = np.linalg.norm(W_new - W_old) / max(1.0, np.linalg.norm(W_old))
    return cost_change <= tol and step_change <= tol


def _initial(groups: GroupStructure, cfg: ApgConfig, W0: Optional[np.ndarray]) -> np.ndarray:
    W = cfg.initial_iterate(groups.p) if W0 is None else np.array(W0, dtype=float)
    if W.shape != (groups.p, groups.p):
        raise ShapeError(f"initial iterate must be {groups.p}×{groups.p}, got {W.shape}")
    return W


def _next_alpha(alpha: float) -> float:
    return (1.0 + math.sqrt(4.0 * alpha * alpha + 1.0)) / 2.0


def barzilai_borwein(dx: np.ndarray, dg: np.ndarray, fallback: float) -> float:
    """Step estimate ⟨dx, dx⟩ / |⟨dx, dg⟩|, or fallback when the curvature vanishes."""
    curvature = abs(float(np.sum(dx * dg)))
    if curvature <= 0.0 or not np.isfinite(curvature):
        return fallback
    return min(float(np.sum(dx * dx)) / curvature, MAX_STEP)


def apg_convex(
    loss: SmoothLoss,
    groups: GroupStructure,
    cfg: ApgConfig,
    W0: Optional[np.ndarray] = None,
) -> ApgResult:
    """
    Minimize a convex f(W) + λ·g(W) with accelerated proximal gradient steps.

    Args:
        loss: Convex smooth part with Lipschitz gradient
        groups: Column partition of the penalty
        cfg: Engine settings; λ is ``cfg.lam``, μ is ``cfg.step_size`` or 1/L
        W0: Initial iterate (default: ``cfg.initial_iterate``)

    Returns:
        ApgResult

    Raises:
        ArgumentError: If no step size is given and the loss has no Lipschitz constant
        NumericError: If the gradient or cost becomes non-finite
    """
    if cfg.step_size is not None:
        mu = cfg.step_size
    elif loss.lipschitz is not None:
        mu = 1.0 / loss.lipschitz if loss.lipschitz > 0 else 1.0
    else:
        raise ArgumentError("apg_convex needs a step size or a loss with a Lipschitz constant")

    obj = _Objective(loss, groups, cfg)
    W = _initial(groups, cfg, W0)
    W_prev = W
    F = obj.total(W, 0)
    alpha_prev, alpha = 0.0, 1.0
    trace = [obj.row(0, W, F, "init")]
    converged = False
    iteration = 0

    for iteration in range(1, cfg.max_iter + 1):
        W_bar = W + ((alpha_prev - 1.0) / alpha) * (W - W_prev)
        Z = obj.prox(W_bar, obj.gradient(W_bar, iteration), mu)
        F_Z = obj.total(Z, iteration)
        kind = "momentum"

        restarted = False
        if cfg.restart and F_Z > F:
            Z = obj.prox(W, obj.gradient(W, iteration), mu)
            F_Z = obj.total(Z, iteration)
            kind = "restart"
            restarted = True
            if F_Z > F:
                Z, F_Z, kind = W, F, "null"

        row = obj.row(iteration, Z, F_Z, kind)
        trace.append(row)
        logger.debug(f"apg_convex iter {iteration}: cost {F_Z:.6e} ({kind}, {row.nnz_groups} groups)")

        done = _stalled(F_Z, F, Z, W, cfg.tol)
        if restarted:
            alpha_prev, alpha = 0.0, 1.0
            W_prev = Z
        else:
            W_prev = W
        W, F = Z, F_Z
        alpha_prev, alpha = alpha, _next_alpha(alpha)
        if done:
            converged = True
            break

    if not converged:
        logger.info(f"apg_convex reached max_iter={cfg.max_iter} (cost {F:.6e})")
    return ApgResult(W=W, cost=F, iterations=iteration, converged=converged, trace=trace)


def _backtracked_prox(
    obj: _Objective,
    V: np.ndarray,
    grad: np.ndarray,
    F_V: float,
    mu: float,
    iteration: int,
) -> Tuple[np.ndarray, float, float, bool]:
    """Prox step from V, shrinking μ until the total cost does not exceed F(V)."""
    cfg = obj.cfg
    Z, F_Z = V, F_V
    for _ in range(cfg.max_backtracks + 1):
        Z = obj.prox(V, grad, mu)
        F_Z = obj.total(Z, iteration)
        if F_Z <= F_V:
            return Z, F_Z, mu, True
        mu *= cfg.backtrack_factor
    logger.debug(f"apg_nonconvex iter {iteration}: backtracking exhausted at step {mu:.3e}")
    return Z, F_Z, mu, False


def apg_nonconvex(
    loss: SmoothLoss,
    groups: GroupStructure,
    cfg: ApgConfig,
    W0: Optional[np.ndarray] = None,
) -> ApgResult:
    """
    Minimize a nonconvex f(W) + λ·g(W) with monitored accelerated proximal gradient.

    Args:
        loss: Smooth part; ``value_and_gradient`` is used at extrapolated points
        groups: Column partition of the penalty
        cfg: Engine settings (λ, μ̄₀, η, δ, backtracking)
        W0: Initial iterate (default: ``cfg.initial_iterate``)

    Returns:
        ApgResult whose total cost never exceeds the cost at W0

    Raises:
        NumericError: If a cost or gradient becomes non-finite
    """
    obj = _Objective(loss, groups, cfg)
    W = _initial(groups, cfg, W0)
    W_prev = W
    Z_cur = W
    F_W = obj.total(W, 0)

    monitor = MonitoredAverage(F_W, cfg.eta)
    alpha_prev, alpha = 0.0, 1.0
    step_bar = cfg.step_size_bar
    prev_bar: Optional[Tuple[np.ndarray, np.ndarray]] = None
    trace = [obj.row(0, W, F_W, "init")]
    converged = False
    iteration = 0

    for iteration in range(1, cfg.max_iter + 1):
        W_bar = (
            ((alpha - 1.0) / alpha) * W
            + (alpha_prev / alpha) * Z_cur
            - ((alpha_prev - 1.0) / alpha) * W_prev
        )
        f_bar, g_bar = loss.value_and_gradient(W_bar)
        ensure_finite(f_bar, "cost", iteration)
        ensure_finite(g_bar, "gradient", iteration)
        F_bar = f_bar + cfg.lam * group_penalty(W_bar, groups)

        if cfg.bb_step and prev_bar is not None:
            start = barzilai_borwein(W_bar - prev_bar[0], g_bar - prev_bar[1], step_bar / cfg.backtrack_factor)
        else:
            # Allow the step to grow back after earlier backtracking.
            start = min(cfg.step_size_bar, step_bar / cfg.backtrack_factor)
        prev_bar = (W_bar, g_bar)
        Z, F_Z, step_bar, _ = _backtracked_prox(obj, W_bar, g_bar, F_bar, start, iteration)

        if F_Z <= monitor.c - cfg.delta * float(np.sum((Z - W_bar) ** 2)):
            W_next, F_next, kind = Z, F_Z, "accepted"
        else:
            g_w = obj.gradient(W, iteration)
            V, F_V, _, ok = _backtracked_prox(obj, W, g_w, F_W, start, iteration)
            if not ok:
                V, F_V = W, F_W
            if F_Z <= F_V:
                W_next, F_next, kind = Z, F_Z, "fallback_z"
            else:
                W_next, F_next, kind = V, F_V, "fallback_v" if ok else "null"

        row = obj.row(iteration, W_next, F_next, kind)
        trace.append(row)
        logger.debug(
            f"apg_nonconvex iter {iteration}: cost {F_next:.6e} ({kind}, step {step_bar:.3e}, "
            f"{row.nnz_groups} groups)"
        )

        done = _stalled(F_next, F_W, W_next, W, cfg.tol)
        Z_cur = Z
        W_prev, W, F_W = W, W_next, F_next
        monitor.update(F_next)
        alpha_prev, alpha = alpha, _next_alpha(alpha)
        if done:
            converged = True
            break

    if not converged:
        logger.info(f"apg_nonconvex reached max_iter={cfg.max_iter} (cost {F_W:.6e})")
    return ApgResult(W=W, cost=F_W, iterations=iteration, converged=converged, trace=trace)
