"""
Decision-fidelity distillation.

The map is scored by how well OPF decisions on reconstructed data match the
reference decisions:

    f2(W) = (1/2T) Σ_t ‖x_t − x̂_t‖²,   x̂_t = x(σ ⊙ (W θ̃_t) + m)

where θ̃ is normalized data and (m, σ) its statistics, so the OPF always sees
data in original units. Its gradient follows from the minimizer Jacobians J_t:

    ∇f2(W) = (1/T) Dσ Σ_t J_tᵀ (x̂_t − x_t) θ̃_tᵀ

- BGL: min f2(W) + λg(W) by the monitored (nonconvex) proximal gradient engine
- BGL2: BGL support, then f2 minimized over C alone by gradient descent
"""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from opf_distill.cache import IterateCache
from opf_distill.distill.type1 import config_with_lambda, covariance, least_squares_map, support_map
from opf_distill.domain.models import (
    ApgConfig,
    DistillationMap,
    FeatureInfo,
    Method,
    OpfSolution,
    OpfSpec,
)
from opf_distill.errors import ensure_finite
from opf_distill.exceptions import NumericError, RankError, ScenarioError, ShapeError, StateError
from opf_distill.opf import jacobian_batch, minimizer_jacobian, solutions_matrix, solve_opf, solve_opf_batch
from opf_distill.proxalg import GroupStructure, SmoothLoss, TraceRow, apg_nonconvex, barzilai_borwein

logger = logging.getLogger(__name__)

STAGE2_MAX_ITER = 200
STAGE2_TOL = 1e-6
STAGE2_MAX_BACKTRACKS = 60


class OpfDataset(BaseModel):
    """
    Normalized scenarios with their reference OPF minimizers.

    Attributes:
        theta: Normalized data θ̃ (P×T)
        mean: Per-feature mean m
        scale: Per-feature scale σ
        x_ref: Reference minimizers [q^g; s] on the true data ((G+1)×T)
        spec: OPF definition the minimizers belong to
        features: Identity of every row (for per-bus groups and reports)
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    theta: np.ndarray
    mean: np.ndarray
    scale: np.ndarray
    x_ref: np.ndarray
    spec: OpfSpec
    features: List[FeatureInfo] = []

    @property
    def p(self) -> int:
        return int(self.theta.shape[0])

    @property
    def t(self) -> int:
        return int(self.theta.shape[1])

    def raw_theta(self) -> np.ndarray:
        """True data in original units."""
        return self.denormalize(self.theta)

    def denormalize(self, theta: np.ndarray) -> np.ndarray:
        return theta * self.scale[:, None] + self.mean[:, None]

    def reconstruct(self, W: np.ndarray) -> np.ndarray:
        """Reconstructed data σ ⊙ (Wθ̃) + m in original units."""
        if W.shape != (self.p, self.p):
            raise ShapeError(f"map must be {self.p}×{self.p}, got {W.shape}")
        return self.denormalize(W @ self.theta)


class _BatchEntry(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    theta_hat: np.ndarray
    solutions: List[OpfSolution]
    x_hat: np.ndarray
    gradient: Optional[np.ndarray] = None


class OpfFitLoss(SmoothLoss):
    """
    f2 and its gradient, with OPF batches cached per iterate.

    Args:
        data: Dataset with reference minimizers
        jobs: Worker threads for OPF and Jacobian batches
        cache: Shared iterate cache (a private one is created when omitted)

    Raises:
        ScenarioError: Naming the first scenario whose OPF on the reconstruction
            is not solved to optimality
    """

    def __init__(
        self,
        data: OpfDataset,
        jobs: int = 1,
        cache: Optional[IterateCache[_BatchEntry]] = None,
    ) -> None:
        self.data = data
        self.jobs = jobs
        self.cache: IterateCache[_BatchEntry] = cache if cache is not None else IterateCache()

    def _entry(self, W: np.ndarray) -> _BatchEntry:
        entry = self.cache.get(W)
        if entry is None:
            theta_hat = self.data.reconstruct(W)
            solutions = solve_opf_batch(self.data.spec, theta_hat, self.jobs)
            for t, sol in enumerate(solutions):
                if not sol.is_optimal:
                    failure = NumericError(f"OPF on the reconstruction ended with status {sol.status.value}")
                    raise ScenarioError(t, failure)
            entry = _BatchEntry(theta_hat=theta_hat, solutions=solutions, x_hat=solutions_matrix(solutions))
            self.cache.put(W, entry)
        return entry

    def minimizers(self, W: np.ndarray) -> np.ndarray:
        """Decisions x̂ on the reconstruction WΘ, (G+1)×T."""
        return self._entry(W).x_hat

    def value(self, W: np.ndarray) -> float:
        entry = self._entry(W)
        residual = entry.x_hat - self.data.x_ref
        return float(0.5 * np.sum(residual**2) / self.data.t)

    def gradient(self, W: np.ndarray) -> np.ndarray:
        entry = self._entry(W)
        if entry.gradient is None:
            sens = jacobian_batch(self.data.spec, entry.solutions, entry.theta_hat, self.jobs)
            degenerate = sum(1 for s in sens if s.degenerate)
            if degenerate:
                logger.debug(f"{degenerate} of {len(sens)} scenarios have a degenerate active set")
            residual = entry.x_hat - self.data.x_ref
            # column t of back holds J_tᵀ r_t
            back = np.column_stack([s.jacobian.T @ residual[:, t] for t, s in enumerate(sens)])
            entry.gradient = self.data.scale[:, None] * (back @ self.data.theta.T) / self.data.t
            ensure_finite(entry.gradient, "f2 gradient")
        return entry.gradient

    def value_and_gradient(self, W: np.ndarray) -> Tuple[float, np.ndarray]:
        return self.value(W), self.gradient(W)


def f2_cost(W: np.ndarray, data: OpfDataset, jobs: int = 1) -> float:
    """Decision-fidelity cost of a map."""
    return OpfFitLoss(data, jobs).value(np.asarray(W, dtype=float))


def grad_f2(W: np.ndarray, data: OpfDataset, jobs: int = 1) -> np.ndarray:
    """Gradient of f2 with respect to W."""
    return OpfFitLoss(data, jobs).gradient(np.asarray(W, dtype=float))


class Lambda2Result(BaseModel):
    """Threshold above which W = 0 is a critical point of f2 + λg."""

    model_config = ConfigDict(frozen=True)

    value: float
    degenerate: bool


def lambda2_max(data: OpfDataset, groups: GroupStructure) -> Lambda2Result:
    """
    Largest group norm of ∇f2(0).

    At W = 0 every scenario reconstructs to the mean θ₀ = m, so a single solve
    and a single Jacobian suffice. A degenerate active set at θ₀ is reported
    but the value is still returned.
    """
    theta0 = data.mean
    sol = solve_opf(data.spec, theta0)
    sens = minimizer_jacobian(data.spec, sol, theta0)
    if sens.degenerate:
        logger.warning("OPF at the mean data point is degenerate; λ̄₂ uses the a.e. Jacobian")
    residual = sol.x[:, None] - data.x_ref
    K = data.scale[:, None] * (sens.jacobian.T @ residual @ data.theta.T) / data.t
    return Lambda2Result(value=float(np.max(groups.norms(K))) if data.p else 0.0, degenerate=sens.degenerate)


def fit_bgl(
    data: OpfDataset,
    lam: float,
    groups: GroupStructure,
    cfg: Optional[ApgConfig] = None,
    W0: Optional[np.ndarray] = None,
    jobs: int = 1,
    trace: Optional[List[TraceRow]] = None,
    loss: Optional[OpfFitLoss] = None,
) -> DistillationMap:
    """
    Bilevel group lasso fit.

    Args:
        data: Dataset with reference minimizers
        lam: Penalty weight λ ≥ 0
        groups: Column partition
        cfg: Engine settings (λ is overridden)
        W0: Initial iterate
        jobs: Worker threads for OPF batches
        trace: Receives the iteration trace when given
        loss: Loss object to reuse (shares its cache)

    Returns:
        Map whose support is the groups with norm above ``cfg.zero_threshold``
    """
    cfg = config_with_lambda(cfg, lam)
    loss = loss or OpfFitLoss(data, jobs)
    result = apg_nonconvex(loss, groups, cfg, W0)
    if trace is not None:
        trace.extend(result.trace)
    dist_map = support_map(Method.BGL, result.W, lam, groups, cfg.zero_threshold)
    logger.info(f"BGL λ={lam:.4g}: {dist_map.k} features after {result.iterations} iterations")
    return dist_map


def refit_bgl2(
    data: OpfDataset,
    stage1: DistillationMap,
    step_size: float = 1.0,
    jobs: int = 1,
    loss: Optional[OpfFitLoss] = None,
    max_iter: int = STAGE2_MAX_ITER,
    tol: float = STAGE2_TOL,
) -> DistillationMap:
    """
    Minimize f2 over C for the fixed selection of a stage-one map.

    Starts from the better of the stage-one C and the least-squares C of the
    same selection, then takes gradient steps on the selected columns. Each line
    search starts from a Barzilai-Borwein estimate and halves the step until the
    cost does not increase.

    Raises:
        StateError: If the stage-one map selects nothing
    """
    selected = stage1.selected_indices
    if not selected:
        raise StateError(f"BGL selected no features at λ={stage1.lam}")
    loss = loss or OpfFitLoss(data, jobs)

    def embed(C: np.ndarray) -> np.ndarray:
        W = np.zeros((data.p, data.p))
        W[:, selected] = C
        return W

    candidates = [stage1.c_matrix]
    try:
        candidates.append(least_squares_map(covariance(data.theta), selected))
    except RankError as e:
        logger.debug(f"Least-squares warm start unavailable: {e.message}")
    costs = [loss.value(embed(C)) for C in candidates]
    best = int(np.argmin(costs))
    C, cost = candidates[best], costs[best]

    step = step_size
    previous: Optional[Tuple[np.ndarray, np.ndarray]] = None
    for iteration in range(1, max_iter + 1):
        grad = loss.gradient(embed(C))[:, selected]
        if previous is not None:
            step = barzilai_borwein(C - previous[0], grad - previous[1], 2.0 * step)
        previous = (C, grad)
        for _ in range(STAGE2_MAX_BACKTRACKS + 1):
            trial = C - step * grad
            trial_cost = loss.value(embed(trial))
            if trial_cost <= cost:
                break
            step *= 0.5
        else:
            logger.debug(f"BGL2 stage 2 iter {iteration}: no descent step found")
            break
        change = abs(cost - trial_cost) / max(abs(cost), np.finfo(float).tiny)
        C, cost = trial, trial_cost
        logger.debug(f"BGL2 stage 2 iter {iteration}: f2 {cost:.6e} (step {step:.3e})")
        if change <= tol:
            break

    return stage1.model_copy(update={"method": Method.BGL2, "c_matrix": C})


def fit_bgl2(
    data: OpfDataset,
    lam: float,
    groups: GroupStructure,
    cfg: Optional[ApgConfig] = None,
    W0: Optional[np.ndarray] = None,
    jobs: int = 1,
    trace: Optional[List[TraceRow]] = None,
) -> DistillationMap:
    """Two-stage bilevel group lasso: BGL selection, then f2 refit of C."""
    cfg = config_with_lambda(cfg, lam)
    loss = OpfFitLoss(data, jobs)
    stage1 = fit_bgl(data, lam, groups, cfg, W0, jobs, trace, loss)
    return refit_bgl2(data, stage1, cfg.step_size_bar, jobs, loss)


def feature_buses(data: OpfDataset) -> Sequence[int]:
    """Bus of every feature, falling back to the OPF index layout."""
    if data.features:
        return [f.bus for f in data.features]
    n = data.spec.n
    return [int(i % n) + 1 for i in data.spec.feature_index]
