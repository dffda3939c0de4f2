"""
Data-fidelity distillation.

All methods reconstruct the normalized data Θ (P×T) as WΘ with W = C·Sᵀ and are
scored by

    f1(W) = (1/2T)‖Θ − WΘ‖²_F = ½ tr((I − W) Cθ (I − W)ᵀ),   Cθ = ΘΘᵀ/T.

- PCA: W = U_K U_Kᵀ from the top-K eigenvectors (no selection, benchmark)
- DEIM: greedy interpolation indices on U_K with C = U_K (SᵀU_K)⁻¹
- GL: group lasso min f1(W) + λg(W) by accelerated proximal gradient
- GL2: GL support, then the least-squares reconstruction C = CθS(SᵀCθS)⁻¹
"""

import logging
from typing import Any, Callable, List, Optional, Tuple

import numpy as np
import scipy.linalg
from pydantic import BaseModel, ConfigDict

from opf_distill.domain.models import ApgConfig, DistillationMap, Method
from opf_distill.errors import translate_numeric_errors
from opf_distill.exceptions import ArgumentError, RankError, StateError
from opf_distill.proxalg import GroupStructure, SmoothLoss, TraceRow, apg_convex

logger = logging.getLogger(__name__)

MAX_CONDITION = 1e12


class CovarianceBundle(BaseModel):
    """
    Data covariance Cθ = ΘΘᵀ/T with its eigendecomposition.

    Eigenvalues are sorted descending; every eigenvector has its largest-magnitude
    entry positive so decompositions are reproducible.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    cov: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    t: int

    @property
    def p(self) -> int:
        return int(self.cov.shape[0])

    @property
    def lipschitz(self) -> float:
        return float(max(self.eigenvalues[0], 0.0)) if self.p else 0.0


def as_matrix(data: Any) -> np.ndarray:
    """Θ from an array or from any object with a ``theta`` attribute."""
    theta = getattr(data, "theta", data)
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 2:
        raise ArgumentError(f"scenario data must be a P×T matrix, got shape {theta.shape}")
    return theta


@translate_numeric_errors
def covariance(data: Any) -> CovarianceBundle:
    """
    Covariance of a normalized scenario matrix.

    Args:
        data: ScenarioSet or P×T array

    Raises:
        ArgumentError: If there are no scenarios
    """
    theta = as_matrix(data)
    t = theta.shape[1]
    if t == 0:
        raise ArgumentError("covariance needs at least one scenario")
    cov = theta @ theta.T / t
    cov = 0.5 * (cov + cov.T)
    values, vectors = scipy.linalg.eigh(cov)
    values = values[::-1].copy()
    vectors = vectors[:, ::-1].copy()
    signs = np.sign(vectors[np.argmax(np.abs(vectors), axis=0), np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return CovarianceBundle(cov=cov, eigenvalues=values, eigenvectors=vectors * signs, t=t)


def _bundle(data: Any) -> CovarianceBundle:
    return data if isinstance(data, CovarianceBundle) else covariance(data)


def _check_k(k: int, p: int) -> None:
    if not 1 <= k <= p:
        raise ArgumentError(f"K must lie in 1..{p}, got {k}")


def data_fit_cost(W: np.ndarray, cov: CovarianceBundle) -> float:
    """f1(W) = ½ tr((I − W) Cθ (I − W)ᵀ)."""
    E = np.eye(cov.p) - W
    return float(0.5 * np.sum((E @ cov.cov) * E))


class DataFitLoss(SmoothLoss):
    """f1 with gradient (W − I)Cθ and Lipschitz constant λmax(Cθ)."""

    def __init__(self, cov: CovarianceBundle) -> None:
        self.cov = cov

    def value(self, W: np.ndarray) -> float:
        return data_fit_cost(W, self.cov)

    def gradient(self, W: np.ndarray) -> np.ndarray:
        return (W - np.eye(self.cov.p)) @ self.cov.cov

    @property
    def lipschitz(self) -> Optional[float]:
        return self.cov.lipschitz


def fit_pca(data: Any, k: int) -> DistillationMap:
    """
    Best rank-K reconstruction W = U_K U_Kᵀ.

    Raises:
        ArgumentError: If K is not in 1..P
    """
    cov = _bundle(data)
    _check_k(k, cov.p)
    U = cov.eigenvectors[:, :k]
    return DistillationMap(method=Method.PCA, k=k, c_matrix=U @ U.T, p=cov.p)


def deim_indices(U: np.ndarray) -> List[int]:
    """
    Greedy interpolation indices for the columns of U, in selection order.

    Each step picks the largest entry of the residual of the next basis vector
    after interpolating it on the indices chosen so far.
    """
    selected = [int(np.argmax(np.abs(U[:, 0])))]
    for j in range(1, U.shape[1]):
        basis = U[:, :j]
        coeffs = scipy.linalg.solve(basis[selected], U[selected, j])
        residual = U[:, j] - basis @ coeffs
        selected.append(int(np.argmax(np.abs(residual))))
    return selected


@translate_numeric_errors
def fit_deim(data: Any, k: int) -> DistillationMap:
    """
    DEIM selection with the interpolating reconstruction C = U_K (SᵀU_K)⁻¹.

    Raises:
        ArgumentError: If K is not in 1..P
        RankError: If SᵀU_K is numerically singular
    """
    cov = _bundle(data)
    _check_k(k, cov.p)
    U = cov.eigenvectors[:, :k]
    order = deim_indices(U)
    if len(set(order)) < k:
        raise RankError("DEIM selected a repeated index; the spectrum is degenerate")
    selected = sorted(order)
    block = U[selected]
    if np.linalg.cond(block) > MAX_CONDITION:
        raise RankError("SᵀU_K is numerically singular")
    C = scipy.linalg.solve(block.T, U.T).T
    C[selected, :] = np.eye(k)
    return DistillationMap(method=Method.DEIM, k=k, selected_indices=selected, c_matrix=C, p=cov.p)


def lambda1_max(cov: CovarianceBundle, groups: GroupStructure) -> float:
    """Smallest λ for which W = 0 minimizes f1 + λg: the largest group norm of Cθ."""
    if cov.p == 0:
        return 0.0
    return float(np.max(groups.norms(cov.cov)))


def config_with_lambda(cfg: Optional[ApgConfig], lam: float) -> ApgConfig:
    if lam < 0:
        raise ArgumentError(f"λ must be nonnegative, got {lam}")
    return (cfg or ApgConfig()).model_copy(update={"lam": float(lam)})


def support_map(
    method: Method,
    W: np.ndarray,
    lam: float,
    groups: GroupStructure,
    threshold: float,
) -> DistillationMap:
    support = groups.support(W, threshold)
    return DistillationMap.from_w(method, W, support, lam=lam, groups_mode=groups.mode)


def fit_gl(
    data: Any,
    lam: float,
    groups: GroupStructure,
    cfg: Optional[ApgConfig] = None,
    W0: Optional[np.ndarray] = None,
    trace: Optional[List[TraceRow]] = None,
) -> DistillationMap:
    """
    Group lasso fit of the data-fidelity cost.

    Args:
        data: Normalized ScenarioSet, P×T array or CovarianceBundle
        lam: Penalty weight λ ≥ 0
        groups: Column partition
        cfg: Engine settings (λ is overridden)
        W0: Initial iterate
        trace: Receives the iteration trace when given

    Returns:
        Map whose support is the groups with norm above ``cfg.zero_threshold``
    """
    cov = _bundle(data)
    cfg = config_with_lambda(cfg, lam)
    result = apg_convex(DataFitLoss(cov), groups, cfg, W0)
    if trace is not None:
        trace.extend(result.trace)
    dist_map = support_map(Method.GL, result.W, lam, groups, cfg.zero_threshold)
    logger.info(f"GL λ={lam:.4g}: {dist_map.k} features after {result.iterations} iterations")
    return dist_map


@translate_numeric_errors
def least_squares_map(cov: CovarianceBundle, selected: List[int]) -> np.ndarray:
    """
    Optimal reconstruction for a fixed selection: C = CθS(SᵀCθS)⁻¹.

    Raises:
        RankError: If the selected features are collinear
    """
    block = cov.cov[np.ix_(selected, selected)]
    if not selected or np.linalg.cond(block) > MAX_CONDITION:
        raise RankError(f"SᵀCθS is singular for selection {list(selected)}")
    return scipy.linalg.solve(block, cov.cov[selected, :], assume_a="pos").T


def fit_gl2(
    data: Any,
    lam: float,
    groups: GroupStructure,
    cfg: Optional[ApgConfig] = None,
    W0: Optional[np.ndarray] = None,
    trace: Optional[List[TraceRow]] = None,
) -> DistillationMap:
    """
    Two-stage group lasso: GL selection, then least-squares reconstruction.

    Raises:
        StateError: If the GL stage selects nothing
        RankError: If the selected features are collinear
    """
    cov = _bundle(data)
    stage1 = fit_gl(cov, lam, groups, cfg, W0, trace)
    return refit_gl2(cov, stage1)


def refit_gl2(cov: CovarianceBundle, stage1: DistillationMap) -> DistillationMap:
    """Least-squares refit of a selection map."""
    if not stage1.selected_indices:
        raise StateError(f"GL selected no features at λ={stage1.lam}")
    C = least_squares_map(cov, stage1.selected_indices)
    return stage1.model_copy(update={"method": Method.GL2, "c_matrix": C})


class BisectionResult(BaseModel):
    """λ found by bisection and the map it produced."""

    model_config = ConfigDict(frozen=True)

    lam: float
    dist_map: DistillationMap
    exact: bool
    rounds: int


def bisect_lambda_for_k(
    fitter: Callable[[float], DistillationMap],
    k_target: int,
    lam_hi: float,
    p: int,
    max_rounds: int = 30,
) -> BisectionResult:
    """
    Find λ in [0, lam_hi] whose fit keeps exactly k_target features.

    Treats the selected count as nonincreasing in λ. When no λ hits the target,
    the fit with the closest count is returned with ``exact=False`` (ties favour
    the larger count, so the target is covered).

    Raises:
        ArgumentError: If k_target is not in 1..p
    """
    if not 1 <= k_target <= p:
        raise ArgumentError(f"K target must lie in 1..{p}, got {k_target}")

    lo, hi = 0.0, float(lam_hi)
    best: Optional[Tuple[int, int, float, DistillationMap]] = None
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        lam = 0.5 * (lo + hi)
        dist_map = fitter(lam)
        k = dist_map.k
        logger.debug(f"bisection round {rounds}: λ={lam:.6g} → K={k}")
        key = (abs(k - k_target), -k)
        if best is None or key < best[:2]:
            best = (key[0], key[1], lam, dist_map)
        if k == k_target:
            break
        if k > k_target:
            lo = lam
        else:
            hi = lam

    assert best is not None
    exact = best[3].k == k_target
    if not exact:
        logger.warning(f"No λ gives exactly K={k_target}; closest K={best[3].k} at λ={best[2]:.6g}")
    final = best[3] if exact else best[3].model_copy(update={"exact_k": False})
    return BisectionResult(lam=best[2], dist_map=final, exact=exact, rounds=rounds)
