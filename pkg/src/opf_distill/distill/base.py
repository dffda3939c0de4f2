"""
Distiller classes.

Every distillation method sits behind the Distiller interface so the services
and the CLI can fit any of them the same way. Spectral methods (PCA, DEIM) take
a target K; lasso methods (GL, GL2, BGL, BGL2) take either λ or a target K, in
which case λ is found by bisection below the method's zero threshold.
"""

import logging
from abc import ABC, abstractmethod
from typing import Any, ClassVar, Dict, List, Optional

import numpy as np

from opf_distill.distill.type1 import (
    CovarianceBundle,
    bisect_lambda_for_k,
    covariance,
    fit_deim,
    fit_gl,
    fit_pca,
    lambda1_max,
    refit_gl2,
)
from opf_distill.distill.type2 import (
    OpfDataset,
    OpfFitLoss,
    feature_buses,
    fit_bgl,
    lambda2_max,
    refit_bgl2,
)
from opf_distill.domain.models import ApgConfig, DistillationMap, GroupMode, Method
from opf_distill.exceptions import ArgumentError
from opf_distill.proxalg import GroupStructure, TraceRow

logger = logging.getLogger(__name__)

DEFAULT_BISECT_ROUNDS = 30


def feature_groups(data: Any, mode: GroupMode) -> GroupStructure:
    """
    Column partition of the map for a dataset.

    Args:
        data: ScenarioSet, OpfDataset or P×T array
        mode: Per-column or per-bus grouping

    Raises:
        ArgumentError: If per-bus grouping is requested for data without feature metadata
    """
    theta = getattr(data, "theta", data)
    p = int(np.shape(theta)[0])
    if mode == GroupMode.COLUMN:
        return GroupStructure.per_column(p)
    if isinstance(data, OpfDataset):
        return GroupStructure.per_bus(feature_buses(data))
    features = getattr(data, "features", None)
    if not features:
        raise ArgumentError("per-bus groups need feature metadata")
    return GroupStructure.per_bus([f.bus for f in features])


class Distiller(ABC):
    """
    Abstract base class for distillation methods.

    Args:
        config: Proximal gradient settings (lasso methods only)
        groups_mode: Column grouping of the penalty
        jobs: Worker threads for OPF batches (bilevel methods only)
        bisect_rounds: Bisection budget when fitting to a K target
    """

    method: ClassVar[Method]
    requires_opf: ClassVar[bool] = False

    def __init__(
        self,
        config: Optional[ApgConfig] = None,
        groups_mode: GroupMode = GroupMode.COLUMN,
        jobs: int = 1,
        bisect_rounds: int = DEFAULT_BISECT_ROUNDS,
    ) -> None:
        self.config = config or ApgConfig()
        self.groups_mode = groups_mode
        self.jobs = jobs
        self.bisect_rounds = bisect_rounds
        self.trace: List[TraceRow] = []

    @abstractmethod
    def fit(
        self,
        data: Any,
        k: Optional[int] = None,
        lam: Optional[float] = None,
        W0: Optional[np.ndarray] = None,
    ) -> DistillationMap:
        """
        Fit a distillation map.

        Args:
            data: Normalized scenarios (an OpfDataset for bilevel methods)
            k: Target number of selected features
            lam: Penalty weight λ
            W0: Initial iterate for iterative methods

        Returns:
            The fitted map; ``self.trace`` holds the iteration trace of the fit
        """


class SpectralDistiller(Distiller):
    """Methods driven by the eigendecomposition of Cθ; they take K only."""

    def fit(
        self,
        data: Any,
        k: Optional[int] = None,
        lam: Optional[float] = None,
        W0: Optional[np.ndarray] = None,
    ) -> DistillationMap:
        if lam is not None:
            raise ArgumentError(f"{self.method.value} is fitted with K, not λ")
        if k is None:
            raise ArgumentError(f"{self.method.value} needs a target K")
        self.trace = []
        dist_map = self._fit_k(covariance(data), k)
        logger.info(f"{self.method.value.upper()} K={k} fitted")
        return dist_map

    @abstractmethod
    def _fit_k(self, cov: CovarianceBundle, k: int) -> DistillationMap:
        pass


class PcaDistiller(SpectralDistiller):
    method = Method.PCA

    def _fit_k(self, cov: CovarianceBundle, k: int) -> DistillationMap:
        return fit_pca(cov, k)


class DeimDistiller(SpectralDistiller):
    method = Method.DEIM

    def _fit_k(self, cov: CovarianceBundle, k: int) -> DistillationMap:
        return fit_deim(cov, k)


class LassoDistiller(Distiller):
    """
    Group-lasso methods.

    Subclasses supply the prepared problem (covariance or OPF loss), the zero
    threshold λ̄ and the selection stage; two-stage methods also override
    ``refit``.
    """

    @abstractmethod
    def prepare(self, data: Any) -> Any:
        """Problem object shared by all fits on the same data."""

    @abstractmethod
    def threshold(self, problem: Any, groups: GroupStructure) -> float:
        """λ above which the selection stage returns the zero map."""

    @abstractmethod
    def select(
        self,
        problem: Any,
        lam: float,
        groups: GroupStructure,
        W0: Optional[np.ndarray],
        trace: List[TraceRow],
    ) -> DistillationMap:
        """Penalized fit at a fixed λ."""

    def refit(self, problem: Any, stage1: DistillationMap) -> DistillationMap:
        return stage1

    def fit(
        self,
        data: Any,
        k: Optional[int] = None,
        lam: Optional[float] = None,
        W0: Optional[np.ndarray] = None,
    ) -> DistillationMap:
        if (k is None) == (lam is None):
            raise ArgumentError(f"{self.method.value} needs exactly one of K and λ")
        groups = feature_groups(data, self.groups_mode)
        problem = self.prepare(data)

        if lam is not None:
            trace: List[TraceRow] = []
            stage1 = self.select(problem, lam, groups, W0, trace)
            self.trace = trace
            return self.refit(problem, stage1)

        assert k is not None
        lam_hi = self.threshold(problem, groups)
        logger.info(f"{self.method.value.upper()}: searching λ in [0, {lam_hi:.4g}] for K={k}")
        traces: Dict[float, List[TraceRow]] = {}

        def fitter(value: float) -> DistillationMap:
            rows: List[TraceRow] = []
            dist_map = self.select(problem, value, groups, W0, rows)
            traces[value] = rows
            return dist_map

        result = bisect_lambda_for_k(fitter, k, lam_hi, groups.p, self.bisect_rounds)
        self.trace = traces[result.lam]
        return self.refit(problem, result.dist_map)


class GlDistiller(LassoDistiller):
    method = Method.GL

    def prepare(self, data: Any) -> CovarianceBundle:
        return covariance(data)

    def threshold(self, problem: Any, groups: GroupStructure) -> float:
        return lambda1_max(problem, groups)

    def select(
        self,
        problem: Any,
        lam: float,
        groups: GroupStructure,
        W0: Optional[np.ndarray],
        trace: List[TraceRow],
    ) -> DistillationMap:
        return fit_gl(problem, lam, groups, self.config, W0, trace)


class Gl2Distiller(GlDistiller):
    method = Method.GL2

    def refit(self, problem: Any, stage1: DistillationMap) -> DistillationMap:
        return refit_gl2(problem, stage1)


class BglDistiller(LassoDistiller):
    method = Method.BGL
    requires_opf = True

    def prepare(self, data: Any) -> OpfFitLoss:
        if not isinstance(data, OpfDataset):
            raise ArgumentError(f"{self.method.value} needs an OpfDataset with reference minimizers")
        return OpfFitLoss(data, self.jobs)

    def threshold(self, problem: Any, groups: GroupStructure) -> float:
        result = lambda2_max(problem.data, groups)
        return result.value

    def select(
        self,
        problem: Any,
        lam: float,
        groups: GroupStructure,
        W0: Optional[np.ndarray],
        trace: List[TraceRow],
    ) -> DistillationMap:
        return fit_bgl(problem.data, lam, groups, self.config, W0, self.jobs, trace, problem)


class Bgl2Distiller(BglDistiller):
    method = Method.BGL2

    def refit(self, problem: Any, stage1: DistillationMap) -> DistillationMap:
        return refit_bgl2(problem.data, stage1, self.config.step_size_bar, self.jobs, problem)


def create_distiller(method: Method | str, **options: Any) -> Distiller:
    """
    Factory for distillers.

    Args:
        method: Method tag or its name
        **options: Forwarded to the Distiller constructor

    Raises:
        ArgumentError: On an unknown method name
    """
    try:
        method = Method(method)
    except ValueError as e:
        raise ArgumentError(f"unknown method {method!r}") from e

    if method == Method.PCA:
        return PcaDistiller(**options)
    elif method == Method.DEIM:
        return DeimDistiller(**options)
    elif method == Method.GL:
        return GlDistiller(**options)
    elif method == Method.GL2:
        return Gl2Distiller(**options)
    elif method == Method.BGL:
        return BglDistiller(**options)
    elif method == Method.BGL2:
        return Bgl2Distiller(**options)
    else:
        raise ArgumentError(f"unknown method {method!r}")
