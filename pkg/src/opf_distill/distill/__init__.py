"""Distillation methods: data fidelity (PCA, DEIM, GL, GL2) and decision fidelity (BGL, BGL2)."""

from opf_distill.distill.base import (
    Distiller,
    LassoDistiller,
    SpectralDistiller,
    create_distiller,
    feature_groups,
)
from opf_distill.distill.summary import SelectionSummary, selection_summary
from opf_distill.distill.type1 import (
    BisectionResult,
    CovarianceBundle,
    bisect_lambda_for_k,
    covariance,
    data_fit_cost,
    fit_deim,
    fit_gl,
    fit_gl2,
    fit_pca,
    lambda1_max,
    least_squares_map,
)
from opf_distill.distill.type2 import (
    Lambda2Result,
    OpfDataset,
    OpfFitLoss,
    f2_cost,
    fit_bgl,
    fit_bgl2,
    grad_f2,
    lambda2_max,
    refit_bgl2,
)

__all__ = [
    "BisectionResult",
    "CovarianceBundle",
    "Distiller",
    "LassoDistiller",
    "Lambda2Result",
    "OpfDataset",
    "OpfFitLoss",
    "SelectionSummary",
    "SpectralDistiller",
    "bisect_lambda_for_k",
    "covariance",
    "create_distiller",
    "data_fit_cost",
    "f2_cost",
    "feature_groups",
    "fit_bgl",
    "fit_bgl2",
    "fit_deim",
    "fit_gl",
    "fit_gl2",
    "fit_pca",
    "grad_f2",
    "lambda1_max",
    "lambda2_max",
    "least_squares_map",
    "refit_bgl2",
    "selection_summary",
]
