"""Soft-constrained OPF: QP assembly, interior point solver and minimizer sensitivities."""

from opf_distill.opf.ipm import QpResult, solve_qp
from opf_distill.opf.qp import QpInstance, assemble_opf
from opf_distill.opf.sensitivity import (
    ActiveSet,
    SensitivitySet,
    active_set,
    jacobian_batch,
    minimizer_jacobian,
)
from opf_distill.opf.solver import (
    export_batch_csv,
    hard_opf_feasible,
    solutions_matrix,
    solve_opf,
    solve_opf_batch,
    solve_opf_hard,
)
from opf_distill.opf.spec import build_opf_spec

__all__ = [
    "ActiveSet",
    "QpInstance",
    "QpResult",
    "SensitivitySet",
    "active_set",
    "assemble_opf",
    "build_opf_spec",
    "export_batch_csv",
    "hard_opf_feasible",
    "jacobian_batch",
    "minimizer_jacobian",
    "solutions_matrix",
    "solve_opf",
    "solve_opf_batch",
    "solve_opf_hard",
    "solve_qp",
]
