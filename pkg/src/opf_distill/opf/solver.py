"""
OPF solve entry points.

Wraps QP assembly and the interior point method into OpfSolution objects, solves
batches of scenarios (optionally on a thread pool), solves the hard-constrained
variant, and exports batch results to CSV.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, TypeVar

import numpy as np
import pandas as pd
from scipy.optimize import linprog

from opf_distill.domain.models import OpfSolution, OpfSpec, SolverStatus
from opf_distill.exceptions import BatchSolveError, DistillError, ScenarioError, ShapeError
from opf_distill.opf.ipm import solve_qp
from opf_distill.opf.qp import assemble_opf
from opf_distill.serialization import write_csv_atomic

logger = logging.getLogger(__name__)

T = TypeVar("T")


def solve_opf(spec: OpfSpec, theta: np.ndarray) -> OpfSolution:
    """
    Solve the soft-constrained OPF for one data vector.

    Args:
        spec: OPF definition
        theta: Data vector θ (length P)

    Returns:
        OpfSolution; non-optimal statuses carry the last iterate

    Raises:
        ShapeError: If θ has the wrong length
    """
    qp = assemble_opf(spec, theta)
    res = solve_qp(qp.H, qp.c, qp.A, qp.b, spec.ipm)
    x = res.x.copy()
    x[-1] = max(x[-1], 0.0)
    return OpfSolution(
        qg=x[: spec.g],
        s=float(x[-1]),
        objective=qp.objective(x),
        duals=res.z,
        slacks=res.w,
        status=res.status,
        iterations=res.iterations,
        kkt_residual=res.residual,
    )


def hard_opf_feasible(spec: OpfSpec, theta: np.ndarray) -> bool:
    """Whether the voltage band can be met exactly within DER ratings (LP check)."""
    qp = assemble_opf(spec, theta)
    g, n = spec.g, spec.n
    A_v = qp.A[: 2 * n, :g]
    b_v = qp.b[: 2 * n]
    bounds = [(-q, q) for q in spec.qmax]
    if g == 0:
        return bool(np.all(b_v >= 0))
    res = linprog(np.zeros(g), A_ub=A_v, b_ub=b_v, bounds=bounds, method="highs")
    return res.status == 0


def solve_opf_hard(spec: OpfSpec, theta: np.ndarray) -> OpfSolution:
    """
    Solve the OPF with the voltage band enforced exactly (no slack).

    Infeasible instances return status ``infeasible`` without a solve. Multipliers
    and slacks keep the soft-problem row layout; the s ≥ 0 row reports zeros.
    """
    qp = assemble_opf(spec, theta)
    g, n = spec.g, spec.n
    rows = 2 * n + 2 * g
    if not hard_opf_feasible(spec, theta):
        return OpfSolution(
            qg=np.zeros(g),
            s=0.0,
            objective=float("inf"),
            duals=np.zeros(rows + 1),
            slacks=np.zeros(rows + 1),
            status=SolverStatus.INFEASIBLE,
        )

    res = solve_qp(qp.H[:g, :g], qp.c[:g], qp.A[:rows, :g], qp.b[:rows], spec.ipm)
    x = np.append(res.x, 0.0)
    return OpfSolution(
        qg=res.x,
        s=0.0,
        objective=qp.objective(x),
        duals=np.append(res.z, 0.0),
        slacks=np.append(res.w, 0.0),
        status=res.status,
        iterations=res.iterations,
        kkt_residual=res.residual,
    )


def run_batch(func: Callable[[int], T], count: int, jobs: int = 1) -> List[T]:
    """
    Apply ``func`` to scenario indices 0..count-1, preserving order.

    DistillError failures are collected per scenario; the remaining scenarios
    still run and a BatchSolveError is raised at the end.
    """
    def guarded(t: int) -> Any:
        try:
            return func(t)
        except DistillError as e:
            return ScenarioError(t, e)

    if jobs > 1 and count > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(guarded, range(count)))
    else:
        results = [guarded(t) for t in range(count)]

    failures: Dict[int, DistillError] = {
        t: r for t, r in enumerate(results) if isinstance(r, ScenarioError)
    }
    if failures:
        partial = [None if isinstance(r, ScenarioError) else r for r in results]
        raise BatchSolveError(failures, partial)
    return results


def _columns(thetas: Any, p: int) -> np.ndarray:
    data = thetas.raw_theta() if hasattr(thetas, "raw_theta") else thetas
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or (data.size and data.shape[0] != p):
        raise ShapeError(f"scenario matrix must be {p}×T, got {data.shape}")
    return data


def solve_opf_batch(spec: OpfSpec, thetas: Any, jobs: int = 1) -> List[OpfSolution]:
    """
    Solve the OPF for every column of a scenario matrix.

    Args:
        spec: OPF definition
        thetas: P×T array, or a ScenarioSet (solved on its raw data)
        jobs: Worker threads

    Returns:
        Solutions in column order

    Raises:
        BatchSolveError: If any scenario failed (after all were attempted)
    """
    data = _columns(thetas, spec.p)
    if data.size == 0:
        return []
    solutions = run_batch(lambda t: solve_opf(spec, data[:, t]), data.shape[1], jobs)
    bad = sum(1 for s in solutions if not s.is_optimal)
    if bad:
        logger.warning(f"{bad} of {len(solutions)} OPF solves are not optimal")
    return solutions


def solutions_matrix(solutions: Sequence[OpfSolution]) -> np.ndarray:
    """Stack minimizers as a (G+1)×T matrix."""
    if not solutions:
        return np.zeros((0, 0))
    return np.column_stack([s.x for s in solutions])


def export_batch_csv(solutions: Sequence[OpfSolution], path: Path, labels: Optional[Sequence[Any]] = None) -> None:
    """Write batch results as scenario,qg_1..qg_G,s,objective,status."""
    g = solutions[0].qg.size if solutions else 0
    records = []
    for t, sol in enumerate(solutions):
        row: Dict[str, Any] = {"scenario": labels[t] if labels is not None else t}
        for j in range(g):
            row[f"qg_{j + 1}"] = repr(float(sol.qg[j]))
        row["s"] = repr(float(sol.s))
        row["objective"] = repr(float(sol.objective))
        row["status"] = sol.status.value
        records.append(row)
    columns = ["scenario"] + [f"qg_{j + 1}" for j in range(g)] + ["s", "objective", "status"]
    write_csv_atomic(pd.DataFrame(records, columns=columns), Path(path))
