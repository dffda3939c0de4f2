"""
Exact AC power flow for radial feeders.

Backward/forward sweep over the branch-flow (DistFlow) equations. For the line
feeding bus j from its parent i, with sending-end flows P, Q, squared current ℓ
and squared voltage magnitudes V:

    P_j = -p_j + Σ_{k child of j} P_k + r_j·ℓ_j
    Q_j = -q_j + Σ_{k child of j} Q_k + x_j·ℓ_j
    V_j = V_i − 2(r_j·P_j + x_j·Q_j) + (r_j² + x_j²)·ℓ_j
    ℓ_j = (P_j² + Q_j²) / V_i

Each sweep accumulates flows leaf-to-root with the current ℓ, updates voltages
root-to-leaf, then refreshes ℓ. The sweep stops once no voltage magnitude moves
by more than the tolerance.
"""

import logging
from typing import Optional

import numpy as np

from opf_distill.domain.models import FeederModel
from opf_distill.exceptions import ConvergenceError, ShapeError
from opf_distill.grid.topology import FeederTree, feeder_tree

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DEFAULT_MAX_SWEEPS = 200


def ac_power_flow(
    model: FeederModel,
    p: np.ndarray,
    q: np.ndarray,
    v0: Optional[float] = None,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    tree: Optional[FeederTree] = None,
) -> np.ndarray:
    """
    Solve the radial AC power flow.

    Args:
        model: Radial feeder
        p: Net active injections at buses 1..N (pu)
        q: Net reactive injections at buses 1..N (pu)
        v0: Substation voltage magnitude (defaults to model.v0)
        tol: Stop when the largest voltage update is at most this
        max_sweeps: Sweep budget
        tree: Precomputed orientation of the feeder, reused across calls

    Returns:
        Voltage magnitudes at buses 1..N

    Raises:
        ShapeError: If p or q does not have N entries
        ConvergenceError: If the sweep does not settle or voltages collapse
    """
    n = model.n
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != (n,) or q.shape != (n,):
        raise ShapeError(f"injections must have shape ({n},), got {p.shape} and {q.shape}")
    v0 = model.v0 if v0 is None else v0
    tree = tree or feeder_tree(model)

    parent = tree.parent
    r, x = tree.r, tree.x
    z2 = r**2 + x**2
    p_in = np.concatenate(([0.0], p))
    q_in = np.concatenate(([0.0], q))
    reverse = tree.order[::-1]

    V = np.full(n + 1, v0 * v0)
    ell = np.zeros(n + 1)
    residual = np.inf

    for sweep in range(1, max_sweeps + 1):
        P = -p_in + r * ell
        Q = -q_in + x * ell
        for bus in reverse:
            P[parent[bus]] += P[bus]
            Q[parent[bus]] += Q[bus]

        V_new = V.copy()
        for bus in tree.order:
            V_new[bus] = V_new[parent[bus]] - 2.0 * (r[bus] * P[bus] + x[bus] * Q[bus]) + z2[bus] * ell[bus]
            if V_new[bus] <= 0:
                raise ConvergenceError(f"voltage collapse at bus {bus} in sweep {sweep}", residual)

        for bus in tree.order:
            ell[bus] = (P[bus] ** 2 + Q[bus] ** 2) / V_new[parent[bus]]

        residual = float(np.max(np.abs(np.sqrt(V_new) - np.sqrt(V))))
        V = V_new
        if residual <= tol:
            logger.debug(f"AC sweep converged in {sweep} sweeps")
            return np.sqrt(V[1:])

    raise ConvergenceError(f"AC sweep did not converge in {max_sweeps} sweeps", residual)
