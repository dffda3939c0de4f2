"""
Soft-constrained OPF as a convex QP.

With DER incidence E (N×G), data θ ↦ (p, q^ℓ) and decision x = [q^g; s]:

    minimize    (Eq^g − q^ℓ)ᵀR(Eq^g − q^ℓ) + ν·s² + ρ·s
    subject to  −v̄ − s ≤ Rp + X(Eq^g − q^ℓ) ≤ v̄ + s      (2N rows)
                −q̄ ≤ q^g ≤ q̄                             (2G rows)
                s ≥ 0                                      (1 row)

written as ½xᵀHx + cᵀx + const subject to Ax ≤ b. The data enters c and b
affinely, so their derivatives with respect to θ are assembled here alongside
the QP itself.
"""

import numpy as np
from pydantic import BaseModel, ConfigDict

from opf_distill.domain.models import OpfSpec
from opf_distill.exceptions import ShapeError


class QpInstance(BaseModel):
    """
    One assembled OPF instance.

    Attributes:
        H: (G+1)×(G+1) Hessian
        c: Linear term
        const: Constant term q^ℓᵀRq^ℓ
        A: (2N+2G+1)×(G+1) inequality matrix
        b: Inequality right-hand side
        dc_dtheta: ∂c/∂θ, (G+1)×P
        db_dtheta: ∂b/∂θ, (2N+2G+1)×P
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    H: np.ndarray
    c: np.ndarray
    const: float
    A: np.ndarray
    b: np.ndarray
    dc_dtheta: np.ndarray
    db_dtheta: np.ndarray
    n: int
    g: int

    @property
    def n_vars(self) -> int:
        return self.g + 1

    @property
    def n_rows(self) -> int:
        return int(self.A.shape[0])

    def objective(self, x: np.ndarray) -> float:
        return float(0.5 * x @ self.H @ x + self.c @ x + self.const)


def voltage_rows(n: int) -> slice:
    """Rows of the upper and lower voltage constraints."""
    return slice(0, 2 * n)


def rating_rows(n: int, g: int) -> slice:
    """Rows of the DER rating constraints."""
    return slice(2 * n, 2 * n + 2 * g)


def assemble_opf(spec: OpfSpec, theta: np.ndarray) -> QpInstance:
    """
    Assemble the soft-constrained OPF for one data vector.

    Args:
        spec: OPF definition
        theta: Data vector θ (length P)

    Returns:
        QpInstance with the problem data and its θ-derivatives

    Raises:
        ShapeError: If θ does not have P entries
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (spec.p,):
        raise ShapeError(f"theta must have shape ({spec.p},), got {theta.shape}")

    n, g = spec.n, spec.g
    R, X = spec.grid.R, spec.grid.X
    E = spec.incidence
    p, q_load = spec.split(theta)

    ERE = E.T @ R @ E
    H = np.zeros((g + 1, g + 1))
    H[:g, :g] = ERE + ERE.T
    H[g, g] = 2.0 * spec.nu

    c = np.empty(g + 1)
    c[:g] = -2.0 * (E.T @ (R @ q_load))
    c[g] = spec.rho
    const = float(q_load @ R @ q_load)

    XE = X @ E
    ones = np.ones((n, 1))
    eye = np.eye(g)
    A = np.vstack(
        [
            np.hstack([XE, -ones]),
            np.hstack([-XE, -ones]),
            np.hstack([eye, np.zeros((g, 1))]),
            np.hstack([-eye, np.zeros((g, 1))]),
            np.append(np.zeros(g), -1.0)[None, :],
        ]
    )
    v_lin = R @ p - X @ q_load
    b = np.concatenate(
        [
            spec.v_max_dev - v_lin,
            spec.v_max_dev + v_lin,
            spec.qmax,
            spec.qmax,
            [0.0],
        ]
    )

    # Derivatives with respect to the full [p; q^ℓ] vector, then restricted.
    dc_full = np.zeros((g + 1, 2 * n))
    dc_full[:g, n:] = -2.0 * (E.T @ R)
    db_full = np.zeros((A.shape[0], 2 * n))
    db_full[:n, :n] = -R
    db_full[:n, n:] = X
    db_full[n : 2 * n, :n] = R
    db_full[n : 2 * n, n:] = -X
    idx = spec.feature_index

    return QpInstance(
        H=H,
        c=c,
        const=const,
        A=A,
        b=b,
        dc_dtheta=dc_full[:, idx],
        db_dtheta=db_full[:, idx],
        n=n,
        g=g,
    )
