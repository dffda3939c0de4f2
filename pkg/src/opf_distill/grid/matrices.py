"""
Linearized grid model.

Voltage magnitudes on a radial feeder are approximated by

    v ≈ R·p + X·q + v0·1

where R[n, m] (X[n, m]) is the resistance (reactance) shared by the
substation-to-n and substation-to-m paths, and p, q are net injections
(generation minus demand) in pu. Ohmic losses are modeled as 2pᵀRp + 2qᵀRq.

Convention:
- No factor 2 in R/X: these are magnitude sensitivities, validated against the
  exact AC sweep around zero injection.
"""

import logging

import numpy as np

from opf_distill.domain.models import FeederModel, GridMatrices
from opf_distill.exceptions import ModelError, ShapeError
from opf_distill.grid.topology import feeder_tree

logger = logging.getLogger(__name__)


def build_grid_matrices(model: FeederModel) -> GridMatrices:
    """
    Build R and X from common-path impedances.

    Args:
        model: Radial feeder

    Returns:
        GridMatrices with exactly symmetric, positive definite R and X

    Raises:
        TopologyError: If the lines do not form a tree rooted at bus 0
        ModelError: If any line has nonpositive resistance or reactance
    """
    tree = feeder_tree(model)
    bad = [bus for bus in tree.order if tree.r[bus] <= 0 or tree.x[bus] <= 0]
    if bad:
        raise ModelError(f"nonpositive impedance on lines feeding buses {bad}")

    A = tree.ancestor_matrix()
    r = tree.r[1:]
    x = tree.x[1:]
    R = (A * r) @ A.T
    X = (A * x) @ A.T

    # Bitwise symmetry regardless of BLAS summation order.
    R = 0.5 * (R + R.T)
    X = 0.5 * (X + X.T)
    logger.debug(f"Built grid matrices for {model.n} buses")
    return GridMatrices(R=R, X=X)


def _check_vector(name: str, vec: np.ndarray, n: int) -> np.ndarray:
    arr = np.asarray(vec, dtype=float)
    if arr.shape != (n,):
        raise ShapeError(f"{name} must have shape ({n},), got {arr.shape}")
    return arr


def linear_voltage(mat: GridMatrices, p: np.ndarray, q: np.ndarray, v0: float = 1.0) -> np.ndarray:
    """Approximate voltage magnitudes Rp + Xq + v0·1."""
    p = _check_vector("p", p, mat.n)
    q = _check_vector("q", q, mat.n)
    return mat.R @ p + mat.X @ q + v0


def quadratic_losses(mat: GridMatrices, p: np.ndarray, q: np.ndarray) -> float:
    """Approximate ohmic losses 2pᵀRp + 2qᵀRq (nonnegative)."""
    p = _check_vector("p", p, mat.n)
    q = _check_vector("q", q, mat.n)
    return float(2.0 * p @ mat.R @ p + 2.0 * q @ mat.R @ q)
