"""Construction of OpfSpec objects from feeders."""

from typing import Optional, Sequence

import numpy as np

from opf_distill.domain.models import FeatureKind, FeederModel, GridMatrices, IpmOptions, OpfSpec
from opf_distill.exceptions import ArgumentError
from opf_distill.grid.matrices import build_grid_matrices


def feature_position(kind: FeatureKind, bus: int, n: int) -> int:
    """Index of a (kind, bus) feature inside the full [p; q^ℓ] vector."""
    if not 1 <= bus <= n:
        raise ArgumentError(f"feature bus {bus} outside 1..{n}")
    return bus - 1 if kind == FeatureKind.P_NET else n + bus - 1


def build_opf_spec(
    model: FeederModel,
    nu: float = 1000.0,
    rho: float = 100.0,
    feature_index: Optional[Sequence[int]] = None,
    fixed_theta: Optional[np.ndarray] = None,
    grid: Optional[GridMatrices] = None,
    ipm: Optional[IpmOptions] = None,
) -> OpfSpec:
    """
    Build the OPF definition for a feeder.

    Args:
        model: Radial feeder with DERs
        nu: Quadratic slack penalty
        rho: Linear slack penalty
        feature_index: Entries of [p; q^ℓ] that form θ (default: all 2N)
        fixed_theta: Values of the remaining entries (default: zeros)
        grid: Precomputed R and X
        ipm: Interior point settings

    Returns:
        OpfSpec
    """
    grid = grid or build_grid_matrices(model)
    n = model.n
    index = np.arange(2 * n) if feature_index is None else np.asarray(feature_index, dtype=int)
    fixed = np.zeros(2 * n) if fixed_theta is None else np.asarray(fixed_theta, dtype=float)
    return OpfSpec(
        grid=grid,
        der_buses=list(model.der_buses),
        qmax=np.asarray(model.der_qmax, dtype=float),
        v_max_dev=model.v_max_dev,
        nu=nu,
        rho=rho,
        feature_index=index,
        fixed_theta=fixed,
        ipm=ipm or IpmOptions(),
    )
