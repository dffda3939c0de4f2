"""
Seeded random radial feeders.

Used to build benchmark feeders of the size of the 37-bus test system without
shipping its impedance data. Each new bus either extends the lateral it was
generated after or branches off a random earlier bus, which produces the long
laterals typical of distribution feeders.
"""

from typing import Dict, Sequence, Tuple

import numpy as np

from opf_distill.domain.models import FeederModel, Line

EXTEND_PROBABILITY = 0.7


def synthetic_feeder(
    n_buses: int,
    seed: int = 0,
    r_range: Tuple[float, float] = (0.002, 0.008),
    x_over_r: Tuple[float, float] = (1.0, 2.0),
    der_qmax: Dict[int, float] | None = None,
    v_max_dev: float = 0.03,
) -> FeederModel:
    """
    Generate a random radial feeder.

    Args:
        n_buses: Number of non-substation buses N
        seed: Random seed
        r_range: Uniform range of line resistance in pu
        x_over_r: Uniform range of the reactance-to-resistance ratio
        der_qmax: DER rating per bus id
        v_max_dev: Voltage deviation limit in pu

    Returns:
        FeederModel with lines oriented away from the substation
    """
    rng = np.random.default_rng(seed)
    lines = []
    for bus in range(1, n_buses + 1):
        if bus == 1 or rng.random() < EXTEND_PROBABILITY:
            parent = bus - 1
        else:
            parent = int(rng.integers(0, bus - 1))
        r = float(rng.uniform(*r_range))
        x = r * float(rng.uniform(*x_over_r))
        lines.append(Line(from_bus=parent, to_bus=bus, r=r, x=x))

    der_qmax = der_qmax or {}
    buses: Sequence[int] = sorted(der_qmax)
    return FeederModel(
        n_buses=n_buses + 1,
        lines=lines,
        der_buses=list(buses),
        der_qmax=[float(der_qmax[b]) for b in buses],
        v_max_dev=v_max_dev,
    )
