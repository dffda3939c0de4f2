"""
Synthetic feeder and scenario generator.

Builds a 37-bus-style benchmark without external datasets:

- Every load bus aggregates ``households_per_bus`` household profiles drawn from
  a seeded pool; the aggregate is scaled so its daytime peak equals
  ``load_scale``·``base_load``, then perturbed by multiplicative noise.
- Every load bus receives one EV charging block with probability ``ev_fraction``.
- Every PV bus aggregates five solar profiles with random cloud attenuation,
  scaled to a peak of ``pv_scale``·``base_load``.
- Reactive loads follow from power factors drawn uniformly in [pf_min, 1].

Scenarios are T equally spaced instants of the daytime window. Features are the
net active injection p^g − p^ℓ at every load or PV bus and the reactive load at
the same buses.
"""

import logging
from typing import Dict, List, Tuple

import numpy as np

from opf_distill.domain.models import FeatureInfo, FeatureKind, FeederModel, SyntheticConfig
from opf_distill.exceptions import ConfigError
from opf_distill.grid.synthetic import synthetic_feeder
from opf_distill.scenarios.scenario_set import ScenarioSet

logger = logging.getLogger(__name__)

PANELS_PER_PV_BUS = 5


def _household_pool(rng: np.random.Generator, size: int, hours: np.ndarray) -> np.ndarray:
    """Household demand shapes: morning and evening peaks over a base level."""
    morning = rng.uniform(6.5, 9.0, size)[:, None]
    evening = rng.uniform(17.0, 20.5, size)[:, None]
    base = rng.uniform(0.2, 0.5, size)[:, None]
    h = hours[None, :]
    return (
        base
        + rng.uniform(0.3, 0.8, size)[:, None] * np.exp(-(((h - morning) / 1.5) ** 2))
        + rng.uniform(0.5, 1.2, size)[:, None] * np.exp(-(((h - evening) / 2.0) ** 2))
    )


def _solar(rng: np.random.Generator, hours: np.ndarray) -> np.ndarray:
    noon = rng.uniform(12.5, 13.5)
    width = rng.uniform(2.5, 3.5)
    clear = np.exp(-(((hours - noon) / width) ** 2))
    clouds = np.clip(1.0 - rng.uniform(0.0, 0.3, hours.size), 0.0, 1.0)
    return clear * clouds


def _ev_block(rng: np.random.Generator, hours: np.ndarray, start: float, end: float) -> np.ndarray:
    arrival = rng.uniform(start, max(start, end - 1.0))
    duration = rng.uniform(1.0, 4.0)
    return ((hours >= arrival) & (hours < arrival + duration)).astype(float)


def _check_buses(n: int, buses: Dict[str, List[int]]) -> None:
    for name, values in buses.items():
        bad = [b for b in values if not 1 <= b <= n]
        if bad:
            raise ConfigError(f"{name} buses {bad} are not in the feeder (1..{n})")
        if len(set(values)) != len(values):
            raise ConfigError(f"{name} buses must be unique")


def _scaled_to_peak(profiles: np.ndarray, peak: float) -> np.ndarray:
    top = profiles.max(axis=1, keepdims=True)
    top[top == 0] = 1.0
    return profiles / top * peak


def generate_synthetic(config: SyntheticConfig) -> Tuple[ScenarioSet, FeederModel]:
    """
    Generate a feeder and a raw scenario set.

    Args:
        config: Generator settings

    Returns:
        Tuple of (raw ScenarioSet, FeederModel with DERs at ``config.der_buses``)

    Raises:
        ConfigError: If a load, PV or DER bus lies outside the feeder
    """
    buses = config.resolved_buses()
    _check_buses(config.n_buses, buses)
    load_buses: List[int] = buses["load"]
    pv_buses: List[int] = buses["pv"]
    feature_buses = sorted(set(load_buses) | set(pv_buses))

    rng = np.random.default_rng(config.seed)
    model = synthetic_feeder(
        config.n_buses,
        seed=config.seed,
        r_range=config.r_range,
        x_over_r=config.x_over_r,
        der_qmax={b: config.der_qmax for b in buses["der"]},
        v_max_dev=config.v_max_dev,
    )

    T = config.n_scenarios
    hours = np.linspace(config.start_hour, config.end_hour, T)
    pool = _household_pool(rng, config.household_pool, hours)

    n_feat = len(feature_buses)
    p_load = np.zeros((n_feat, T))
    p_gen = np.zeros((n_feat, T))
    for i, bus in enumerate(feature_buses):
        if bus in load_buses:
            members = rng.choice(config.household_pool, size=config.households_per_bus, replace=True)
            aggregate = pool[members].sum(axis=0, keepdims=True)
            load = _scaled_to_peak(aggregate, config.load_scale * config.base_load)[0]
            load = load * np.clip(1.0 + config.noise * rng.standard_normal(T), 0.0, None)
            if rng.random() < config.ev_fraction:
                ev = _ev_block(rng, hours, config.start_hour, config.end_hour)
                load = load + config.ev_scale * config.base_load * ev
            p_load[i] = load
        if bus in pv_buses:
            panels = np.vstack([_solar(rng, hours) for _ in range(PANELS_PER_PV_BUS)])
            aggregate = panels.sum(axis=0, keepdims=True)
            p_gen[i] = _scaled_to_peak(aggregate, config.pv_scale * config.base_load)[0]

    pf = rng.uniform(config.pf_min, 1.0, size=(n_feat, T))
    q_load = p_load * np.tan(np.arccos(pf))

    features = [FeatureInfo(feature_id=f"p_{b}", kind=FeatureKind.P_NET, bus=b) for b in feature_buses]
    features += [FeatureInfo(feature_id=f"q_{b}", kind=FeatureKind.Q_LOAD, bus=b) for b in feature_buses]
    theta = np.vstack([p_gen - p_load, q_load])

    logger.info(
        f"Generated {theta.shape[0]} features × {T} scenarios on a {config.n_buses}-bus feeder "
        f"({len(load_buses)} loads, {len(pv_buses)} PV, {len(buses['der'])} DERs)"
    )
    return ScenarioSet(theta=theta, features=features), model
