"""
Pytest fixtures and configuration.

This module provides reusable feeders, scenario sets and OPF datasets for testing.
"""

from typing import Callable, List, Sequence

import numpy as np
import pytest

from opf_distill.distill import OpfDataset
from opf_distill.domain.config import RunConfig
from opf_distill.domain.models import (
    ApgConfig,
    FeatureInfo,
    FeatureKind,
    FeederModel,
    Line,
    Method,
    OpfSpec,
    SyntheticConfig,
)
from opf_distill.opf import build_opf_spec
from opf_distill.scenarios import ScenarioSet, build_opf_dataset


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator so every test sees the same draws."""
    return np.random.default_rng(0)


@pytest.fixture
def chain_feeder() -> FeederModel:
    """
    Chain 0–1–2 with r = (0.01, 0.02) and a DER at both buses.

    R = [[0.01, 0.01], [0.01, 0.03]].
    """
    return FeederModel(
        n_buses=3,
        lines=[
            Line(from_bus=0, to_bus=1, r=0.01, x=0.02),
            Line(from_bus=1, to_bus=2, r=0.02, x=0.01),
        ],
        der_buses=[1, 2],
        der_qmax=[0.5, 0.5],
    )


@pytest.fixture
def three_bus_feeder() -> FeederModel:
    """Chain 0–1–2–3 with r = x = 0.01 and a 0.3 pu DER at every bus."""
    return FeederModel(
        n_buses=4,
        lines=[Line(from_bus=b, to_bus=b + 1, r=0.01, x=0.01) for b in range(3)],
        der_buses=[1, 2, 3],
        der_qmax=[0.3, 0.3, 0.3],
    )


@pytest.fixture
def single_line_spec() -> Callable[..., OpfSpec]:
    """Factory for the OPF of one line 0–1 with one DER at bus 1."""

    def make(r: float, x: float, qmax: float, v_max_dev: float = 0.03, nu: float = 1000.0, rho: float = 100.0) -> OpfSpec:
        feeder = FeederModel(
            n_buses=2,
            lines=[Line(from_bus=0, to_bus=1, r=r, x=x)],
            der_buses=[1],
            der_qmax=[qmax],
            v_max_dev=v_max_dev,
        )
        return build_opf_spec(feeder, nu=nu, rho=rho)

    return make


@pytest.fixture
def make_scenarios() -> Callable[[np.ndarray, np.ndarray, Sequence[int]], ScenarioSet]:
    """Factory building a raw ScenarioSet with p_<bus> rows followed by q_<bus> rows."""

    def make(p: np.ndarray, q: np.ndarray, buses: Sequence[int]) -> ScenarioSet:
        features: List[FeatureInfo] = [
            FeatureInfo(feature_id=f"p_{b}", kind=FeatureKind.P_NET, bus=b) for b in buses
        ]
        features += [FeatureInfo(feature_id=f"q_{b}", kind=FeatureKind.Q_LOAD, bus=b) for b in buses]
        return ScenarioSet(theta=np.vstack([p, q]).astype(float), features=features)

    return make


@pytest.fixture
def loaded_scenarios(make_scenarios) -> ScenarioSet:
    """
    Five heavily loaded scenarios on the three-bus chain.

    The loading pushes the end of the chain below the voltage band, so the
    solutions mix binding ratings, soft voltage rows and interior points.
    """
    gen = np.random.default_rng(7)
    p = -gen.uniform(0.3, 1.2, size=(3, 5))
    q = gen.uniform(0.05, 0.4, size=(3, 5))
    return make_scenarios(p, q, [1, 2, 3])


@pytest.fixture
def opf_dataset(three_bus_feeder: FeederModel, loaded_scenarios: ScenarioSet) -> OpfDataset:
    """Normalized OPF dataset (P = 6, T = 5, G = 3)."""
    return build_opf_dataset(loaded_scenarios, three_bus_feeder)


@pytest.fixture
def light_scenarios(make_scenarios) -> ScenarioSet:
    """Lightly loaded chain scenarios whose OPF solutions are interior (q^g = q^ℓ)."""
    gen = np.random.default_rng(3)
    p = -gen.uniform(0.05, 0.15, size=(2, 6))
    q = gen.uniform(0.05, 0.2, size=(2, 6))
    return make_scenarios(p, q, [1, 2])


@pytest.fixture
def synthetic_config() -> SyntheticConfig:
    """Five-bus synthetic benchmark: loads at 1..5, PV and DERs at 2 and 4."""
    return SyntheticConfig(n_buses=5, n_scenarios=10, seed=0)


@pytest.fixture
def run_config(tmp_path, synthetic_config: SyntheticConfig) -> RunConfig:
    """Small run configuration writing into a temporary directory."""
    return RunConfig(
        synthetic=synthetic_config,
        methods=[Method.PCA, Method.GL2],
        ks=[2],
        apg=ApgConfig(max_iter=60, init="zero"),
        out_dir=tmp_path / "out",
    ).seeded()
