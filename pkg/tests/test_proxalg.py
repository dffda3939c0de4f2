"""
Proximal Gradient Unit Tests

Tests column groups, the group-lasso prox and both APG engines on losses
whose minimizers are known in closed form.
Run with: pytest tests/test_proxalg.py -v
"""

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from opf_distill.domain.models import ApgConfig, GroupMode
from opf_distill.exceptions import ArgumentError, NumericError, ShapeError
from opf_distill.proxalg import (
    GroupStructure,
    MonitoredAverage,
    SmoothLoss,
    apg_convex,
    apg_nonconvex,
    barzilai_borwein,
    group_penalty,
    group_prox,
    write_trace_csv,
)


class ColumnQuadratic(SmoothLoss):
    """f(W) = ½ Σ_j d_j‖W[:, j] − T[:, j]‖²; column groups decouple."""

    def __init__(self, target: np.ndarray, weights: np.ndarray, known_lipschitz: bool = True) -> None:
        self.target = target
        self.weights = weights
        self.known_lipschitz = known_lipschitz

    def value(self, W):
        return float(0.5 * np.sum(((W - self.target) ** 2) * self.weights))

    def gradient(self, W):
        return (W - self.target) * self.weights

    @property
    def lipschitz(self):
        return float(self.weights.max()) if self.known_lipschitz else None

    def minimizer(self, lam: float) -> np.ndarray:
        """Column-wise prox with threshold λ/d_j."""
        norms = np.linalg.norm(self.target, axis=0)
        shrink = np.maximum(0.0, 1.0 - lam / (self.weights * np.maximum(norms, 1e-300)))
        return self.target * shrink


class NanLoss(SmoothLoss):
    def value(self, W):
        return float("nan")

    def gradient(self, W):
        return np.zeros_like(W)


@pytest.fixture
def quadratic():
    """Column quadratic with condition number 10 and two columns below λ = 1."""
    gen = np.random.default_rng(4)
    target = gen.normal(size=(5, 5))
    target[:, 1] *= 0.05
    target[:, 3] *= 0.05
    weights = np.array([0.5, 1.0, 2.0, 3.0, 5.0])
    return ColumnQuadratic(target, weights)


class TestGroupStructure:
    """Tests for column partitions."""

    def test_per_column(self):
        groups = GroupStructure.per_column(3)
        assert groups.groups == [[0], [1], [2]]
        assert groups.mode == GroupMode.COLUMN

    def test_per_bus(self):
        """Features at the same bus share a group, ordered by first appearance."""
        groups = GroupStructure.per_bus([1, 2, 1, 2])
        assert groups.groups == [[0, 2], [1, 3]]
        assert groups.mode == GroupMode.BUS

    def test_invalid_partition(self):
        with pytest.raises(ValidationError, match="disjoint and cover"):
            GroupStructure(p=3, groups=[[0, 1], [1, 2]])
        with pytest.raises(ValidationError, match="nonempty"):
            GroupStructure(p=2, groups=[[0, 1], []])

    def test_norms_and_support(self):
        W = np.array([[3.0, 0.0, 0.0], [4.0, 0.0, 1e-9]])
        groups = GroupStructure.per_column(3)
        np.testing.assert_allclose(groups.norms(W), [5.0, 0.0, 1e-9])
        assert groups.support(W, 1e-6) == [0]
        assert groups.nnz(W, 0.0) == 2
        assert group_penalty(W, groups) == pytest.approx(5.0 + 1e-9)

    def test_bus_norms_are_block_frobenius(self):
        W = np.array([[1.0, 2.0, 2.0], [0.0, 0.0, 4.0], [0.0, 0.0, 0.0]])
        groups = GroupStructure(p=3, groups=[[0, 1], [2]], mode=GroupMode.BUS)
        np.testing.assert_allclose(groups.norms(W), [np.sqrt(5.0), np.sqrt(20.0)])
        assert groups.support(W, 0.0) == [0, 1, 2]


class TestGroupProx:
    """Tests for the block soft-threshold."""

    def test_shrinks_column(self):
        """Column (3, 4) with β = 2.5 shrinks to (1.5, 2.0); small columns vanish."""
        Y = np.array([[3.0, 0.1], [4.0, 0.0]])
        out = group_prox(Y, 2.5, GroupStructure.per_column(2))
        np.testing.assert_allclose(out, [[1.5, 0.0], [2.0, 0.0]])

    def test_large_threshold_zeroes(self):
        Y = np.array([[3.0, 0.0], [4.0, 1.0]])
        np.testing.assert_array_equal(group_prox(Y, 6.0, GroupStructure.per_column(2)), 0.0)

    def test_zero_threshold_is_identity(self):
        Y = np.array([[3.0, 0.1], [4.0, 0.0]])
        out = group_prox(Y, 0.0, GroupStructure.per_column(2))
        np.testing.assert_array_equal(out, Y)
        assert out is not Y

    def test_input_not_modified(self):
        Y = np.array([[3.0, 0.1], [4.0, 0.0]])
        before = Y.copy()
        group_prox(Y, 1.0, GroupStructure.per_column(2))
        np.testing.assert_array_equal(Y, before)

    def test_negative_threshold(self):
        with pytest.raises(ArgumentError, match="nonnegative"):
            group_prox(np.eye(2), -1.0, GroupStructure.per_column(2))

    def test_nonexpansive(self, rng):
        groups = GroupStructure.per_bus([1, 2, 3, 1, 2, 3])
        for _ in range(200):
            Y1, Y2 = rng.normal(size=(6, 6)), rng.normal(size=(6, 6))
            beta = rng.uniform(0, 3)
            gap = np.linalg.norm(group_prox(Y1, beta, groups) - group_prox(Y2, beta, groups))
            assert gap <= np.linalg.norm(Y1 - Y2) + 1e-12

    def test_minimizes_prox_objective(self, rng):
        """No random perturbation beats the prox point."""
        groups = GroupStructure.per_bus([1, 1, 2, 3])
        Y = rng.normal(size=(4, 4))
        beta = 0.8

        def objective(W):
            return beta * group_penalty(W, groups) + 0.5 * np.sum((W - Y) ** 2)

        best = group_prox(Y, beta, groups)
        for _ in range(500):
            assert objective(best) <= objective(best + 1e-3 * rng.normal(size=(4, 4))) + 1e-12


class TestMonitoredAverage:
    """Tests for the running cost average."""

    def test_first_update(self):
        monitor = MonitoredAverage(first_cost=10.0, eta=0.8)
        c2 = monitor.update(4.0)
        assert monitor.q == pytest.approx(1.8)
        assert c2 == pytest.approx((0.8 * 10.0 + 4.0) / 1.8)

    def test_zero_eta_tracks_last_cost(self):
        monitor = MonitoredAverage(first_cost=10.0, eta=0.0)
        monitor.update(4.0)
        assert monitor.update(3.0) == 3.0


class TestBarzilaiBorwein:
    """Tests for the BB step estimate."""

    def test_identity_curvature(self):
        dx = np.array([1.0, -2.0])
        assert barzilai_borwein(dx, dx, fallback=0.1) == pytest.approx(1.0)

    def test_scaled_curvature(self):
        dx = np.array([1.0, 1.0])
        assert barzilai_borwein(dx, 4 * dx, fallback=0.1) == pytest.approx(0.25)

    def test_zero_curvature(self):
        assert barzilai_borwein(np.zeros(2), np.ones(2), fallback=0.1) == 0.1


class TestApgConvex:
    """Tests for the convex engine."""

    def test_unpenalized_single_step(self):
        """With f = ½‖W − T‖² and μ = 1 the first step lands on T."""
        target = np.arange(9.0).reshape(3, 3)
        loss = ColumnQuadratic(target, np.ones(3))
        result = apg_convex(loss, GroupStructure.per_column(3), ApgConfig(init="zero", tol=1e-12))
        np.testing.assert_allclose(result.W, target, atol=1e-12)
        assert result.converged

    def test_closed_form_minimizer(self, quadratic):
        cfg = ApgConfig(lam=1.0, init="zero", tol=1e-12, max_iter=5000)
        result = apg_convex(quadratic, GroupStructure.per_column(5), cfg)
        np.testing.assert_allclose(result.W, quadratic.minimizer(1.0), atol=1e-6)
        assert np.all(result.W[:, [1, 3]] == 0.0)

    def test_cost_nonincreasing(self, quadratic):
        cfg = ApgConfig(lam=0.5, seed=3, max_iter=300)
        result = apg_convex(quadratic, GroupStructure.per_column(5), cfg)
        costs = [row.cost for row in result.trace]
        assert all(b <= a for a, b in zip(costs, costs[1:]))
        assert result.trace[0].step_kind == "init"
        assert result.cost == costs[-1]

    def test_needs_step_size(self, quadratic):
        loss = ColumnQuadratic(quadratic.target, quadratic.weights, known_lipschitz=False)
        with pytest.raises(ArgumentError, match="step size"):
            apg_convex(loss, GroupStructure.per_column(5), ApgConfig())
        result = apg_convex(loss, GroupStructure.per_column(5), ApgConfig(step_size=0.2, max_iter=5))
        assert result.iterations == 5

    def test_initial_shape(self, quadratic):
        with pytest.raises(ShapeError, match="initial iterate"):
            apg_convex(quadratic, GroupStructure.per_column(5), ApgConfig(), W0=np.zeros((4, 4)))

    def test_non_finite_cost(self):
        with pytest.raises(NumericError, match="non-finite cost"):
            apg_convex(NanLoss(), GroupStructure.per_column(2), ApgConfig(step_size=1.0))


class TestApgNonconvex:
    """Tests for the monitored engine."""

    def test_closed_form_minimizer(self, quadratic):
        """On a convex instance the monitored engine reaches the same minimizer."""
        cfg = ApgConfig(lam=1.0, init="zero", tol=1e-12, max_iter=5000)
        result = apg_nonconvex(quadratic, GroupStructure.per_column(5), cfg)
        np.testing.assert_allclose(result.W, quadratic.minimizer(1.0), atol=1e-6)

    def test_agrees_with_convex_engine(self, quadratic):
        cfg = ApgConfig(lam=0.3, init="identity", tol=1e-12, max_iter=5000)
        groups = GroupStructure.per_column(5)
        convex = apg_convex(quadratic, groups, cfg)
        monitored = apg_nonconvex(quadratic, groups, cfg)
        assert monitored.cost == pytest.approx(convex.cost, rel=1e-6, abs=1e-9)

    def test_never_worse_than_start(self, quadratic):
        cfg = ApgConfig(lam=0.5, seed=1, max_iter=50)
        result = apg_nonconvex(quadratic, GroupStructure.per_column(5), cfg)
        costs = [row.cost for row in result.trace]
        assert max(costs[1:]) <= costs[0]
        assert {row.step_kind for row in result.trace[1:]} <= {"accepted", "fallback_z", "fallback_v", "null"}

    def test_deterministic(self, quadratic):
        cfg = ApgConfig(lam=0.5, seed=7, max_iter=40)
        groups = GroupStructure.per_column(5)
        first = apg_nonconvex(quadratic, groups, cfg)
        second = apg_nonconvex(quadratic, groups, cfg)
        np.testing.assert_array_equal(first.W, second.W)
        assert [r.cost for r in first.trace] == [r.cost for r in second.trace]

    def test_without_bb_step(self, quadratic):
        cfg = ApgConfig(lam=1.0, init="zero", tol=1e-12, max_iter=5000, bb_step=False)
        result = apg_nonconvex(quadratic, GroupStructure.per_column(5), cfg)
        np.testing.assert_allclose(result.W, quadratic.minimizer(1.0), atol=1e-6)

    def test_non_finite_cost(self):
        with pytest.raises(NumericError, match="non-finite cost"):
            apg_nonconvex(NanLoss(), GroupStructure.per_column(2), ApgConfig())


class TestTrace:
    """Tests for trace output."""

    def test_trace_csv(self, quadratic, tmp_path):
        result = apg_convex(quadratic, GroupStructure.per_column(5), ApgConfig(lam=0.5, max_iter=5))
        write_trace_csv(result.trace, tmp_path / "trace.csv")
        df = pd.read_csv(tmp_path / "trace.csv", float_precision="round_trip")
        assert list(df.columns) == ["iter", "cost", "smooth_cost", "penalty", "nnz_groups", "step_kind"]
        assert list(df["iter"]) == list(range(len(result.trace)))
        np.testing.assert_allclose(df["cost"], df["smooth_cost"] + df["penalty"], rtol=1e-12)
        assert df["cost"].iloc[-1] == result.cost
