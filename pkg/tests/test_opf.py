"""
OPF Solver Unit Tests

Tests QP assembly, the interior point solver against a brute-force oracle,
the hard-constrained variant and batch solving.
Run with: pytest tests/test_opf.py -v
"""

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from opf_distill.domain.models import IpmOptions, SolverStatus
from opf_distill.exceptions import BatchSolveError, NumericError, ShapeError
from opf_distill.opf import (
    assemble_opf,
    build_opf_spec,
    export_batch_csv,
    hard_opf_feasible,
    ipm,
    solutions_matrix,
    solve_opf,
    solve_opf_batch,
    solve_opf_hard,
    solve_qp,
)
from opf_distill.opf.solver import run_batch


def brute_force(r, x, p, q_load, qmax, v_max_dev=0.03, nu=1000.0, rho=100.0, step=1e-4):
    """Grid search over q^g with the slack at its optimum for each q^g."""
    qg = np.arange(-qmax, qmax + step / 2, step)
    deviation = np.abs(r * p + x * (qg - q_load))
    s = np.maximum(0.0, deviation - v_max_dev)
    cost = r * (qg - q_load) ** 2 + nu * s**2 + rho * s
    best = int(np.argmin(cost))
    return qg[best], s[best], cost[best]


@pytest.fixture
def chain_spec(chain_feeder):
    return build_opf_spec(chain_feeder)


class TestAssembly:
    """Tests for the QP layout."""

    def test_single_der_dimensions(self, single_line_spec):
        """G = N = 1: two variables, five inequality rows."""
        qp = assemble_opf(single_line_spec(0.01, 0.01, 0.5), np.array([-1.0, 0.3]))
        assert qp.H.shape == (2, 2)
        assert qp.A.shape == (5, 2)
        assert qp.dc_dtheta.shape == (2, 2)
        assert qp.db_dtheta.shape == (5, 2)

    def test_hessian(self, chain_spec):
        """With a DER at every bus the q^g block is 2R."""
        qp = assemble_opf(chain_spec, np.zeros(4))
        np.testing.assert_allclose(qp.H[:2, :2], 2 * chain_spec.grid.R)
        assert qp.H[2, 2] == 2 * chain_spec.nu
        np.testing.assert_array_equal(qp.H[:2, 2], 0.0)

    def test_zero_data(self, chain_spec):
        qp = assemble_opf(chain_spec, np.zeros(4))
        assert qp.const == 0.0
        np.testing.assert_array_equal(qp.c, [0.0, 0.0, chain_spec.rho])

    def test_derivatives_match_differences(self, chain_spec, rng):
        """c and b are affine in θ with the assembled derivatives."""
        theta, step = rng.normal(size=4), rng.normal(size=4)
        base = assemble_opf(chain_spec, theta)
        moved = assemble_opf(chain_spec, theta + step)
        np.testing.assert_allclose(moved.c - base.c, base.dc_dtheta @ step, atol=1e-14)
        np.testing.assert_allclose(moved.b - base.b, base.db_dtheta @ step, atol=1e-14)

    def test_shape_error(self, chain_spec):
        with pytest.raises(ShapeError, match="theta must have shape"):
            assemble_opf(chain_spec, np.zeros(3))

    def test_spec_validation(self, chain_spec):
        with pytest.raises(ValidationError, match="strictly increasing"):
            chain_spec.model_validate({**dict(chain_spec), "feature_index": np.array([1, 0])})


class TestSolveOpf:
    """Tests for the soft-constrained OPF."""

    def test_zero_data(self, chain_spec):
        """θ = 0 needs no reactive support."""
        sol = solve_opf(chain_spec, np.zeros(4))
        assert sol.is_optimal
        np.testing.assert_allclose(sol.qg, 0.0, atol=1e-9)
        assert sol.s == pytest.approx(0.0, abs=1e-9)
        assert sol.objective == pytest.approx(0.0, abs=1e-9)

    def test_interior_tracks_load(self, single_line_spec):
        """Inside the band the DER supplies the local reactive demand."""
        sol = solve_opf(single_line_spec(0.01, 0.01, 0.5), np.array([-1.0, 0.3]))
        assert sol.qg[0] == pytest.approx(0.3, abs=1e-7)
        assert sol.s == pytest.approx(0.0, abs=1e-9)

    @pytest.mark.parametrize(
        "r, x, p, q_load, qmax",
        [
            (0.04, 0.04, -1.0, 0.0, 0.5),
            (0.02, 0.03, -1.5, 0.2, 0.3),
            (0.05, 0.05, -2.0, 0.1, 0.4),
            (0.03, 0.01, 1.5, -0.2, 0.5),
            (0.01, 0.02, 0.5, 0.1, 0.2),
        ],
    )
    def test_matches_brute_force(self, single_line_spec, r, x, p, q_load, qmax):
        """Single-DER instances agree with a 1e-4 grid search."""
        sol = solve_opf(single_line_spec(r, x, qmax), np.array([p, q_load]))
        qg, s, cost = brute_force(r, x, p, q_load, qmax)
        assert sol.is_optimal
        assert sol.qg[0] == pytest.approx(qg, abs=1e-3)
        assert sol.s == pytest.approx(s, abs=1e-3)
        assert sol.objective <= cost + 1e-9

    def test_band_binding_instance(self, single_line_spec):
        """R = X = 0.04 at p = −1: the DER lifts the voltage exactly to the band edge."""
        sol = solve_opf(single_line_spec(0.04, 0.04, 0.5), np.array([-1.0, 0.0]))
        assert sol.qg[0] == pytest.approx(0.25, abs=1e-9)
        assert sol.s == pytest.approx(0.0, abs=1e-12)

    def test_kkt_certificate(self, chain_spec, rng):
        """Optimal solutions satisfy the KKT conditions."""
        for _ in range(10):
            theta = np.concatenate([-rng.uniform(0.2, 2.0, 2), rng.uniform(0.0, 0.6, 2)])
            sol = solve_opf(chain_spec, theta)
            assert sol.is_optimal
            assert sol.kkt_residual <= 1e-8
            assert sol.duals.min() >= 0
            assert sol.slacks.min() >= 0
            assert np.abs(sol.duals * sol.slacks).max() <= 1e-8

    def test_objective_monotone_in_band(self, chain_spec):
        """Widening the voltage band never raises the optimal cost."""
        theta = np.array([-1.5, -1.5, 0.3, 0.3])
        objectives = [
            solve_opf(chain_spec.model_copy(update={"v_max_dev": v}), theta).objective for v in (0.01, 0.03, 0.05)
        ]
        assert objectives[0] >= objectives[1] - 1e-9
        assert objectives[1] >= objectives[2] - 1e-9

    def test_solve_qp_unconstrained_optimum(self):
        """An inactive constraint leaves the unconstrained minimizer."""
        H = np.diag([2.0, 4.0])
        c = np.array([-2.0, -4.0])
        A = np.array([[1.0, 1.0]])
        res = solve_qp(H, c, A, np.array([10.0]))
        np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-9)
        assert res.polished

    def test_polish_missing_kkt_tolerance_is_rejected(self, monkeypatch):
        """A polished point with a large KKT residual does not replace the interior point iterate."""
        H = np.diag([2.0, 4.0])
        c = np.array([-2.0, -4.0])
        A = np.array([[1.0, 1.0]])
        b = np.array([10.0])
        interior = solve_qp(H, c, A, b, IpmOptions(polish=False))
        monkeypatch.setattr(ipm, "_polish", lambda H, c, A, b, x, z, w: (x + 1.0, z, w))
        res = solve_qp(H, c, A, b)
        assert not res.polished
        assert res.status == SolverStatus.OPTIMAL
        np.testing.assert_array_equal(res.x, interior.x)
        assert res.residual <= ipm.KKT_TOL


class TestHardOpf:
    """Tests for the exact-band variant."""

    def test_agrees_with_soft_when_feasible(self, single_line_spec):
        spec = single_line_spec(0.04, 0.04, 0.5)
        theta = np.array([-1.0, 0.0])
        soft = solve_opf(spec, theta)
        hard = solve_opf_hard(spec, theta)
        assert hard.is_optimal
        assert soft.s <= 1e-6
        np.testing.assert_allclose(soft.qg, hard.qg, atol=1e-5)

    def test_light_loading(self, chain_spec):
        theta = np.array([-0.2, -0.1, 0.1, 0.05])
        soft = solve_opf(chain_spec, theta)
        hard = solve_opf_hard(chain_spec, theta)
        np.testing.assert_allclose(soft.qg, hard.qg, atol=1e-5)
        assert hard.duals.shape == soft.duals.shape

    def test_infeasible(self, single_line_spec):
        """The band cannot be met when the load exceeds what the DER can offset."""
        spec = single_line_spec(0.04, 0.04, 0.1)
        theta = np.array([-3.0, 0.0])
        assert not hard_opf_feasible(spec, theta)
        sol = solve_opf_hard(spec, theta)
        assert sol.status == SolverStatus.INFEASIBLE
        assert sol.objective == float("inf")
        # The soft problem still solves and pays for the violation.
        assert solve_opf(spec, theta).s > 0


class TestBatch:
    """Tests for batch solving."""

    def test_empty_batch(self, chain_spec):
        assert solve_opf_batch(chain_spec, np.zeros((4, 0))) == []

    def test_identical_columns(self, chain_spec):
        theta = np.array([-1.0, -0.5, 0.2, 0.1])
        solutions = solve_opf_batch(chain_spec, np.column_stack([theta, theta, theta]))
        X = solutions_matrix(solutions)
        np.testing.assert_array_equal(X[:, 0], X[:, 1])
        np.testing.assert_array_equal(X[:, 0], X[:, 2])

    def test_batch_matches_single_solves(self, chain_spec, rng):
        thetas = np.vstack([-rng.uniform(0.2, 2.0, (2, 6)), rng.uniform(0, 0.5, (2, 6))])
        batch = solutions_matrix(solve_opf_batch(chain_spec, thetas))
        singles = np.column_stack([solve_opf(chain_spec, thetas[:, t]).x for t in range(6)])
        np.testing.assert_array_equal(batch, singles)

    def test_threads_match_serial(self, chain_spec, rng):
        """Worker threads do not change results."""
        thetas = np.vstack([-rng.uniform(0.2, 2.0, (2, 12)), rng.uniform(0, 0.5, (2, 12))])
        serial = solutions_matrix(solve_opf_batch(chain_spec, thetas, jobs=1))
        threaded = solutions_matrix(solve_opf_batch(chain_spec, thetas, jobs=4))
        np.testing.assert_array_equal(serial, threaded)

    def test_shape_error(self, chain_spec):
        with pytest.raises(ShapeError):
            solve_opf_batch(chain_spec, np.zeros((3, 2)))

    def test_failures_are_collected(self):
        """A failing scenario does not stop the others."""
        calls = []

        def func(t):
            calls.append(t)
            if t == 1:
                raise NumericError("boom")
            return t * 10

        with pytest.raises(BatchSolveError, match="1 of 3 scenarios failed") as excinfo:
            run_batch(func, 3)
        assert sorted(calls) == [0, 1, 2]
        assert excinfo.value.results == [0, None, 20]
        assert list(excinfo.value.failures) == [1]
        assert excinfo.value.exit_code == 4

    def test_export_csv(self, chain_spec, tmp_path):
        thetas = np.array([[-1.0, -0.5], [-0.5, -0.2], [0.2, 0.1], [0.1, 0.0]])
        solutions = solve_opf_batch(chain_spec, thetas)
        export_batch_csv(solutions, tmp_path / "batch.csv", labels=["a", "b"])
        df = pd.read_csv(tmp_path / "batch.csv", float_precision="round_trip")
        assert list(df.columns) == ["scenario", "qg_1", "qg_2", "s", "objective", "status"]
        assert list(df["scenario"]) == ["a", "b"]
        assert float(df["qg_1"][0]) == solutions[0].qg[0]
        assert set(df["status"]) == {"optimal"}
