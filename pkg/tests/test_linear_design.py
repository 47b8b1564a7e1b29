import math

import numpy as np
import pytest

from resalloc.errors import DomainError, RankDeficiencyError, ShapeMismatchError
from resalloc.linear_design import (
    DesignProblem,
    block_design,
    confidence_weight,
    design_gradient,
    design_objective,
    mvue_estimate,
    objective_from_precisions,
    solve_design,
    tail_bound_radius,
)
from resalloc.solver_core import SimplexConstraint
from resalloc.sources import SourceModel
from resalloc.support_alloc import SupportProblem, solve_support
from resalloc.tradeoffs import linear_precision, log_channel_precision, power_precision

from oracles import central_diff, grid_argmin

SUPPORTS_10 = [[3, 5, 7, 10], [5, 8, 10], [2, 7], [1, 2, 4, 6, 7, 9], [3, 4, 7]]


def identity_problem(kind="trace_inverse", lam=0.0):
    pm = ((0, linear_precision(1)), (1, linear_precision(1)))
    return DesignProblem(np.eye(2), pm, SimplexConstraint(1.0), kind, lam)


def random_problem(rng, kind="trace_inverse", lam=0.0, n=6, d=3, n_src=3):
    X = rng.normal(size=(n, d))
    pm = []
    for k in range(n):
        i = k % n_src
        s = float(rng.uniform(0.5, 3))
        pm.append((i, [linear_precision(s), power_precision(s, 0.6), log_channel_precision(s, 0.7)][k % 3]))
    return DesignProblem(X, tuple(pm), SimplexConstraint(1.0), kind, lam, n_src)


class TestEstimator:
    def test_identity(self):
        y = np.array([1.5, -2.0, 3.0])
        res = mvue_estimate(np.eye(3), np.eye(3), y)
        np.testing.assert_allclose(res.theta_hat, y)
        np.testing.assert_allclose(res.covariance, np.eye(3))

    def test_scalar_weighted(self):
        res = mvue_estimate(np.ones((2, 1)), np.diag([1.0, 3.0]), [0.0, 4.0])
        assert res.theta_hat[0] == pytest.approx(3.0)
        assert res.covariance[0, 0] == pytest.approx(0.25)
        assert res.mse_predicted == pytest.approx(0.25)

    def test_accepts_precision_vector(self):
        a = mvue_estimate(np.ones((2, 1)), [2.0, 5.0], [1.0, 2.0])
        assert a.theta_hat[0] == pytest.approx((2 + 10) / 7)

    def test_matches_normal_equations(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(7, 3))
        p = rng.uniform(0.5, 2, 7)
        y = rng.normal(size=7)
        res = mvue_estimate(X, p, y)
        W = np.diag(p)
        np.testing.assert_allclose(res.theta_hat, np.linalg.solve(X.T @ W @ X, X.T @ W @ y))

    def test_rank_deficient(self):
        with pytest.raises(RankDeficiencyError):
            mvue_estimate(np.array([[1.0, 1.0], [2.0, 2.0], [3, 3]]), np.ones(3), np.zeros(3))
        with pytest.raises(RankDeficiencyError):
            mvue_estimate(np.ones((1, 2)), np.ones(1), np.zeros(1))

    def test_nonpositive_precision(self):
        with pytest.raises(DomainError):
            mvue_estimate(np.eye(2), [1.0, 0.0], [0.0, 0.0])

    def test_non_diagonal_precision(self):
        with pytest.raises(DomainError):
            mvue_estimate(np.eye(2), np.ones((2, 2)), [0.0, 0.0])


class TestObjective:
    def test_trace_inverse(self):
        assert design_objective(identity_problem(), [0.5, 0.5]) == pytest.approx(4.0)

    def test_tail_bound(self):
        assert design_objective(identity_problem("tail_bound", 0.0), [0.5, 0.5]) == pytest.approx(math.sqrt(8))
        assert design_objective(identity_problem("tail_bound", 1.0), [0.5, 0.5]) == pytest.approx(math.sqrt(8) + 2)

    def test_singular_is_infinite(self):
        assert design_objective(identity_problem(), [1.0, 0.0]) == math.inf

    @pytest.mark.parametrize("seed", range(10))
    def test_singular_value_identities(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(int(rng.integers(3, 9)), 3))
        sv = np.linalg.svd(X, compute_uv=False)
        ones = np.ones(X.shape[0])
        assert objective_from_precisions(X, ones, "trace_inverse") == pytest.approx(np.sum(sv**-2.0), rel=1e-9)
        assert objective_from_precisions(X, ones, "tail_bound", 0.0) == pytest.approx(
            math.sqrt(np.sum(sv**-4.0)), rel=1e-9
        )
        op = objective_from_precisions(X, ones, "tail_bound", 1.0) - objective_from_precisions(
            X, ones, "tail_bound", 0.0
        )
        assert op == pytest.approx(np.max(sv**-2.0), rel=1e-9)

    def test_trace_inverse_midpoint_convex(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(6, 3))
        for _ in range(200):
            a, b = rng.uniform(0.1, 2, 6), rng.uniform(0.1, 2, 6)
            fa = objective_from_precisions(X, a, "trace_inverse")
            fb = objective_from_precisions(X, b, "trace_inverse")
            fm = objective_from_precisions(X, (a + b) / 2, "trace_inverse")
            assert fm <= (fa + fb) / 2 + 1e-10 * (fa + fb)

    def test_confidence_weight(self):
        assert confidence_weight(math.exp(-4)) == pytest.approx(2.0)
        with pytest.raises(DomainError):
            confidence_weight(1.0)


class TestGradient:
    def test_identity_example(self):
        np.testing.assert_allclose(design_gradient(identity_problem(), [0.5, 0.5]), [-4.0, -4.0])

    @pytest.mark.parametrize("kind", ["trace_inverse", "tail_bound"])
    def test_symmetric(self, kind):
        # lambda = 0: at the symmetric point the operator norm has a tie and only a subgradient exists
        g = design_gradient(identity_problem(kind, 0.0), [0.5, 0.5])
        assert g[0] == pytest.approx(g[1])

    @pytest.mark.parametrize("seed", range(10))
    @pytest.mark.parametrize("kind,lam", [("trace_inverse", 0.0), ("tail_bound", 0.0), ("tail_bound", 1.3)])
    def test_matches_finite_differences(self, seed, kind, lam):
        rng = np.random.default_rng(seed)
        p = random_problem(rng, kind, lam)
        r = rng.dirichlet(np.ones(3)) * 0.9 + 0.03
        g, tie = design_gradient(p, r, return_flag=True)
        assert not tie
        fd = central_diff(lambda x: design_objective(p, x), r, h=1e-6)
        np.testing.assert_allclose(g, fd, rtol=1e-5)

    def test_tie_flag(self):
        _, tie = design_gradient(identity_problem("tail_bound", 1.0), [0.5, 0.5], return_flag=True)
        assert tie

    def test_boundary_rejected(self):
        with pytest.raises(DomainError):
            design_gradient(identity_problem(), [1.0, 0.0])


class TestSolve:
    def test_identity_symmetric(self):
        for kind, lam in (("trace_inverse", 0.0), ("tail_bound", 1.0)):
            rep = solve_design(identity_problem(kind, lam))
            np.testing.assert_allclose(rep.allocation, [0.5, 0.5], atol=1e-4)

    def test_scalar_collapses_to_best_source(self):
        pm = ((0, linear_precision(1)), (1, linear_precision(4)))
        p = DesignProblem(np.ones((2, 1)), pm, SimplexConstraint(1.0))
        rep = solve_design(p)
        x, _ = grid_argmin(lambda q: 1 / (q[:, 0] + q[:, 1] / 4), 2, 1e-3)
        np.testing.assert_allclose(x, [1, 0])
        np.testing.assert_allclose(rep.allocation, [1, 0], atol=1e-6)

    def test_block_design_matches_support_solver(self):
        srcs = [SourceModel.shared([j - 1 for j in s], linear_precision(i + 1)) for i, s in enumerate(SUPPORTS_10)]
        c = SimplexConstraint(1.0)
        a = solve_design(block_design(srcs, 10, c))
        b = solve_support(SupportProblem(10, tuple(srcs), c))
        np.testing.assert_allclose(a.allocation, b.allocation, atol=5e-3)

    @pytest.mark.parametrize("seed", range(4))
    def test_tail_bound_against_grid(self, seed):
        rng = np.random.default_rng(seed)
        p = random_problem(rng, "tail_bound", confidence_weight(0.1))
        rep = solve_design(p)
        pts = __import__("oracles").simplex_grid(3, 0.01)
        best = min(design_objective(p, x) for x in pts)
        assert rep.objective <= best + 1e-6

    def test_shape_checks(self):
        with pytest.raises(ShapeMismatchError):
            DesignProblem(np.eye(2), ((0, linear_precision(1)),), SimplexConstraint(1.0))
        with pytest.raises(ValueError):
            DesignProblem(np.eye(2), ((0, linear_precision(1)), (1, linear_precision(1))), SimplexConstraint(1), "det")


class TestRadius:
    def test_identity_at_t_one(self):
        p = identity_problem()
        assert tail_bound_radius(p, [1.0, 1.0], math.exp(-1)) == pytest.approx(2 * math.sqrt(2) + 2)

    def test_limit_and_monotone(self):
        p = identity_problem()
        rs = [tail_bound_radius(p, [0.5, 0.5], d) for d in (0.5, 0.1, 0.01, 1e-4)]
        assert all(b > a for a, b in zip(rs, rs[1:]))
        assert tail_bound_radius(p, [0.5, 0.5], 1 - 1e-12) < 1e-5

    def test_bad_delta(self):
        with pytest.raises(DomainError):
            tail_bound_radius(identity_problem(), [0.5, 0.5], 0.0)
