import numpy as np
import pytest

from resalloc.errors import DomainError, UnobservableCoordinateError
from resalloc.solver_core import SimplexConstraint, solve_simplex
from resalloc.sources import SourceModel, reciprocal_sets
from resalloc.support_alloc import (
    SupportProblem,
    solve_support,
    solve_total_independence_closed,
    support_gradient,
    support_objective,
)
from resalloc.tradeoffs import linear_precision, log_channel_precision, power_precision

from oracles import central_diff, grid_argmin

SUPPORTS_10 = [[3, 5, 7, 10], [5, 8, 10], [2, 7], [1, 2, 4, 6, 7, 9], [3, 4, 7]]


def ten_coordinates(alpha=None):
    fs = [linear_precision(i + 1) if alpha is None else power_precision(i + 1, alpha) for i in range(5)]
    srcs = [SourceModel.shared([j - 1 for j in s], f) for s, f in zip(SUPPORTS_10, fs)]
    return SupportProblem(10, tuple(srcs), SimplexConstraint(1.0))


class TestReciprocalSets:
    def test_ten_coordinate_table(self):
        sets = reciprocal_sets(ten_coordinates().sources, 10)
        assert sets[6] == (0, 2, 3, 4)
        assert sets[0] == (3,)

    def test_total_redundancy(self):
        srcs = [SourceModel.shared(range(4), linear_precision(1))]
        assert reciprocal_sets(srcs, 4) == [(0,)] * 4

    def test_uncovered(self):
        with pytest.raises(UnobservableCoordinateError) as exc:
            reciprocal_sets([SourceModel.shared([0, 2], linear_precision(1))], 3)
        assert exc.value.coordinate == 1


class TestTenCoordinates:
    def test_linear_allocation(self):
        rep = solve_support(ten_coordinates())
        assert rep.converged
        np.testing.assert_allclose(rep.allocation, [0.194, 0.207, 0.000, 0.599, 0.000], atol=5e-3)
        assert rep.allocation[4] <= 1e-3

    def test_power_allocation_not_sparse(self):
        rep = solve_support(ten_coordinates(0.6))
        assert rep.converged
        np.testing.assert_allclose(rep.allocation, [0.160, 0.177, 0.018, 0.631, 0.014], atol=5e-3)
        assert np.all(rep.allocation > 1e-3)

    def test_report_details(self):
        p = ten_coordinates()
        rep = solve_support(p)
        assert rep.details["per_coord_loss"].sum() == pytest.approx(rep.objective, rel=1e-12)
        assert rep.details["reciprocal_sets"][0] == [3]

    @pytest.mark.parametrize("alpha", [None, 0.6])
    def test_matches_coarse_grid(self, alpha):
        p = ten_coordinates(alpha)
        rep = solve_support(p)
        # every grid point is feasible, so none may beat the solver
        from oracles import simplex_grid

        pts = simplex_grid(5, 0.05)
        vals = [support_objective(p, x) for x in pts]
        assert rep.objective <= min(vals) + 1e-9


class TestTotalIndependence:
    def test_two_sources_closed_form_and_grid(self):
        np.testing.assert_allclose(solve_total_independence_closed([1, 2], 1.0), [1 / 3, 2 / 3])
        with np.errstate(divide="ignore"):
            x, _ = grid_argmin(lambda p: 1 / p[:, 0] + 4 / p[:, 1], 2, 1e-4)
        np.testing.assert_allclose(x, [1 / 3, 2 / 3], atol=1e-4)
        srcs = [SourceModel.shared([0], linear_precision(1)), SourceModel.shared([1], linear_precision(4))]
        rep = solve_support(SupportProblem(2, tuple(srcs), SimplexConstraint(1.0)))
        np.testing.assert_allclose(rep.allocation, [1 / 3, 2 / 3], atol=1e-6)

    def test_examples(self):
        np.testing.assert_allclose(solve_total_independence_closed([1, 1], 2.0), [1, 1])
        np.testing.assert_allclose(solve_total_independence_closed([1, 2, 3], 6.0), [1, 2, 3])

    def test_worse_sources_get_more(self):
        rng = np.random.default_rng(0)
        sigma = np.sort(rng.uniform(0.1, 4, 8))
        r = solve_total_independence_closed(sigma, 5.0)
        assert np.all(np.diff(r) > 0)

    def test_rejects_nonpositive(self):
        with pytest.raises(DomainError):
            solve_total_independence_closed([1, 0], 1.0)


def test_total_redundancy_recovers_best_source():
    d = 4
    sig = [2.0, 0.5, 3.0]
    # l_i^(j) = l_i / d with l_i = sigma_i^2 / r_i, i.e. per-coordinate variance d * ... / d
    srcs = [SourceModel.shared(range(d), linear_precision(s / d)) for s in sig]
    rep = solve_support(SupportProblem(d, tuple(srcs), SimplexConstraint(1.0)))
    best = solve_simplex([linear_precision(s) for s in sig], SimplexConstraint(1.0))
    # aggregated total loss 1 / sum_i q_i(r_i)
    assert rep.objective == pytest.approx(1.0 / best.objective, abs=1e-6)


@pytest.mark.parametrize("seed", range(10))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    p = ten_coordinates(float(rng.uniform(0.3, 1.0)))
    r = rng.dirichlet(np.ones(5)) * 0.9 + 0.02
    g = support_gradient(p, r)
    fd = central_diff(lambda x: support_objective(p, x), r, h=1e-6)
    np.testing.assert_allclose(g, fd, rtol=1e-5)


def test_gradient_needs_positive_precision():
    with pytest.raises(DomainError):
        support_gradient(ten_coordinates(), [0.5, 0.5, 0, 0, 0])


def test_objective_midpoint_convex():
    rng = np.random.default_rng(4)
    for p in (ten_coordinates(), ten_coordinates(0.6)):
        for _ in range(200):
            a, b = rng.dirichlet(np.ones(5)), rng.dirichlet(np.ones(5))
            fa, fb, fm = support_objective(p, a), support_objective(p, b), support_objective(p, (a + b) / 2)
            assert fm <= (fa + fb) / 2 + 1e-12 * (1 + abs(fa) + abs(fb))


def test_per_coordinate_tradeoffs():
    srcs = [
        SourceModel.per_coordinate([0, 1], [linear_precision(1), log_channel_precision(1, 2)]),
        SourceModel.shared([1], power_precision(2, 0.5)),
    ]
    p = SupportProblem(2, tuple(srcs), SimplexConstraint(2.0))
    rep = solve_support(p)
    x, v = grid_argmin(lambda pts: np.array([support_objective(p, q) for q in pts]), 2, 1e-3, 2.0)
    assert rep.objective <= v + 1e-9
    np.testing.assert_allclose(rep.allocation, x, atol=3e-3)
