import itertools
import math

import numpy as np
import pytest

from exceptions import CurvatureUnsupported, InvalidParams
from netgraph import DirectedGraph
from objective import ConstraintInterval, CostFamily
from oracle import (
    OptimumInterval,
    ValidFamilyParams,
    guarantee_params,
    is_valid_weights,
    membership,
    optimum_interval,
    optimum_interval_sampled,
    sample_valid_weights,
)


def brute_force_interval(centers, nonfaulty, params):
    """Scan every vertex of the valid-weight polytope: beta on a gamma-subset plus the rest on one agent."""
    support = sorted(nonfaulty) if params.mode == "byzantine" else list(range(1, len(centers) + 1))
    values = []
    for chosen in itertools.combinations(sorted(nonfaulty), params.gamma):
        for k in support:
            terms = [params.beta * centers[a - 1] for a in chosen] + [params.residual_mass * centers[k - 1]]
            values.append(math.fsum(terms))
    return min(values), max(values)


def test_byzantine_interval_for_k5_centers():
    costs = CostFamily.from_centers([0.0, 1.0, 2.0, 3.0, 0.0])
    interval = optimum_interval(costs, [1, 2, 3, 4], ValidFamilyParams(1.0 / 6.0, 3))
    assert interval.lo == pytest.approx(0.5)
    assert interval.hi == pytest.approx(2.5)
    assert interval.exact
    assert interval.width == pytest.approx(2.0)


def test_crash_mode_lets_faulty_centers_take_the_residual_mass():
    costs = CostFamily.from_centers([1.0, 2.0, 3.0, -5.0])
    crash = optimum_interval(costs, [1, 2, 3], ValidFamilyParams(0.25, 2, "crash"))
    assert (crash.lo, crash.hi) == (pytest.approx(-1.75), pytest.approx(2.75))
    byzantine = optimum_interval(costs, [1, 2, 3], ValidFamilyParams(0.25, 2, "byzantine"))
    assert (byzantine.lo, byzantine.hi) == (pytest.approx(1.25), pytest.approx(2.75))


def test_full_weight_on_gamma_agents():
    """beta * gamma = 1 leaves no residual mass."""
    costs = CostFamily.from_centers([0.0, 4.0, 8.0])
    for mode in ("byzantine", "crash"):
        interval = optimum_interval(costs, [1, 2], ValidFamilyParams(0.5, 2, mode))
        assert (interval.lo, interval.hi) == (2.0, 2.0)


def test_constrained_interval_projects_both_ends():
    costs = CostFamily.from_centers([0.0, 1.0, 2.0, 3.0, 0.0])
    params = ValidFamilyParams(1.0 / 6.0, 3)
    assert optimum_interval(costs, [1, 2, 3, 4], params, ConstraintInterval(1.0, 2.0)).to_dict()["lo"] == 1.0
    clipped = optimum_interval(costs, [1, 2, 3, 4], params, ConstraintInterval(3.0, 4.0))
    assert (clipped.lo, clipped.hi) == (3.0, 3.0)


CENTER_GRID = np.linspace(-3.0, 3.0, 7)


@pytest.mark.parametrize("mode", ["byzantine", "crash"])
@pytest.mark.parametrize("size", [1, 2, 3, 4, 5])
def test_greedy_matches_brute_force(size, mode):
    """Every |N| <= 5 with one extra faulty agent, centers drawn from a grid."""
    rng = np.random.default_rng(size)
    nonfaulty = list(range(1, size + 1))
    for _ in range(6):
        centers = [float(c) for c in rng.choice(CENTER_GRID, size=size + 1)]
        costs = CostFamily.from_centers(centers)
        for beta in (0.1, 0.2, 1.0 / size):
            for gamma in range(0, size + 1):
                params = ValidFamilyParams(beta, gamma, mode)
                interval = optimum_interval(costs, nonfaulty, params)
                assert (interval.lo, interval.hi) == brute_force_interval(centers, nonfaulty, params)


@pytest.mark.parametrize("n", [4, 5, 6])
def test_guarantees_on_complete_graphs(n):
    graph = DirectedGraph.complete(n)

    a1 = guarantee_params(graph, [n], 1, "A1")
    xi = 1.0 / (2 * (n - 2))
    assert a1.tau == (n - 1) ** (n - 1)
    assert a1.beta == xi ** (a1.tau * (n - 1))
    assert a1.precondition_holds

    a2 = guarantee_params(graph, [n], 1, "A2")
    assert a2.beta == min(1.0 / (2 * (n - 2)), 1.0 / (n - 1))
    assert a2.gamma == n - 2
    assert a2.feasible

    for algorithm in ("A3", "A5"):
        report = guarantee_params(graph, [n], 1, algorithm)
        assert report.beta == 1.0 / n ** n
        assert report.gamma == n - 1

    a6 = guarantee_params(graph, [n], 1, "A6")
    assert (a6.beta, a6.gamma) == (1.0 / n, n - 1)
    a6 = guarantee_params(graph, [], 1, "A6")
    assert (a6.beta, a6.gamma) == (1.0 / n, n)

    for algorithm in ("A4", "A5M"):
        report = guarantee_params(graph, [], 1, algorithm)
        assert (report.beta, report.gamma) == (1.0 / n, n)
        assert report.precondition_holds


def test_a2_guarantee_on_k5():
    report = guarantee_params(DirectedGraph.complete(5), [5], 1, "A2")
    assert report.beta == pytest.approx(1.0 / 6.0)
    assert report.gamma == 3
    assert report.feasible
    assert report.precondition_holds
    assert report.mode == "byzantine"


def test_a1_guarantee_on_k4():
    report = guarantee_params(DirectedGraph.complete(4), [4], 1, "A1")
    assert report.beta == pytest.approx(0.25 ** 81)
    assert report.gamma == 2
    assert report.tau == 27
    assert report.precondition_holds


def test_crash_guarantees(k4):
    a6 = guarantee_params(k4, [], 1, "A6")
    assert (a6.beta, a6.gamma) == (0.25, 4)
    a5 = guarantee_params(k4, [4], 1, "A5")
    assert a5.beta == pytest.approx(0.25 ** 4)
    assert a5.gamma == 3
    a4 = guarantee_params(DirectedGraph.cycle(5, bidirectional=True), [], 0, "A4")
    assert (a4.beta, a4.gamma) == (pytest.approx(0.2), 5)
    assert a4.precondition_holds


def test_guarantee_notes_an_infeasible_graph():
    report = guarantee_params(DirectedGraph.complete(3), [3], 1, "A2")
    assert not report.feasible
    assert report.to_dict()["infeasible_graph"]
    assert any("fails the byzantine condition" in note for note in report.notes)


def test_weight_validity():
    params = ValidFamilyParams(0.25, 3)
    assert is_valid_weights({1: 0.5, 2: 0.25, 3: 0.25}, params, [1, 2, 3], [1, 2, 3, 4])
    assert not is_valid_weights([0.25, 0.25, 0.25, 0.25], params, [1, 2, 3], [1, 2, 3, 4])
    assert is_valid_weights([0.25, 0.25, 0.25, 0.25], ValidFamilyParams(0.25, 3, "crash"), [1, 2, 3], [1, 2, 3, 4])
    assert not is_valid_weights({1: 0.5, 2: 0.5}, params, [1, 2, 3], [1, 2, 3, 4])
    assert not is_valid_weights([1.0, 0.0], params, [1, 2, 3], [1, 2, 3, 4])
    assert not is_valid_weights({1: 1.5, 2: -0.25, 3: -0.25}, ValidFamilyParams(0.0, 0), [1, 2, 3], [1, 2, 3])


@pytest.mark.parametrize("mode", ["byzantine", "crash"])
def test_sampled_weights_are_valid(mode):
    params = ValidFamilyParams(0.2, 2, mode)
    samples = sample_valid_weights(params, [1, 2, 3], [1, 2, 3, 4], 200, seed=5)
    assert samples.shape == (200, 4)
    assert all(is_valid_weights(row, params, [1, 2, 3], [1, 2, 3, 4]) for row in samples)
    if mode == "byzantine":
        assert np.all(samples[:, 3] == 0.0)
    assert sample_valid_weights(params, [1, 2, 3], [1, 2, 3, 4], 0, seed=5).shape == (0, 4)


def test_sampled_interval_sits_inside_the_exact_one():
    costs = CostFamily.from_centers([-2.0, 0.5, 1.0, 7.0])
    params = ValidFamilyParams(0.2, 2, "crash")
    exact = optimum_interval(costs, [1, 2, 3], params)
    sampled = optimum_interval_sampled(costs, [1, 2, 3], params, count=500, seed=1)
    assert not sampled.exact
    assert exact.lo - 1e-12 <= sampled.lo <= sampled.hi <= exact.hi + 1e-12


def test_sampled_interval_handles_general_curvature():
    costs = CostFamily.from_centers([0.0, 10.0], [1.0, 4.0])
    with pytest.raises(CurvatureUnsupported):
        optimum_interval(costs, [1, 2], ValidFamilyParams(0.5, 2))
    sampled = optimum_interval_sampled(costs, [1, 2], ValidFamilyParams(0.5, 2), count=10)
    assert sampled.lo == pytest.approx(8.0)
    assert sampled.hi == pytest.approx(8.0)


def test_membership_and_distance():
    interval = OptimumInterval(0.5, 2.5, "byzantine", 1.0 / 6.0, 3)
    assert membership(1.0, interval)
    assert membership(2.5005, interval, tol=1e-3)
    assert not membership(2.6, interval, tol=1e-3)
    assert interval.distance(3.0) == pytest.approx(0.5)
    assert interval.distance(0.0) == pytest.approx(0.5)
    assert interval.distance(1.0) == 0.0
    with pytest.raises(InvalidParams):
        membership(1.0, interval, tol=-1.0)


@pytest.mark.parametrize("beta, gamma, mode", [
    (0.6, 2, "byzantine"),
    (0.4, 2, "crash"),
    (0.1, 4, "byzantine"),
    (-0.1, 1, "byzantine"),
    (0.1, 1, "omission"),
])
def test_invalid_parameters(beta, gamma, mode):
    costs = CostFamily.from_centers([0.0, 1.0, 2.0])
    with pytest.raises(InvalidParams):
        optimum_interval(costs, [1, 2, 3], ValidFamilyParams(beta, gamma, mode))


def test_empty_interval_is_rejected():
    with pytest.raises(InvalidParams):
        OptimumInterval(1.0, 0.0, "crash", 0.1, 1)
