"""
End-to-end properties at desk scale.

The default runs use shortened horizons and fewer seeds; the ``slow``
variants repeat them at full size (``pytest -m slow``).
"""
import networkx as nx
import numpy as np
import pytest

from conftest import K5_CENTERS, make_scenario
from engine import ByzantineStrategy, CrashEvent, audit_trace, run
from ergodic import RateParams, build_chain, certify_rate_byzantine, certify_rate_crash, certify_reconstruction
from netgraph import DirectedGraph, check_assumption_crash
from summary import summarize

STRATEGIES = {
    "constant": ByzantineStrategy.constant(100.0),
    "uniform_random": ByzantineStrategy.uniform_random(-20.0, 20.0),
    "per_neighbor_split": ByzantineStrategy.per_neighbor_split(lo=-10.0, hi=10.0),
    "push_extreme": ByzantineStrategy.push_extreme("hi"),
}

CENTER_RANGE = 3.0

COEFFICIENT_CHECKS = (
    "delta_le_one_minus_eta",
    "delta_monotone",
    "eta_monotone",
    "crashed_columns_zero",
    "sub_multiplicativity",
    "block_bound",
)


def _byzantine_optimization(algorithm, strategy, seed, rounds, reconstruct=False):
    scenario = make_scenario(DirectedGraph.complete(5), algorithm, rounds, K5_CENTERS, f=1,
                             byzantine={5: STRATEGIES[strategy]}, seed=seed)
    trace = run(scenario)
    record = summarize(trace)
    # spread settles at the order of one gradient step
    assert record.final_spread <= 10 * scenario.schedule.step(rounds - 1) * CENTER_RANGE
    assert record.member, (record.consensus_value, record.interval_lo, record.interval_hi)
    assert record.audit_failed == 0
    if reconstruct:
        report = certify_reconstruction(trace, build_chain(trace))
        assert report.passed, report.to_dict()
    return record


@pytest.mark.parametrize("strategy", sorted(STRATEGIES))
@pytest.mark.parametrize("algorithm", ["A1", "A2"])
def test_byzantine_optimization_on_k5(algorithm, strategy):
    for seed in (0, 1):
        record = _byzantine_optimization(algorithm, strategy, seed, 2000, reconstruct=seed == 0)
        if algorithm == "A2":
            assert (record.beta, record.gamma) == (pytest.approx(1.0 / 6.0), 3)


def test_a2_constant_adversary_settles_at_one():
    record = _byzantine_optimization("A2", "constant", 0, 2000)
    assert record.consensus_value == pytest.approx(1.0, abs=5e-3)


@pytest.mark.slow
@pytest.mark.parametrize("strategy", sorted(STRATEGIES))
@pytest.mark.parametrize("algorithm", ["A1", "A2"])
def test_byzantine_optimization_full_scale(algorithm, strategy):
    for seed in range(25):
        _byzantine_optimization(algorithm, strategy, seed, 10_000, reconstruct=seed == 0)


def _feasible_crash_graphs(count, f=1):
    graphs = []
    for seed in range(1000):
        if len(graphs) == count:
            break
        graph = DirectedGraph.random(4 + seed % 3, 0.7, seed)
        if check_assumption_crash(graph, f).holds:
            graphs.append(graph)
    assert len(graphs) == count
    return graphs


def _random_crash(graph, rng, latest):
    agent = int(rng.integers(1, graph.n + 1))
    return {agent: CrashEvent(agent, int(rng.integers(0, latest + 1)))}


def test_crash_consensus_on_random_digraphs():
    rng = np.random.default_rng(2024)
    for k, graph in enumerate(_feasible_crash_graphs(20)):
        centers = tuple(float(c) for c in rng.normal(0.0, 5.0, size=graph.n))
        crashes = _random_crash(graph, rng, 30) if k % 4 else {}
        trace = run(make_scenario(graph, "A3", 500, centers, f=1, crashes=crashes, seed=k))
        assert trace.spread() <= 1e-6, (k, graph.sorted_edges(), crashes)
        assert audit_trace(trace).total_failed == 0


def test_star_with_crashed_center_never_agrees():
    graph = DirectedGraph.star(4)
    assert not check_assumption_crash(graph, 1).holds
    trace = run(make_scenario(graph, "A3", 500, (0.0, 1.0, 2.0, 3.0), f=1, crashes={1: CrashEvent(1, 0)}))
    assert trace.spread() >= 0.5 * trace.spread(0)
    assert trace.spread(0) == 2.0


def _crash_executions(count, rounds):
    graphs = _feasible_crash_graphs(min(count, 20))
    for k in range(count):
        graph = graphs[k % len(graphs)]
        rng = np.random.default_rng(k)
        centers = tuple(float(c) for c in rng.uniform(-5.0, 5.0, size=graph.n))
        algorithm = "A3" if k % 2 else "A5"
        scenario = make_scenario(graph, algorithm, rounds, centers, f=1, crashes=_random_crash(graph, rng, rounds // 2),
                                 seed=k)
        yield graph, run(scenario, check_feasibility=False)


def _check_coefficient_bounds(count, rounds):
    for graph, trace in _crash_executions(count, rounds):
        chain = build_chain(trace)
        report = certify_rate_crash(chain, RateParams.crash(graph, 1), seed=trace.scenario.seed)
        for name in COEFFICIENT_CHECKS:
            check = report.checks[name]
            assert check.violations == 0, (name, check.first_violation, trace.scenario.seed)
        assert certify_reconstruction(trace, chain).passed


def test_coefficient_bounds_on_crash_executions():
    _check_coefficient_bounds(40, 20)


@pytest.mark.slow
def test_coefficient_bounds_on_a_thousand_executions():
    _check_coefficient_bounds(1000, 40)


def _connected_undirected_graphs(count):
    graphs = []
    for seed in range(1000):
        if len(graphs) == count:
            break
        rng = np.random.default_rng(seed)
        n = int(rng.integers(4, 9))
        pairs = [(a, b) for a in range(1, n + 1) for b in range(a + 1, n + 1) if rng.random() < 0.5]
        graph = DirectedGraph.undirected(n, pairs)
        if nx.is_connected(graph.to_networkx().to_undirected()):
            graphs.append(graph)
    assert len(graphs) == count
    return graphs


def test_metropolis_average_consensus():
    for k, graph in enumerate(_connected_undirected_graphs(10)):
        rng = np.random.default_rng(100 + k)
        initial = tuple(float(x) for x in rng.normal(0.0, 10.0, size=graph.n))

        trace = run(make_scenario(graph, "A4", 2000, initial))
        assert trace.consensus_value() == pytest.approx(np.mean(initial), abs=1e-6)
        assert trace.spread() <= 1e-6

        cut = set(nx.articulation_points(graph.to_networkx().to_undirected()))
        crashed = max(v for v in graph.vertices if v not in cut)
        trace = run(make_scenario(graph, "A4", 2000, initial, f=1, crashes={crashed: CrashEvent(crashed, 0)}),
                    check_feasibility=False)
        survivors = [initial[v - 1] for v in graph.vertices if v != crashed]
        assert trace.consensus_value() == pytest.approx(np.mean(survivors), abs=1e-6)
        assert trace.spread() <= 1e-6
        chain = build_chain(trace)
        assert all(m.is_doubly_stochastic(1e-12) for m in chain.matrices)


@pytest.mark.slow
def test_rate_bound_on_k4_at_several_start_rounds():
    k4 = DirectedGraph.complete(4)
    scenario = make_scenario(k4, "A1", 400, (0.0, 1.0, 2.0, 0.0), f=1,
                             byzantine={4: ByzantineStrategy.uniform_random(-5.0, 5.0)}, seed=11)
    chain = build_chain(run(scenario))
    params = RateParams.byzantine(k4, [4], 1)
    for r in (1, 100, 250):
        report = certify_rate_byzantine(chain, params, r, window=100, threshold=1e-4)
        assert report.passed, report.to_dict()
        assert report.checks["column_lower_bound"].samples == 1


@pytest.mark.slow
def test_repeated_runs_are_identical(scenario_files, tmp_path):
    from main import main

    outputs = []
    for k in range(10):
        out = tmp_path / f"rep{k}"
        assert main(["run", str(scenario_files["k4_a5"]), "--out", str(out)]) == 0
        outputs.append(tuple((out / name).read_bytes() for name in ("trace.csv", "trace.json", "summary.json")))
    assert len(set(outputs)) == 1
