import itertools
from collections import deque

import numpy as np
import pytest

from exceptions import EnumerationBudgetExceeded, InvalidGraph, ParseError, PreconditionError
from netgraph import (
    UNIQUE_COMPONENT,
    DirectedGraph,
    FaultSetSpec,
    byzantine_family_size,
    check_assumption_byzantine,
    check_assumption_crash,
    enumerate_reduced_byzantine,
    enumerate_reduced_crash,
    parse_edge_list,
    source_component,
)


def test_complete_four_tolerates_one_byzantine_fault(k4):
    """K4 with f=1 satisfies the Byzantine condition."""
    report = check_assumption_byzantine(k4, 1)
    assert report.holds
    assert report.gamma >= 1
    assert report.witness is None


def test_complete_three_fails_with_edgeless_witness():
    """K3 with f=1: removing one agent and one edge per survivor leaves no edges."""
    report = check_assumption_byzantine(DirectedGraph.complete(3), 1)
    assert not report.holds
    assert len(report.witness["faulty"]) == 1
    survivors = {1, 2, 3} - set(report.witness["faulty"])
    removed = {tuple(e) for e in report.witness["removed_edges"]}
    remaining = {(j, i) for j in survivors for i in survivors if i != j} - removed
    assert remaining == set()
    assert any("2f+1" in note for note in report.notes)


def test_two_disjoint_pairs_fail_the_crash_condition():
    graph = DirectedGraph.undirected(4, [(1, 2), (3, 4)])
    report = check_assumption_crash(graph, 0)
    assert not report.holds
    assert "weakly connected" in report.witness["reason"]


def test_isolated_agent_witness_names_the_component_clause():
    graph = DirectedGraph.undirected(3, [(1, 2)])
    report = check_assumption_crash(graph, 0)
    assert not report.holds
    assert report.witness["faulty"] == []
    assert "agents [3] are cut off" in report.witness["reason"]
    assert UNIQUE_COMPONENT in report.witness["reason"]


def test_path_holds_with_no_crashes():
    report = check_assumption_crash(DirectedGraph.path(4), 0)
    assert report.holds
    assert report.gamma == 1


def test_directed_cycle_source_is_everyone():
    report = check_assumption_crash(DirectedGraph.cycle(5), 0)
    assert report.holds
    assert report.gamma == 5


def test_star_fails_when_center_may_crash():
    report = check_assumption_crash(DirectedGraph.star(4), 1)
    assert not report.holds
    assert report.witness["faulty"] == [1]


def test_crash_budget_must_leave_an_agent(k4):
    with pytest.raises(PreconditionError):
        check_assumption_crash(k4, 4)
    with pytest.raises(PreconditionError):
        check_assumption_byzantine(k4, 4)


def test_byzantine_family_counts(k4):
    """K4 minus one agent leaves K3; each survivor drops 0 or 1 of its 2 in-edges."""
    assert byzantine_family_size(k4, [4], 1) == 27
    assert byzantine_family_size(k4, [4], 1, maximal_only=True) == 8
    family = enumerate_reduced_byzantine(k4, [4], 1, maximal_only=True)
    assert len(family) == 8
    assert family.tau == 27
    assert family.tau_exact
    assert family.min_source_size == 2
    full = enumerate_reduced_byzantine(k4, [4], 1)
    assert len(full) == 27
    assert full.members[0].removed == ()


def test_enumeration_budget_is_enforced(k4):
    with pytest.raises(EnumerationBudgetExceeded) as info:
        enumerate_reduced_byzantine(k4, [4], 1, budget=5)
    assert info.value.count == 27
    with pytest.raises(EnumerationBudgetExceeded):
        check_assumption_byzantine(k4, 1, budget=3)


def test_byzantine_family_rejects_too_many_faulty(k4):
    with pytest.raises(PreconditionError):
        enumerate_reduced_byzantine(k4, [3, 4], 1)


def test_crash_family_has_one_member_per_crash_set(k4):
    family = enumerate_reduced_crash(k4, 1)
    assert len(family) == 5
    crashed_one = [m for m in family if m.faulty == (2,)][0]
    assert all(2 not in e for e in crashed_one.graph.edges)
    assert crashed_one.graph.vertices == (1, 2, 3, 4)


def test_source_component():
    assert source_component(DirectedGraph.path(4)) == frozenset({1})
    assert source_component(DirectedGraph.undirected(4, [(1, 2), (3, 4)])) == frozenset()
    assert source_component(DirectedGraph.complete(3)) == frozenset({1, 2, 3})


def _all_graphs(n):
    pairs = [(j, i) for j in range(1, n + 1) for i in range(1, n + 1) if i != j]
    for keep in itertools.product((False, True), repeat=len(pairs)):
        yield DirectedGraph.from_edges(n, (e for e, k in zip(pairs, keep) if k))


def _random_graphs(count, seed, sizes=(4, 5, 6), densities=(0.2, 0.35, 0.5, 0.8)):
    rng = np.random.default_rng(seed)
    for k in range(count):
        n = int(rng.choice(sizes))
        yield DirectedGraph.random(n, float(rng.choice(densities)), seed * 1000 + k)


def _small_graphs():
    for n in (1, 2, 3):
        yield from _all_graphs(n)
    yield from _random_graphs(150, 7)


def _reaches_everyone(graph, v):
    seen, queue = {v}, deque([v])
    while queue:
        for w in graph.out_neighbors(queue.popleft()):
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return len(seen) == graph.n


def test_source_component_matches_breadth_first_search():
    for graph in _small_graphs():
        expected = frozenset(v for v in graph.vertices if _reaches_everyone(graph, v))
        assert source_component(graph) == expected, graph.sorted_edges()


def test_byzantine_check_without_faults_asks_for_a_source():
    for graph in _small_graphs():
        report = check_assumption_byzantine(graph, 0)
        assert report.holds == bool(source_component(graph)), graph.sorted_edges()
        if report.holds:
            assert report.gamma == len(source_component(graph))


def test_byzantine_check_implies_in_degree_floor():
    graphs = [DirectedGraph.complete(n) for n in (4, 5)]
    graphs += list(_random_graphs(40, 11, sizes=(4, 5), densities=(0.7, 0.85, 0.95)))
    passing = [g for g in graphs if check_assumption_byzantine(g, 1).holds]
    assert len(passing) >= 2
    for graph in passing:
        assert graph.min_in_degree >= 3, graph.sorted_edges()
    # with f=0 an in-degree 0 root is still a source
    star_out = DirectedGraph.from_edges(3, [(1, 2), (1, 3)])
    assert check_assumption_byzantine(star_out, 0).holds
    assert star_out.min_in_degree == 0


def _with_random_edges(graph, rng, count):
    missing = [(j, i) for j in graph.vertices for i in graph.vertices if i != j and (j, i) not in graph.edges]
    picked = rng.permutation(len(missing))[:count]
    return DirectedGraph.from_edges(graph.n, set(graph.edges) | {missing[k] for k in picked})


@pytest.mark.parametrize("check", [check_assumption_byzantine, check_assumption_crash])
def test_conditions_survive_edge_additions(check):
    rng = np.random.default_rng(3)
    tried = 0
    for f in (0, 1):
        for graph in _random_graphs(40, 5 + f, sizes=(4, 5), densities=(0.5, 0.7, 0.85)):
            if not check(graph, f).holds:
                continue
            for _ in range(3):
                graph = _with_random_edges(graph, rng, int(rng.integers(1, 4)))
                assert check(graph, f).holds, (f, graph.sorted_edges())
                tried += 1
    assert tried > 0


def test_adjacency_rows_receive_from_columns():
    H = DirectedGraph.path(3).adjacency()
    assert np.array_equal(H, np.array([[1, 0, 0], [1, 1, 0], [0, 1, 1]], dtype=float))


def test_graph_validation():
    with pytest.raises(InvalidGraph):
        DirectedGraph.from_edges(3, [(1, 1)])
    with pytest.raises(InvalidGraph):
        DirectedGraph.from_edges(3, [(1, 4)])
    with pytest.raises(InvalidGraph):
        DirectedGraph.from_edges(0, [])


def test_random_graph_is_seeded():
    assert DirectedGraph.random(6, 0.5, 11) == DirectedGraph.random(6, 0.5, 11)


def test_fault_set_validation(k4):
    FaultSetSpec(1, frozenset({4})).validate(k4)
    assert FaultSetSpec(1, frozenset({4})).phi_of(k4, 1) == 1
    with pytest.raises(PreconditionError):
        FaultSetSpec(1, frozenset({3, 4})).validate(k4)
    with pytest.raises(PreconditionError):
        FaultSetSpec(1, frozenset({7})).validate(k4)


def test_parse_edge_list():
    graph = parse_edge_list("# triangle\nn 3\n1 2\n2 3  # closing edge next\n3 1\n")
    assert graph == DirectedGraph.cycle(3)
    assert parse_edge_list(graph.to_edge_list_text()) == graph


@pytest.mark.parametrize("text, line", [
    ("n 3\n1 2\n1 x\n", 3),
    ("3\n1 2\n", 1),
    ("n 3\n1 5\n", 2),
    ("n 3\n2 2\n", 2),
])
def test_parse_edge_list_errors_carry_line_numbers(text, line):
    with pytest.raises(ParseError) as info:
        parse_edge_list(text, "g.txt")
    assert info.value.line == line
    assert info.value.path == "g.txt"
