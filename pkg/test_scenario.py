import pytest

from engine import Algorithm, ByzantineStrategy, CrashEvent
from exceptions import IncompatibleScenario, InvalidGraph, ParseError, PreconditionError
from netgraph import DirectedGraph
from objective import ConstraintInterval
from scenario import describe_error, load_scenario, load_sweep, scenario_from_dict, scenario_to_dict


def test_load_byzantine_scenario(scenario_files):
    scenario = load_scenario(scenario_files["k5_a2"])
    assert scenario.name == "k5-a2"
    assert scenario.algorithm == Algorithm.A2
    assert scenario.graph == DirectedGraph.complete(5)
    assert scenario.faults.f == 1
    assert scenario.faults.faulty == frozenset({5})
    assert scenario.byzantine[5] == ByzantineStrategy.constant(100.0)
    assert scenario.constraint == ConstraintInterval(-10.0, 10.0)
    assert scenario.initial_states == (0.0, 1.0, 2.0, 3.0, 0.0)
    assert (scenario.rounds, scenario.seed) == (60, 3)


def test_load_crash_scenario(scenario_files):
    scenario = load_scenario(scenario_files["k4_a5"])
    assert scenario.crashes == {4: CrashEvent(4, 3, None)}
    assert scenario.nonfaulty == (1, 2, 3)


def test_overrides_replace_the_run_section(scenario_files):
    scenario = load_scenario(scenario_files["k5_a2"], seed=9, rounds=5, algorithm="A1")
    assert (scenario.seed, scenario.rounds, scenario.algorithm) == (9, 5, Algorithm.A1)


def test_canonical_form_rebuilds_the_same_scenario(scenario_files):
    scenario = load_scenario(scenario_files["k5_a2"])
    data = scenario_to_dict(scenario)
    assert data["graph"]["kind"] == "edges"
    assert len(data["graph"]["edges"]) == 20
    assert scenario_from_dict(data) == scenario


def test_graph_file_is_resolved_next_to_the_scenario(tmp_path):
    (tmp_path / "ring.txt").write_text("n 3\n1 2\n2 3\n3 1\n", encoding="utf-8")
    (tmp_path / "ring.toml").write_text(
        '[graph]\nkind = "file"\nfile = "ring.txt"\n'
        "[costs]\ncenters = [0.0, 1.0, 2.0]\n"
        '[run]\nalgorithm = "A3"\nrounds = 4\n',
        encoding="utf-8",
    )
    scenario = load_scenario(tmp_path / "ring.toml")
    assert scenario.graph == DirectedGraph.cycle(3)
    assert scenario.constraint is None


def _minimal(**sections):
    data = {
        "graph": {"kind": "complete", "n": 4},
        "costs": {"centers": [0.0, 1.0, 2.0, 3.0]},
        "constraint": {"lo": -1.0, "hi": 4.0},
        "run": {"algorithm": "A5", "rounds": 3},
    }
    data.update(sections)
    return data


@pytest.mark.parametrize("data", [
    _minimal(graph={"kind": "complete"}),
    _minimal(graph={"kind": "complete", "n": 4, "colour": "red"}),
    _minimal(run={"algorithm": "A9", "rounds": 3}),
    _minimal(run={"algorithm": "A5", "rounds": -1}),
    _minimal(faults={"f": 1, "crash": [{"agent": 2, "round": -1}]}),
])
def test_schema_errors_become_parse_errors(data):
    with pytest.raises(ParseError):
        scenario_from_dict(data, path="bad.toml")


def test_semantic_errors_keep_their_type():
    with pytest.raises(IncompatibleScenario):
        scenario_from_dict(_minimal(run={"algorithm": "A1", "rounds": 3},
                                    faults={"f": 1, "crash": [{"agent": 4, "round": 1}]}))
    with pytest.raises(IncompatibleScenario):
        scenario_from_dict(_minimal(constraint=None))
    with pytest.raises(PreconditionError):
        scenario_from_dict(_minimal(costs={"centers": [0.0, 1.0]}))
    with pytest.raises(InvalidGraph):
        scenario_from_dict(_minimal(graph={"kind": "edges", "n": 3, "edges": [[1, 1]]}))


def test_unreadable_files(tmp_path):
    with pytest.raises(ParseError):
        load_scenario(tmp_path / "missing.toml")
    broken = tmp_path / "broken.toml"
    broken.write_text("[graph\nkind = 1\n", encoding="utf-8")
    with pytest.raises(ParseError) as info:
        load_scenario(broken)
    assert info.value.path == str(broken)


def test_sweep_cells_are_ordered(tmp_path, scenario_files):
    sweep = tmp_path / "sweep.toml"
    sweep.write_text(
        '[sweep]\nscenarios = ["k5_a2.toml", "k4_a5.toml"]\nalgorithms = ["A1", "A2"]\nseeds = [0, 1, 2]\n',
        encoding="utf-8",
    )
    cells = load_sweep(sweep)
    assert len(cells) == 12
    assert cells[0] == (scenario_files["k5_a2"], "A1", 0, None)
    assert cells[1] == (scenario_files["k5_a2"], "A1", 1, None)
    assert cells[3] == (scenario_files["k5_a2"], "A2", 0, None)
    assert cells[6][0] == scenario_files["k4_a5"]


def test_sweep_without_algorithms_keeps_each_scenario_algorithm(tmp_path, scenario_files):
    sweep = tmp_path / "sweep.toml"
    sweep.write_text('[sweep]\nscenarios = ["k4_a5.toml"]\nrounds = 7\n', encoding="utf-8")
    assert load_sweep(sweep) == [(scenario_files["k4_a5"], None, 0, 7)]
    sweep.write_text("[sweep]\nscenarios = []\n", encoding="utf-8")
    with pytest.raises(ParseError):
        load_sweep(sweep)


def test_describe_error():
    assert describe_error(IncompatibleScenario("no")) == "IncompatibleScenario: no"
    assert describe_error(KeyError("x")).startswith("KeyError")
