import logging
from pathlib import Path
from typing import Dict, Optional, Sequence

import pytest

from engine import Algorithm, ByzantineStrategy, CrashEvent, Scenario
from netgraph import DirectedGraph, FaultSetSpec
from objective import ConstraintInterval, CostFamily, StepSchedule

# Configure logging
logger = logging.getLogger(__name__)

K5_CENTERS = (0.0, 1.0, 2.0, 3.0, 0.0)


def make_scenario(
    graph: DirectedGraph,
    algorithm: str,
    rounds: int,
    centers: Sequence[float],
    f: int = 0,
    byzantine: Optional[Dict[int, ByzantineStrategy]] = None,
    crashes: Optional[Dict[int, CrashEvent]] = None,
    constraint: Optional[ConstraintInterval] = ConstraintInterval(-10.0, 10.0),
    initial: Optional[Sequence[float]] = None,
    seed: int = 0,
    name: str = "test",
) -> Scenario:
    """Scenario with unit-curvature costs and lambda[t] = 1/(t+1)."""
    byzantine = byzantine or {}
    crashes = crashes or {}
    algo = Algorithm(algorithm)
    return Scenario(
        graph=graph,
        faults=FaultSetSpec(f, frozenset(byzantine) | frozenset(crashes)),
        costs=CostFamily.from_centers(centers),
        schedule=StepSchedule(1.0, 1.0),
        algorithm=algo,
        rounds=rounds,
        seed=seed,
        initial_states=tuple(initial if initial is not None else centers),
        constraint=constraint if algo.projects else None,
        byzantine=byzantine,
        crashes=crashes,
        name=name,
    )


@pytest.fixture
def k4() -> DirectedGraph:
    return DirectedGraph.complete(4)


@pytest.fixture
def k5() -> DirectedGraph:
    return DirectedGraph.complete(5)


@pytest.fixture(autouse=True)
def isolated_settings(monkeypatch, tmp_path):
    """Keep every test away from the developer's .env and results database."""
    monkeypatch.setenv("FTOPT_DATABASE_URL", f"sqlite:///{tmp_path / 'results.db'}")
    monkeypatch.setenv("FTOPT_OUTPUT_DIR", str(tmp_path / "out"))
    monkeypatch.setenv("FTOPT_ENUMERATION_BUDGET", "1000000")
    monkeypatch.setenv("FTOPT_PI_THRESHOLD", "1e-6")
    monkeypatch.setenv("FTOPT_MEMBERSHIP_TOL", "1e-3")


SCENARIO_K5_A2 = """
name = "k5-a2"

[graph]
kind = "complete"
n = 5

[faults]
f = 1
[[faults.byzantine]]
agent = 5
strategy = "constant"
value = 100.0

[costs]
centers = [0.0, 1.0, 2.0, 3.0, 0.0]

[constraint]
lo = -10.0
hi = 10.0

[schedule]
lambda0 = 1.0
p = 1.0

[run]
algorithm = "A2"
rounds = 60
seed = 3
"""

SCENARIO_K4_A5 = """
name = "k4-a5"

[graph]
kind = "complete"
n = 4

[faults]
f = 1
[[faults.crash]]
agent = 4
round = 3

[costs]
centers = [0.0, 1.0, 2.0, 3.0]

[constraint]
lo = -10.0
hi = 10.0

[run]
algorithm = "A5"
rounds = 80
seed = 1
initial_states = [0.0, 1.0, 2.0, 3.0]
"""


@pytest.fixture
def scenario_files(tmp_path) -> Dict[str, Path]:
    files = {}
    for name, text in (("k5_a2", SCENARIO_K5_A2), ("k4_a5", SCENARIO_K4_A5)):
        path = tmp_path / f"{name}.toml"
        path.write_text(text, encoding="utf-8")
        files[name] = path
    return files
