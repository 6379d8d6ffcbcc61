"""
Scenario and sweep files (TOML) validated with pydantic.

A scenario file looks like::

    name = "k5-a1"

    [graph]
    kind = "complete"      # complete | path | cycle | bicycle | star | random | edges | file
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
    algorithm = "A1"
    rounds = 1000
    seed = 0
"""
import logging
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from engine import Algorithm, ByzantineStrategy, CrashEvent, Scenario, StrategyKind
from exceptions import FtOptSimError, ParseError
from netgraph import DirectedGraph, FaultSetSpec, load_graph
from objective import ConstraintInterval, CostFamily, StepSchedule

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

# Configure logging
logger = logging.getLogger(__name__)


class GraphSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["complete", "path", "cycle", "bicycle", "star", "random", "edges", "file"] = "edges"
    n: Optional[int] = Field(default=None, ge=1)
    edges: List[Tuple[int, int]] = Field(default_factory=list)
    center: int = 1
    p: float = Field(default=0.5, ge=0.0, le=1.0)
    seed: int = 0
    file: Optional[str] = None

    @model_validator(mode="after")
    def check_size(self):
        if self.kind == "file":
            if not self.file:
                raise ValueError("graph kind 'file' needs a file path")
        elif self.n is None:
            raise ValueError(f"graph kind {self.kind!r} needs n")
        return self


class ByzantineSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    agent: int
    strategy: StrategyKind
    value: float = 0.0
    lo: float = 0.0
    hi: float = 1.0
    endpoint: Literal["lo", "hi"] = "hi"
    split: Dict[int, float] = Field(default_factory=dict)
    gradient: Optional[float] = None


class CrashSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    agent: int
    round: int = Field(ge=0)
    delivered: Optional[List[int]] = None


class FaultsSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    f: int = Field(default=0, ge=0)
    byzantine: List[ByzantineSection] = Field(default_factory=list)
    crash: List[CrashSection] = Field(default_factory=list)


class CostsSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    centers: List[float]
    curvatures: List[float] = Field(default_factory=list)


class ConstraintSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    lo: float
    hi: float


class ScheduleSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    lambda0: float = 1.0
    p: float = 1.0


class RunSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    algorithm: Algorithm
    rounds: int = Field(ge=0)
    seed: int = 0
    initial_states: Optional[List[float]] = None


class ScenarioFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = "scenario"
    graph: GraphSection
    faults: FaultsSection = Field(default_factory=FaultsSection)
    costs: CostsSection
    constraint: Optional[ConstraintSection] = None
    schedule: ScheduleSection = Field(default_factory=ScheduleSection)
    run: RunSection


class SweepSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    scenarios: List[str] = Field(min_length=1)
    algorithms: List[Algorithm] = Field(default_factory=list)
    seeds: List[int] = Field(default_factory=lambda: [0])
    rounds: Optional[int] = Field(default=None, ge=0)


class SweepFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    sweep: SweepSection


def _build_graph(section: GraphSection, base: Optional[Path]) -> DirectedGraph:
    kind, n = section.kind, section.n
    if kind == "complete":
        return DirectedGraph.complete(n)
    if kind == "path":
        return DirectedGraph.path(n)
    if kind == "cycle":
        return DirectedGraph.cycle(n)
    if kind == "bicycle":
        return DirectedGraph.cycle(n, bidirectional=True)
    if kind == "star":
        return DirectedGraph.star(n, section.center)
    if kind == "random":
        return DirectedGraph.random(n, section.p, section.seed)
    if kind == "file":
        path = Path(section.file)
        if base is not None and not path.is_absolute():
            path = base / path
        return load_graph(path)
    return DirectedGraph.from_edges(n, section.edges)


def build_scenario(model: ScenarioFile, base: Optional[Path] = None) -> Scenario:
    """Turn a validated scenario model into an engine Scenario."""
    graph = _build_graph(model.graph, base)
    byzantine = {
        b.agent: ByzantineStrategy(b.strategy, value=b.value, lo=b.lo, hi=b.hi, endpoint=b.endpoint,
                                   split=tuple(sorted(b.split.items())), gradient=b.gradient)
        for b in model.faults.byzantine
    }
    crashes = {
        c.agent: CrashEvent(c.agent, c.round, frozenset(c.delivered) if c.delivered is not None else None)
        for c in model.faults.crash
    }
    faults = FaultSetSpec(model.faults.f, frozenset(byzantine) | frozenset(crashes))
    costs = CostFamily.from_centers(model.costs.centers, model.costs.curvatures)
    constraint = ConstraintInterval(model.constraint.lo, model.constraint.hi) if model.constraint else None
    initial = model.run.initial_states
    if initial is None:
        initial = costs.centers()
    scenario = Scenario(
        graph=graph,
        faults=faults,
        costs=costs,
        schedule=StepSchedule(model.schedule.lambda0, model.schedule.p),
        algorithm=model.run.algorithm,
        rounds=model.run.rounds,
        seed=model.run.seed,
        initial_states=tuple(float(x) for x in initial),
        constraint=constraint,
        byzantine=byzantine,
        crashes=crashes,
        name=model.name,
    )
    scenario.validate()
    return scenario


def _format_validation(e: ValidationError) -> str:
    parts = []
    for err in e.errors():
        where = ".".join(str(p) for p in err["loc"])
        parts.append(f"{where}: {err['msg']}")
    return "; ".join(parts)


def _read_toml(path: Union[str, Path]) -> dict:
    try:
        with open(path, "rb") as handle:
            return tomllib.load(handle)
    except OSError as e:
        raise ParseError(f"cannot read file: {str(e)}", str(path))
    except tomllib.TOMLDecodeError as e:
        raise ParseError(str(e), str(path), getattr(e, "lineno", None))


def scenario_from_dict(data: dict, base: Optional[Path] = None, path: Optional[str] = None) -> Scenario:
    try:
        model = ScenarioFile.model_validate(data)
    except ValidationError as e:
        raise ParseError(_format_validation(e), path)
    return build_scenario(model, base)


def load_scenario(path: Union[str, Path], seed: Optional[int] = None, rounds: Optional[int] = None,
                  algorithm: Optional[str] = None) -> Scenario:
    """Read a scenario file; ``seed``/``rounds``/``algorithm`` override the file."""
    path = Path(path)
    data = _read_toml(path)
    run = data.setdefault("run", {})
    if isinstance(run, dict):
        if seed is not None:
            run["seed"] = seed
        if rounds is not None:
            run["rounds"] = rounds
        if algorithm is not None:
            run["algorithm"] = algorithm
    scenario = scenario_from_dict(data, path.parent, str(path))
    logger.info(f"Loaded scenario {scenario.name} from {path}")
    return scenario


def scenario_to_dict(scenario: Scenario) -> dict:
    """Canonical dictionary form; scenario_from_dict inverts it."""
    byzantine = []
    for agent in sorted(scenario.byzantine):
        s = scenario.byzantine[agent]
        byzantine.append({
            "agent": agent, "strategy": s.kind.value, "value": s.value, "lo": s.lo, "hi": s.hi,
            "endpoint": s.endpoint, "split": {str(k): v for k, v in s.split}, "gradient": s.gradient,
        })
    crash = []
    for agent in sorted(scenario.crashes):
        c = scenario.crashes[agent]
        crash.append({"agent": agent, "round": c.crash_round,
                      "delivered": sorted(c.delivered) if c.delivered is not None else None})
    data = {
        "name": scenario.name,
        "graph": {"kind": "edges", "n": scenario.graph.n, "edges": [list(e) for e in scenario.graph.sorted_edges()]},
        "faults": {"f": scenario.faults.f, "byzantine": byzantine, "crash": crash},
        "costs": {"centers": [c.center for c in scenario.costs.costs],
                  "curvatures": [c.curvature for c in scenario.costs.costs]},
        "schedule": {"lambda0": scenario.schedule.lambda0, "p": scenario.schedule.p},
        "run": {"algorithm": scenario.algorithm.value, "rounds": scenario.rounds, "seed": scenario.seed,
                "initial_states": list(scenario.initial_states)},
    }
    if scenario.constraint is not None:
        data["constraint"] = {"lo": scenario.constraint.lo, "hi": scenario.constraint.hi}
    return data


def load_sweep(path: Union[str, Path]) -> List[Tuple[Path, Optional[str], int, Optional[int]]]:
    """
    Expand a sweep file into (scenario path, algorithm, seed, rounds) cells in
    deterministic order: scenarios, then algorithms, then seeds.
    """
    path = Path(path)
    data = _read_toml(path)
    try:
        model = SweepFile.model_validate(data)
    except ValidationError as e:
        raise ParseError(_format_validation(e), str(path))
    sweep = model.sweep
    algorithms = [a.value for a in sweep.algorithms] or [None]
    cells = []
    for entry in sweep.scenarios:
        scenario_path = Path(entry)
        if not scenario_path.is_absolute():
            scenario_path = path.parent / scenario_path
        for algorithm in algorithms:
            for seed in sweep.seeds:
                cells.append((scenario_path, algorithm, seed, sweep.rounds))
    logger.info(f"Sweep {path}: {len(cells)} cells")
    return cells


def describe_error(e: Exception) -> str:
    """One-line description of a library error for tables and logs."""
    if isinstance(e, FtOptSimError):
        return f"{type(e).__name__}: {str(e)}"
    return f"{type(e).__name__}: {e!r}"
