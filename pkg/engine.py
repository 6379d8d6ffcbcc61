"""
Synchronous round-based execution of the fault-tolerant algorithms.

Byzantine-tolerant: A1 (trimmed-mean estimates plus own gradient) and A2
(trimmed estimates plus mid-extreme of trimmed gradients).
Crash-tolerant: A3 (plain averaging), A4 (Metropolis averaging), A5
(A3 plus projected gradient step), A5M (A4 plus projected gradient step)
and A6 (average of received gradient-stepped estimates).
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from exceptions import (
    EnumerationBudgetExceeded,
    IncompatibleScenario,
    IndexOutOfRange,
    PreconditionError,
    TooFewValues,
)
from netgraph import DirectedGraph, FaultSetSpec, check_assumption_byzantine, check_assumption_crash
from objective import ConstraintInterval, CostFamily, StepSchedule, lipschitz_bound
from utils import agent_rng, timed

# Configure logging
logger = logging.getLogger(__name__)

# RNG stream tags
_TAG_BYZANTINE = 1
_TAG_DELIVERY = 2

# Slack for the per-round invariants
INVARIANT_SLACK = 1e-12


class Algorithm(str, Enum):
    A1 = "A1"
    A2 = "A2"
    A3 = "A3"
    A4 = "A4"
    A5 = "A5"
    A5M = "A5M"
    A6 = "A6"

    @property
    def is_byzantine(self) -> bool:
        return self in (Algorithm.A1, Algorithm.A2)

    @property
    def projects(self) -> bool:
        return self not in (Algorithm.A3, Algorithm.A4)

    @property
    def metropolis(self) -> bool:
        return self in (Algorithm.A4, Algorithm.A5M)


class StrategyKind(str, Enum):
    CONSTANT = "constant"
    UNIFORM_RANDOM = "uniform_random"
    PER_NEIGHBOR_SPLIT = "per_neighbor_split"
    PUSH_EXTREME = "push_extreme"
    SILENT = "silent"


@dataclass(frozen=True)
class ByzantineStrategy:
    """
    What a Byzantine agent sends each round.

    ``per_neighbor_split`` uses the explicit ``split`` map when given (other
    neighbours get ``value``); otherwise a seeded half of the neighbours
    receives ``lo`` and the rest ``hi``. ``gradient`` fixes the gradient
    sent under A2; by default the agent reports its own cost's gradient at
    the value it sent.
    """

    kind: StrategyKind
    value: float = 0.0
    lo: float = 0.0
    hi: float = 1.0
    split: Tuple[Tuple[int, float], ...] = ()
    endpoint: str = "hi"
    gradient: Optional[float] = None

    def __post_init__(self):
        if self.kind == StrategyKind.UNIFORM_RANDOM and self.lo > self.hi:
            raise PreconditionError(f"uniform_random needs lo <= hi, got [{self.lo}, {self.hi}]")
        if self.kind == StrategyKind.PUSH_EXTREME and self.endpoint not in ("lo", "hi"):
            raise PreconditionError(f"push_extreme endpoint must be 'lo' or 'hi', got {self.endpoint!r}")

    @classmethod
    def constant(cls, value: float) -> "ByzantineStrategy":
        return cls(StrategyKind.CONSTANT, value=float(value))

    @classmethod
    def uniform_random(cls, lo: float, hi: float) -> "ByzantineStrategy":
        return cls(StrategyKind.UNIFORM_RANDOM, lo=float(lo), hi=float(hi))

    @classmethod
    def per_neighbor_split(cls, values: Optional[Mapping[int, float]] = None, lo: float = 0.0,
                           hi: float = 1.0, default: float = 0.0) -> "ByzantineStrategy":
        split = tuple(sorted((int(k), float(v)) for k, v in (values or {}).items()))
        return cls(StrategyKind.PER_NEIGHBOR_SPLIT, value=float(default), lo=float(lo), hi=float(hi), split=split)

    @classmethod
    def push_extreme(cls, endpoint: str = "hi") -> "ByzantineStrategy":
        return cls(StrategyKind.PUSH_EXTREME, endpoint=endpoint)

    @classmethod
    def silent(cls) -> "ByzantineStrategy":
        return cls(StrategyKind.SILENT)


@dataclass(frozen=True)
class CrashEvent:
    """
    Agent stops in ``crash_round``: it may reach ``delivered`` that round
    (a seeded random subset of its out-neighbours when None) and then
    neither sends nor updates. ``crash_round = 0`` means it never starts.
    """

    agent: int
    crash_round: int
    delivered: Optional[FrozenSet[int]] = None

    def __post_init__(self):
        if self.crash_round < 0:
            raise PreconditionError(f"crash round must be >= 0, got {self.crash_round}")


@dataclass(frozen=True)
class Scenario:
    graph: DirectedGraph
    faults: FaultSetSpec
    costs: CostFamily
    schedule: StepSchedule
    algorithm: Algorithm
    rounds: int
    seed: int
    initial_states: Tuple[float, ...]
    constraint: Optional[ConstraintInterval] = None
    byzantine: Mapping[int, ByzantineStrategy] = field(default_factory=dict)
    crashes: Mapping[int, CrashEvent] = field(default_factory=dict)
    name: str = "scenario"

    def validate(self) -> None:
        g = self.graph
        self.faults.validate(g)
        if self.rounds < 0:
            raise PreconditionError(f"rounds must be >= 0, got {self.rounds}")
        if len(self.costs) != g.n:
            raise PreconditionError(f"{len(self.costs)} costs for {g.n} agents")
        if len(self.initial_states) != g.n:
            raise PreconditionError(f"{len(self.initial_states)} initial states for {g.n} agents")
        if not all(math.isfinite(x) for x in self.initial_states):
            raise PreconditionError("initial states must be finite")
        if self.algorithm.projects and self.constraint is None:
            raise IncompatibleScenario(f"{self.algorithm.value} needs a constraint interval")
        if self.algorithm.is_byzantine:
            if self.crashes:
                raise IncompatibleScenario(f"{self.algorithm.value} takes Byzantine behaviours, not crash events")
            if set(self.byzantine) != set(self.faults.faulty):
                raise IncompatibleScenario("every faulty agent needs exactly one Byzantine strategy")
        else:
            if self.byzantine:
                raise IncompatibleScenario(f"{self.algorithm.value} takes crash events, not Byzantine behaviours")
            if set(self.crashes) != set(self.faults.faulty):
                raise IncompatibleScenario("every faulty agent needs exactly one crash event")
            for agent, event in self.crashes.items():
                if event.agent != agent:
                    raise IncompatibleScenario(f"crash event for {event.agent} filed under {agent}")
        if self.algorithm.metropolis and not g.is_undirected():
            raise IncompatibleScenario(f"{self.algorithm.value} needs an undirected graph")

    @property
    def nonfaulty(self) -> Tuple[int, ...]:
        return self.faults.nonfaulty(self.graph)

    def crash_round(self, agent: int) -> Optional[int]:
        event = self.crashes.get(agent)
        return event.crash_round if event is not None else None


@dataclass(frozen=True)
class TrimResult:
    low: Tuple[Tuple[int, float], ...]
    retained: Tuple[Tuple[int, float], ...]
    high: Tuple[Tuple[int, float], ...]


@dataclass(frozen=True)
class GradientTrim:
    retained: Tuple[Tuple[int, float], ...]
    g_hat: float
    g_check: float
    g_tilde: float


@dataclass(frozen=True)
class AgentStep:
    """Everything one agent did in one round."""

    agent: int
    received: Tuple[Tuple[int, float], ...]
    retained: Tuple[int, ...]
    trimmed_low: Tuple[int, ...]
    trimmed_high: Tuple[int, ...]
    weights: Tuple[Tuple[int, float], ...]
    aggregate: float
    gradient_used: float
    projection_input: Optional[float]
    projection_error: float
    estimate: float
    received_gradients: Tuple[Tuple[int, float], ...] = ()
    retained_gradients: Tuple[int, ...] = ()


@dataclass(frozen=True)
class Message:
    sender: int
    receiver: int
    value: float
    gradient: Optional[float] = None


@dataclass(frozen=True)
class RoundRecord:
    t: int
    step_size: float
    estimates: Dict[int, float]
    live_begin: Tuple[int, ...]
    live_end: Tuple[int, ...]
    steps: Dict[int, AgentStep]
    messages: Tuple[Message, ...] = ()
    defaults: Tuple[Tuple[int, int, float], ...] = ()


@dataclass
class ExecutionTrace:
    scenario: Scenario
    initial: Dict[int, float]
    rounds: List[RoundRecord] = field(default_factory=list)

    @property
    def T(self) -> int:
        return len(self.rounds)

    @property
    def nonfaulty(self) -> Tuple[int, ...]:
        return self.scenario.nonfaulty

    @property
    def recorded_agents(self) -> Tuple[int, ...]:
        return tuple(sorted(self.initial))

    def round(self, t: int) -> RoundRecord:
        if not 1 <= t <= self.T:
            raise IndexOutOfRange(f"round {t} outside 1..{self.T}")
        return self.rounds[t - 1]

    def estimates(self, t: int) -> Dict[int, float]:
        if t == 0:
            return dict(self.initial)
        return dict(self.round(t).estimates)

    def estimate_vector(self, t: int, agents: Sequence[int]) -> np.ndarray:
        values = self.estimates(t)
        return np.array([values[a] for a in agents], dtype=float)

    def spread(self, t: Optional[int] = None) -> float:
        t = self.T if t is None else t
        values = self.estimate_vector(t, self.nonfaulty)
        return float(values.max() - values.min())

    def consensus_value(self, t: Optional[int] = None) -> float:
        t = self.T if t is None else t
        return float(np.mean(self.estimate_vector(t, self.nonfaulty)))


# Trimming
def split_extremes(values: Sequence[Tuple[int, float]], f: int) -> TrimResult:
    """Sort by (value, sender) and cut f entries from each end.

    Exactly 2f values leave an empty retained set.
    """
    if f < 0:
        raise PreconditionError(f"f must be >= 0, got {f}")
    if len(values) < 2 * f:
        raise TooFewValues(len(values), f)
    senders = np.array([s for s, _ in values], dtype=np.int64)
    vals = np.array([v for _, v in values], dtype=float)
    order = np.lexsort((senders, vals))
    ranked = tuple((int(senders[k]), float(vals[k])) for k in order)
    return TrimResult(ranked[:f], ranked[f:len(ranked) - f], ranked[len(ranked) - f:])


def trim_extremes(values: Sequence[Tuple[int, float]], f: int) -> Tuple[Tuple[int, float], ...]:
    return split_extremes(values, f).retained


def trim_gradients_mid_extremes(values: Sequence[Tuple[int, float]], f: int) -> GradientTrim:
    """Trim f from each side, then take the midpoint of the remaining extremes."""
    if len(values) < 2 * f + 1:
        raise TooFewValues(len(values), f)
    retained = split_extremes(values, f).retained
    g_check = retained[0][1]
    g_hat = retained[-1][1]
    return GradientTrim(retained, g_hat, g_check, (g_hat + g_check) / 2.0)


# Byzantine behaviour
def byzantine_outbox(
    strategy: ByzantineStrategy,
    agent: int,
    round_t: int,
    out_neighbors: Iterable[int],
    rng: np.random.Generator,
    constraint: Optional[ConstraintInterval] = None,
) -> Dict[int, float]:
    """One value per out-neighbour; an empty map means the agent stays silent."""
    targets = sorted(out_neighbors)
    kind = strategy.kind
    if kind == StrategyKind.SILENT or not targets:
        return {}
    if kind == StrategyKind.CONSTANT:
        return {i: strategy.value for i in targets}
    if kind == StrategyKind.UNIFORM_RANDOM:
        draws = rng.uniform(strategy.lo, strategy.hi, size=len(targets))
        return {i: float(w) for i, w in zip(targets, draws)}
    if kind == StrategyKind.PUSH_EXTREME:
        if constraint is None:
            raise PreconditionError("push_extreme needs a constraint interval")
        end = constraint.hi if strategy.endpoint == "hi" else constraint.lo
        return {i: end for i in targets}
    if kind == StrategyKind.PER_NEIGHBOR_SPLIT:
        if strategy.split:
            explicit = dict(strategy.split)
            return {i: explicit.get(i, strategy.value) for i in targets}
        shuffled = rng.permutation(targets)
        low_half = set(int(i) for i in shuffled[: (len(targets) + 1) // 2])
        return {i: (strategy.lo if i in low_half else strategy.hi) for i in targets}
    raise PreconditionError(f"unknown strategy {kind}")


def _byzantine_round(scenario: Scenario, t: int, lam: float, state: Dict[int, float]) -> RoundRecord:
    g, costs = scenario.graph, scenario.costs
    f, faulty = scenario.faults.f, scenario.faults.faulty
    with_gradients = scenario.algorithm == Algorithm.A2

    outbox: Dict[int, Dict[int, Tuple[float, Optional[float]]]] = {}
    messages = []
    for k in sorted(faulty):
        strategy = scenario.byzantine[k]
        values = byzantine_outbox(strategy, k, t, g.out_neighbors(k), agent_rng(scenario.seed, k, t, _TAG_BYZANTINE),
                                  scenario.constraint)
        sent = {}
        for i, w in values.items():
            gw = None
            if with_gradients:
                gw = strategy.gradient if strategy.gradient is not None else costs.gradient(k, w)
            sent[i] = (w, gw)
            messages.append(Message(k, i, w, gw))
        outbox[k] = sent

    estimates, steps, defaults = {}, {}, []
    for i in scenario.nonfaulty:
        own = state[i]
        own_grad = costs.gradient(i, own)
        received, received_grads = [], []
        for j in g.in_neighbors(i):
            if j in faulty:
                if i in outbox[j]:
                    w, gw = outbox[j][i]
                else:
                    w, gw = own, own_grad
                    defaults.append((i, j, w))
            else:
                w, gw = state[j], costs.gradient(j, state[j])
            received.append((j, w))
            received_grads.append((j, gw))

        trim = split_extremes(received, f)
        denom = g.in_degree(i) + 1 - 2 * f
        aggregate = float(np.mean([own] + [w for _, w in trim.retained]))
        retained_grads: Tuple[int, ...] = ()
        if with_gradients:
            gtrim = trim_gradients_mid_extremes(received_grads + [(i, own_grad)], f)
            used = gtrim.g_tilde
            retained_grads = tuple(s for s, _ in gtrim.retained)
        else:
            used = own_grad
        y = aggregate - lam * used
        x = scenario.constraint.project(y)
        estimates[i] = x
        steps[i] = AgentStep(
            agent=i,
            received=tuple(received),
            retained=tuple(s for s, _ in trim.retained),
            trimmed_low=tuple(s for s, _ in trim.low),
            trimmed_high=tuple(s for s, _ in trim.high),
            weights=tuple([(i, 1.0 / denom)] + [(s, 1.0 / denom) for s, _ in trim.retained]),
            aggregate=aggregate,
            gradient_used=used,
            projection_input=y,
            projection_error=x - y,
            estimate=x,
            received_gradients=tuple(received_grads) if with_gradients else (),
            retained_gradients=retained_grads,
        )
    live = scenario.nonfaulty
    return RoundRecord(t, lam, estimates, live, live, steps, tuple(messages), tuple(defaults))


def _delivery_targets(scenario: Scenario, agent: int, t: int) -> Tuple[int, ...]:
    out = scenario.graph.out_neighbors(agent)
    event = scenario.crashes.get(agent)
    if event is None or event.crash_round != t:
        return out
    if event.delivered is not None:
        return tuple(i for i in out if i in event.delivered)
    mask = agent_rng(scenario.seed, agent, t, _TAG_DELIVERY).random(len(out)) < 0.5
    return tuple(i for i, keep in zip(out, mask) if keep)


def metropolis_weight(graph: DirectedGraph, i: int, j: int) -> float:
    return 1.0 / max(graph.in_degree(i) + 1, graph.in_degree(j) + 1)


def _crash_round(scenario: Scenario, t: int, lam: float, state: Dict[int, float]) -> RoundRecord:
    g, costs, algo = scenario.graph, scenario.costs, scenario.algorithm

    def alive_at_start(v: int) -> bool:
        c = scenario.crash_round(v)
        return c is None or c >= t

    live_begin = tuple(v for v in g.vertices if alive_at_start(v))
    live_end = tuple(v for v in live_begin if scenario.crash_round(v) != t)
    targets = {j: set(_delivery_targets(scenario, j, t)) for j in live_begin}

    messages = []
    for j in live_begin:
        gj = costs.gradient(j, state[j]) if algo == Algorithm.A6 else None
        messages.extend(Message(j, i, state[j], gj) for i in sorted(targets[j]))

    estimates, steps = dict(state), {}
    for i in live_end:
        own = state[i]
        senders = tuple(j for j in g.in_neighbors(i) if j in targets and i in targets[j])
        received = tuple((j, state[j]) for j in senders)
        if algo.metropolis:
            off = [(j, metropolis_weight(g, i, j)) for j in senders]
            weights = tuple([(i, 1.0 - sum(a for _, a in off))] + off)
        else:
            share = 1.0 / (len(senders) + 1)
            weights = tuple([(i, share)] + [(j, share) for j in senders])
        aggregate = float(sum(a * state[j] for j, a in weights))

        received_grads: Tuple[Tuple[int, float], ...] = ()
        used, y, x = 0.0, None, aggregate
        if algo in (Algorithm.A5, Algorithm.A5M):
            used = costs.gradient(i, own)
        elif algo == Algorithm.A6:
            received_grads = tuple((j, costs.gradient(j, state[j])) for j in senders)
            used = float(np.mean([costs.gradient(i, own)] + [gj for _, gj in received_grads]))
        if algo.projects:
            y = aggregate - lam * used
            x = scenario.constraint.project(y)
        estimates[i] = x
        steps[i] = AgentStep(
            agent=i,
            received=received,
            retained=senders,
            trimmed_low=(),
            trimmed_high=(),
            weights=weights,
            aggregate=aggregate,
            gradient_used=used,
            projection_input=y,
            projection_error=0.0 if y is None else x - y,
            estimate=x,
            received_gradients=received_grads,
        )
    return RoundRecord(t, lam, estimates, live_begin, live_end, steps, tuple(messages), ())


def _warn_if_infeasible(scenario: Scenario) -> None:
    g, f = scenario.graph, scenario.faults.f
    try:
        if scenario.algorithm.is_byzantine:
            report = check_assumption_byzantine(g, f)
        else:
            report = check_assumption_crash(g, f)
    except (EnumerationBudgetExceeded, PreconditionError) as e:
        logger.warning(f"Skipping feasibility check for {scenario.name}: {str(e)}")
        return
    if not report.holds:
        logger.warning(f"{scenario.name}: graph fails the {report.mode} condition for f={f} "
                       f"(witness {report.witness}); running anyway")


@timed
def run(scenario: Scenario, check_feasibility: bool = True) -> ExecutionTrace:
    """Execute ``scenario.rounds`` synchronous rounds and record everything."""
    scenario.validate()
    if check_feasibility:
        _warn_if_infeasible(scenario)

    state = {v: float(scenario.initial_states[v - 1]) for v in scenario.graph.vertices}
    recorded = scenario.nonfaulty if scenario.algorithm.is_byzantine else scenario.graph.vertices
    trace = ExecutionTrace(scenario, {v: state[v] for v in recorded})
    step_round = _byzantine_round if scenario.algorithm.is_byzantine else _crash_round

    logger.info(f"Running {scenario.name}: {scenario.algorithm.value}, n={scenario.graph.n}, "
                f"F={sorted(scenario.faults.faulty)}, T={scenario.rounds}, seed={scenario.seed}")
    for t in range(1, scenario.rounds + 1):
        record = step_round(scenario, t, scenario.schedule.step(t - 1), state)
        trace.rounds.append(record)
        state.update(record.estimates)
        if t % 1000 == 0:
            logger.debug(f"{scenario.name}: round {t}, spread {trace.spread(t):.3e}")
    logger.info(f"Finished {scenario.name}: final spread {trace.spread():.3e}")
    return trace


@dataclass
class AuditReport:
    """Pass/fail tallies of the per-round invariants of a trace."""

    passed: Dict[str, int] = field(default_factory=dict)
    failed: Dict[str, int] = field(default_factory=dict)
    first_failure: Dict[str, str] = field(default_factory=dict)

    def record(self, name: str, ok: bool, detail: str = "") -> None:
        bucket = self.passed if ok else self.failed
        bucket[name] = bucket.get(name, 0) + 1
        if not ok and name not in self.first_failure:
            self.first_failure[name] = detail

    @property
    def total_passed(self) -> int:
        return sum(self.passed.values())

    @property
    def total_failed(self) -> int:
        return sum(self.failed.values())

    def to_dict(self) -> Dict:
        return {"passed": dict(self.passed), "failed": dict(self.failed), "first_failure": dict(self.first_failure)}


def audit_trace(trace: ExecutionTrace) -> AuditReport:
    """Check retained-set sizes, projection-error bound, feasibility, validity and crash silence."""
    scenario = trace.scenario
    g, f, algo, X = scenario.graph, scenario.faults.f, scenario.algorithm, scenario.constraint
    report = AuditReport()
    L = lipschitz_bound(scenario.costs, X) if X is not None else None
    start_inside = X is not None and all(X.contains(x) for x in trace.initial.values())

    previous = trace.estimates(0)
    for record in trace.rounds:
        t = record.t
        if algo.is_byzantine:
            nf = [previous[a] for a in scenario.nonfaulty]
            lo, hi = min(nf), max(nf)
        for i, step in record.steps.items():
            if algo.is_byzantine:
                d = g.in_degree(i)
                report.record("retained_size", len(step.retained) == d - 2 * f, f"round {t}, agent {i}")
                if algo == Algorithm.A2:
                    report.record("retained_gradient_size", len(step.retained_gradients) == d + 1 - 2 * f,
                                  f"round {t}, agent {i}")
                report.record("byzantine_validity",
                              lo - INVARIANT_SLACK <= step.aggregate <= hi + INVARIANT_SLACK,
                              f"round {t}, agent {i}: {step.aggregate} outside [{lo}, {hi}]")
            if algo.projects:
                if t >= 2 or start_inside:
                    bound = record.step_size * L + INVARIANT_SLACK
                    report.record("projection_error_bound", abs(step.projection_error) <= bound,
                                  f"round {t}, agent {i}: |e|={abs(step.projection_error)} > {bound}")
                report.record("feasibility", X.contains(step.estimate), f"round {t}, agent {i}")
        if not algo.is_byzantine:
            for message in record.messages:
                c = scenario.crash_round(message.sender)
                report.record("crash_silence", c is None or t <= c,
                              f"round {t}: message from {message.sender} after crash round {c}")
        previous = record.estimates
    logger.debug(f"Audit of {scenario.name}: {report.total_passed} passed, {report.total_failed} failed")
    return report
