"""
Transition matrices rebuilt from traces, backward products and the
coefficients of ergodicity used to certify convergence-rate bounds.

Chain indexing follows the engine's rounds: the matrix stored for round t
maps the estimates x[t-1] to x[t], and product(t, r) = A[t] A[t-1] ... A[r]
with product(t, t + 1) = I.
"""
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from engine import ExecutionTrace, metropolis_weight
from exceptions import (
    IndexOutOfRange,
    InvalidParams,
    NotConverged,
    ReconstructionFailed,
    TraceMismatch,
)
from netgraph import (
    DirectedGraph,
    byzantine_family_size,
    check_assumption_crash,
    enumerate_reduced_byzantine,
)
from utils import enumeration_budget, get_float_setting, timed

# Configure logging
logger = logging.getLogger(__name__)

STOCHASTIC_TOL = 1e-12
RESIDUAL_TOL = 1e-9
WEIGHT_TOL = 1e-15
# Above these sizes certification switches from exhaustive to sampled indices
EXHAUSTIVE_MAX_N = 6
EXHAUSTIVE_MAX_T = 200
SAMPLE_COUNT = 10_000


@dataclass(frozen=True)
class StochasticMatrix:
    t: int
    agents: Tuple[int, ...]
    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=float)
        if arr.shape != (len(self.agents), len(self.agents)):
            raise InvalidParams(f"matrix shape {arr.shape} does not match {len(self.agents)} agents")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def index(self, agent: int) -> int:
        return self.agents.index(agent)

    def entry(self, i: int, j: int) -> float:
        return float(self.values[self.index(i), self.index(j)])

    def row_sums(self) -> np.ndarray:
        return self.values.sum(axis=1)

    def column_sums(self) -> np.ndarray:
        return self.values.sum(axis=0)

    def is_row_stochastic(self, tol: float = STOCHASTIC_TOL) -> bool:
        return bool((self.values >= 0).all() and np.allclose(self.row_sums(), 1.0, rtol=0, atol=tol))

    def is_doubly_stochastic(self, tol: float = STOCHASTIC_TOL) -> bool:
        return self.is_row_stochastic(tol) and bool(np.allclose(self.column_sums(), 1.0, rtol=0, atol=tol))


@dataclass(frozen=True)
class ByzantineMatrix:
    """M for one round with its reconstruction residual and reduced-graph certificate."""

    matrix: StochasticMatrix
    residual: float
    xi: float
    certificate: Optional[DirectedGraph]
    recertified_rows: Tuple[int, ...] = ()


@dataclass(frozen=True)
class RateParams:
    mode: str
    n: int
    f: int
    gamma: Optional[int]
    xi: Optional[float] = None
    tau: Optional[int] = None
    tau_exact: bool = True
    nu: Optional[int] = None
    theta: Optional[float] = None
    zeta: Optional[float] = None
    assumption_holds: bool = True

    @classmethod
    def byzantine(cls, graph: DirectedGraph, faulty: Iterable[int], f: int,
                  budget: Optional[int] = None) -> "RateParams":
        faulty = tuple(sorted(set(faulty)))
        cap = enumeration_budget(budget)
        xi = byzantine_xi(graph, f)
        full = byzantine_family_size(graph, faulty, f)
        family = enumerate_reduced_byzantine(graph, faulty, f, maximal_only=True, budget=cap)
        tau, tau_exact = (full, True) if full <= cap else (family.tau, False)
        nu = tau * (graph.n - len(faulty))
        gamma = family.min_source_size
        return cls("byzantine", graph.n, f, gamma, xi=xi, tau=tau, tau_exact=tau_exact, nu=nu,
                   theta=1.0 - xi ** nu, assumption_holds=bool(gamma))

    @classmethod
    def crash(cls, graph: DirectedGraph, f: int, budget: Optional[int] = None) -> "RateParams":
        report = check_assumption_crash(graph, f, budget)
        return cls("crash", graph.n, f, report.gamma, zeta=1.0 / (graph.max_in_degree + 1),
                   assumption_holds=report.holds)

    @property
    def column_floor(self) -> float:
        """xi^nu (Byzantine) or zeta^n (crash)."""
        if self.mode == "byzantine":
            return self.xi ** self.nu
        return self.zeta ** self.n

    def to_dict(self) -> Dict:
        return {
            "mode": self.mode, "n": self.n, "f": self.f, "gamma": self.gamma, "xi": self.xi,
            "tau": self.tau, "tau_exact": self.tau_exact, "nu": self.nu, "theta": self.theta,
            "zeta": self.zeta, "assumption_holds": self.assumption_holds,
        }


def byzantine_xi(graph: DirectedGraph, f: int) -> float:
    width = graph.max_in_degree + 1 - 2 * f
    if width < 1:
        raise InvalidParams(f"d_max + 1 - 2f = {width} leaves nothing after trimming")
    return 1.0 / (2 * width)


class ProductChain:
    """Ordered per-round matrices with lazily extended backward products."""

    def __init__(self, mode: str, matrices: Sequence[StochasticMatrix], nonfaulty: Sequence[int],
                 live_sets: Optional[Dict[int, Tuple[int, ...]]] = None,
                 reconstructions: Optional[List[ByzantineMatrix]] = None):
        if not matrices:
            raise TraceMismatch("no rounds to build a chain from")
        self.mode = mode
        self.matrices = list(matrices)
        self.agents = self.matrices[0].agents
        self.nonfaulty = tuple(nonfaulty)
        self.first = self.matrices[0].t
        self.last = self.matrices[-1].t
        self.live_sets = live_sets or {}
        self.reconstructions = reconstructions or []
        self._frontier: Dict[int, Tuple[int, np.ndarray]] = {}

    def __len__(self) -> int:
        return len(self.matrices)

    def matrix(self, t: int) -> StochasticMatrix:
        if not self.first <= t <= self.last:
            raise IndexOutOfRange(f"round {t} outside {self.first}..{self.last}")
        return self.matrices[t - self.first]

    def live(self, t: int) -> Tuple[int, ...]:
        """Agents alive at the start of round t; everyone in Byzantine chains."""
        if self.mode == "byzantine":
            return self.agents
        return self.live_sets.get(t, self.agents)

    def settled_round(self) -> int:
        """First round from which only never-failing agents are alive."""
        for t in range(self.first, self.last + 1):
            if set(self.live(t)) == set(self.nonfaulty):
                return t
        return self.last

    def product(self, t: int, r: int) -> StochasticMatrix:
        if r == t + 1:
            if not self.first <= r <= self.last + 1:
                raise IndexOutOfRange(f"identity index {r} outside {self.first}..{self.last + 1}")
            return StochasticMatrix(t, self.agents, np.eye(len(self.agents)))
        if not (self.first <= r <= t <= self.last):
            raise IndexOutOfRange(f"product({t}, {r}) outside {self.first}..{self.last}")
        reached, arr = self._frontier.get(r, (r - 1, np.eye(len(self.agents))))
        if reached > t:
            reached, arr = r - 1, np.eye(len(self.agents))
        for s in range(reached + 1, t + 1):
            arr = self.matrix(s).values @ arr
        self._frontier[r] = (t, arr)
        return StochasticMatrix(t, self.agents, arr)

    def forward_products(self, r: int, t_max: Optional[int] = None) -> Iterator[Tuple[int, np.ndarray]]:
        """Yield (t, product(t, r)) for t = r .. t_max."""
        t_max = self.last if t_max is None else min(t_max, self.last)
        arr = np.eye(len(self.agents))
        for s in range(r, t_max + 1):
            arr = self.matrix(s).values @ arr
            yield s, arr


# Matrix reconstruction
def build_crash_matrix(trace: ExecutionTrace, t: int) -> StochasticMatrix:
    """
    P[t] for A3/A5/A6 (uniform over received and self) or the Metropolis
    matrix for A4/A5M, including bookkeeping rows of agents that crash in
    round t so the matrix stays doubly stochastic.
    """
    scenario = trace.scenario
    algo = scenario.algorithm
    if algo.is_byzantine:
        raise TraceMismatch(f"{algo.value} trace has no crash matrices")
    g = scenario.graph
    record = trace.round(t)
    agents = g.vertices
    pos = {a: k for k, a in enumerate(agents)}
    live_begin = set(record.live_begin)
    P = np.eye(len(agents))
    senders_of: Dict[int, Tuple[int, ...]] = {}

    for i in record.live_end:
        step = record.steps.get(i)
        if step is None:
            raise TraceMismatch(f"round {t}: live agent {i} has no recorded step")
        senders = step.retained
        if not set(senders) <= live_begin:
            raise TraceMismatch(f"round {t}: agent {i} heard from agents outside N[{t}]")
        if not set(senders) <= set(g.in_neighbors(i)):
            raise TraceMismatch(f"round {t}: agent {i} heard from a non-neighbour")
        senders_of[i] = senders
        row = np.zeros(len(agents))
        if algo.metropolis:
            for j in senders:
                row[pos[j]] = metropolis_weight(g, i, j)
            row[pos[i]] = 1.0 - row.sum()
        else:
            row[[pos[i]] + [pos[j] for j in senders]] = 1.0 / (len(senders) + 1)
        recorded = np.zeros(len(agents))
        for j, a in step.weights:
            recorded[pos[j]] += a
        if not np.allclose(row, recorded, rtol=0, atol=WEIGHT_TOL):
            raise TraceMismatch(f"round {t}: recorded weights of agent {i} do not match {algo.value}")
        P[pos[i]] = row

    if algo.metropolis:
        for i in sorted(live_begin - set(record.live_end)):
            P[pos[i], pos[i]] = 0.0
            for k, senders in senders_of.items():
                if i in senders:
                    P[pos[i], pos[k]] = metropolis_weight(g, i, k)
            P[pos[i], pos[i]] = 1.0 - P[pos[i]].sum()
    return StochasticMatrix(t, agents, P)


def _bracket(w: float, below: Sequence[Tuple[int, float]], above: Sequence[Tuple[int, float]]):
    lower = [(v, s) for s, v in below if v <= w]
    upper = [(v, s) for s, v in above if v >= w]
    if not lower or not upper:
        return None
    x_lo, s_lo = max(lower, key=lambda p: (p[0], -p[1]))
    x_hi, s_hi = min(upper)
    theta = 1.0 if x_hi == x_lo else (x_hi - w) / (x_hi - x_lo)
    return s_lo, s_hi, theta


def _dominating_row(i: int, own: float, nf_in: Sequence[Tuple[int, float]], aggregate: float,
                    xi: float, keep: int) -> Optional[Dict[int, float]]:
    """
    A row reproducing ``aggregate`` with weight >= xi on self and on ``keep``
    non-faulty in-neighbours; None when no such representation exists.
    """
    free = 1.0 - xi * (keep + 1)
    if free < -WEIGHT_TOL:
        return None
    support = [(i, own)] + list(nf_in)
    for chosen in itertools.combinations(nf_in, keep):
        row = {i: xi}
        row.update({j: xi for j, _ in chosen})
        rest = aggregate - xi * (own + sum(x for _, x in chosen))
        if free <= WEIGHT_TOL:
            if abs(rest) <= STOCHASTIC_TOL:
                return row
            continue
        target = rest / free
        picked = _bracket(target, support, support)
        if picked is None:
            continue
        s_lo, s_hi, theta = picked
        row[s_lo] = row.get(s_lo, 0.0) + free * theta
        row[s_hi] = row.get(s_hi, 0.0) + free * (1.0 - theta)
        return row
    return None


def build_byzantine_matrix(trace: ExecutionTrace, t: int, recertify: bool = True) -> ByzantineMatrix:
    """
    M for round t on the non-faulty agents.

    Self and retained non-faulty senders get 1/(d_i + 1 - 2f); the weight of
    each retained faulty sender is split between the nearest non-faulty
    values below it (eliminated-small or retained) and above it (retained or
    eliminated-large). With ``recertify`` a row that does not dominate xi
    times any admissible reduced-graph row is replaced by an equivalent row
    that does, when one exists.
    """
    scenario = trace.scenario
    if not scenario.algorithm.is_byzantine:
        raise TraceMismatch(f"{scenario.algorithm.value} trace has no Byzantine matrices")
    g, f, faulty = scenario.graph, scenario.faults.f, scenario.faults.faulty
    record = trace.round(t)
    prev = trace.estimates(t - 1)
    agents = scenario.nonfaulty
    pos = {a: k for k, a in enumerate(agents)}
    xi = byzantine_xi(g, f)
    M = np.zeros((len(agents), len(agents)))

    for i in agents:
        step = record.steps.get(i)
        if step is None:
            raise TraceMismatch(f"round {t}: agent {i} has no recorded step")
        values = dict(step.received)
        c = 1.0 / (g.in_degree(i) + 1 - 2 * f)
        row = M[pos[i]]
        row[pos[i]] += c

        def nonfaulty_part(senders):
            return [(s, values[s]) for s in senders if s not in faulty]

        below = nonfaulty_part(step.trimmed_low) + nonfaulty_part(step.retained)
        above = nonfaulty_part(step.retained) + nonfaulty_part(step.trimmed_high)
        for j in step.retained:
            if j not in faulty:
                row[pos[j]] += c
                continue
            picked = _bracket(values[j], below, above)
            if picked is None:
                raise ReconstructionFailed(t, float("nan"), f"no non-faulty bracket for sender {j} at agent {i}")
            s_lo, s_hi, theta = picked
            row[pos[s_lo]] += c * theta
            row[pos[s_hi]] += c * (1.0 - theta)

    x_prev = np.array([prev[a] for a in agents])
    recertified = []
    certificate_edges = []
    certified = True
    for i in agents:
        step = record.steps[i]
        nf_in = [j for j in g.in_neighbors(i) if j not in faulty]
        keep = max(0, len(nf_in) - f)
        strong = _strong_senders(M[pos[i]], pos, i, nf_in, xi)
        if (strong is None or len(strong) < keep) and recertify:
            row = _dominating_row(i, prev[i], [(j, prev[j]) for j in nf_in], step.aggregate, xi, keep)
            if row is not None:
                M[pos[i]] = 0.0
                for j, a in row.items():
                    M[pos[i], pos[j]] += a
                recertified.append(i)
                strong = _strong_senders(M[pos[i]], pos, i, nf_in, xi)
        if strong is None or len(strong) < keep:
            certified = False
            continue
        certificate_edges.extend((j, i) for j in strong[:keep])

    x_new = np.array([record.estimates[a] for a in agents])
    drift = np.array([record.steps[a].gradient_used for a in agents])
    error = np.array([record.steps[a].projection_error for a in agents])
    residual = float(np.max(np.abs(x_new - (M @ x_prev - record.step_size * drift + error))))
    if residual > RESIDUAL_TOL:
        raise ReconstructionFailed(t, residual)
    certificate = DirectedGraph(agents, frozenset(certificate_edges)) if certified else None
    if certificate is None:
        logger.debug(f"Round {t}: no reduced graph certifies M >= xi*H")
    return ByzantineMatrix(StochasticMatrix(t, agents, M), residual, xi, certificate, tuple(recertified))


def _strong_senders(row: np.ndarray, pos: Dict[int, int], i: int, nf_in: Sequence[int],
                    xi: float) -> Optional[List[int]]:
    """In-neighbours carrying at least xi, or None when the self weight is short."""
    if row[pos[i]] < xi - STOCHASTIC_TOL:
        return None
    return [j for j in nf_in if row[pos[j]] >= xi - STOCHASTIC_TOL]


@timed
def build_chain(trace: ExecutionTrace, recertify: bool = True) -> ProductChain:
    """Rebuild every round's matrix from a trace."""
    if trace.T == 0:
        raise TraceMismatch("trace has no rounds")
    scenario = trace.scenario
    if scenario.algorithm.is_byzantine:
        built = [build_byzantine_matrix(trace, t, recertify) for t in range(1, trace.T + 1)]
        return ProductChain("byzantine", [b.matrix for b in built], scenario.nonfaulty, reconstructions=built)
    matrices = [build_crash_matrix(trace, t) for t in range(1, trace.T + 1)]
    live = {r.t: r.live_begin for r in trace.rounds}
    live[trace.T + 1] = trace.rounds[-1].live_end
    return ProductChain("crash", matrices, scenario.nonfaulty, live_sets=live)


def crash_residual(trace: ExecutionTrace, matrix: StochasticMatrix) -> float:
    """max over agents updating in round t of |x[t] - (P x[t-1] - lambda d + e)|."""
    record = trace.round(matrix.t)
    agents = matrix.agents
    prev = trace.estimates(matrix.t - 1)
    x_prev = np.array([prev[a] for a in agents])
    predicted = matrix.values @ x_prev
    worst = 0.0
    for i in record.live_end:
        step = record.steps[i]
        value = predicted[matrix.index(i)] - record.step_size * step.gradient_used + step.projection_error
        worst = max(worst, abs(record.estimates[i] - value))
    return float(worst)


# Coefficients of ergodicity
def ergodic_coefficients(m, live: Iterable[int], agents: Optional[Sequence[int]] = None) -> Tuple[float, float]:
    """
    delta: largest difference between two live rows in any live column.
    eta: smallest overlap sum_b min(row_a[b], row_a'[b]) over live row pairs,
    summed over live columns.
    """
    if isinstance(m, StochasticMatrix):
        values, agents = m.values, m.agents
    else:
        values = np.asarray(m, dtype=float)
        agents = tuple(agents) if agents is not None else tuple(range(1, values.shape[0] + 1))
    idx = [agents.index(a) for a in sorted(set(live))]
    if not idx:
        raise InvalidParams("live set is empty")
    sub = values[np.ix_(idx, idx)]
    delta = float((sub.max(axis=0) - sub.min(axis=0)).max())
    overlaps = np.minimum(sub[:, None, :], sub[None, :, :]).sum(axis=2)
    eta = float(overlaps.min())
    return min(max(delta, 0.0), 1.0), min(max(eta, 0.0), 1.0)


@dataclass(frozen=True)
class LimitingWeights:
    r: int
    horizon: int
    agents: Tuple[int, ...]
    pi: np.ndarray
    residual: float

    def weight(self, agent: int) -> float:
        return float(self.pi[self.agents.index(agent)])


def limiting_weights(chain: ProductChain, r: int, horizon: Optional[int] = None,
                     threshold: Optional[float] = None) -> LimitingWeights:
    """Common row of product(horizon, r) over the non-faulty rows."""
    horizon = chain.last if horizon is None else horizon
    threshold = get_float_setting("FTOPT_PI_THRESHOLD") if threshold is None else threshold
    arr = chain.product(horizon, r).values
    rows = arr[[chain.agents.index(a) for a in chain.nonfaulty]]
    residual = float((rows.max(axis=0) - rows.min(axis=0)).max())
    if residual > threshold:
        raise NotConverged(residual, threshold)
    return LimitingWeights(r, horizon, chain.agents, rows.mean(axis=0), residual)


def auxiliary_sequence(chain: ProductChain, trace: ExecutionTrace, horizon: Optional[int] = None,
                       threshold: Optional[float] = None) -> List[Dict[str, float]]:
    """
    y[t] = <pi(t + 1), x[t]> for t = 0 .. T - 1 together with the min and max
    of the estimates it combines.
    """
    out = []
    end = chain.last if horizon is None else horizon
    for t in range(0, end):
        weights = limiting_weights(chain, t + 1, end, threshold)
        x = trace.estimate_vector(t, chain.agents)
        live = [chain.agents.index(a) for a in chain.live(t + 1)]
        out.append({
            "t": t,
            "y": float(np.dot(weights.pi, x)),
            "m": float(x[live].min()),
            "M": float(x[live].max()),
            "residual": weights.residual,
        })
    return out


# Certification reports
@dataclass
class CheckResult:
    name: str
    bound: str
    samples: int = 0
    violations: int = 0
    worst_margin: float = math.inf
    first_violation: Optional[Dict] = None
    advisory: bool = False
    skipped: str = ""

    def observe(self, observed: float, bound: float, where: Dict) -> bool:
        self.samples += 1
        margin = bound - observed
        self.worst_margin = min(self.worst_margin, margin)
        if margin < 0:
            self.violations += 1
            if self.first_violation is None:
                self.first_violation = dict(where, observed=observed, bound=bound)
            return False
        return True

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> Dict:
        return {
            "name": self.name, "bound": self.bound, "samples": self.samples,
            "violations": self.violations, "pass": self.passed,
            "worst_margin": None if math.isinf(self.worst_margin) else self.worst_margin,
            "first_violation": self.first_violation, "advisory": self.advisory,
            "skipped": self.skipped,
        }


@dataclass
class CertificationReport:
    mode: str
    checks: Dict[str, CheckResult] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)

    def check(self, name: str, bound: str, advisory: bool = False) -> CheckResult:
        if name not in self.checks:
            self.checks[name] = CheckResult(name, bound, advisory=advisory)
        return self.checks[name]

    @property
    def passed(self) -> bool:
        return all(c.passed or c.advisory for c in self.checks.values())

    @property
    def tallies(self) -> Tuple[int, int]:
        ok = sum(1 for c in self.checks.values() if c.passed)
        return ok, len(self.checks) - ok

    def merge(self, other: "CertificationReport") -> "CertificationReport":
        self.checks.update(other.checks)
        self.notes.extend(other.notes)
        return self

    def to_dict(self) -> Dict:
        ok, failed = self.tallies
        return {
            "mode": self.mode, "pass": self.passed, "checks_passed": ok, "checks_failed": failed,
            "checks": [c.to_dict() for c in self.checks.values()], "notes": list(self.notes),
        }


def _count_at_least(values: np.ndarray, floor: float) -> int:
    return int(np.count_nonzero(values >= floor))


def certify_rate_byzantine(chain: ProductChain, params: RateParams, r: int,
                           pi: Optional[LimitingWeights] = None, window: int = 100,
                           threshold: Optional[float] = None, seed: int = 0) -> CertificationReport:
    """
    |Phi_ij(t, r) - pi_j(r)| <= theta^ceil((t - r + 1) / nu), at least gamma
    columns of Phi(r + nu - 1, r) above xi^nu and at least gamma entries of
    pi(r) above xi^nu.
    """
    if params.mode != "byzantine":
        raise InvalidParams("certify_rate_byzantine needs Byzantine rate parameters")
    report = CertificationReport("byzantine")
    if pi is None:
        pi = limiting_weights(chain, r, threshold=threshold)
    floor = params.column_floor
    gamma = params.gamma or 0

    rate = report.check("rate_bound", "theta^ceil((t-r+1)/nu) + pi residual", advisory=not params.tau_exact)
    if not params.tau_exact:
        report.notes.append("tau is a lower bound; rate check is advisory")
    t_max = min(chain.last, r + window)
    rounds = list(range(r, t_max + 1))
    n = len(chain.agents)
    if n > EXHAUSTIVE_MAX_N or len(rounds) > EXHAUSTIVE_MAX_T:
        rng = np.random.default_rng(seed)
        picked = set(int(x) for x in rng.choice(rounds, size=min(len(rounds), SAMPLE_COUNT // (n * n) + 1),
                                                replace=False))
    else:
        picked = set(rounds)
    for t, arr in chain.forward_products(r, t_max):
        if t not in picked:
            continue
        gaps = np.abs(arr - pi.pi[None, :])
        k = np.unravel_index(int(np.argmax(gaps)), gaps.shape)
        bound = params.theta ** math.ceil((t - r + 1) / params.nu) + pi.residual
        rate.observe(float(gaps[k]), bound, {"t": t, "i": chain.agents[k[0]], "j": chain.agents[k[1]]})

    columns = report.check("column_lower_bound", "at least gamma columns of Phi(r+nu-1, r) >= xi^nu")
    if r + params.nu - 1 <= chain.last:
        arr = chain.product(r + params.nu - 1, r).values
        count = _count_at_least(arr.min(axis=0), floor - WEIGHT_TOL)
        columns.observe(float(gamma), float(count), {"r": r, "columns": count})
    else:
        columns.skipped = f"chain ends before round r + nu - 1 = {r + params.nu - 1}"

    limit = report.check("limiting_lower_bound", "at least gamma entries of pi(r) >= xi^nu")
    count = _count_at_least(pi.pi, floor - pi.residual)
    limit.observe(float(gamma), float(count), {"r": r, "entries": count})
    return report


def certify_rate_crash(chain: ProductChain, params: RateParams, r_values: Optional[Sequence[int]] = None,
                       threshold: Optional[float] = None, seed: int = 0) -> CertificationReport:
    """
    delta <= 1 - eta, monotonicity in the live-set index, sub-multiplicativity,
    the block bound (1 - zeta^n)^(k - f), the column bounds on
    [Psi(r+n-1, r)]_N and pi(r), and zero columns for crashed agents.
    """
    if params.mode != "crash":
        raise InvalidParams("certify_rate_crash needs crash rate parameters")
    report = CertificationReport("crash")
    advisory = not params.assumption_holds
    if advisory:
        report.notes.append("graph fails the crash condition; graph-dependent bounds are advisory")
    rng = np.random.default_rng(seed)
    agents = chain.agents
    pos = {a: k for k, a in enumerate(agents)}
    T, n, f = chain.last, params.n, params.f
    nonfaulty = [pos[a] for a in chain.nonfaulty]

    c1 = report.check("delta_le_one_minus_eta", "delta_t <= 1 - eta_t")
    mono_d = report.check("delta_monotone", "delta_t <= delta_r for r <= t")
    mono_e = report.check("eta_monotone", "eta_t >= eta_r for r <= t")
    zeros = report.check("crashed_columns_zero", "Psi_ij(t', t) = 0 for i in N[t], j not in N[t]")

    exhaustive = n <= EXHAUSTIVE_MAX_N and T <= EXHAUSTIVE_MAX_T
    if exhaustive:
        starts = range(chain.first, T + 1)
        keep_pair = None
    else:
        starts = sorted(set(int(x) for x in rng.integers(chain.first, T + 1, size=min(T, 200))))
        keep_pair = SAMPLE_COUNT / max(1, len(starts))
    for t in starts:
        live_t = chain.live(t)
        earlier = sorted({chain.first, max(chain.first, t - 1)})
        dead = [pos[a] for a in agents if a not in live_t]
        alive = [pos[a] for a in live_t]
        for t2, arr in chain.forward_products(t):
            if keep_pair is not None and rng.random() > keep_pair / max(1, T - t + 1):
                continue
            where = {"t": t, "t_prime": t2}
            d_t, e_t = ergodic_coefficients(arr, live_t, agents)
            c1.observe(d_t, 1.0 - e_t + STOCHASTIC_TOL, where)
            for r in earlier:
                d_r, e_r = ergodic_coefficients(arr, chain.live(r), agents)
                mono_d.observe(d_t, d_r + STOCHASTIC_TOL, dict(where, r=r))
                mono_e.observe(-e_t, -e_r + STOCHASTIC_TOL, dict(where, r=r))
            if dead:
                block = arr[np.ix_(alive, dead)]
                zeros.observe(float(np.abs(block).max()), 0.0, where)

    split = report.check("sub_multiplicativity", "delta(PG) <= (1 - eta(P)) * delta(G)")
    if T - chain.first <= 30:
        triples = [(t0, t1, t2) for t0 in range(chain.first, T + 1)
                   for t1 in range(t0, T + 1) for t2 in range(t1 + 1, T + 1)]
    else:
        draws = np.sort(rng.integers(chain.first, T + 1, size=(2000, 3)), axis=1)
        triples = sorted({(int(a), int(b), int(c)) for a, b, c in draws if b < c})
    for t0, t1, t2 in triples:
        P = chain.product(t2, t1 + 1).values
        G = chain.product(t1, t0).values
        live = chain.live(t1 + 1)
        d_f, _ = ergodic_coefficients(P @ G, live, agents)
        _, e_p = ergodic_coefficients(P, live, agents)
        d_g, _ = ergodic_coefficients(G, live, agents)
        split.observe(d_f, (1.0 - e_p) * d_g + STOCHASTIC_TOL, {"t0": t0, "t1": t1, "t2": t2})

    block = report.check("block_bound", "delta_{(k-1)n+1}(Psi(kn, 1)) <= (1 - zeta^n)^(k-f)", advisory=advisory)
    floor = params.column_floor
    for k in range(max(f, 1), T // n + 1):
        d, _ = ergodic_coefficients(chain.product(k * n, chain.first), chain.live((k - 1) * n + 1))
        block.observe(d, (1.0 - floor) ** (k - f) + STOCHASTIC_TOL, {"k": k})
    if block.samples == 0:
        block.skipped = f"chain shorter than one block of {n} rounds"

    gamma = params.gamma or 0
    cols = report.check("column_lower_bound", "at least gamma columns of [Psi(r+n-1, r)]_N >= zeta^n",
                        advisory=advisory)
    for r in range(chain.first, T - n + 2):
        sub = chain.product(r + n - 1, r).values[np.ix_(nonfaulty, nonfaulty)]
        count = _count_at_least(sub.min(axis=0), floor - WEIGHT_TOL)
        cols.observe(float(gamma), float(count), {"r": r, "columns": count})
    if cols.samples == 0:
        cols.skipped = f"chain shorter than {n} rounds"

    limit = report.check("limiting_lower_bound", "at least gamma entries of pi(r) >= zeta^n", advisory=advisory)
    for r in (r_values if r_values is not None else [chain.settled_round()]):
        try:
            weights = limiting_weights(chain, r, threshold=threshold)
        except NotConverged as e:
            limit.skipped = f"pi({r}) not converged: {str(e)}"
            continue
        count = _count_at_least(weights.pi[nonfaulty], floor - weights.residual)
        limit.observe(float(gamma), float(count), {"r": r, "entries": count})
        total = float(weights.pi[[pos[a] for a in chain.live(r)]].sum())
        report.check("limiting_weights_sum", "sum of pi(r) over N[r] = 1").observe(
            abs(total - 1.0), weights.residual + STOCHASTIC_TOL, {"r": r})
    return report


def certify_reconstruction(trace: ExecutionTrace, chain: ProductChain) -> CertificationReport:
    """Per-round reconstruction residual, stochasticity and, for Byzantine chains, the xi*H certificate."""
    report = CertificationReport(chain.mode)
    residual = report.check("reconstruction_residual", f"residual <= {RESIDUAL_TOL}")
    stochastic = report.check("row_stochastic", "row sums 1 and entries >= 0")
    for m in chain.matrices:
        stochastic.observe(0.0 if m.is_row_stochastic() else 1.0, 0.0, {"t": m.t})
    if chain.mode == "byzantine":
        cert = report.check("reduced_graph_certificate", "M[t] >= xi * H[t] for a reduced graph H[t]")
        for built in chain.reconstructions:
            residual.observe(built.residual, RESIDUAL_TOL, {"t": built.matrix.t})
            cert.observe(0.0 if built.certificate is not None else 1.0, 0.0, {"t": built.matrix.t})
        recertified = sum(len(b.recertified_rows) for b in chain.reconstructions)
        if recertified:
            report.notes.append(f"{recertified} rows re-represented to dominate xi*H")
    else:
        for m in chain.matrices:
            residual.observe(crash_residual(trace, m), RESIDUAL_TOL, {"t": m.t})
        if trace.scenario.algorithm.metropolis:
            doubly = report.check("doubly_stochastic", "column sums 1")
            for m in chain.matrices:
                doubly.observe(0.0 if m.is_doubly_stochastic() else 1.0, 0.0, {"t": m.t})
    return report
