"""
Valid-function families and their optimum intervals.

A weight vector alpha is valid for (beta, gamma) when it is a probability
vector (supported on the non-faulty agents N in Byzantine mode, on every
agent in crash mode) and at least gamma agents of N carry weight >= beta.
For unit-curvature quadratics the minimizer of sum alpha_i h_i is the
weighted mean of the centers, so the union of minimizers is an interval
whose endpoints are found greedily.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Union

import numpy as np

from engine import Algorithm
from exceptions import CurvatureUnsupported, InvalidParams
from ergodic import RateParams
from netgraph import DirectedGraph, check_assumption_byzantine, check_assumption_crash
from objective import ConstraintInterval, CostFamily, minimizer

# Configure logging
logger = logging.getLogger(__name__)

WEIGHT_TOL = 1e-12

MODES = ("byzantine", "crash")


@dataclass(frozen=True)
class ValidFamilyParams:
    beta: float
    gamma: int
    mode: str = "byzantine"

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidParams(f"mode must be one of {MODES}, got {self.mode!r}")
        if not (self.beta >= 0 and math.isfinite(self.beta)):
            raise InvalidParams(f"beta must be a finite number >= 0, got {self.beta}")
        if self.gamma < 0:
            raise InvalidParams(f"gamma must be >= 0, got {self.gamma}")

    def check_against(self, nonfaulty: Sequence[int]) -> None:
        """beta <= 1/|N|, gamma <= |N| and beta * gamma <= 1."""
        if not nonfaulty:
            raise InvalidParams("no non-faulty agents")
        if self.beta > 1.0 / len(nonfaulty) + WEIGHT_TOL:
            raise InvalidParams(f"beta = {self.beta} exceeds 1/|N| = {1.0 / len(nonfaulty)}")
        if self.beta * self.gamma > 1.0 + WEIGHT_TOL:
            raise InvalidParams(f"beta * gamma = {self.beta * self.gamma} exceeds 1")
        if self.gamma > len(nonfaulty):
            raise InvalidParams(f"gamma = {self.gamma} exceeds |N| = {len(nonfaulty)}")

    @property
    def residual_mass(self) -> float:
        return max(0.0, 1.0 - self.gamma * self.beta)


@dataclass(frozen=True)
class OptimumInterval:
    lo: float
    hi: float
    mode: str
    beta: float
    gamma: int
    exact: bool = True

    def __post_init__(self):
        if self.lo > self.hi:
            raise InvalidParams(f"empty optimum interval [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def distance(self, x: float) -> float:
        """Dist(x, [lo, hi])."""
        return max(self.lo - x, 0.0, x - self.hi)

    def to_dict(self) -> Dict:
        return {"lo": self.lo, "hi": self.hi, "mode": self.mode, "beta": self.beta,
                "gamma": self.gamma, "exact": self.exact}


@dataclass
class GuaranteeReport:
    algorithm: str
    mode: str
    beta: float
    gamma: Optional[int]
    feasible: bool
    precondition: str
    precondition_holds: bool
    tau: Optional[int] = None
    tau_exact: bool = True
    feasibility: Dict = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)

    @property
    def params(self) -> ValidFamilyParams:
        return ValidFamilyParams(self.beta, self.gamma or 0, self.mode)

    def to_dict(self) -> Dict:
        return {
            "algorithm": self.algorithm, "mode": self.mode, "beta": self.beta, "gamma": self.gamma,
            "feasible": self.feasible, "infeasible_graph": not self.feasible,
            "precondition": self.precondition, "precondition_holds": self.precondition_holds,
            "tau": self.tau, "tau_exact": self.tau_exact, "feasibility": self.feasibility,
            "notes": list(self.notes),
        }


def mode_of(algorithm: Union[Algorithm, str]) -> str:
    return "byzantine" if Algorithm(algorithm).is_byzantine else "crash"


def guarantee_params(graph: DirectedGraph, faulty: Sequence[int], f: int,
                     algorithm: Union[Algorithm, str], budget: Optional[int] = None) -> GuaranteeReport:
    """(beta, gamma) of the valid family each algorithm is guaranteed to optimize."""
    algorithm = Algorithm(algorithm)
    faulty = tuple(sorted(set(faulty)))
    mode = mode_of(algorithm)
    nonfaulty = [v for v in graph.vertices if v not in faulty]
    feasibility = check_assumption_byzantine(graph, f, budget) if mode == "byzantine" \
        else check_assumption_crash(graph, f, budget)

    def phi(i: int) -> int:
        return sum(1 for j in graph.in_neighbors(i) if j in faulty)

    tau, tau_exact = None, True
    notes: List[str] = []
    if algorithm == Algorithm.A1:
        params = RateParams.byzantine(graph, faulty, f, budget)
        beta = params.xi ** params.nu
        gamma = params.gamma
        tau, tau_exact = params.tau, params.tau_exact
        precondition = f"gamma >= f + 1 = {f + 1}"
        holds = gamma is not None and gamma >= f + 1
        if not tau_exact:
            notes.append("tau is a lower bound, so beta is an upper estimate")
    elif algorithm == Algorithm.A2:
        slack = [graph.in_degree(i) + 1 - phi(i) - f for i in nonfaulty]
        beta = min(1.0 / (2 * max(slack)), 1.0 / len(nonfaulty))
        gamma = min(slack)
        precondition = "min_i (d_i + 1 - phi_i - f) >= 1"
        holds = gamma >= 1
    elif algorithm in (Algorithm.A3, Algorithm.A5):
        beta = 1.0 / (graph.max_in_degree + 1) ** graph.n
        gamma = feasibility.gamma
        precondition = "gamma >= 1"
        holds = gamma is not None and gamma >= 1
    elif algorithm == Algorithm.A6:
        slack = [graph.in_degree(i) + 1 - phi(i) for i in graph.vertices]
        beta = min(1.0 / max(slack), 1.0 / len(nonfaulty))
        gamma = min(slack)
        precondition = "min over all agents, faulty included"
        holds = gamma >= 1
        notes.append("gamma ranges over every agent, not only the non-faulty ones")
    else:
        beta = 1.0 / len(nonfaulty)
        gamma = len(nonfaulty)
        precondition = "undirected graph, uniform weights over N"
        holds = graph.is_undirected()

    if not feasibility.holds:
        notes.append(f"graph fails the {mode} condition; values are formula evaluations only")
    logger.info(f"Guarantee for {algorithm.value}: beta={beta:.6g}, gamma={gamma}, feasible={feasibility.holds}")
    return GuaranteeReport(algorithm.value, mode, beta, gamma, feasibility.holds, precondition, holds,
                           tau, tau_exact, feasibility.to_dict(), notes)


def _support(costs: CostFamily, nonfaulty: Sequence[int], mode: str) -> List[int]:
    return sorted(nonfaulty) if mode == "byzantine" else list(range(1, len(costs) + 1))


def _greedy_endpoint(centers: Dict[int, float], nonfaulty: Sequence[int], support: Sequence[int],
                     params: ValidFamilyParams, largest: bool) -> float:
    sign = -1.0 if largest else 1.0
    chosen = sorted(nonfaulty, key=lambda a: (sign * centers[a], a))[: params.gamma]
    extreme = (max if largest else min)(centers[a] for a in support)
    terms = [params.beta * centers[a] for a in chosen] + [params.residual_mass * extreme]
    return math.fsum(terms)


def optimum_interval(costs: CostFamily, nonfaulty: Sequence[int], params: ValidFamilyParams,
                     constraint: Optional[ConstraintInterval] = None) -> OptimumInterval:
    """
    X(beta, gamma) for unit-curvature costs, or Y(beta, gamma) when a
    constraint is given (the projection of X onto it).
    """
    if not costs.is_unit_curvature():
        raise CurvatureUnsupported("exact optimum interval needs unit curvature; use optimum_interval_sampled")
    nonfaulty = sorted(set(nonfaulty))
    if not nonfaulty:
        raise InvalidParams("no non-faulty agents")
    params.check_against(nonfaulty)
    centers = {a: costs.cost(a).center for a in range(1, len(costs) + 1)}
    support = _support(costs, nonfaulty, params.mode)
    lo = _greedy_endpoint(centers, nonfaulty, support, params, largest=False)
    hi = _greedy_endpoint(centers, nonfaulty, support, params, largest=True)
    if constraint is not None:
        lo, hi = constraint.project(lo), constraint.project(hi)
    return OptimumInterval(lo, hi, params.mode, params.beta, params.gamma, exact=True)


def sample_valid_weights(params: ValidFamilyParams, nonfaulty: Sequence[int], agents: Sequence[int],
                         count: int, seed: int) -> np.ndarray:
    """
    ``count`` random valid weight vectors over ``agents`` (one per row): a
    random gamma-subset of N gets beta each and the rest of the mass is
    spread with a flat Dirichlet draw over the admissible support.
    """
    nonfaulty = sorted(set(nonfaulty))
    agents = list(agents)
    params.check_against(nonfaulty)
    if count < 0:
        raise InvalidParams(f"count must be >= 0, got {count}")
    out = np.zeros((count, len(agents)))
    if count == 0:
        return out
    rng = np.random.default_rng(seed)
    pos = {a: k for k, a in enumerate(agents)}
    support = [pos[a] for a in (nonfaulty if params.mode == "byzantine" else agents)]
    nf_pos = np.array([pos[a] for a in nonfaulty])
    rest = params.residual_mass
    for k in range(count):
        chosen = rng.choice(nf_pos, size=params.gamma, replace=False)
        out[k, chosen] = params.beta
        out[k, support] += rest * rng.dirichlet(np.ones(len(support)))
    return out


def is_valid_weights(alpha: Union[Mapping[int, float], Sequence[float]], params: ValidFamilyParams,
                     nonfaulty: Sequence[int], agents: Sequence[int], tol: float = WEIGHT_TOL) -> bool:
    agents = list(agents)
    if isinstance(alpha, Mapping):
        weights = {a: float(alpha.get(a, 0.0)) for a in agents}
    else:
        values = list(alpha)
        if len(values) != len(agents):
            return False
        weights = dict(zip(agents, (float(v) for v in values)))
    nonfaulty = set(nonfaulty)
    if any(w < -tol for w in weights.values()):
        return False
    if params.mode == "byzantine" and any(abs(w) > tol for a, w in weights.items() if a not in nonfaulty):
        return False
    if abs(math.fsum(weights.values()) - 1.0) > tol * max(1, len(agents)):
        return False
    heavy = sum(1 for a in nonfaulty if weights.get(a, 0.0) >= params.beta - tol)
    return heavy >= params.gamma


def optimum_interval_sampled(costs: CostFamily, nonfaulty: Sequence[int], params: ValidFamilyParams,
                             constraint: Optional[ConstraintInterval] = None, count: int = 2000,
                             seed: int = 0) -> OptimumInterval:
    """Inner approximation of Y(beta, gamma) for arbitrary curvature."""
    agents = list(range(1, len(costs) + 1))
    samples = sample_valid_weights(params, nonfaulty, agents, count, seed)
    if count == 0:
        raise InvalidParams("need at least one sample")
    optima = [minimizer(costs, row, constraint) for row in samples]
    logger.debug(f"Sampled {count} valid weight vectors for beta={params.beta}, gamma={params.gamma}")
    return OptimumInterval(min(optima), max(optima), params.mode, params.beta, params.gamma, exact=False)


def membership(x: float, interval: OptimumInterval, tol: float = 0.0) -> bool:
    if tol < 0:
        raise InvalidParams(f"tolerance must be >= 0, got {tol}")
    return interval.lo - tol <= x <= interval.hi + tol
