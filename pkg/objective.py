"""Local costs, the constraint interval and the diminishing step schedule."""
import logging
import math
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from exceptions import PreconditionError

# Configure logging
logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QuadraticCost:
    """h(x) = (curvature / 2) * (x - center)^2."""

    center: float
    curvature: float = 1.0

    def __post_init__(self):
        if not math.isfinite(self.center):
            raise PreconditionError(f"cost center must be finite, got {self.center}")
        if not (self.curvature > 0 and math.isfinite(self.curvature)):
            raise PreconditionError(f"curvature must be positive, got {self.curvature}")

    def value(self, x: float) -> float:
        return 0.5 * self.curvature * (x - self.center) ** 2

    def gradient(self, x: float) -> float:
        return self.curvature * (x - self.center)


@dataclass(frozen=True)
class ConstraintInterval:
    """Closed interval X = [lo, hi]."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise PreconditionError("constraint endpoints must be finite")
        if self.lo > self.hi:
            raise PreconditionError(f"empty constraint [{self.lo}, {self.hi}]")

    def project(self, x: float) -> float:
        return float(np.clip(x, self.lo, self.hi))

    def contains(self, x: float, tol: float = 0.0) -> bool:
        return self.lo - tol <= x <= self.hi + tol

    @property
    def width(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class StepSchedule:
    """lambda[t] = lambda0 / (t + 1)^p with 1/2 < p <= 1."""

    lambda0: float = 1.0
    p: float = 1.0

    def __post_init__(self):
        if not self.lambda0 > 0:
            raise PreconditionError(f"lambda0 must be positive, got {self.lambda0}")
        if not (0.5 < self.p <= 1.0):
            raise PreconditionError(f"exponent p must lie in (1/2, 1], got {self.p}")

    def step(self, t: int) -> float:
        if t < 0:
            raise PreconditionError(f"step index must be >= 0, got {t}")
        return self.lambda0 / (t + 1) ** self.p

    def steps(self, count: int) -> np.ndarray:
        """lambda[0], ..., lambda[count - 1]."""
        return self.lambda0 / np.power(np.arange(1, count + 1, dtype=float), self.p)


@dataclass(frozen=True)
class CostFamily:
    """One quadratic cost per agent; agent labels are 1..n."""

    costs: Tuple[QuadraticCost, ...]

    @classmethod
    def from_centers(cls, centers: Iterable[float], curvatures: Sequence[float] = ()) -> "CostFamily":
        centers = [float(c) for c in centers]
        if curvatures and len(curvatures) != len(centers):
            raise PreconditionError("centers and curvatures differ in length")
        return cls(tuple(
            QuadraticCost(c, float(curvatures[k]) if curvatures else 1.0)
            for k, c in enumerate(centers)
        ))

    def __len__(self) -> int:
        return len(self.costs)

    def cost(self, agent: int) -> QuadraticCost:
        if not 1 <= agent <= len(self.costs):
            raise PreconditionError(f"no cost for agent {agent}")
        return self.costs[agent - 1]

    def gradient(self, agent: int, x: float) -> float:
        return self.cost(agent).gradient(x)

    def centers(self) -> List[float]:
        return [c.center for c in self.costs]

    def is_unit_curvature(self) -> bool:
        return all(c.curvature == 1.0 for c in self.costs)


def project(interval: ConstraintInterval, x: float) -> float:
    """Euclidean projection onto X."""
    return interval.project(x)


def gradient(cost: QuadraticCost, x: float) -> float:
    return cost.gradient(x)


def lipschitz_bound(family: CostFamily, interval: ConstraintInterval) -> float:
    """
    L = max over agents and x in X of |h_i'(x)|.

    The derivative is affine, so the maximum sits at an endpoint of X.
    """
    bound = max(
        max(abs(c.gradient(interval.lo)), abs(c.gradient(interval.hi)))
        for c in family.costs
    )
    logger.debug(f"Lipschitz bound over [{interval.lo}, {interval.hi}]: {bound}")
    return float(bound)


def minimizer(family: CostFamily, weights: Sequence[float], interval: ConstraintInterval = None) -> float:
    """Minimizer of sum_i weights[i] * h_i, projected onto X when given."""
    w = np.asarray(weights, dtype=float)
    a = np.array([c.curvature for c in family.costs])
    c = np.array(family.centers())
    denom = float(np.dot(w, a))
    if denom <= 0:
        raise PreconditionError("weights put no mass on any cost")
    x = float(np.dot(w * a, c) / denom)
    return interval.project(x) if interval is not None else x
