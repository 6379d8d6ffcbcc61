"""Per-run summary: spread, consensus value, oracle membership and audit tallies."""
import logging
from dataclasses import asdict, dataclass, fields
from typing import Dict, Optional, Tuple

from engine import ExecutionTrace, Scenario, audit_trace
from exceptions import FtOptSimError
from oracle import (
    GuaranteeReport,
    OptimumInterval,
    guarantee_params,
    optimum_interval,
    optimum_interval_sampled,
)
from utils import get_float_setting

# Configure logging
logger = logging.getLogger(__name__)


@dataclass
class SummaryRecord:
    scenario: str
    algorithm: str
    seed: int
    rounds: int
    n: int
    f: int
    faulty: str
    final_spread: float
    consensus_value: float
    interval_lo: Optional[float] = None
    interval_hi: Optional[float] = None
    interval_exact: Optional[bool] = None
    member: Optional[bool] = None
    distance: Optional[float] = None
    beta: Optional[float] = None
    gamma: Optional[int] = None
    feasible: Optional[bool] = None
    audit_passed: int = 0
    audit_failed: int = 0
    certification_passed: Optional[int] = None
    certification_failed: Optional[int] = None
    error: str = ""

    @classmethod
    def columns(cls):
        return [f.name for f in fields(cls)]

    def to_dict(self) -> Dict:
        return asdict(self)


def oracle_for(scenario: Scenario, guarantee: Optional[GuaranteeReport] = None,
               budget: Optional[int] = None) -> Tuple[GuaranteeReport, OptimumInterval]:
    """Guarantee parameters and the matching optimum interval for a scenario."""
    faulty = sorted(scenario.faults.faulty)
    if guarantee is None:
        guarantee = guarantee_params(scenario.graph, faulty, scenario.faults.f, scenario.algorithm, budget)
    params = guarantee.params
    if scenario.costs.is_unit_curvature():
        interval = optimum_interval(scenario.costs, scenario.nonfaulty, params, scenario.constraint)
    else:
        interval = optimum_interval_sampled(scenario.costs, scenario.nonfaulty, params, scenario.constraint,
                                            seed=scenario.seed)
    return guarantee, interval


def summarize(trace: ExecutionTrace, tol: Optional[float] = None, budget: Optional[int] = None,
              certification: Optional[Dict] = None) -> SummaryRecord:
    """
    Build the summary of one run. Everything comes from the trace and the
    oracle, so summarizing a reloaded trace gives the same record.
    """
    scenario = trace.scenario
    tol = get_float_setting("FTOPT_MEMBERSHIP_TOL") if tol is None else tol
    audit = audit_trace(trace)
    record = SummaryRecord(
        scenario=scenario.name,
        algorithm=scenario.algorithm.value,
        seed=scenario.seed,
        rounds=trace.T,
        n=scenario.graph.n,
        f=scenario.faults.f,
        faulty=",".join(str(a) for a in sorted(scenario.faults.faulty)),
        final_spread=trace.spread(),
        consensus_value=trace.consensus_value(),
        audit_passed=audit.total_passed,
        audit_failed=audit.total_failed,
    )
    if certification is not None:
        record.certification_passed = certification.get("checks_passed")
        record.certification_failed = certification.get("checks_failed")

    if not scenario.algorithm.projects:
        # consensus-only algorithms have no optimization target
        return record
    try:
        guarantee, interval = oracle_for(scenario, budget=budget)
    except FtOptSimError as e:
        logger.warning(f"No oracle interval for {scenario.name}: {str(e)}")
        record.error = f"{type(e).__name__}: {str(e)}"
        return record
    record.beta = guarantee.beta
    record.gamma = guarantee.gamma
    record.feasible = guarantee.feasible
    record.interval_lo = interval.lo
    record.interval_hi = interval.hi
    record.interval_exact = interval.exact
    record.distance = interval.distance(record.consensus_value)
    record.member = record.distance <= tol
    return record
