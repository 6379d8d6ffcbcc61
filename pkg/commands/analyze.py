import argparse
import logging
from pathlib import Path
from typing import Dict, Optional

from commands import EXIT_CERTIFICATION, EXIT_OK, common_parser, emit, optional_output
from engine import ExecutionTrace
from ergodic import (
    CertificationReport,
    ProductChain,
    RateParams,
    auxiliary_sequence,
    build_chain,
    certify_rate_byzantine,
    certify_rate_crash,
    certify_reconstruction,
    limiting_weights,
)
from exceptions import NotConverged, TraceMismatch
from trace_io import load_trace, write_matrices_csv
from utils import show_success, show_warning

# Configure logging
logger = logging.getLogger(__name__)


def certify_trace(trace: ExecutionTrace, chain: ProductChain, budget: Optional[int] = None,
                  r: Optional[int] = None, window: int = 100, threshold: Optional[float] = None,
                  auxiliary: bool = False) -> Dict:
    """Reconstruction checks plus the rate certification matching the trace's fault model."""
    scenario = trace.scenario
    g, f = scenario.graph, scenario.faults.f
    report = certify_reconstruction(trace, chain)
    payload: Dict = {"scenario": scenario.name, "algorithm": scenario.algorithm.value, "rounds": trace.T}

    if chain.mode == "byzantine":
        params = RateParams.byzantine(g, scenario.faults.faulty, f, budget)
        start = r if r is not None else chain.first
        try:
            report.merge(certify_rate_byzantine(chain, params, start, window=window, threshold=threshold,
                                                seed=scenario.seed))
        except NotConverged as e:
            report.notes.append(f"rate checks skipped: pi({start}) {str(e)}")
    else:
        params = RateParams.crash(g, f, budget)
        r_values = [r] if r is not None else None
        report.merge(certify_rate_crash(chain, params, r_values=r_values, threshold=threshold, seed=scenario.seed))
    payload["params"] = params.to_dict()

    if auxiliary:
        payload["auxiliary"] = _auxiliary_check(chain, trace, threshold, report)
    payload["report"] = report.to_dict()
    payload.update({"pass": report.passed, "checks_passed": report.tallies[0], "checks_failed": report.tallies[1]})
    return payload


def _auxiliary_check(chain: ProductChain, trace: ExecutionTrace, threshold: Optional[float],
                     report: CertificationReport) -> Dict:
    """y[t] must stay inside [m[t], M[t]] for every round."""
    check = report.check("auxiliary_containment", "m[t] <= y[t] <= M[t]")
    try:
        rows = auxiliary_sequence(chain, trace, threshold=threshold)
    except NotConverged as e:
        check.skipped = str(e)
        return {"rows": 0}
    for row in rows:
        slack = row["residual"] * max(abs(row["m"]), abs(row["M"]), 1.0) + 1e-12
        gap = max(row["m"] - row["y"], row["y"] - row["M"], 0.0)
        check.observe(gap, slack, {"t": row["t"]})
    return {"rows": len(rows), "last": rows[-1] if rows else None}


def _resolve_trace_path(path: str) -> Path:
    """Accept the JSON sidecar or the CSV next to it."""
    p = Path(path)
    if p.suffix == ".csv":
        p = p.with_suffix(".json")
    return p


def cmd_analyze(args: argparse.Namespace) -> int:
    """Rebuild the matrices of a recorded run and certify them."""
    trace = load_trace(_resolve_trace_path(args.trace))
    if args.mode and (args.mode == "byzantine") != trace.scenario.algorithm.is_byzantine:
        raise TraceMismatch(f"{trace.scenario.algorithm.value} trace cannot be analyzed in {args.mode} mode")
    chain = build_chain(trace, recertify=not args.no_recertify)
    if args.matrices and args.out:
        write_matrices_csv(chain, Path(args.out) / "matrices.csv")

    payload = certify_trace(trace, chain, budget=args.budget, r=args.r, window=args.window,
                            threshold=args.threshold, auxiliary=args.auxiliary)
    if args.pi is not None:
        try:
            weights = limiting_weights(chain, args.pi, threshold=args.threshold)
            payload["pi"] = {"r": args.pi, "weights": dict(zip(map(str, chain.agents), weights.pi.tolist())),
                             "residual": weights.residual}
        except NotConverged as e:
            payload["pi"] = {"r": args.pi, "error": str(e)}
    emit(payload, optional_output(args, "certification.json"))

    if payload["pass"]:
        show_success(f"{payload['checks_passed']} checks passed")
    else:
        show_warning(f"{payload['checks_failed']} checks failed")
    if args.assert_ and not payload["pass"]:
        return EXIT_CERTIFICATION
    return EXIT_OK


def register(subparsers) -> None:
    parser = subparsers.add_parser("analyze", parents=[common_parser()],
                                   help="rebuild matrices from a trace and certify the rate bounds")
    parser.add_argument("trace", help="trace.json written by 'run' (or the trace.csv beside it)")
    parser.add_argument("--mode", choices=("byzantine", "crash"), default=None)
    parser.add_argument("--r", type=int, default=None, help="start round for the rate checks")
    parser.add_argument("--window", type=int, default=100, help="rounds after r covered by the rate check")
    parser.add_argument("--threshold", type=float, default=None, help="convergence threshold for pi(r)")
    parser.add_argument("--pi", type=int, default=None, help="also report pi(r) for this r")
    parser.add_argument("--auxiliary", action="store_true", help="check y[t] containment for every round")
    parser.add_argument("--matrices", action="store_true", help="dump matrices.csv under --out")
    parser.add_argument("--no-recertify", action="store_true",
                        help="keep the bracketing rows even when they do not dominate xi*H")
    parser.set_defaults(handler=cmd_analyze)
