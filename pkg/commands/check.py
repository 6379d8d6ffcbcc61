import argparse
import logging

from commands import EXIT_CERTIFICATION, EXIT_OK, common_parser, emit, optional_output
from engine import Algorithm
from exceptions import EnumerationBudgetExceeded, FtOptSimError
from netgraph import FaultSetSpec, check_assumption_byzantine, check_assumption_crash, load_graph
from oracle import guarantee_params
from utils import parse_agent_list, show_success, show_warning

# Configure logging
logger = logging.getLogger(__name__)

BYZANTINE_ALGORITHMS = (Algorithm.A1, Algorithm.A2)
CRASH_ALGORITHMS = (Algorithm.A3, Algorithm.A5, Algorithm.A6)
UNDIRECTED_ALGORITHMS = (Algorithm.A4, Algorithm.A5M)


def cmd_check(args: argparse.Namespace) -> int:
    """Feasibility report plus guarantee parameters for every applicable algorithm."""
    graph = load_graph(args.graph)
    faulty = parse_agent_list(args.faulty)
    FaultSetSpec(args.f, frozenset(faulty)).validate(graph)
    modes = ("byzantine", "crash") if args.mode == "both" else (args.mode,)

    payload = {"graph": str(args.graph), "n": graph.n, "f": args.f, "faulty": sorted(faulty),
               "checks": {}, "guarantees": {}}
    holds = True
    for mode in modes:
        if mode == "byzantine":
            report = check_assumption_byzantine(graph, args.f, args.budget)
            algorithms = BYZANTINE_ALGORITHMS
        else:
            report = check_assumption_crash(graph, args.f, args.budget)
            algorithms = CRASH_ALGORITHMS + (UNDIRECTED_ALGORITHMS if graph.is_undirected() else ())
        payload["checks"][mode] = report.to_dict()
        holds = holds and report.holds
        if report.holds:
            show_success(f"{mode} condition holds for f={args.f} (gamma={report.gamma})")
        else:
            show_warning(f"{mode} condition fails for f={args.f}: {report.witness['reason']}")
        if args.no_guarantees:
            continue
        for algorithm in algorithms:
            try:
                guarantee = guarantee_params(graph, faulty, args.f, algorithm, args.budget)
                payload["guarantees"][algorithm.value] = guarantee.to_dict()
            except EnumerationBudgetExceeded:
                raise
            except FtOptSimError as e:
                logger.warning(f"No guarantee for {algorithm.value}: {str(e)}")
                payload["guarantees"][algorithm.value] = {"error": f"{type(e).__name__}: {str(e)}"}

    emit(payload, optional_output(args, "check.json"))
    if args.assert_ and not holds:
        return EXIT_CERTIFICATION
    return EXIT_OK


def register(subparsers) -> None:
    parser = subparsers.add_parser("check", parents=[common_parser()],
                                   help="check a graph against the fault-tolerance conditions")
    parser.add_argument("graph", help="edge-list file ('n <count>' header, one 'sender receiver' per line)")
    parser.add_argument("--f", type=int, required=True, help="fault budget")
    parser.add_argument("--mode", choices=("byzantine", "crash", "both"), default="both")
    parser.add_argument("--faulty", default="", help="comma-separated faulty agents for the guarantee formulas")
    parser.add_argument("--no-guarantees", action="store_true", help="skip the guarantee formulas")
    parser.set_defaults(handler=cmd_check)
