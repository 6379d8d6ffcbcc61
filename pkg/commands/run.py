import argparse
import logging

from commands import EXIT_CERTIFICATION, EXIT_OK, common_parser, output_dir
from commands.analyze import certify_trace
from engine import run
from ergodic import build_chain
from scenario import load_scenario
from summary import summarize
from trace_io import write_matrices_csv, write_trace_csv, write_trace_json
from utils import canonical_json, show_info, show_success, write_json

# Configure logging
logger = logging.getLogger(__name__)


def cmd_run(args: argparse.Namespace) -> int:
    """
    Execute one scenario and write trace.csv, trace.json and summary.json.
    Membership in the optimum interval is reported, never enforced.
    """
    scenario = load_scenario(args.scenario, seed=args.seed, rounds=args.rounds, algorithm=args.algorithm)
    out = output_dir(args)
    trace = run(scenario)

    write_trace_csv(trace, out / "trace.csv")
    write_trace_json(trace, out / "trace.json")

    certification = None
    if args.certify or args.matrices:
        chain = build_chain(trace)
        if args.matrices:
            write_matrices_csv(chain, out / "matrices.csv")
        if args.certify:
            certification = certify_trace(trace, chain, budget=args.budget)
            write_json(out / "certification.json", certification)

    record = summarize(trace, budget=args.budget, certification=certification)
    write_json(out / "summary.json", record.to_dict())
    print(canonical_json(record.to_dict()), end="")

    if record.member is None:
        show_info(f"{scenario.name}: spread {record.final_spread:.3e}, consensus {record.consensus_value:.6g}")
    else:
        show_success(f"{scenario.name}: spread {record.final_spread:.3e}, consensus {record.consensus_value:.6g}, "
                     f"in [{record.interval_lo:.6g}, {record.interval_hi:.6g}]: {record.member}")
    if args.assert_ and certification is not None and not certification["pass"]:
        return EXIT_CERTIFICATION
    return EXIT_OK


def register(subparsers) -> None:
    parser = subparsers.add_parser("run", parents=[common_parser()], help="run one scenario")
    parser.add_argument("scenario", help="scenario TOML file")
    parser.add_argument("--rounds", type=int, default=None, help="override the number of rounds")
    parser.add_argument("--algorithm", default=None, help="override the algorithm")
    parser.add_argument("--matrices", action="store_true", help="also dump the per-round matrices")
    parser.add_argument("--certify", action="store_true", help="also write certification.json")
    parser.set_defaults(handler=cmd_run)
