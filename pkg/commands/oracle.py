import argparse
import logging

from commands import EXIT_OK, common_parser, emit, optional_output
from exceptions import PreconditionError
from objective import ConstraintInterval, CostFamily
from oracle import ValidFamilyParams, optimum_interval, optimum_interval_sampled
from scenario import load_scenario
from summary import oracle_for

# Configure logging
logger = logging.getLogger(__name__)


def _floats(text: str):
    return [float(part) for part in text.split(",") if part.strip()]


def cmd_oracle(args: argparse.Namespace) -> int:
    """
    Optimum interval either for a scenario (guarantee parameters from its
    graph and algorithm) or for explicit centers, beta and gamma.
    """
    if args.scenario:
        scenario = load_scenario(args.scenario, seed=args.seed, algorithm=args.algorithm)
        guarantee, interval = oracle_for(scenario, budget=args.budget)
        payload = {"interval": interval.to_dict(), "guarantee": guarantee.to_dict(), "scenario": scenario.name}
    else:
        if not args.centers or args.beta is None or args.gamma is None:
            raise PreconditionError("give a scenario file or --centers, --beta and --gamma")
        costs = CostFamily.from_centers(_floats(args.centers), _floats(args.curvatures) if args.curvatures else ())
        nonfaulty = [int(a) for a in args.nonfaulty.split(",")] if args.nonfaulty else list(range(1, len(costs) + 1))
        params = ValidFamilyParams(args.beta, args.gamma, args.mode)
        constraint = ConstraintInterval(args.lo, args.hi) if args.lo is not None and args.hi is not None else None
        if costs.is_unit_curvature() and not args.samples:
            interval = optimum_interval(costs, nonfaulty, params, constraint)
        else:
            interval = optimum_interval_sampled(costs, nonfaulty, params, constraint, count=args.samples or 2000,
                                                seed=args.seed or 0)
        payload = {"interval": interval.to_dict()}
    emit(payload, optional_output(args, "oracle.json"))
    return EXIT_OK


def register(subparsers) -> None:
    parser = subparsers.add_parser("oracle", parents=[common_parser()],
                                   help="optimum interval of a valid-function family")
    parser.add_argument("scenario", nargs="?", default=None, help="scenario TOML file")
    parser.add_argument("--algorithm", default=None, help="override the scenario algorithm")
    parser.add_argument("--centers", default=None, help="comma-separated cost centers")
    parser.add_argument("--curvatures", default=None, help="comma-separated curvatures (default all 1)")
    parser.add_argument("--nonfaulty", default=None, help="comma-separated non-faulty agents (default all)")
    parser.add_argument("--beta", type=float, default=None)
    parser.add_argument("--gamma", type=int, default=None)
    parser.add_argument("--mode", choices=("byzantine", "crash"), default="byzantine")
    parser.add_argument("--lo", type=float, default=None, help="constraint lower end")
    parser.add_argument("--hi", type=float, default=None, help="constraint upper end")
    parser.add_argument("--samples", type=int, default=None, help="use the sampled inner approximation")
    parser.set_defaults(handler=cmd_oracle)
