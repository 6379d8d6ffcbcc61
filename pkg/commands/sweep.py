import argparse
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd

from commands import EXIT_OK, common_parser, output_dir
from engine import run
from scenario import describe_error, load_scenario, load_sweep
from summary import SummaryRecord, summarize
from trace_io import frame_to_csv
from utils import get_setting, show_info, show_success, show_warning, write_text_atomic

# Configure logging
logger = logging.getLogger(__name__)


def run_cell(cell: Tuple[Path, Optional[str], int, Optional[int]], budget: Optional[int] = None) -> Tuple[Dict, float]:
    """One sweep cell; errors end up in the row instead of aborting the sweep."""
    path, algorithm, seed, rounds = cell
    start = time.perf_counter()
    try:
        scenario = load_scenario(path, seed=seed, rounds=rounds, algorithm=algorithm)
        row = summarize(run(scenario), budget=budget).to_dict()
    except Exception as e:
        logger.error(f"Sweep cell {path.name} / {algorithm} / seed {seed} failed: {str(e)}")
        row = {name: None for name in SummaryRecord.columns()}
        row.update({"scenario": path.stem, "algorithm": algorithm or "", "seed": seed,
                    "audit_passed": 0, "audit_failed": 0, "error": describe_error(e)})
    return row, time.perf_counter() - start


def aggregate(frame: pd.DataFrame) -> pd.DataFrame:
    """Per-algorithm cell count, error count, membership rate and mean spread."""
    if frame.empty:
        return pd.DataFrame(columns=["algorithm", "cells", "errors", "membership_rate", "mean_final_spread"])
    rows = []
    for algorithm, group in frame.groupby("algorithm", sort=True):
        members = group["member"].dropna()
        rows.append({
            "algorithm": algorithm,
            "cells": len(group),
            "errors": int((group["error"].fillna("") != "").sum()),
            "membership_rate": float(members.astype(bool).mean()) if len(members) else None,
            "mean_final_spread": float(group["final_spread"].dropna().mean()) if group["final_spread"].notna().any() else None,
        })
    return pd.DataFrame(rows)


def save_to_database(sweep_file: str, rows: Sequence[Dict], times: Sequence[float], total: float,
                     url: Optional[str] = None) -> int:
    """Store a finished sweep; returns the SweepRun id."""
    import database
    from init_db import initialize_database
    from models import SweepRow, SweepRun

    initialize_database(url or get_setting("FTOPT_DATABASE_URL"))
    with database.get_db_context() as db:
        try:
            sweep_run = SweepRun(sweep_file=sweep_file, cells=len(rows),
                                 errors=sum(1 for r in rows if r.get("error")), wall_clock=total)
            db.add(sweep_run)
            db.flush()
            for index, (row, seconds) in enumerate(zip(rows, times)):
                values = {k: v for k, v in row.items() if k not in ("certification_passed", "certification_failed")}
                db.add(SweepRow(run_id=sweep_run.id, cell=index, wall_clock=seconds, **values))
            db.commit()
            logger.info(f"Stored sweep run {sweep_run.id} with {len(rows)} rows")
            return sweep_run.id
        except Exception as e:
            db.rollback()
            logger.error(f"Error storing sweep results: {str(e)}")
            raise


def cmd_sweep(args: argparse.Namespace) -> int:
    """Run every scenario x algorithm x seed cell and write sweep.csv plus sweep_aggregate.csv."""
    cells = load_sweep(args.sweep)
    if args.seed is not None:
        cells = [(p, a, args.seed, r) for p, a, _, r in cells]
    out = output_dir(args)
    show_info(f"Running {len(cells)} sweep cells with {args.jobs} worker(s)")

    start = time.perf_counter()
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(run_cell, cells, [args.budget] * len(cells)))
    else:
        results = [run_cell(cell, args.budget) for cell in cells]
    total = time.perf_counter() - start

    rows: List[Dict] = [row for row, _ in results]
    frame = pd.DataFrame(rows, columns=SummaryRecord.columns())
    write_text_atomic(out / "sweep.csv", frame_to_csv(frame))
    write_text_atomic(out / "sweep_aggregate.csv", frame_to_csv(aggregate(frame)))

    if args.db is not None:
        save_to_database(str(args.sweep), rows, [t for _, t in results], total, args.db)

    errors = sum(1 for row in rows if row.get("error"))
    if errors:
        show_warning(f"{errors} of {len(rows)} cells reported errors")
    show_success(f"Sweep finished: {len(rows)} rows in {out}")
    return EXIT_OK


def register(subparsers) -> None:
    parser = subparsers.add_parser("sweep", parents=[common_parser()], help="run a grid of scenarios and seeds")
    parser.add_argument("sweep", help="sweep TOML file")
    parser.add_argument("--jobs", type=int, default=1, help="worker processes (rows keep the grid order)")
    parser.add_argument("--db", nargs="?", const="", default=None,
                        help="also store rows in the results database (default: FTOPT_DATABASE_URL)")
    parser.set_defaults(handler=cmd_sweep)
