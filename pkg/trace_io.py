"""Trace, matrix and table files."""
import io
import logging
from pathlib import Path
from typing import Dict, List, Union

import pandas as pd

from engine import AgentStep, ExecutionTrace, Message, RoundRecord
from ergodic import ProductChain
from exceptions import ParseError, TraceMismatch
from scenario import scenario_from_dict, scenario_to_dict
from utils import read_json, write_json, write_text_atomic

# Configure logging
logger = logging.getLogger(__name__)

TRACE_HEADER = "# ft-optsim trace v1"
MATRIX_HEADER = "# ft-optsim matrices v1"
TRACE_FORMAT = "ft-optsim trace v1"
TRACE_COLUMNS = ["round", "agent", "estimate", "gradient_used", "projection_error"]
FLOAT_FORMAT = "%.17g"


def frame_to_csv(frame: pd.DataFrame, header: str = "") -> str:
    """CSV text with a leading comment line and round-trippable floats."""
    buffer = io.StringIO()
    if header:
        buffer.write(header + "\n")
    frame.to_csv(buffer, index=False, float_format=FLOAT_FORMAT, na_rep="", lineterminator="\n")
    return buffer.getvalue()


# Trace CSV
def trace_frame(trace: ExecutionTrace) -> pd.DataFrame:
    """One row per (round, recorded agent); round 0 holds the initial estimates."""
    rows = []
    for agent in trace.recorded_agents:
        rows.append((0, agent, trace.initial[agent], None, None))
    for record in trace.rounds:
        for agent in trace.recorded_agents:
            step = record.steps.get(agent)
            if step is None:
                rows.append((record.t, agent, record.estimates[agent], None, None))
            else:
                rows.append((record.t, agent, step.estimate, step.gradient_used, step.projection_error))
    frame = pd.DataFrame(rows, columns=TRACE_COLUMNS)
    return frame.astype({"round": "int64", "agent": "int64", "estimate": "float64",
                         "gradient_used": "float64", "projection_error": "float64"})


def write_trace_csv(trace: ExecutionTrace, path: Union[str, Path]) -> Path:
    return write_text_atomic(path, frame_to_csv(trace_frame(trace), TRACE_HEADER))


def read_trace_csv(path: Union[str, Path]) -> pd.DataFrame:
    with open(path, "r", encoding="utf-8") as handle:
        first = handle.readline().rstrip("\n")
        if first != TRACE_HEADER:
            raise ParseError(f"expected header {TRACE_HEADER!r}", str(path), 1)
        return pd.read_csv(handle, float_precision="round_trip")


# Trace JSON sidecar
def _step_to_dict(step: AgentStep) -> Dict:
    return {
        "agent": step.agent,
        "received": [list(p) for p in step.received],
        "retained": list(step.retained),
        "trimmed_low": list(step.trimmed_low),
        "trimmed_high": list(step.trimmed_high),
        "weights": [list(p) for p in step.weights],
        "aggregate": step.aggregate,
        "gradient_used": step.gradient_used,
        "projection_input": step.projection_input,
        "projection_error": step.projection_error,
        "estimate": step.estimate,
        "received_gradients": [list(p) for p in step.received_gradients],
        "retained_gradients": list(step.retained_gradients),
    }


def _step_from_dict(data: Dict) -> AgentStep:
    def pairs(key):
        return tuple((int(a), float(b) if b is not None else None) for a, b in data[key])

    return AgentStep(
        agent=int(data["agent"]),
        received=pairs("received"),
        retained=tuple(int(a) for a in data["retained"]),
        trimmed_low=tuple(int(a) for a in data["trimmed_low"]),
        trimmed_high=tuple(int(a) for a in data["trimmed_high"]),
        weights=pairs("weights"),
        aggregate=float(data["aggregate"]),
        gradient_used=float(data["gradient_used"]),
        projection_input=None if data["projection_input"] is None else float(data["projection_input"]),
        projection_error=float(data["projection_error"]),
        estimate=float(data["estimate"]),
        received_gradients=pairs("received_gradients"),
        retained_gradients=tuple(int(a) for a in data["retained_gradients"]),
    )


def trace_to_dict(trace: ExecutionTrace) -> Dict:
    rounds = []
    for record in trace.rounds:
        rounds.append({
            "t": record.t,
            "step_size": record.step_size,
            "estimates": {str(a): x for a, x in sorted(record.estimates.items())},
            "live_begin": list(record.live_begin),
            "live_end": list(record.live_end),
            "steps": [_step_to_dict(record.steps[a]) for a in sorted(record.steps)],
            "messages": [[m.sender, m.receiver, m.value, m.gradient] for m in record.messages],
            "defaults": [list(d) for d in record.defaults],
        })
    return {
        "format": TRACE_FORMAT,
        "scenario": scenario_to_dict(trace.scenario),
        "initial": {str(a): x for a, x in sorted(trace.initial.items())},
        "rounds": rounds,
    }


def trace_from_dict(data: Dict, path: str = None) -> ExecutionTrace:
    if data.get("format") != TRACE_FORMAT:
        raise ParseError(f"not a {TRACE_FORMAT} file", path)
    scenario = scenario_from_dict(data["scenario"], path=path)
    trace = ExecutionTrace(scenario, {int(a): float(x) for a, x in data["initial"].items()})
    for item in data["rounds"]:
        steps = [_step_from_dict(s) for s in item["steps"]]
        trace.rounds.append(RoundRecord(
            t=int(item["t"]),
            step_size=float(item["step_size"]),
            estimates={int(a): float(x) for a, x in item["estimates"].items()},
            live_begin=tuple(int(a) for a in item["live_begin"]),
            live_end=tuple(int(a) for a in item["live_end"]),
            steps={s.agent: s for s in steps},
            messages=tuple(Message(int(s), int(r), float(v), None if g is None else float(g))
                           for s, r, v, g in item["messages"]),
            defaults=tuple((int(i), int(j), float(w)) for i, j, w in item["defaults"]),
        ))
    expected = list(range(1, trace.T + 1))
    if [r.t for r in trace.rounds] != expected:
        raise TraceMismatch("rounds in the trace file are not consecutive from 1")
    return trace


def write_trace_json(trace: ExecutionTrace, path: Union[str, Path]) -> Path:
    return write_json(path, trace_to_dict(trace))


def load_trace(path: Union[str, Path]) -> ExecutionTrace:
    """Rebuild an ExecutionTrace, scenario included, from its JSON sidecar."""
    try:
        data = read_json(path)
    except (OSError, ValueError) as e:
        raise ParseError(f"cannot read trace: {str(e)}", str(path))
    trace = trace_from_dict(data, str(path))
    logger.info(f"Loaded trace {path}: {trace.scenario.algorithm.value}, T={trace.T}")
    return trace


# Matrix dumps
def matrices_frame(chain: ProductChain) -> pd.DataFrame:
    """Row-major dump: one line per (round, row agent), one column per agent."""
    columns = ["round", "row"] + [f"a{a}" for a in chain.agents]
    rows: List[list] = []
    for m in chain.matrices:
        for k, agent in enumerate(m.agents):
            rows.append([m.t, agent] + [float(v) for v in m.values[k]])
    return pd.DataFrame(rows, columns=columns)


def write_matrices_csv(chain: ProductChain, path: Union[str, Path]) -> Path:
    return write_text_atomic(path, frame_to_csv(matrices_frame(chain), MATRIX_HEADER))
