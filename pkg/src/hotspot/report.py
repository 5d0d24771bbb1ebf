"""Machine-readable reports: fixed-precision JSON, CSV snapshots and schema checks.

Floats are written with 17 significant digits so that identical inputs give
byte-identical output and every value round-trips exactly.  Non-finite
values are written as null.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .model import FieldState, ModelParams, SpikePattern

SCHEMA = "hotspot-report/1"
COMMANDS = ("predict", "validate", "steady", "simulate", "nlep-check", "sweep")


class _Float(str):
    pass


def _prepare(obj):
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return _Float(format(x, ".17g")) if math.isfinite(x) else None
    if isinstance(obj, dict):
        return {str(k): _prepare(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_prepare(v) for v in obj]
    return obj


def dumps(obj) -> str:
    """JSON text with floats at 17 significant digits and sorted keys."""
    prepared = _prepare(obj)
    return _render(prepared, 0) + "\n"


def _render(o, depth: int) -> str:
    pad = "  " * (depth + 1)
    end = "  " * depth
    if isinstance(o, _Float):
        return str.__str__(o)
    if o is None or isinstance(o, (bool, int, str)):
        return json.dumps(o)
    if isinstance(o, dict):
        if not o:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_render(o[k], depth + 1)}" for k in sorted(o)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(o, list):
        if not o:
            return "[]"
        if all(isinstance(v, (_Float, int, bool)) or v is None for v in o):
            return "[" + ", ".join(_render(v, depth + 1) for v in o) + "]"
        return "[\n" + ",\n".join(pad + _render(v, depth + 1) for v in o) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(o).__name__}")


def params_dict(p: ModelParams) -> dict:
    return {
        "L": p.L,
        "epsilon": p.epsilon,
        "D_hat": p.D_hat,
        "grid_n": int(p.grid_n),
        "A0": {"kind": p.A0.kind, "params": list(p.A0.values)},
        "gamma": {"kind": p.gamma.kind, "params": list(p.gamma.values)},
    }


def pattern_dict(pattern: SpikePattern | None):
    return None if pattern is None else pattern.as_dict()


@dataclass(frozen=True)
class PredictionReport:
    """A prediction, optionally with measured spikes, their errors and an epsilon trend."""

    params: dict
    mode: str
    predicted: dict
    measured: dict | None = None
    errors: dict | None = None
    epsilon_trend: tuple | None = None
    command: str = "predict"
    extra: dict | None = None

    def __post_init__(self):
        if (self.measured is None) != (self.errors is None):
            raise ValueError("errors must be present exactly when measured is present")
        if self.epsilon_trend is not None:
            eps = [e for e, _ in self.epsilon_trend]
            if any(b > a for a, b in zip(eps, eps[1:])):
                raise ValueError("epsilon_trend must be sorted by epsilon descending")

    def to_dict(self) -> dict:
        out = {
            "schema": SCHEMA,
            "command": self.command,
            "params": self.params,
            "mode": self.mode,
            "predicted": self.predicted,
        }
        if self.measured is not None:
            out["measured"] = self.measured
            out["errors"] = self.errors
        if self.epsilon_trend is not None:
            out["epsilon_trend"] = [{"epsilon": e, "error": err} for e, err in self.epsilon_trend]
        if self.extra:
            out.update(self.extra)
        return out


# ---------------------------------------------------------------------------
# schema checks
# ---------------------------------------------------------------------------

_NUM = (int, float)


def _is_num(x, nullable=False):
    return (x is None and nullable) or (isinstance(x, _NUM) and not isinstance(x, bool))


def _check_pattern(d, where, problems):
    if d is None:
        return
    if not isinstance(d, dict) or set(d) != {"positions", "v_amplitudes"}:
        problems.append(f"{where} must hold positions and v_amplitudes")
        return
    for key in ("positions", "v_amplitudes"):
        if not isinstance(d[key], list) or not all(_is_num(v) for v in d[key]):
            problems.append(f"{where}.{key} must be a list of numbers")
    if isinstance(d["positions"], list) and isinstance(d["v_amplitudes"], list):
        if len(d["positions"]) != len(d["v_amplitudes"]):
            problems.append(f"{where} lists differ in length")


def _check_params(d, problems):
    if not isinstance(d, dict):
        problems.append("params must be an object")
        return
    for key in ("L", "epsilon", "D_hat", "grid_n"):
        if not _is_num(d.get(key)):
            problems.append(f"params.{key} must be a number")
    for key in ("A0", "gamma"):
        f = d.get(key)
        if not isinstance(f, dict) or not isinstance(f.get("kind"), str) or not isinstance(
            f.get("params"), list
        ):
            problems.append(f"params.{key} must hold kind and params")


_REQUIRED = {
    "predict": ("params", "mode", "predicted"),
    "validate": ("params", "mode", "predicted", "epsilon_trend", "runs", "passed", "failures"),
    "steady": ("params", "pattern", "residual_norm", "iterations", "converged"),
    "simulate": ("params", "t_final", "steps", "converged", "reason", "snapshots"),
    "nlep-check": ("params", "classification"),
    "sweep": ("param", "values", "results"),
}


def check_report(d) -> list[str]:
    """Every schema violation in a parsed report; empty when valid."""
    problems = []
    if not isinstance(d, dict):
        return ["report must be a JSON object"]
    if d.get("schema") != SCHEMA:
        problems.append(f"schema must be {SCHEMA!r}")
    cmd = d.get("command")
    if cmd not in COMMANDS:
        return problems + [f"command must be one of {', '.join(COMMANDS)}"]
    for key in _REQUIRED[cmd]:
        if key not in d:
            problems.append(f"missing field {key!r}")
    if problems:
        return problems
    if "params" in d:
        _check_params(d["params"], problems)
    if ("measured" in d) != ("errors" in d):
        problems.append("errors must be present exactly when measured is present")
    if "measured" in d:
        _check_pattern(d["measured"], "measured", problems)
    if isinstance(d.get("predicted"), dict) and "pattern" in d["predicted"]:
        _check_pattern(d["predicted"]["pattern"], "predicted.pattern", problems)
    if "epsilon_trend" in d:
        trend = d["epsilon_trend"]
        if not isinstance(trend, list) or not all(
            isinstance(e, dict) and _is_num(e.get("epsilon")) and _is_num(e.get("error"), True)
            for e in trend
        ):
            problems.append("epsilon_trend must be a list of {epsilon, error}")
        else:
            eps = [e["epsilon"] for e in trend]
            if any(b > a for a, b in zip(eps, eps[1:])):
                problems.append("epsilon_trend must be sorted by epsilon descending")
    if cmd == "steady":
        _check_pattern(d["pattern"], "pattern", problems)
        if not isinstance(d["converged"], bool):
            problems.append("converged must be a boolean")
    if cmd == "nlep-check" and d.get("classification") != "no-solution":
        for key in ("e_m1", "e_m2", "detF_closed", "detF_oracle", "nondegenerate", "flags"):
            if key not in d:
                problems.append(f"missing field {key!r}")
        if "nondegenerate" in d and not isinstance(d["nondegenerate"], bool):
            problems.append("nondegenerate must be a boolean")
    if cmd == "sweep" and isinstance(d["results"], list):
        if len(d["results"]) != len(d["values"]):
            problems.append("sweep must hold one result per value")
    return problems


# ---------------------------------------------------------------------------
# CSV snapshots
# ---------------------------------------------------------------------------


def _field_text(f) -> str:
    return f"{f.kind}:" + " ".join(format(v, ".17g") for v in f.values)


def snapshot_csv(state: FieldState, p: ModelParams) -> str:
    header = (
        f"# t={state.t:.17g} L={p.L:.17g} epsilon={p.epsilon:.17g} D_hat={p.D_hat:.17g} "
        f"grid_n={int(p.grid_n)} A0={_field_text(p.A0)} gamma={_field_text(p.gamma)}"
    )
    lines = [header, "x,A,rho,v"]
    v = state.v
    for row in zip(p.x, state.A, state.rho, v):
        lines.append(",".join(format(float(c), ".17g") for c in row))
    return "\n".join(lines) + "\n"


def read_snapshot(text: str, p: ModelParams) -> FieldState:
    """Parse a snapshot written by ``snapshot_csv``; the grid must match ``p``."""
    t = 0.0
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            for tok in line[1:].split():
                if tok.startswith("t="):
                    t = float(tok[2:])
            continue
        if line.startswith("x,"):
            continue
        rows.append([float(c) for c in line.split(",")])
    data = np.asarray(rows, dtype=float)
    if data.ndim != 2 or data.shape[0] != p.grid_n + 1 or data.shape[1] < 3:
        raise ValueError(f"snapshot must have {p.grid_n + 1} rows of x, A, rho")
    if np.max(np.abs(data[:, 0] - p.x)) > 1e-9 * p.L:
        raise ValueError("snapshot grid does not match the configuration")
    return FieldState(data[:, 1], data[:, 2], t)
