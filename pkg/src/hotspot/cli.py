"""Command-line front end.

    hotspot predict|simulate|steady|validate|nlep-check|sweep <config> [flags]

Reports are JSON (schema "hotspot-report/1") on stdout or in ``--out``.
Exit codes: 0 success, 2 config error, 3 no solution, 4 validation failure,
5 divergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import asymptotics as asy
from . import nlep
from .config import ConfigError, load_config
from .errors import DivergenceError, HotspotError, ParameterError
from .model import CoefficientField, FieldState, ModelParams, SpikePattern
from .pde import (
    PRESENCE_THRESHOLD,
    ansatz_seed,
    measure_spikes,
    perturbed_uniform,
    run_to_steady,
    steady_from_pattern,
)
from .report import (
    PredictionReport,
    check_report,
    dumps,
    params_dict,
    pattern_dict,
    read_snapshot,
    snapshot_csv,
)
from .validation import MODES, NEWTON_TOL, NoPrediction, compare_patterns, epsilon_study, map_in_order

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NO_SOLUTION = 3
EXIT_VALIDATION = 4
EXIT_DIVERGENCE = 5

UNIFORM_PERTURBATION = 0.05
SWEEP_PARAMS = ("L", "epsilon", "D_hat", "A0", "gamma")


class NoSolution(HotspotError):
    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


# ---------------------------------------------------------------------------
# predictions
# ---------------------------------------------------------------------------


def _asymmetric_dict(p: ModelParams, k1: int, k2: int, small_first: bool) -> dict:
    sol = asy.solve_asymmetric(k1, k2, p, small_first=small_first)
    expr = asy.condition_expression(p)
    return {
        "k1": k1,
        "k2": k2,
        "C": sol.C_value,
        "z_roots": list(sol.z_roots),
        "classification": sol.classification,
        "degenerate_root": sol.degenerate_root,
        "branches": [{"z": b.z, "v_s": b.v_s, "v_l": b.v_l} for b in sol.branches],
        "pattern": pattern_dict(sol.pattern),
        "condition_expression": expr,
        "condc": asy.check_condc(p),
        "condbc": asy.check_condbc(p),
    }


def prediction_dict(p: ModelParams, mode: str, *, K=1, k1=1, k2=1, small_first=True) -> dict:
    if mode == "symmetric":
        pred = asy.symmetric_prediction(K, p)
        return {"K": K, "v0": pred.v0, "pattern": pattern_dict(pred.pattern)}
    if mode == "asymmetric":
        return _asymmetric_dict(p, k1, k2, small_first)
    if mode == "anisotropic":
        pred = asy.anisotropic_prediction(p)
        return {"t0": pred.t0, "v0": pred.v0, "pattern": pattern_dict(pred.pattern)}
    raise ParameterError(f"unknown mode {mode!r}")


def _pattern_from(pred: dict):
    d = pred.get("pattern")
    return None if d is None else SpikePattern(d["positions"], d["v_amplitudes"])


def _mode_kwargs(args) -> dict:
    return {
        "K": args.K,
        "k1": args.k1,
        "k2": args.k2,
        "small_first": args.order == "small-first",
    }


def build_prediction(p: ModelParams, args) -> dict:
    report = PredictionReport(params_dict(p), args.mode, prediction_dict(p, args.mode, **_mode_kwargs(args)))
    out = report.to_dict()
    if args.mode == "asymmetric" and out["predicted"]["classification"] == "no-solution":
        raise NoSolution("no asymmetric solution", out)
    return out


def cmd_predict(p: ModelParams, args) -> tuple[dict, int]:
    return build_prediction(p, args), EXIT_OK


# ---------------------------------------------------------------------------
# steady and validate
# ---------------------------------------------------------------------------


def _errors_dict(pos, amp):
    return {"position": None if pos is None else list(pos), "amplitude_relative": None if amp is None else list(amp)}


def cmd_steady(p: ModelParams, args) -> tuple[dict, int]:
    pred = build_prediction(p, args)
    pattern = _pattern_from(pred["predicted"])
    if pattern is None:
        raise NoSolution("no predicted pattern to seed Newton", pred)
    result = steady_from_pattern(pattern, p, args.tol)
    measured = None
    if result.state is not None:
        measured = measure_spikes(result.state, p, threshold=PRESENCE_THRESHOLD).pattern
    pos, amp = compare_patterns(pattern, measured) if measured is not None else (None, None)
    out = {
        "schema": pred["schema"],
        "command": "steady",
        "params": pred["params"],
        "mode": args.mode,
        "predicted": pred["predicted"],
        "pattern": pattern_dict(measured) or {"positions": [], "v_amplitudes": []},
        "residual_norm": result.residual_norm,
        "iterations": result.iterations,
        "converged": bool(result.converged),
        "condition": result.condition,
        "message": result.message,
    }
    if measured is not None:
        out["measured"] = pattern_dict(measured)
        out["errors"] = _errors_dict(pos, amp)
    if args.csv and result.state is not None:
        Path(args.csv).write_text(snapshot_csv(result.state, p))
        out["csv"] = str(args.csv)
    return out, EXIT_OK if result.converged else EXIT_VALIDATION


def _run_dict(r) -> dict:
    return {
        "epsilon": r.epsilon,
        "grid_n": r.grid_n,
        "converged": bool(r.converged),
        "iterations": r.iterations,
        "residual_norm": r.residual_norm,
        "message": r.message,
        "measured": pattern_dict(r.measured),
        "errors": _errors_dict(r.position_errors, r.amplitude_errors),
    }


def cmd_validate(p: ModelParams, args) -> tuple[dict, int]:
    pred = build_prediction(p, args)
    if args.mode == "asymmetric" and (args.k1, args.k2) != (1, 1):
        raise ParameterError("validation of asymmetric patterns needs k1 = k2 = 1")
    eps_list = [float(e) for e in args.eps_list.split(",") if e.strip()]
    try:
        study = epsilon_study(
            p, args.mode, eps_list, K=args.K, small_first=args.order == "small-first", jobs=args.jobs
        )
    except NoPrediction as exc:
        raise NoSolution(str(exc), pred) from None
    except ValueError as exc:
        raise ParameterError(str(exc)) from None
    report = PredictionReport(
        pred["params"],
        args.mode,
        pred["predicted"],
        epsilon_trend=tuple(study.trend()),
        command="validate",
        extra={
            "runs": [_run_dict(r) for r in study.runs],
            "passed": study.passed,
            "failures": list(study.failures),
        },
    )
    return report.to_dict(), EXIT_OK if study.passed else EXIT_VALIDATION


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def _initial_state(p: ModelParams, args) -> FieldState:
    if args.init == "uniform":
        return perturbed_uniform(p, args.K, UNIFORM_PERTURBATION)
    if args.init == "ansatz":
        pattern = _pattern_from(prediction_dict(p, args.mode, **_mode_kwargs(args)))
        if pattern is None:
            raise NoSolution("no predicted pattern for the ansatz start", build_prediction(p, args))
        return FieldState.from_rescaled(*ansatz_seed(pattern, p), p)
    if not args.init_file:
        raise ParameterError("--init file needs --init-file")
    try:
        return read_snapshot(Path(args.init_file).read_text(), p)
    except (OSError, ValueError) as exc:
        raise ParameterError(f"cannot use initial data {args.init_file}: {exc}") from None


def cmd_simulate(p: ModelParams, args) -> tuple[dict, int]:
    initial = _initial_state(p, args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    def save(state):
        path = out_dir / f"snapshot_{len(written):05d}.csv"
        path.write_text(snapshot_csv(state, p))
        written.append(str(path))

    base = {"schema": "hotspot-report/1", "command": "simulate", "params": params_dict(p)}
    try:
        run = run_to_steady(
            initial, p, args.t_max, args.tol, dt0=args.dt0, snap_every=args.snap_every, on_snapshot=save
        )
    except DivergenceError as exc:
        last = getattr(exc, "last_state", None)
        if last is not None:
            save(last)
        out = dict(base, t_final=None if last is None else last.t, steps=None, converged=False,
                   reason=f"diverged: {exc}", snapshots=written,
                   last_stable_snapshot=written[-1] if written else None)
        return out, EXIT_DIVERGENCE
    final = run.final
    measured = measure_spikes(final, p)
    out = dict(
        base,
        t_final=final.t,
        steps=run.steps,
        converged=run.converged,
        reason=run.reason,
        convergence_metric=run.convergence_metric,
        snapshots=written,
        final_pattern=pattern_dict(measured.pattern),
    )
    return out, EXIT_OK


# ---------------------------------------------------------------------------
# nondegeneracy
# ---------------------------------------------------------------------------


def nlep_dossier(p: ModelParams) -> dict:
    sol = asy.solve_asymmetric(1, 1, p)
    out = {
        "schema": "hotspot-report/1",
        "command": "nlep-check",
        "params": params_dict(p),
        "classification": sol.classification,
        "C": sol.C_value,
        "degenerate_root": sol.degenerate_root,
        "condc": asy.check_condc(p),
        "condbc": asy.check_condbc(p),
    }
    if not sol.branches:
        return out
    branch = sol.branches[0]
    t = asy.positions_from_amplitudes((branch.v_s, branch.v_l), p)
    d2 = t[1] - t[0]
    mats = nlep.build_matrices(branch.v_s, branch.v_l, d2, p)
    em1 = nlep.nondegeneracy_em1(branch.v_s, branch.v_l, d2, p)
    det = nlep.detF_gradient(branch.v_s, branch.v_l, p)
    det_ok = not det.at_pole and abs(det.closed_form) > 0.0
    out.update(
        z=branch.z,
        v_s=branch.v_s,
        v_l=branch.v_l,
        d2=d2,
        e_m1=mats.e_m1,
        e_m2=mats.e_m2,
        e_m1_formula=em1.e_m1_formula,
        e_m1_parameter_form=em1.e_m1_parameter_form,
        detF_closed=det.closed_form,
        detF_oracle=det.oracle,
        detF_relative_gap=det.relative_gap,
        alpha=det.alpha,
        nondegenerate=bool(em1.nondegenerate and det_ok and out["condbc"]),
        flags=list(det.flags),
    )
    return out


def cmd_nlep_check(p: ModelParams, args) -> tuple[dict, int]:
    out = nlep_dossier(p)
    if out["classification"] == "no-solution":
        raise NoSolution("no asymmetric solution", out)
    return out, EXIT_OK


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def _with_param(p: ModelParams, name: str, value: float) -> ModelParams:
    if name in ("A0", "gamma"):
        return p.with_(**{name: CoefficientField.constant(value)})
    q = p.with_(**{name: value})
    return q.with_resolution() if name in ("L", "epsilon") else q


def _sweep_one(job):
    p, name, value, mode_kw, mode, steady = job
    q = _with_param(p, name, value)
    item = {"value": value}
    try:
        pred = prediction_dict(q, mode, **mode_kw)
    except HotspotError as exc:
        return dict(item, status="error", message=str(exc))
    item["predicted"] = pred
    if mode == "asymmetric" and pred["classification"] == "no-solution":
        return dict(item, status="no-solution")
    item["status"] = "ok"
    if steady:
        pattern = _pattern_from(pred)
        res = steady_from_pattern(pattern, q, NEWTON_TOL)
        item["converged"] = bool(res.converged)
        item["residual_norm"] = res.residual_norm
        if res.state is not None:
            item["measured"] = pattern_dict(measure_spikes(res.state, q, threshold=PRESENCE_THRESHOLD).pattern)
    return item


def cmd_sweep(p: ModelParams, args) -> tuple[dict, int]:
    if args.param not in SWEEP_PARAMS:
        raise ParameterError(f"--param must be one of {', '.join(SWEEP_PARAMS)}")
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise ParameterError("--values must be comma-separated numbers") from None
    if not values:
        raise ParameterError("--values is empty")
    kw = _mode_kwargs(args)
    jobs = [(p, args.param, v, kw, args.mode, args.steady) for v in values]
    results = map_in_order(_sweep_one, jobs, args.jobs)
    out = {
        "schema": "hotspot-report/1",
        "command": "sweep",
        "params": params_dict(p),
        "mode": args.mode,
        "param": args.param,
        "values": values,
        "results": results,
    }
    return out, EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

COMMANDS = {
    "predict": cmd_predict,
    "steady": cmd_steady,
    "validate": cmd_validate,
    "simulate": cmd_simulate,
    "nlep-check": cmd_nlep_check,
    "sweep": cmd_sweep,
}


def _add_mode(sp, default="symmetric"):
    sp.add_argument("--mode", choices=MODES, default=default)
    sp.add_argument("--K", type=int, default=1, help="number of equal spikes (symmetric mode)")
    sp.add_argument("--k1", type=int, default=1, help="number of small-v spikes (asymmetric mode)")
    sp.add_argument("--k2", type=int, default=1, help="number of large-v spikes (asymmetric mode)")
    sp.add_argument(
        "--order",
        choices=("small-first", "large-first"),
        default="small-first",
        help="left-to-right order of a two-spike asymmetric pattern",
    )


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hotspot", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("config", help="INI configuration file")
        sp.add_argument("--out", help="write the JSON report here instead of stdout")
        return sp

    sp = add("predict", "leading-order spike prediction")
    _add_mode(sp)

    sp = add("steady", "Newton steady state seeded by the predicted ansatz")
    _add_mode(sp)
    sp.add_argument("--tol", type=float, default=NEWTON_TOL)
    sp.add_argument("--csv", help="also write the steady state as a CSV snapshot")

    sp = add("validate", "epsilon-refinement study against the prediction")
    _add_mode(sp)
    sp.add_argument("--eps-list", default="0.1,0.05,0.025", help="descending comma-separated epsilons")
    sp.add_argument("--jobs", type=int, default=1, help="worker processes for independent runs")

    sp = add("simulate", "time stepping to a steady state")
    _add_mode(sp)
    sp.add_argument("--t-max", type=float, default=100.0)
    sp.add_argument("--dt0", type=float, default=1e-3)
    sp.add_argument("--tol", type=float, default=1e-8, help="stop when max|change|/dt falls below this")
    sp.add_argument("--snap-every", type=int, default=0, help="keep a snapshot every this many steps")
    sp.add_argument(
        "--init",
        choices=("uniform", "ansatz", "file"),
        default="uniform",
        help=(
            "initial data; 'uniform' is the uniform steady state with "
            f"A multiplied by 1 + {UNIFORM_PERTURBATION} cos(pi K x / L)"
        ),
    )
    sp.add_argument("--init-file", help="CSV snapshot used with --init file")
    sp.add_argument("--out-dir", default="snapshots")

    add("nlep-check", "nondegeneracy dossier of the asymmetric two-spike state")

    sp = add("sweep", "predictions (and optionally steady states) over one parameter")
    _add_mode(sp)
    sp.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    sp.add_argument("--values", required=True, help="comma-separated values")
    sp.add_argument("--steady", action="store_true", help="also solve for each steady state")
    sp.add_argument("--jobs", type=int, default=1)
    return ap


def _emit(report: dict, out_path) -> None:
    problems = check_report(json.loads(dumps(report)))
    if problems:
        raise RuntimeError("report failed its schema check: " + "; ".join(problems))
    text = dumps(report)
    if out_path:
        Path(out_path).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        p = load_config(args.config)
        report, code = COMMANDS[args.command](p, args)
    except NoSolution as exc:
        _emit(exc.report, args.out)
        print(f"hotspot: {exc}", file=sys.stderr)
        return EXIT_NO_SOLUTION
    except (ConfigError, ParameterError) as exc:
        print(f"hotspot: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _emit(report, args.out)
    if code == EXIT_DIVERGENCE:
        print(f"hotspot: diverged; last stable snapshot {report.get('last_stable_snapshot')}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
