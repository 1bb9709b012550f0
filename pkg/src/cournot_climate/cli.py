"""Command line front end.

Every subcommand reads one JSON config, validates it completely, runs, and
only then writes its output.  Tabular output goes to ``--out`` as CSV with a
sibling ``.json`` holding metadata; ``--format json`` writes both into one
JSON document instead.

Exit codes: 0 success, 1 configuration error, 2 solver error,
3 hypothesis violation in a belief schedule.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import jsonschema
import numpy as np

from . import dynamics, equilibrium, statics, two_firm, utility
from .errors import BracketError, DomainError, HypothesisViolation, ModelError, SolverError
from .model import EconomyParams, FirmBelief
from .sampling import random_instance

CONFIG_VERSION = 1

_number = {"type": "number"}
_belief_value = {"oneOf": [{"type": "number", "minimum": 0}, {"enum": ["inf"]}]}

SCHEMA: dict[str, Any] = {
    "type": "object",
    "additionalProperties": False,
    "required": ["version"],
    "properties": {
        "version": {"const": CONFIG_VERSION},
        "economy": {
            "type": "object",
            "additionalProperties": False,
            "required": ["A", "b", "c", "d"],
            "properties": {"A": _number, "b": _number, "c": _number, "d": _number, "K_ex": _number},
        },
        "firms": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["alpha_sq"],
                "properties": {"alpha_sq": _belief_value, "risk_weight": {"type": ["number", "null"], "minimum": 0}},
            },
        },
        "random": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"n": {"type": "integer", "minimum": 1}, "n_max": {"type": "integer", "minimum": 1}},
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "required": ["a1_min", "a1_max", "a2_min", "a2_max", "resolution"],
            "properties": {
                "a1_min": _number, "a1_max": _number, "a2_min": _number, "a2_max": _number,
                "resolution": {"type": "integer", "minimum": 2},
            },
        },
        "statics": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"step": {"type": "number", "exclusiveMinimum": 0},
                           "min_step": {"type": "number", "exclusiveMinimum": 0}},
        },
        "schedule": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind", "start"],
            "properties": {
                "kind": {"enum": ["constant", "relaxing"]},
                "start": {"type": "array", "minItems": 1, "items": _belief_value},
                "target": {"type": "array", "minItems": 1, "items": _belief_value},
                "rate": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "rounds": {"type": "integer", "minimum": 1},
                "alpha_true": {"type": "number", "exclusiveMinimum": 0},
                "limit": {"enum": ["none", "green", "no_green"]},
                "a_limit": _number,
                "beta_limit": _number,
                "divergence_bound": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "utility": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind", "n"],
            "properties": {
                "kind": {"enum": ["log", "crra", "quadratic"]},
                "gamma": {"type": "number", "exclusiveMinimum": 0},
                "A": {"type": "number", "exclusiveMinimum": 0},
                "n": {"type": "integer", "minimum": 1},
            },
        },
        "verify": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"starts": {"type": "integer", "minimum": 0}, "damping": {"type": "number"}},
        },
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"tol": {"type": "number", "exclusiveMinimum": 0}, "max_iter": {"type": "integer", "minimum": 1}},
        },
    },
}

REQUIRED_BLOCKS = {
    "solve": (),
    "two-firm-map": ("economy", "grid"),
    "statics": (),
    "dynamics": ("economy", "schedule"),
    "utility": ("economy", "utility"),
    "verify": (),
}


class ConfigError(Exception):
    pass


@dataclass
class Output:
    rows: list[dict[str, Any]]
    meta: dict[str, Any]


# --- config parsing --------------------------------------------------------


def _belief_float(value) -> float:
    return math.inf if value == "inf" else float(value)


def load_config(path: str | os.PathLike) -> dict[str, Any]:
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err.strerror}") from err
    try:
        config = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON: {err}") from err
    try:
        jsonschema.validate(config, SCHEMA)
    except jsonschema.ValidationError as err:
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"config field {where}: {err.message}") from err
    return config


def _economy(config) -> EconomyParams:
    block = config["economy"]
    try:
        return EconomyParams(**{k: float(v) for k, v in block.items()})
    except DomainError as err:
        raise ConfigError(f"config field economy: {err}") from err


def _firms(config) -> list[FirmBelief]:
    out = []
    for i, item in enumerate(config["firms"]):
        try:
            out.append(FirmBelief(_belief_float(item["alpha_sq"]), item.get("risk_weight")))
        except DomainError as err:
            raise ConfigError(f"config field firms/{i}: {err}") from err
    return out


def _instance(config, seed: int | None):
    """Economy and firms from the config, or a seeded random draw."""
    if "firms" in config:
        if "economy" not in config:
            raise ConfigError("config field economy: required when firms are given")
        return _economy(config), _firms(config)
    if "random" in config:
        rng = np.random.default_rng(seed)
        block = config["random"]
        return random_instance(rng, block.get("n_max", 10), n=block.get("n"))
    raise ConfigError("config needs either economy+firms or a random block")


# --- commands --------------------------------------------------------------


def _firm_rows(params, beliefs, eq) -> list[dict[str, Any]]:
    rows = []
    for i, (bel, s, col) in enumerate(zip(beliefs, eq.strategies, eq.colors)):
        rows.append({"firm_id": i, "alpha_sq": bel.alpha_sq, "beta": bel.beta(params), "a": bel.a(params),
                     "color": col.value, "q": s.q, "r": s.r, "k": s.k})
    return rows


def _economy_meta(params: EconomyParams) -> dict[str, Any]:
    return {"A": params.A, "b": params.b, "c": params.c, "d": params.d, "K_ex": params.K_ex, "z": params.z}


def cmd_solve(config, args) -> Output:
    params, beliefs = _instance(config, args.seed)
    eq = equilibrium.solve(params, beliefs, tol=args.tol or equilibrium.DEFAULT_TOL)
    meta = {"economy": _economy_meta(params), "Q": eq.Q, "K": eq.K, "residual": eq.residual,
            "colors": [c.value for c in eq.colors]}
    return Output(_firm_rows(params, beliefs, eq), meta)


def cmd_two_firm_map(config, args) -> Output:
    params = _economy(config)
    try:
        grid = two_firm.GridSpec(**config["grid"])
    except ValueError as err:
        raise ConfigError(f"config field grid: {err}") from err
    cells = two_firm.regime_map(params, grid, workers=_threads())
    rows = [{"a1": c.a1, "a2": c.a2, "regime": c.regime.value, "Q": c.Q, "K": c.K,
             "q1": c.q1, "q2": c.q2, "k1": c.k1, "k2": c.k2} for c in cells]
    counts: dict[str, int] = {}
    for c in cells:
        counts[c.regime.value] = counts.get(c.regime.value, 0) + 1
    return Output(rows, {"economy": _economy_meta(params), "regime_counts": dict(sorted(counts.items()))})


def cmd_statics(config, args) -> Output:
    params, beliefs = _instance(config, args.seed)
    block = config.get("statics", {})
    eq = equilibrium.solve(params, beliefs)
    report = statics.statics_report(params, beliefs, eq, step=block.get("step", statics.DEFAULT_STEP),
                                    min_step=block.get("min_step", statics.MIN_STEP))
    rows = []
    for p in report.partials:
        rows.append({"kind": "partial", "quantity": p.quantity, "firm": p.firm, "wrt": p.wrt, "source": p.source,
                     "analytic": p.analytic, "numeric": p.numeric, "rel_error": p.rel_error, "effect": None,
                     "delta": None, "agrees": p.ok()})
    for s in report.signs:
        rows.append({"kind": "sign", "quantity": s.quantity, "firm": s.firm, "wrt": "alpha_sq", "source": s.source,
                     "analytic": s.analytic, "numeric": None, "rel_error": None, "effect": s.effect.value,
                     "delta": s.delta, "agrees": s.agrees()})
    meta = {"economy": _economy_meta(params), "colors": [c.value for c in eq.colors], "step": report.step,
            "max_rel_error": report.max_rel_error, "failed_partials": len(report.failed_partials()),
            "failed_signs": len(report.failed_signs())}
    return Output(rows, meta)


def _schedule(block) -> dynamics.BeliefSchedule:
    start = [_belief_float(x) for x in block["start"]]
    if block["kind"] == "constant":
        sched = dynamics.BeliefSchedule.constant(start)
    else:
        if "target" not in block or "rate" not in block:
            raise ConfigError("config field schedule: a relaxing schedule needs target and rate")
        target = [_belief_float(x) for x in block["target"]]
        if len(target) != len(start):
            raise ConfigError("config field schedule/target: length differs from start")
        sched = dynamics.BeliefSchedule.relaxing(start, target, block["rate"])
    if "a_limit" in block or "beta_limit" in block:
        sched = dynamics.BeliefSchedule(sched.n, sched.alpha_sq, sched.risk_weights, sched.limit_alpha_sq,
                                        block.get("a_limit"), block.get("beta_limit"))
    return sched


def cmd_dynamics(config, args) -> Output:
    params = _economy(config)
    block = config["schedule"]
    try:
        sched = _schedule(block)
    except DomainError as err:
        raise ConfigError(f"config field schedule: {err}") from err
    limit = block.get("limit", "none")
    rounds = args.max_iter or block.get("rounds", 100)
    alpha_true = block.get("alpha_true")
    bound = block.get("divergence_bound")
    verdict = None
    if limit == "green":
        verdict = dynamics.check_limit_green(params, sched, tol=args.tol or 1e-6, max_rounds=rounds,
                                             alpha_true=alpha_true, divergence_bound=bound)
        trace = verdict.trace
    elif limit == "no_green":
        verdict = dynamics.check_limit_no_green(params, sched, tol=args.tol or 1e-6, max_rounds=rounds,
                                                divergence_bound=bound)
        trace = verdict.trace
    else:
        trace = dynamics.simulate(params, sched, rounds, alpha_true=alpha_true, divergence_bound=bound)
    rows = []
    for m, eq in enumerate(trace.equilibria, start=1):
        row = {"round": m, "K": float(trace.K[m]), "Q": float(trace.Q[m - 1]),
               "T": None if trace.temperature is None else float(trace.temperature[m])}
        for j, s in enumerate(eq.strategies):
            row[f"q_{j}"] = s.q
            row[f"r_{j}"] = s.r
            row[f"k_{j}"] = s.k
        rows.append(row)
    meta: dict[str, Any] = {"economy": _economy_meta(params), "rounds": trace.rounds, "diverged": trace.diverged}
    if verdict is not None:
        meta.update({"limit_kind": limit, "status": verdict.status.value, "limit": verdict.limit,
                     "final_K": verdict.final_K, "gap": verdict.gap, "temperature": verdict.temperature,
                     "temperature_limit": verdict.temperature_limit, "violations": list(verdict.violations)})
    return Output(rows, meta)


def cmd_utility(config, args) -> Output:
    params = _economy(config)
    block = config["utility"]
    kind = block["kind"]
    if kind == "crra":
        if "gamma" not in block:
            raise ConfigError("config field utility/gamma: required for crra")
        spec = utility.CRRA(block["gamma"])
    elif kind == "quadratic":
        spec = utility.Quadratic(block.get("A", params.A))
    else:
        spec = utility.Log()
    n = block["n"]
    q0 = utility.solve_symmetric(spec, params, n, tol=args.tol or 1e-14)
    row: dict[str, Any] = {"kind": kind, "n": n, "q0": q0, "exists": q0 is not None,
                           "residual": None if q0 is None else utility.symmetric_foc_residual(spec, params, n, q0)}
    meta: dict[str, Any] = {"economy": _economy_meta(params), "utility": dict(block)}
    if q0 is not None and "firms" in config:
        beliefs = _firms(config)
        if len(beliefs) != n:
            raise ConfigError("config field firms: count must equal utility/n")
        prof = utility.interior_carbon_profile(spec, params, beliefs, q0)
        row.update({"K": prof.K, "feasible": prof.feasible})
        meta["carbon"] = {"k": list(prof.k), "r": list(prof.r), "violators": list(prof.violators)}
    return Output([row], meta)


def cmd_verify(config, args) -> Output:
    params, beliefs = _instance(config, args.seed)
    block = config.get("verify", {})
    eq = equilibrium.solve(params, beliefs)
    report = equilibrium.verify_equilibrium(params, beliefs, eq)
    row: dict[str, Any] = dict(report.as_dict())
    starts = block.get("starts", 0)
    if starts:
        rng = np.random.default_rng(args.seed)
        n = len(beliefs)
        q0 = rng.uniform(0.0, max((params.A - params.c) / 2, 0.0), (starts, n))
        k0 = q0 * rng.uniform(0.0, 1.0, (starts, n))
        q, k, _, iters = equilibrium.damped_iteration(params, beliefs, q0, k0, damping=block.get("damping"),
                                                      max_iter=args.max_iter or 10**6, tol=args.tol or equilibrium.DEFAULT_TOL)
        row["iteration_gap"] = float(max(np.abs(q - eq.q).max(), np.abs(k - eq.k).max()))
        row["iterations"] = int(iters)
    meta = {"economy": _economy_meta(params), "colors": [c.value for c in eq.colors], "ok": report.ok()}
    return Output([row], meta)


COMMANDS: dict[str, Callable[[dict, argparse.Namespace], Output]] = {
    "solve": cmd_solve,
    "two-firm-map": cmd_two_firm_map,
    "statics": cmd_statics,
    "dynamics": cmd_dynamics,
    "utility": cmd_utility,
    "verify": cmd_verify,
}


def _threads() -> int:
    raw = os.environ.get("COURNOT_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"COURNOT_THREADS must be an integer, got {raw!r}") from None


# --- output ----------------------------------------------------------------


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    if isinstance(value, np.integer):
        return int(value)
    return value


def render_csv(rows: list[dict[str, Any]]) -> str:
    buf = io.StringIO()
    if rows:
        fields = list(rows[0].keys())
        writer = csv.writer(buf, lineterminator="\r\n")
        writer.writerow(fields)
        for row in rows:
            writer.writerow([_cell(row.get(f)) for f in fields])
    return buf.getvalue()


def _write_atomic(path: Path, text: str):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, newline="")
    os.replace(tmp, path)


def write_output(out: Output, path: Path, fmt: str, meta_extra: dict[str, Any]):
    meta = {**meta_extra, **out.meta}
    if fmt == "json":
        _write_atomic(path, json.dumps(_jsonable({"meta": meta, "rows": out.rows}), indent=2, allow_nan=False) + "\n")
        return
    _write_atomic(path, render_csv(out.rows))
    _write_atomic(path.with_suffix(".json"), json.dumps(_jsonable(meta), indent=2, allow_nan=False) + "\n")


# --- entry point -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cournot-climate", description="Cournot equilibria with emission-technology choice")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", required=True, help="output file (CSV, with a sibling .json for metadata)")
    parser.add_argument("--seed", type=int, default=0, help="seed for random instances and iteration starts")
    parser.add_argument("--tol", type=float, default=None, help="command-specific tolerance")
    parser.add_argument("--max-iter", type=int, default=None, help="iteration or round limit")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    return parser


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    err = sys.stderr
    try:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        config = load_config(args.config)
        for block in REQUIRED_BLOCKS[args.command]:
            if block not in config:
                raise ConfigError(f"config field {block}: required by '{args.command}'")
        output = COMMANDS[args.command](config, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=err)
        return 1
    except HypothesisViolation as exc:
        print(f"hypothesis violation: {exc}", file=err)
        return 3
    except DomainError as exc:
        print(f"config error: {exc}", file=err)
        return 1
    except (SolverError, BracketError, ModelError) as exc:
        print(f"solver error: {exc}", file=err)
        return 2
    meta = {"command": args.command, "config_version": CONFIG_VERSION, "seed": args.seed}
    try:
        write_output(output, Path(args.out), args.format, meta)
    except OSError as exc:
        print(f"cannot write output: {exc}", file=err)
        return 1
    return 0


def main() -> None:
    sys.exit(run())
