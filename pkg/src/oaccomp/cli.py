"""``oaccomp`` command-line front end.

Subcommands::

    design    optimize a modulation vector      -> constellation.csv, result.json
    verify    check a stored constellation      -> stdout report (verify.json with --out)
    simulate  Monte Carlo MSE at one noise level -> constellation.csv, result.json, simulate.json
    sweep     MSE/MAE over a noise grid          -> sweep.dat, sweep.json
    compare   several designs on one grid        -> compare.dat, compare.json, compare.txt

Exit codes: 0 success, 1 usage or configuration error, 2 infeasible design or
diverged solver.  ``OACCOMP_THREADS`` caps the BLAS thread pools.

``sweep.dat`` / ``compare.dat`` layout: one ``#`` header line naming the
columns, then one whitespace-separated row per grid point: the axis value
followed by one column per design, in config order.  Each column is the MSE,
or the MAE for Cauchy (gamma) sweeps; standard errors are in the JSON file.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from contextlib import nullcontext
from typing import Optional, Sequence

import jsonschema
import numpy as np
from threadpoolctl import threadpool_limits

from .channel import FadingModel, NoiseModel
from .designer import DesignProblem, DesignResult, SolverConfig, design, evaluate_design, verify_feasibility
from .errors import CombinatorialBlowup, Infeasible, OacError, OverlapViolation, SolverDiverged
from .function_model import AggregationFunction, QuantizedAlphabet, build_constraints, enumerate_profiles
from .metrics import DistanceMetric, MetricKind
from .simulator import InputLaw, SimulationConfig, SweepAxis, compare_designs, run_mse

SCHEMA_VERSION = 1
DESK_MAX_K = 6
DESK_MAX_Q = 8

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INFEASIBLE = 2

_NUM = {"type": "number"}
_PARAMS = {"type": "object", "additionalProperties": {"type": "number"}}
_METRIC = {
    "type": "object",
    "properties": {"kind": {"enum": [k.value for k in MetricKind]}, "params": _PARAMS},
    "required": ["kind"],
    "additionalProperties": False,
}
_NOISE = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["complex_gaussian", "gnd", "laplace", "complex_cauchy"]},
        "params": _PARAMS,
    },
    "required": ["kind"],
    "additionalProperties": False,
}
_PAIR = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}
_FADING = {
    "type": "object",
    "properties": {
        "generator": {"enum": ["rayleigh", "rician", "fixed"]},
        "inversion": {"type": "boolean"},
        "h": {"type": "array", "items": _PAIR},
        "covariance": {"anyOf": [{"type": "string"}, {"type": "array"}]},
        "kappa": _NUM,
        "los": {"type": "array", "items": _PAIR},
    },
    "required": ["generator"],
    "additionalProperties": False,
}
_SOLVER = {
    "type": "object",
    "properties": {
        "restarts": {"type": "integer", "minimum": 1},
        "max_iter": {"type": "integer", "minimum": 1},
        "stall_iters": {"type": "integer", "minimum": 1},
        "stall_tol": _NUM,
        "temperatures": {"type": "array", "items": _NUM, "minItems": 1},
        "stage_iters": {"type": "integer", "minimum": 1},
        "polish": {"type": "boolean"},
        "polish_top": {"type": "integer", "minimum": 0},
        "use_lifting": {"type": "boolean"},
        "lifting_randomizations": {"type": "integer", "minimum": 0},
        "feasibility_tol": _NUM,
    },
    "additionalProperties": False,
}
_DESIGN_ENTRY = {
    "type": "object",
    "properties": {
        "label": {"type": "string"},
        "metric": _METRIC,
        "gap_exponent": _NUM,
        "form": {"enum": ["ratio", "additive"]},
        "constellation": {"anyOf": [{"type": "string"}, {"type": "array", "items": _PAIR}]},
    },
    "additionalProperties": False,
}
CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "function": {"enum": ["sum", "product", "max", "arithmetic_mean", "geometric_mean"]},
        "K": {"type": "integer", "minimum": 1},
        "q": {"type": "integer", "minimum": 2},
        "levels": {"type": "array", "items": _NUM, "minItems": 2},
        "metric": _METRIC,
        "gap_exponent": _NUM,
        "form": {"enum": ["ratio", "additive"]},
        "constellation": {"anyOf": [{"type": "string"}, {"type": "array", "items": _PAIR}]},
        "designs": {"type": "array", "items": _DESIGN_ENTRY, "minItems": 1},
        "noise": _NOISE,
        "fading": _FADING,
        "solver": _SOLVER,
        "sweep": {
            "type": "object",
            "properties": {
                "axis": {"enum": [a.value for a in SweepAxis]},
                "grid": {"type": "array", "items": _NUM, "minItems": 1},
                "start": _NUM,
                "stop": _NUM,
                "num": {"type": "integer", "minimum": 1},
                "spacing": {"enum": ["log", "linear"]},
            },
            "required": ["axis"],
            "additionalProperties": False,
        },
        "simulation": {
            "type": "object",
            "properties": {
                "trials": {"type": "integer", "minimum": 1},
                "input_law": {"enum": [l.value for l in InputLaw]},
                "min_distance": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "seed": {"type": "integer", "minimum": 0},
        "out": {"type": "string"},
    },
    "required": ["schema_version", "function", "K", "q"],
    "additionalProperties": False,
}


class ConfigError(Exception):
    """Invalid command line or configuration."""


# ---------------------------------------------------------------------------
# config handling
# ---------------------------------------------------------------------------


def _where(err: jsonschema.ValidationError) -> str:
    path = [str(p) for p in err.absolute_path]
    if err.validator == "additionalProperties" and isinstance(err.instance, dict):
        allowed = err.schema.get("properties", {})
        path.append(",".join(sorted(k for k in err.instance if k not in allowed)))
    return "/".join(path) or "<root>"


def validate_config(cfg) -> None:
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        raise ConfigError(f"config key {_where(err)}: {err.message}")
    sw = cfg.get("sweep")
    if sw is not None:
        has_grid = "grid" in sw
        has_range = all(k in sw for k in ("start", "stop", "num"))
        if has_grid == has_range:
            raise ConfigError("config key sweep: give either grid or start/stop/num")
    if "levels" in cfg and len(cfg["levels"]) != cfg["q"]:
        raise ConfigError(f"config key levels: expected q={cfg['q']} levels, got {len(cfg['levels'])}")


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path} at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    validate_config(cfg)
    cfg["_base_dir"] = os.path.dirname(os.path.abspath(path))
    return cfg


def _grid(sw: dict) -> np.ndarray:
    if "grid" in sw:
        return np.asarray(sw["grid"], dtype=float)
    if sw.get("spacing", "log") == "log":
        if sw["start"] <= 0 or sw["stop"] <= 0:
            raise ConfigError("config key sweep: log spacing needs positive start and stop")
        return np.geomspace(sw["start"], sw["stop"], sw["num"])
    return np.linspace(sw["start"], sw["stop"], sw["num"])


def _check_size(K: int, q: int, allow_blowup: bool) -> None:
    if not allow_blowup and (K > DESK_MAX_K or q > DESK_MAX_Q):
        raise CombinatorialBlowup(
            f"K={K}, q={q} exceeds the desk-scale limit K<={DESK_MAX_K}, q<={DESK_MAX_Q}; pass --allow-blowup"
        )


def _constraints(function: str, K: int, q: int, levels=None, allow_blowup: bool = False):
    _check_size(K, q, allow_blowup)
    func = AggregationFunction.from_name(function)
    alphabet = QuantizedAlphabet(tuple(float(v) for v in levels)) if levels else QuantizedAlphabet.uniform(q)
    profiles = enumerate_profiles(func, K, alphabet)
    return profiles, build_constraints(profiles, func, alphabet)


def load_constellation(path: str) -> np.ndarray:
    """Read ``re,im`` columns (header required, extra columns ignored)."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read constellation {path}: {exc.strerror}") from None
    try:
        return np.array([complex(float(r["re"]), float(r["im"])) for r in rows])
    except (KeyError, TypeError, ValueError):
        raise ConfigError(f"constellation {path} needs numeric re,im columns") from None


def write_constellation(x: np.ndarray, path: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["re", "im"])
        for v in x:
            w.writerow([repr(float(v.real)), repr(float(v.imag))])


def _constellation_from(spec, base_dir: str) -> np.ndarray:
    if isinstance(spec, str):
        return load_constellation(spec if os.path.isabs(spec) else os.path.join(base_dir, spec))
    return np.array([complex(a, b) for a, b in spec])


def _write_json(obj, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o).__name__}")


# ---------------------------------------------------------------------------
# pipeline pieces
# ---------------------------------------------------------------------------


def _problem(cfg: dict, constraints, entry: Optional[dict] = None) -> DesignProblem:
    entry = entry or {}
    metric = DistanceMetric.from_json(entry.get("metric", cfg.get("metric", {"kind": "euclidean"})))
    fading = FadingModel.from_json(cfg["fading"], cfg.get("_base_dir")) if "fading" in cfg else None
    return DesignProblem(
        constraints,
        metric,
        fading=fading,
        gap_exponent=float(entry.get("gap_exponent", cfg.get("gap_exponent", 2.0))),
        form=entry.get("form", cfg.get("form", "ratio")),
    )


def _solve(cfg: dict, problem: DesignProblem, seed: int, entry: Optional[dict] = None) -> DesignResult:
    entry = entry or {}
    frozen = entry.get("constellation", cfg.get("constellation") if not entry else None)
    if frozen is not None:
        x = _constellation_from(frozen, cfg.get("_base_dir", "."))
        res = evaluate_design(x, problem)
        res.report.update(method="frozen", seed=seed)
        if not res.feasible:
            raise Infeasible(
                f"frozen constellation does not separate all distinct outputs (min separation {res.min_separation:.6g})"
            )
        return res
    solver = SolverConfig.from_json({**cfg.get("solver", {}), "seed": seed})
    return design(problem, solver)


def _design_entries(cfg: dict) -> list[dict]:
    if "designs" in cfg:
        entries = [dict(e) for e in cfg["designs"]]
    else:
        entries = [{}]
    for k, e in enumerate(entries):
        if "label" not in e:
            m = e.get("metric", cfg.get("metric", {"kind": "euclidean"}))
            e["label"] = DistanceMetric.from_json(m).label if "constellation" not in e else f"design{k}"
    labels = [e["label"] for e in entries]
    if len(set(labels)) != len(labels):
        raise ConfigError("config key designs: labels must be unique")
    return entries


def _sim_base(cfg: dict, profiles, x, seed: int, trials: Optional[int], noise: Optional[NoiseModel] = None) -> SimulationConfig:
    sim = cfg.get("simulation", {})
    if noise is None:
        if "noise" not in cfg:
            raise ConfigError("config key noise: required for simulation")
        noise = NoiseModel.from_json(cfg["noise"])
    fading = FadingModel.from_json(cfg["fading"], cfg.get("_base_dir")) if "fading" in cfg else None
    return SimulationConfig(
        x=np.asarray(x, dtype=complex),
        profiles=tuple(profiles),
        noise=noise,
        trials=int(trials if trials is not None else sim.get("trials", 10_000)),
        seed=seed,
        fading=fading,
        input_law=InputLaw(sim.get("input_law", "profiles")),
        min_distance=bool(sim.get("min_distance", False)),
    )


def _sweep_noise(cfg: dict, axis: SweepAxis) -> NoiseModel:
    if "noise" in cfg:
        return NoiseModel.from_json(cfg["noise"])
    return NoiseModel.cauchy(1.0) if axis is SweepAxis.GAMMA else NoiseModel.gaussian(0.0)


def _result_json(cfg: dict, res: DesignResult, label: Optional[str] = None) -> dict:
    out = res.to_json()
    out.update(function=cfg["function"], K=cfg["K"], q=cfg["q"], power=float(np.vdot(res.x, res.x).real))
    if label is not None:
        out["label"] = label
    return out


def _write_dat(path: str, axis: str, labels: Sequence[str], values, columns) -> None:
    head = "# " + " ".join([axis] + [l.replace(" ", "_") for l in labels])
    with open(path, "w") as fh:
        fh.write(head + "\n")
        for k, v in enumerate(values):
            fh.write(" ".join([repr(float(v))] + [repr(float(col[k])) for col in columns]) + "\n")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _seed(args, cfg) -> int:
    return int(args.seed if args.seed is not None else cfg.get("seed", 0))


def _outdir(args, cfg) -> str:
    out = args.out if args.out is not None else cfg.get("out", ".")
    os.makedirs(out, exist_ok=True)
    return out


def cmd_design(args) -> int:
    cfg = load_config(args.config)
    seed = _seed(args, cfg)
    _, cs = _constraints(cfg["function"], cfg["K"], cfg["q"], cfg.get("levels"), args.allow_blowup)
    res = _solve(cfg, _problem(cfg, cs), seed)
    out = _outdir(args, cfg)
    write_constellation(res.x, os.path.join(out, "constellation.csv"))
    _write_json(_result_json(cfg, res), os.path.join(out, "result.json"))
    print(f"margin {res.margin!r}  min separation {res.min_separation:.6g}  method {res.method}")
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = load_config(args.config) if args.config else {}
    function = args.function or cfg.get("function")
    K = args.K if args.K is not None else cfg.get("K")
    q = args.q if args.q is not None else cfg.get("q")
    spec = args.constellation or cfg.get("constellation")
    missing = [n for n, v in (("--function", function), ("--K", K), ("--q", q), ("--constellation", spec)) if v is None]
    if missing:
        raise ConfigError("verify needs " + ", ".join(missing))
    if function not in CONFIG_SCHEMA["properties"]["function"]["enum"]:
        raise ConfigError(f"unknown function {function!r}")
    x = _constellation_from(spec, cfg.get("_base_dir", os.getcwd()))
    _, cs = _constraints(function, int(K), int(q), cfg.get("levels"), args.allow_blowup)
    ok, min_sep = verify_feasibility(x, cs)
    problem = _problem(cfg, cs) if cfg else DesignProblem(cs)
    res = evaluate_design(x, problem)
    power = float(np.vdot(x, x).real)
    report = {
        "function": function,
        "K": int(K),
        "q": int(q),
        "feasible": ok,
        "min_separation": min_sep if np.isfinite(min_sep) else "inf",
        "margin": res.to_json()["margin"],
        "pairs": len(cs),
        "power": power,
        "within_power_budget": power <= 1.0 + 1e-9,
    }
    print(f"{'feasible' if ok else 'INFEASIBLE'}  min separation {min_sep!r}  pairs {len(cs)}  power {power:.6g}")
    if args.out is not None:
        os.makedirs(args.out, exist_ok=True)
        _write_json(report, os.path.join(args.out, "verify.json"))
    return EXIT_OK if ok else EXIT_INFEASIBLE


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    seed = _seed(args, cfg)
    profiles, cs = _constraints(cfg["function"], cfg["K"], cfg["q"], cfg.get("levels"), args.allow_blowup)
    res = _solve(cfg, _problem(cfg, cs), seed)
    sim = run_mse(_sim_base(cfg, profiles, res.x, seed, args.trials))
    out = _outdir(args, cfg)
    write_constellation(res.x, os.path.join(out, "constellation.csv"))
    _write_json(_result_json(cfg, res), os.path.join(out, "result.json"))
    finite = NoiseModel.from_json(cfg["noise"]).finite_variance
    payload = {
        "noise": cfg["noise"],
        "trials": sim.trials,
        "seed": seed,
        "mae": sim.mae,
        "mae_stderr": sim.mae_stderr,
        "infinite_variance": not finite,
    }
    if finite:
        payload.update(mse=sim.mse, mse_stderr=sim.mse_stderr)
    _write_json(payload, os.path.join(out, "simulate.json"))
    name, m, se = ("mse", sim.mse, sim.mse_stderr) if finite else ("mae", sim.mae, sim.mae_stderr)
    print(f"{name} {m:.6g} +- {se:.2g} over {sim.trials} trials")
    return EXIT_OK


def _run_comparison(args, cfg):
    if "sweep" not in cfg:
        raise ConfigError("config key sweep: required")
    seed = _seed(args, cfg)
    axis = SweepAxis(cfg["sweep"]["axis"])
    grid = _grid(cfg["sweep"])
    profiles, cs = _constraints(cfg["function"], cfg["K"], cfg["q"], cfg.get("levels"), args.allow_blowup)
    entries = _design_entries(cfg)
    results = [_solve(cfg, _problem(cfg, cs, e), seed, e) for e in entries]
    base = _sim_base(cfg, profiles, results[0].x, seed, args.trials, _sweep_noise(cfg, axis))
    comp = compare_designs(results, base, axis, grid, [e["label"] for e in entries])
    return comp, results, entries, seed


def _comparison_json(cfg, comp, results, entries, seed) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "seed": seed,
        "axis": comp.sweeps[0].axis,
        "reported": comp.sweeps[0].reported,
        "designs": [_result_json(cfg, r, e["label"]) for r, e in zip(results, entries)],
        "comparison": comp.to_json(),
    }


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    comp, results, entries, seed = _run_comparison(args, cfg)
    out = _outdir(args, cfg)
    cols = [s.primary()[0] for s in comp.sweeps]
    _write_dat(os.path.join(out, "sweep.dat"), comp.sweeps[0].axis, comp.labels, comp.values, cols)
    _write_json(_comparison_json(cfg, comp, results, entries, seed), os.path.join(out, "sweep.json"))
    if len(results) == 1:
        write_constellation(results[0].x, os.path.join(out, "constellation.csv"))
    print(comp.table())
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = load_config(args.config)
    comp, results, entries, seed = _run_comparison(args, cfg)
    out = _outdir(args, cfg)
    cols = [s.primary()[0] for s in comp.sweeps]
    _write_dat(os.path.join(out, "compare.dat"), comp.sweeps[0].axis, comp.labels, comp.values, cols)
    _write_json(_comparison_json(cfg, comp, results, entries, seed), os.path.join(out, "compare.json"))
    table = comp.table()
    with open(os.path.join(out, "compare.txt"), "w") as fh:
        fh.write(table + "\n")
    for r, e in zip(results, entries):
        safe = "".join(c if c.isalnum() or c in "-_.=" else "_" for c in e["label"])
        write_constellation(r.x, os.path.join(out, f"constellation_{safe}.csv"))
    print(table)
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="oaccomp", description="Constellation design for over-the-air computation.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="JSON run configuration")
        sp.add_argument("--seed", type=int, default=None, help="overrides the config seed")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--allow-blowup", action="store_true", help=f"allow K>{DESK_MAX_K} or q>{DESK_MAX_Q}")

    for name, fn, helptext in (
        ("design", cmd_design, "optimize a modulation vector"),
        ("simulate", cmd_simulate, "design, then estimate MSE at one noise level"),
        ("sweep", cmd_sweep, "design, then sweep the noise scale"),
        ("compare", cmd_compare, "sweep several designs on common random numbers"),
    ):
        sp = sub.add_parser(name, help=helptext)
        common(sp)
        if name != "design":
            sp.add_argument("--trials", type=int, default=None, help="Monte Carlo trials per point")
        sp.set_defaults(func=fn)

    sp = sub.add_parser("verify", help="check that a constellation separates all distinct outputs")
    common(sp, config_required=False)
    sp.add_argument("--constellation", help="CSV with re,im columns")
    sp.add_argument("--function", help="sum, product, max, arithmetic_mean or geometric_mean")
    sp.add_argument("--K", type=int, help="number of nodes")
    sp.add_argument("--q", type=int, help="number of quantization levels")
    sp.set_defaults(func=cmd_verify)
    return p


def _thread_limit():
    raw = os.environ.get("OACCOMP_THREADS")
    if raw is None or raw == "":
        return nullcontext()
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n < 1:
        raise ConfigError(f"OACCOMP_THREADS must be a positive integer, got {raw!r}")
    return threadpool_limits(limits=n)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    if getattr(args, "trials", None) is not None and args.trials < 1:
        print("error: --trials must be positive", file=sys.stderr)
        return EXIT_CONFIG
    try:
        with _thread_limit():
            return args.func(args)
    except (Infeasible, SolverDiverged, OverlapViolation) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ConfigError, OacError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
