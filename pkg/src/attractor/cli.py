"""
Batch experiment driver.

    attractor run <config.json> [--out DIR] [--overwrite] [--jobs N]
    attractor scan <config.json>
    attractor check <config.json>

A config file holds one experiment object, a list of them, or
``{"experiments": [...]}``. Each experiment writes
``<out>/<name>/{trace.csv, attractor.json, report.json}`` and the batch
summary goes to ``<out>/summary.json``.

Exit codes: 0 success, 1 verdict failure, 2 config error, 3 numerical
divergence. ``ATTRACTOR_SEED`` overrides every seed in the config.
"""

from __future__ import annotations

import argparse
import inspect
import itertools
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import attractive, classes, iterate
from .errors import AttractorError, ConfigSemanticError, ConfigSyntaxError, NumericalDivergence
from .mappings import REGISTRY, MappingSpec, parse_name, registry_get
from .space import box_sampler

logger = logging.getLogger("attractor")

EXIT_OK, EXIT_VERDICT, EXIT_CONFIG, EXIT_DIVERGENCE = 0, 1, 2, 3

TOP_KEYS = {"name", "mapping", "generators", "scheme", "scan", "checks", "seed", "tolerances", "output"}

DEFAULT_TOLERANCES = {
    "stop_tol": None,  # filled per scheme
    "max_steps": None,  # filled per scheme
    "check_tol": classes.DEFAULT_TOL,
    "check_samples": 10_000,
    "member_tol": classes.DEFAULT_TOL,
    "scan_tol": classes.DEFAULT_TOL,
    "dykstra_max_iter": attractive.DYKSTRA_MAX_ITER,
    "dykstra_tol": attractive.DYKSTRA_TOL,
    "vacuous_tol": None,
}

DEFAULT_SCAN = {"lo": -2.0, "hi": 2.0, "step": 0.25}

CHECK_KINDS = {"generalized_hybrid": 2, "wmgh": 7, "quasinonexpansive_wrt": None}


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    mapping: dict
    generators: object  # list of points, or {"seed", "count", "box"}
    scheme: dict | None = None
    scan: dict | None = None
    checks: list = field(default_factory=list)
    seed: int = 0
    tolerances: dict = field(default_factory=dict)
    output: str = "out"

    def to_dict(self) -> dict:
        return asdict(self)

    def build_mapping(self) -> MappingSpec:
        return registry_get(self.mapping["name"], **self.mapping["params"])


# -- validation ----------------------------------------------------------


def _num(value, fieldname) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigSemanticError(fieldname, f"expected a number, got {value!r}")
    if not np.isfinite(value):
        raise ConfigSemanticError(fieldname, "must be finite")
    return float(value)


def _point(value, dim, fieldname) -> list:
    coords = [value] if not isinstance(value, list) else value
    if len(coords) != dim:
        raise ConfigSemanticError(fieldname, f"expected {dim} coordinates, got {len(coords)}")
    return [_num(c, fieldname) for c in coords]


def _only(obj, allowed, fieldname):
    if not isinstance(obj, dict):
        raise ConfigSemanticError(fieldname, "expected an object")
    extra = sorted(set(obj) - set(allowed))
    if extra:
        raise ConfigSemanticError(f"{fieldname}.{extra[0]}", "unknown key")


def _mapping(raw) -> tuple[dict, MappingSpec]:
    if isinstance(raw, str):
        try:
            name, args, kw = parse_name(raw)
        except (SyntaxError, ValueError, AttractorError) as exc:
            raise ConfigSemanticError("mapping", f"cannot parse {raw!r}") from exc
    elif isinstance(raw, dict):
        _only(raw, {"name", "params"}, "mapping")
        name, args, kw = raw.get("name"), [], dict(raw.get("params", {}))
    else:
        raise ConfigSemanticError("mapping", "expected a registry name or {name, params}")
    if name not in REGISTRY:
        raise ConfigSemanticError("mapping", f"unknown registry mapping {name!r}")
    try:
        bound = inspect.signature(REGISTRY[name]).bind(*args, **kw)
        params = dict(bound.arguments)
        T = registry_get(name, **params)
    except (TypeError, ValueError, AttractorError) as exc:
        raise ConfigSemanticError("mapping", str(exc)) from exc
    return {"name": name, "params": params}, T


def _schedule(raw, fieldname) -> dict:
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        raw = {"family": "constant", "value": raw}
    if not isinstance(raw, dict):
        raise ConfigSemanticError(fieldname, "expected a number or a schedule object")
    fam = raw.get("family")
    if fam == "constant":
        _only(raw, {"family", "value"}, fieldname)
        kw = {"value": _num(raw.get("value"), fieldname + ".value")}
    elif fam == "power":
        _only(raw, {"family", "scale", "exponent", "shift"}, fieldname)
        kw = {k: _num(raw.get(k, d), f"{fieldname}.{k}") for k, d in
              (("scale", 1.0), ("exponent", 1.0), ("shift", 0.0))}
    else:
        raise ConfigSemanticError(fieldname + ".family", f"expected 'power' or 'constant', got {fam!r}")
    try:
        return iterate.Schedule(fam, **kw).to_dict()
    except ValueError as exc:
        raise ConfigSemanticError(fieldname, str(exc)) from exc


def _scheme(raw, dim) -> dict | None:
    if raw is None:
        return None
    if not isinstance(raw, dict):
        raise ConfigSemanticError("scheme", "expected an object")
    kind = raw.get("type")
    if kind == "mann":
        _only(raw, {"type", "x1", "alpha"}, "scheme")
        return {"type": "mann", "x1": _point(raw.get("x1"), dim, "scheme.x1"),
                "alpha": _schedule(raw.get("alpha"), "scheme.alpha")}
    if kind == "halpern":
        _only(raw, {"type", "u", "x1", "alpha", "beta"}, "scheme")
        return {"type": "halpern", "u": _point(raw.get("u"), dim, "scheme.u"),
                "x1": _point(raw.get("x1"), dim, "scheme.x1"),
                "alpha": _schedule(raw.get("alpha"), "scheme.alpha"),
                "beta": _schedule(raw.get("beta"), "scheme.beta")}
    raise ConfigSemanticError("scheme.type", f"expected 'mann' or 'halpern', got {kind!r}")


def _generators(raw, T: MappingSpec, seed: int):
    if isinstance(raw, dict):
        _only(raw, {"seed", "count", "box"}, "generators")
        count = raw.get("count")
        if not isinstance(count, int) or isinstance(count, bool) or count < 1:
            raise ConfigSemanticError("generators.count", "expected a positive integer")
        s = raw.get("seed", seed)
        if not isinstance(s, int) or isinstance(s, bool):
            raise ConfigSemanticError("generators.seed", "expected an integer")
        return {"seed": s, "count": count,
                "box": _num(raw.get("box", T.domain.radius), "generators.box")}
    if not isinstance(raw, list) or not raw:
        raise ConfigSemanticError("generators", "expected a non-empty point list or a sampler object")
    pts = [_point(p, T.dimension, f"generators[{i}]") for i, p in enumerate(raw)]
    for i, p in enumerate(pts):
        if not T.domain.contains(np.array(p)):
            raise ConfigSemanticError(f"generators[{i}]", f"{p} is outside the mapping domain")
    return pts


def _scan(raw, dim) -> dict | None:
    if raw is None:
        return None
    if raw is True:
        raw = {}
    _only(raw, {"lo", "hi", "step", "points"}, "scan")
    if "points" in raw:
        return {"points": [_point(p, dim, "scan.points") for p in raw["points"]]}
    out = {k: _num(raw.get(k, d), f"scan.{k}") for k, d in DEFAULT_SCAN.items()}
    if out["step"] <= 0 or out["hi"] < out["lo"]:
        raise ConfigSemanticError("scan", "need lo <= hi and step > 0")
    return out


def _checks(raw, dim, seed, samples) -> list:
    if raw is None:
        return []
    if not isinstance(raw, list):
        raise ConfigSemanticError("checks", "expected a list")
    out = []
    for i, c in enumerate(raw):
        fname = f"checks[{i}]"
        _only(c, {"kind", "coefficients", "points", "expect", "samples", "seed", "target"}, fname)
        kind = c.get("kind")
        if kind not in CHECK_KINDS:
            raise ConfigSemanticError(fname + ".kind", f"unknown check kind {kind!r}")
        entry = {"kind": kind}
        if kind == "quasinonexpansive_wrt":
            pts = c.get("points")
            if not isinstance(pts, list) or not pts:
                raise ConfigSemanticError(fname + ".points", "expected a non-empty point list")
            entry["points"] = [_point(p, dim, fname + ".points") for p in pts]
        else:
            coeffs = c.get("coefficients")
            if not isinstance(coeffs, list) or len(coeffs) != CHECK_KINDS[kind]:
                raise ConfigSemanticError(fname + ".coefficients", f"expected {CHECK_KINDS[kind]} numbers")
            entry["coefficients"] = [_num(v, fname + ".coefficients") for v in coeffs]
        expect = c.get("expect", "satisfied")
        if expect not in ("satisfied", "violated"):
            raise ConfigSemanticError(fname + ".expect", "expected 'satisfied' or 'violated'")
        target = c.get("target", "mapping")
        if target not in ("mapping", "extension"):
            raise ConfigSemanticError(fname + ".target", "expected 'mapping' or 'extension'")
        n = c.get("samples", samples)
        s = c.get("seed", seed)
        for key, v in (("samples", n), ("seed", s)):
            if not isinstance(v, int) or isinstance(v, bool) or (key == "samples" and v < 1):
                raise ConfigSemanticError(f"{fname}.{key}", "expected a positive integer")
        entry.update(expect=expect, target=target, samples=n, seed=s)
        out.append(entry)
    return out


def validate_experiment(raw: dict, default_name: str = "experiment") -> ExperimentConfig:
    _only(raw, TOP_KEYS, "experiment")
    if "mapping" not in raw:
        raise ConfigSemanticError("mapping", "required")
    if "generators" not in raw:
        raise ConfigSemanticError("generators", "required")
    name = raw.get("name", default_name)
    if not isinstance(name, str) or not name or "/" in name or name in (".", ".."):
        raise ConfigSemanticError("name", "expected a plain directory name")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigSemanticError("seed", "expected an integer")
    mapping, T = _mapping(raw["mapping"])
    scheme = _scheme(raw.get("scheme"), T.dimension)

    tol_raw = raw.get("tolerances", {})
    _only(tol_raw, DEFAULT_TOLERANCES, "tolerances")
    tolerances = dict(DEFAULT_TOLERANCES)
    for k, v in tol_raw.items():
        if v is not None:
            v = _num(v, f"tolerances.{k}")
            if k in ("max_steps", "dykstra_max_iter", "check_samples"):
                if v != int(v) or v < 1:
                    raise ConfigSemanticError(f"tolerances.{k}", "expected a positive integer")
                v = int(v)
        tolerances[k] = v
    kind = scheme["type"] if scheme else "mann"
    if tolerances["stop_tol"] is None:
        tolerances["stop_tol"] = iterate.HALPERN_STOP_TOL if kind == "halpern" else iterate.MANN_STOP_TOL
    if tolerances["max_steps"] is None:
        tolerances["max_steps"] = iterate.HALPERN_MAX_STEPS if kind == "halpern" else iterate.MANN_MAX_STEPS

    output = raw.get("output", "out")
    if not isinstance(output, str):
        raise ConfigSemanticError("output", "expected a path string")
    return ExperimentConfig(
        name=name,
        mapping=mapping,
        generators=_generators(raw["generators"], T, seed),
        scheme=scheme,
        scan=_scan(raw.get("scan"), T.dimension),
        checks=_checks(raw.get("checks"), T.dimension, seed, tolerances["check_samples"]),
        seed=seed,
        tolerances=tolerances,
        output=output,
    )


def _read_json(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigSyntaxError(f"cannot read {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigSyntaxError(exc.msg, exc.lineno, exc.colno) from exc


def load_config(path) -> ExperimentConfig:
    """Load a single-experiment config file, filling defaults."""
    raw = _read_json(path)
    if not isinstance(raw, dict) or "experiments" in raw:
        raise ConfigSemanticError("experiment", "expected a single experiment object; use load_batch")
    return validate_experiment(raw)


def load_batch(path) -> list[ExperimentConfig]:
    raw = _read_json(path)
    if isinstance(raw, dict) and "experiments" in raw:
        _only(raw, {"experiments"}, "batch")
        raw = raw["experiments"]
    if isinstance(raw, dict):
        return [validate_experiment(raw)]
    if not isinstance(raw, list) or not raw:
        raise ConfigSemanticError("experiments", "expected a non-empty list")
    cfgs = []
    for i, r in enumerate(raw):
        if not isinstance(r, dict):
            raise ConfigSemanticError(f"experiments[{i}]", "expected an object")
        cfgs.append(validate_experiment(r, default_name=f"experiment-{i}"))
    names = [c.name for c in cfgs]
    if len(set(names)) != len(names):
        raise ConfigSemanticError("name", "experiment names must be unique")
    return cfgs


def save_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")


# -- running -------------------------------------------------------------


def _seed_override(seed: int) -> int:
    env = os.environ.get("ATTRACTOR_SEED")
    return int(env) if env not in (None, "") else seed


def _generator_points(cfg: ExperimentConfig, T: MappingSpec) -> np.ndarray:
    g = cfg.generators
    if isinstance(g, dict):
        sampler = box_sampler(T.dimension, g["box"], accept=T.domain.membership)
        return sampler(_seed_override(g["seed"]), g["count"])
    return np.array(g, dtype=float)


def _scan_grid(scan: dict, dim: int) -> np.ndarray:
    if "points" in scan:
        return np.array(scan["points"], dtype=float)
    n = int(round((scan["hi"] - scan["lo"]) / scan["step"]))
    axis = scan["lo"] + scan["step"] * np.arange(n + 1)
    return np.array(list(itertools.product(axis, repeat=dim)), dtype=float)


def _run_check(check, T, Tt, tol):
    target = Tt.as_mapping() if check["target"] == "extension" else T
    seed = _seed_override(check["seed"])
    kind = check["kind"]
    if kind == "generalized_hybrid":
        v = classes.check_generalized_hybrid(target, classes.GHCoefficients(*check["coefficients"]),
                                             check["samples"], seed, tol)
    elif kind == "wmgh":
        v = classes.check_wmgh(target, classes.WMGHCoefficients.of(check["coefficients"]),
                               check["samples"], seed, tol)
    else:
        v = classes.check_quasinonexpansive_wrt(target, check["points"], check["samples"], seed, tol)
    got = "satisfied" if v.satisfied else "violated"
    return dict(check, verdict=v.to_dict(), passed=got == check["expect"])


def _write(path: Path, text: str) -> None:
    path.write_text(text)


def run_experiment(cfg: ExperimentConfig, out_dir=None, overwrite: bool = False, mode: str = "run") -> dict:
    """
    Run one experiment and write its files. Returns the summary entry;
    ``entry["status"]`` is one of ok, verdict_failure, divergence, error.
    Domain errors are recorded in the entry, never raised.
    """
    t0 = time.perf_counter()
    tol = cfg.tolerances
    entry = {"name": cfg.name, "mapping": cfg.mapping, "mode": mode, "status": "ok"}
    dest = Path(out_dir if out_dir is not None else cfg.output) / cfg.name
    dest.mkdir(parents=True, exist_ok=True)
    if overwrite:
        for stale in ("trace.csv", "attractor.json", "report.json"):
            (dest / stale).unlink(missing_ok=True)
    failures = []
    try:
        T = cfg.build_mapping()
        entry["dimension"] = T.dimension
        gens = _generator_points(cfg, T)
        S = attractive.build_attractor(T, gens, tol["vacuous_tol"])
        _write(dest / "attractor.json", json.dumps(S.to_dict(), indent=2) + "\n")
        entry["attractor"] = {
            "generators": len(S.generators),
            "constraints": len(S),
            "singleton": None if S.singleton is None else S.singleton.tolist(),
        }
        Tt = attractive.extend(T, S, int(tol["dykstra_max_iter"]), tol["dykstra_tol"])

        if mode in ("run", "check") and cfg.checks:
            entry["checks"] = [_run_check(c, T, Tt, tol["check_tol"]) for c in cfg.checks]
            failures += [f"check {c['kind']} expected {c['expect']}" for c in entry["checks"] if not c["passed"]]

        if (mode == "run" and cfg.scan is not None) or mode == "scan":
            grid = _scan_grid(cfg.scan or DEFAULT_SCAN, T.dimension)
            fps = attractive.scan_fixed_points(Tt, grid, tol["scan_tol"])
            entry["fixed_point_scan"] = {"grid_points": len(grid), "fixed_points": [p.tolist() for p in fps]}

        if mode == "run" and cfg.scheme is not None:
            entry["iteration"] = _run_scheme(cfg, Tt, S, dest)
            it = entry["iteration"]
            if not it["verdict"]["converged"]:
                failures.append("iteration did not converge")
            elif it["member_of_attractor"] is False:
                failures.append("limit outside the attractor")
    except NumericalDivergence as exc:
        entry["status"] = "divergence"
        entry["error"] = {"type": type(exc).__name__, "message": str(exc), "step": exc.step}
        if exc.trace is not None:
            _write(dest / "trace.csv", exc.trace.to_csv())
    except (AttractorError, ValueError) as exc:
        entry["status"] = "error"
        entry["error"] = {"type": type(exc).__name__, "message": str(exc)}
    if entry["status"] == "ok" and failures:
        entry["status"] = "verdict_failure"
        entry["failures"] = failures
    entry["wall_time"] = time.perf_counter() - t0
    _write(dest / "report.json", json.dumps(entry, indent=2) + "\n")
    return entry


def _run_scheme(cfg, Tt, S, dest) -> dict:
    sc = cfg.scheme
    tol = cfg.tolerances
    alpha = iterate.Schedule(**sc["alpha"])
    if sc["type"] == "halpern":
        beta = iterate.Schedule(**sc["beta"])
        trace = iterate.run_halpern(Tt, sc["u"], sc["x1"], alpha, beta, int(tol["max_steps"]), tol["stop_tol"])
    else:
        trace = iterate.run_mann(Tt, sc["x1"], alpha, int(tol["max_steps"]), tol["stop_tol"], tol["member_tol"])
    _write(dest / "trace.csv", trace.to_csv())
    limit = trace.verdict.point
    return {
        "scheme": sc["type"],
        "verdict": trace.verdict.to_dict(),
        "iterates": len(trace),
        "final_iterate": trace.iterates[-1].tolist(),
        "final_residual": float(trace.residuals[-1]),
        "limit": None if limit is None else limit.tolist(),
        "member_of_attractor": None if limit is None else iterate.residual_limit_check(trace, S, tol["member_tol"]),
        "diagnostics": [d.to_dict() for d in trace.diagnostics],
        "schedule_conditions_met": iterate.schedules_pass(trace.diagnostics),
        "notes": trace.notes,
    }


def exit_code(entries: list[dict]) -> int:
    statuses = {e["status"] for e in entries}
    if "divergence" in statuses:
        return EXIT_DIVERGENCE
    if statuses - {"ok"}:
        return EXIT_VERDICT
    return EXIT_OK


def run_batch(cfgs, out_dir=None, overwrite=False, jobs=1, mode="run") -> tuple[list[dict], int]:
    root = Path(out_dir) if out_dir is not None else None
    for c in cfgs:
        dest = (root if root is not None else Path(c.output)) / c.name
        if dest.exists() and any(dest.iterdir()) and not overwrite:
            raise ConfigSemanticError("output", f"{dest} exists; pass --overwrite to replace it")
    args = [(c, out_dir, overwrite, mode) for c in cfgs]
    if jobs > 1 and len(cfgs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            entries = list(pool.map(_run_star, args))
    else:
        entries = [_run_star(a) for a in args]
    summary_roots = {root} if root is not None else {Path(c.output) for c in cfgs}
    for r in summary_roots:
        mine = [e for e, c in zip(entries, cfgs) if root is not None or Path(c.output) == r]
        r.mkdir(parents=True, exist_ok=True)
        (r / "summary.json").write_text(json.dumps({"experiments": mine}, indent=2) + "\n")
    return entries, exit_code(entries)


def _run_star(args):
    return run_experiment(*args)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="attractor", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (("run", "run checks, scans and iterations"),
                           ("scan", "fixed-point scan of the extension only"),
                           ("check", "class checks only")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("config")
        p.add_argument("--out", default=None, help="output root (overrides the config)")
        p.add_argument("--overwrite", action="store_true")
        p.add_argument("--jobs", type=int, default=1)
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfgs = load_batch(args.config)
        entries, code = run_batch(cfgs, args.out, args.overwrite, max(1, args.jobs), args.command)
    except (ConfigSyntaxError, ConfigSemanticError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for e in entries:
        print(f"{e['name']}: {e['status']}")
    return code


if __name__ == "__main__":
    sys.exit(main())
