"""Command-line front end.

Usage::

    phaselab <command> [--config FILE] [--set KEY=VALUE ...] [--out DIR]
                       [--format csv,json,svg] [--seed K]

Commands: ``phase-diagram``, ``rates``, ``free-energy``, ``soh``,
``hysteresis``.  The configuration is a JSON object; ``--set`` overrides one
key with a JSON value (bare strings are accepted).  Unknown keys are
rejected.

Exit codes: 0 on success, 1 for configuration errors, 2 for numerical
failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .equilibria import (
    Stability,
    critical_densities,
    crossing_density,
    equilibrium_free_energy,
    phase_diagram,
    solve_compatibility,
)
from .errors import DomainError, PhaselabError
from .kinetic1d import HysteresisProtocol, jump_locations, loop_area, run_hysteresis
from .model import from_config
from .particles import rayleigh_baseline, run_hysteresis_particles
from .rates_soh import rate_uniform, rate_vmf, soh_coefficients
from .svgplot import PALETTE, Series, line_plot

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2
FORMATS = ("csv", "json", "svg")


class ConfigError(PhaselabError):
    """Invalid or incomplete run configuration."""


# configuration -------------------------------------------------------------

COMMON = {
    "model": {"preset": "HYSTERESIS"},
    "n": 2,
    "out": ".",
    "formats": ["csv", "json"],
    "seed": 0,
}
GRID = {"rho_min": 0.5, "rho_max": 4.0, "points": 141, "rho_grid": None}

DEFAULTS = {
    "phase-diagram": {**GRID, "models": None},
    "rates": dict(GRID),
    "free-energy": dict(GRID),
    "soh": {**GRID, "branch": "stable", "models": None, "K2": 1.0},
    "hysteresis": {
        "engine": "kinetic",
        "T": 500.0,
        "epsilon": 0.02,
        "dt": 0.01,
        "m": 100,
        "N": 10000,
        "t_end": None,
        "rho_const": None,
        "record_every": 10,
        "realizations": 1,
        "scheme": "exact",
    },
}


def _as_int(key, v, lo=None):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or v != int(v):
        raise ConfigError(f"{key} must be an integer, got {v!r}")
    v = int(v)
    if lo is not None and v < lo:
        raise ConfigError(f"{key} must be >= {lo}, got {v}")
    return v


def _as_float(key, v, positive=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{key} must be a finite number, got {v!r}")
    if positive and v <= 0:
        raise ConfigError(f"{key} must be positive, got {v}")
    return float(v)


def load_config(command: str, raw: dict) -> dict:
    """Merge ``raw`` over the defaults of ``command`` and validate every key."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    allowed = {**COMMON, **DEFAULTS[command]}
    unknown = sorted(set(raw) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown configuration keys for {command}: {unknown}")
    cfg = {k: (json.loads(json.dumps(v)) if isinstance(v, (dict, list)) else v) for k, v in allowed.items()}
    cfg.update(raw)

    cfg["n"] = _as_int("n", cfg["n"], 2)
    if command == "hysteresis" and cfg["n"] != 2:
        raise ConfigError("hysteresis runs are two-dimensional (n = 2)")
    if cfg["seed"] is not None:
        cfg["seed"] = _as_int("seed", cfg["seed"], 0)
    formats = cfg["formats"]
    if isinstance(formats, str):
        formats = [f.strip() for f in formats.split(",") if f.strip()]
    if not formats or any(f not in FORMATS for f in formats):
        raise ConfigError(f"formats must be a non-empty subset of {FORMATS}, got {cfg['formats']!r}")
    cfg["formats"] = list(formats)
    if not isinstance(cfg["out"], str):
        raise ConfigError("out must be a directory path")

    models = cfg.get("models")
    if models is not None:
        if not isinstance(models, list) or not models or not all(isinstance(m, dict) for m in models):
            raise ConfigError("models must be a non-empty list of model objects")
    elif not isinstance(cfg["model"], dict):
        raise ConfigError("model must be an object such as {\"preset\": \"HYSTERESIS\"}")

    if "points" in allowed:
        cfg["rho_grid"] = _grid(cfg)
    if command == "soh":
        if cfg["branch"] not in ("stable", "unstable"):
            raise ConfigError("branch must be 'stable' or 'unstable'")
        cfg["K2"] = _as_float("K2", cfg["K2"])
    if command == "hysteresis":
        if cfg["engine"] not in ("kinetic", "particle"):
            raise ConfigError("engine must be 'kinetic' or 'particle'")
        if cfg["scheme"] not in ("exact", "euler"):
            raise ConfigError("scheme must be 'exact' or 'euler'")
        for key in ("T", "dt"):
            cfg[key] = _as_float(key, cfg[key], positive=True)
        cfg["epsilon"] = _as_float("epsilon", cfg["epsilon"])
        for key, lo in (("m", 16), ("N", 1), ("record_every", 1), ("realizations", 1)):
            cfg[key] = _as_int(key, cfg[key], lo)
        for key in ("t_end", "rho_const"):
            if cfg[key] is not None:
                cfg[key] = _as_float(key, cfg[key], positive=True)
    return cfg


def _grid(cfg):
    if cfg["rho_grid"] is not None:
        grid = cfg["rho_grid"]
        if not isinstance(grid, list) or not grid:
            raise ConfigError("rho_grid must be a non-empty list")
        return [_as_float("rho_grid entry", v, positive=True) for v in grid]
    lo = _as_float("rho_min", cfg["rho_min"], positive=True)
    hi = _as_float("rho_max", cfg["rho_max"], positive=True)
    pts = _as_int("points", cfg["points"], 0)
    if pts < 1 or hi < lo:
        raise ConfigError(f"empty density grid (rho_min={lo}, rho_max={hi}, points={pts})")
    return np.linspace(lo, hi, pts).tolist()


def _model(spec):
    try:
        return from_config(spec)
    except DomainError as exc:
        raise ConfigError(str(exc)) from None


def _color(i):
    return PALETTE[i % len(PALETTE)]


def _label(spec):
    params = ", ".join(f"{k}={v}" for k, v in spec.items() if k != "preset")
    name = str(spec.get("preset", "HYSTERESIS")).upper()
    return f"{name}({params})" if params else name


# output --------------------------------------------------------------------


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, Stability):
        return obj.value
    return obj


def write_json(path, command, cfg, result):
    doc = {"command": command, "version": __version__, "config": cfg, "result": result}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(doc), fh, indent=1, sort_keys=True)
        fh.write("\n")


class _Writer:
    def __init__(self, command, cfg):
        self.command = command
        self.cfg = cfg
        self.out = Path(cfg["out"])
        self.out.mkdir(parents=True, exist_ok=True)
        self.stem = command.replace("-", "_")
        self.written = []

    def csv(self, header, rows, suffix=""):
        if "csv" in self.cfg["formats"]:
            p = self.out / f"{self.stem}{suffix}.csv"
            write_csv(p, header, rows)
            self.written.append(p)

    def json(self, result):
        if "json" in self.cfg["formats"]:
            p = self.out / f"{self.stem}.json"
            write_json(p, self.command, self.cfg, result)
            self.written.append(p)

    def svg(self, series, **kw):
        if "svg" in self.cfg["formats"]:
            p = self.out / f"{self.stem}.svg"
            line_plot(series, p, **kw)
            self.written.append(p)


def _branch_series(diagram, label_prefix="", color=None):
    """Stable and unstable pieces of every branch as separate polylines."""
    series = []
    for bid, pts in sorted(diagram.branches.items()):
        rho = np.array([p[0] for p in pts])
        c1 = np.array([p[2] for p in pts])
        stable = np.array([p[3] is Stability.STABLE for p in pts])
        for want, dashed in ((True, False), (False, True)):
            y = np.where(stable == want, c1, np.nan)
            if np.any(np.isfinite(y)):
                series.append(Series(rho, y, dashed=dashed, color=color or _color(bid)))
    if series and label_prefix:
        series[0].label = label_prefix
    return series


# commands ------------------------------------------------------------------


def cmd_phase_diagram(cfg):
    w = _Writer("phase-diagram", cfg)
    specs = cfg["models"] or [cfg["model"]]
    rows, result, series = [], {"models": []}, []
    for i, spec in enumerate(specs):
        model = _model(spec)
        label = _label(spec)
        diagram = phase_diagram(model, cfg["n"], cfg["rho_grid"])
        crit = critical_densities(model, cfg["n"])
        for r in diagram.rows():
            rows.append((label,) + r)
        result["models"].append(
            {
                "label": label,
                "rho_c": crit.rho_c,
                "rho_star": crit.rho_star,
                "kappa_star": crit.kappa_star,
                "rows": diagram.rows(),
                "warnings": diagram.warnings,
            }
        )
        series += _branch_series(diagram, label, color=None if len(specs) == 1 else _color(i))
    w.csv(["model", "rho", "branch", "kappa", "c1", "stability", "free_energy"], rows)
    w.json(result)
    w.svg(series, title="Order parameter c1 of the equilibria (dashed: unstable)", xlabel="rho", ylabel="c1")
    return w.written


def cmd_rates(cfg):
    w = _Writer("rates", cfg)
    model, n = _model(cfg["model"]), cfg["n"]
    crit = critical_densities(model, n)
    rows = []
    for rho in cfg["rho_grid"]:
        lam0 = rate_uniform(model, n, rho) if rho < crit.rho_c else math.nan
        kappa, lam = math.nan, math.nan
        stable = [r for r in solve_compatibility(model, n, rho) if r.kappa > 0 and r.stability is Stability.STABLE]
        if stable:
            kappa = stable[-1].kappa
            lam = rate_vmf(model, n, rho, kappa)
        rows.append((rho, lam0, kappa, lam))
    warnings = []
    if all(math.isnan(r[1]) and math.isnan(r[3]) for r in rows):
        warnings.append("empty table: no density of the grid lies in a stability range")
        print("warning: " + warnings[-1], file=sys.stderr)
    w.csv(["rho", "lambda0", "kappa", "lambda_kappa"], rows)
    w.json(
        {
            "rho_c": crit.rho_c,
            "rho_star": crit.rho_star,
            "lambda0_bound": (n - 1) * model.tau0,
            "rows": rows,
            "warnings": warnings,
        }
    )
    arr = np.array(rows, dtype=float)
    w.svg(
        [Series(arr[:, 0], arr[:, 1], "lambda0 (uniform)"), Series(arr[:, 0], arr[:, 3], "lambda_kappa (VMF)")],
        title="Convergence rates to the stable equilibria",
        xlabel="rho",
        ylabel="rate",
    )
    return w.written


def cmd_free_energy(cfg):
    w = _Writer("free-energy", cfg)
    model, n = _model(cfg["model"]), cfg["n"]
    rows = []
    for rho in cfg["rho_grid"]:
        for root in solve_compatibility(model, n, rho):
            fe = equilibrium_free_energy(model, n, rho, root.kappa)
            rows.append((rho, root.branch, root.kappa, root.stability.value, fe, rho * math.log(rho)))
    try:
        rho1, kappa1, changes = crossing_density(model, n)
    except PhaselabError:
        rho1, kappa1, changes = math.nan, math.nan, 0
    w.csv(["rho", "branch", "kappa", "stability", "free_energy", "uniform_free_energy"], rows)
    w.json({"rho1": rho1, "kappa1": kappa1, "sign_changes": changes, "rows": rows})
    series = []
    for bid in sorted({r[1] for r in rows}):
        pts = [r for r in rows if r[1] == bid]
        x = np.array([p[0] for p in pts])
        y = np.array([p[4] - p[5] for p in pts])
        stable = np.array([p[3] == "STABLE" for p in pts])
        label = f"branch {bid}" if bid else "uniform"
        series.append(Series(x, np.where(stable, y, np.nan), label, color=_color(bid)))
        series.append(Series(x, np.where(~stable, y, np.nan), dashed=True, color=_color(bid)))
    if math.isfinite(rho1):
        series.append(Series(np.array([rho1]), np.array([0.0]), "rho1", markers=True, color="black"))
    w.svg(series, title="Free energy minus the uniform level rho ln rho", xlabel="rho", ylabel="F - rho ln rho")
    return w.written


def cmd_soh(cfg):
    w = _Writer("soh", cfg)
    specs = cfg["models"] or [cfg["model"]]
    n = cfg["n"]
    header = [
        "model", "rho", "kappa", "c1", "c2", "theta", "theta_alt", "delta",
        "hyperbolic", "near_fold", "lambda0", "lambda_kappa", "K2",
    ]
    rows, failures, series = [], [], []
    for i, spec in enumerate(specs):
        model, label = _model(spec), _label(spec)
        xs, ys = [], []
        for rho in cfg["rho_grid"]:
            try:
                s = soh_coefficients(model, n, rho, cfg["branch"])
            except PhaselabError as exc:
                failures.append({"model": label, "rho": rho, "error": str(exc)})
                continue
            rows.append(
                (label, rho, s.kappa, s.c1, s.c2, s.theta, s.theta_alt, s.delta, s.hyperbolic, s.near_fold,
                 s.lambda0, s.lambda_kappa, cfg["K2"])
            )
            xs.append(rho)
            ys.append(math.nan if s.near_fold else s.theta)
        series.append(Series(np.array(xs), np.array(ys), label, color=_color(i)))
    w.csv(header, rows)
    w.json({"rows": rows, "failures": failures})
    series.append(Series(np.array(cfg["rho_grid"]), np.zeros(len(cfg["rho_grid"])), dashed=True, color="gray"))
    w.svg(series, title="Coefficient Theta (hyperbolic where Theta > 0)", xlabel="rho", ylabel="Theta")
    return w.written


def cmd_hysteresis(cfg):
    w = _Writer("hysteresis", cfg)
    model = _model(cfg["model"])
    rho_const = cfg["rho_const"]
    try:
        protocol = HysteresisProtocol(
            T=cfg["T"],
            epsilon_threshold=cfg["epsilon"],
            t_end=cfg["t_end"],
            dt=cfg["dt"],
            m=cfg["m"],
            rho_of_t=None if rho_const is None else (lambda t: rho_const),
            record_every=cfg["record_every"],
        )
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    if cfg["engine"] == "kinetic":
        trace = run_hysteresis(model, protocol)
    else:
        trace = run_hysteresis_particles(
            model, protocol, cfg["N"], cfg["seed"], realizations=cfg["realizations"], scheme=cfg["scheme"]
        )
    if cfg["engine"] == "kinetic":
        rows = list(zip(trace.times, trace.rho, trace.order_parameter, trace.free_energy))
        w.csv(["t", "rho", "c1", "free_energy"], rows)
    else:
        rows = list(zip(trace.times, trace.rho, trace.order_parameter))
        w.csv(["t", "rho", "c1"], rows)

    # Theoretical overlay: stable and unstable branches over the swept range.
    lo, hi = float(np.min(trace.rho)), float(np.max(trace.rho))
    grid = np.linspace(max(lo, 1e-3), max(hi, lo + 1e-3), 301)
    diagram = phase_diagram(model, 2, grid)
    theory = diagram.rows()
    w.csv(["rho", "branch", "kappa", "c1", "stability", "free_energy"], theory, suffix="_theory")
    crit = critical_densities(model, 2)
    level = 0.5 * max(float(np.max(trace.order_parameter)), 0.0)
    up, down = jump_locations(trace, level) if level > 0 else (math.nan, math.nan)
    result = {
        "engine": cfg["engine"],
        "times": trace.times,
        "rho": trace.rho,
        "c1": trace.order_parameter,
        "jump_level": level,
        "jump_up": up,
        "jump_down": down,
        "loop_area": loop_area(trace),
        "min_value": trace.min_value,
        "rho_c": crit.rho_c,
        "rho_star": crit.rho_star,
        "theory": theory,
    }
    if cfg["engine"] == "particle":
        result["rayleigh_baseline"] = rayleigh_baseline(cfg["N"])
    w.json(result)
    series = [Series(trace.rho, trace.order_parameter, f"{cfg['engine']} run", color="#1f77b4")]
    theory_series = _branch_series(diagram, "theory", color="#d62728")
    w.svg(series + theory_series, title="Hysteresis loop of c1", xlabel="rho", ylabel="c1")
    return w.written


HELP = {
    "phase-diagram": "equilibrium branches c1(rho) with stability",
    "rates": "convergence rates to the uniform and VMF equilibria",
    "free-energy": "free energy of every equilibrium and the crossing density",
    "soh": "SOH coefficients and hyperbolicity along a branch",
    "hysteresis": "slow density cycle with the kinetic or particle solver",
}

COMMANDS = {
    "phase-diagram": cmd_phase_diagram,
    "rates": cmd_rates,
    "free-energy": cmd_free_energy,
    "soh": cmd_soh,
    "hysteresis": cmd_hysteresis,
}


# entry point ---------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="phaselab", description="Equilibria, rates and simulations of alignment models.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--config", type=Path, help="JSON configuration file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one configuration key")
        p.add_argument("--out", help="output directory")
        p.add_argument("--format", help="comma-separated subset of csv,json,svg")
        p.add_argument("--seed", type=int, help="random seed")
        if name == "hysteresis":
            p.add_argument("--engine", choices=("kinetic", "particle"))
    return parser


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def config_from_args(args) -> dict:
    raw = {}
    if args.config is not None:
        try:
            raw = json.loads(args.config.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("configuration must be a JSON object")
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        raw[key.strip()] = _parse_value(value)
    if args.out is not None:
        raw["out"] = args.out
    if args.format is not None:
        raw["formats"] = args.format
    if args.seed is not None:
        raw["seed"] = args.seed
    if getattr(args, "engine", None) is not None:
        raw["engine"] = args.engine
    return load_config(args.command, raw)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        written = COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PhaselabError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for p in written:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
