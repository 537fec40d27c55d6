"""Command-line interface: ``phasecrb <command> [--config PATH] [--out PATH] ...``.

Every command reads an optional JSON configuration, fills in defaults, and
writes its result atomically together with a manifest that echoes the fully
resolved configuration.  Failures exit with status 1 and print an error
object ``{"error": {"type", "message", "field"}}`` to stdout.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from typing import Any

import numpy as np

from . import __version__
from .asymptotic import optimize_C, surface, surface_to_csv, surface_to_svg
from .bound import coherent_bound, crb_mse, heisenberg_lower_bound, scaling_exponent_fit
from .fisher import fisher_spectra, validate_beam_spectrum
from .spectra import (Coherent, OpoSqueezed, OrnsteinUhlenbeck, PowerLaw,
                      quadrature_spectra)
from .tracking import TrackingConfig, monte_carlo_mse, records_to_csv

COMMANDS = ("bound", "surface", "optimize", "scaling", "simulate", "validate")
THREADS_ENV = "PHASECRB_THREADS"


class ConfigError(ValueError):
    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


# ---------------------------------------------------------------------------
# Configuration parsing
# ---------------------------------------------------------------------------

def _check_keys(section: dict, allowed: set[str], required: set[str], where: str) -> None:
    if not isinstance(section, dict):
        raise ConfigError(f"{where} must be a JSON object", where or None)
    for key in section:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in {where or 'config'}",
                              f"{where}.{key}" if where else key)
    for key in required:
        if key not in section:
            raise ConfigError(f"missing key {key!r} in {where or 'config'}",
                              f"{where}.{key}" if where else key)


def _number(section: dict, key: str, where: str, default=None) -> float:
    val = section.get(key, default)
    name = f"{where}.{key}" if where else key
    if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
        raise ConfigError(f"{name} must be a finite number", name)
    return float(val)


def _wrap(fn, field: str):
    try:
        return fn()
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc), field) from exc


def parse_phase(section: dict) -> tuple[Any, dict]:
    """Phase prior from ``{"model": "ou"|"wiener"|"power_law", ...}``."""
    where = "phase"
    if not isinstance(section, dict):
        raise ConfigError("phase must be a JSON object", where)
    model = section.get("model", "ou")
    if model == "ou":
        _check_keys(section, {"model", "kappa", "lambda"}, {"kappa"}, where)
        kappa = _number(section, "kappa", where)
        lam = _number(section, "lambda", where, 0.0)
        obj = _wrap(lambda: OrnsteinUhlenbeck(kappa, lam), where)
        return obj, {"model": "ou", "kappa": kappa, "lambda": lam}
    if model == "wiener":
        _check_keys(section, {"model", "kappa"}, {"kappa"}, where)
        kappa = _number(section, "kappa", where)
        return _wrap(lambda: OrnsteinUhlenbeck(kappa, 0.0), where), {"model": "wiener", "kappa": kappa}
    if model == "power_law":
        _check_keys(section, {"model", "kappa", "p"}, {"kappa", "p"}, where)
        kappa, p = _number(section, "kappa", where), _number(section, "p", where)
        return _wrap(lambda: PowerLaw(p, kappa), where), {"model": "power_law", "kappa": kappa, "p": p}
    raise ConfigError(f"unknown phase model {model!r}", "phase.model")


def parse_beam(section: dict, validate: bool = True) -> tuple[Any, dict]:
    """Beam from ``{"model": "coherent"|"opo", ...}``."""
    where = "beam"
    if not isinstance(section, dict):
        raise ConfigError("beam must be a JSON object", where)
    model = section.get("model", "coherent")
    if model == "coherent":
        _check_keys(section, {"model", "alpha"}, {"alpha"}, where)
        alpha = _number(section, "alpha", where)
        return _wrap(lambda: Coherent(alpha), where), {"model": "coherent", "alpha": alpha}
    if model == "opo":
        keys = ("alpha", "r_plus", "r_minus", "gamma", "x")
        _check_keys(section, {"model", *keys}, set(keys), where)
        vals = {k: _number(section, k, where) for k in keys}
        resolved = {"model": "opo", **vals}
        if validate:
            return _wrap(lambda: OpoSqueezed(**vals), where), resolved
        return quadrature_spectra(**vals), resolved
    raise ConfigError(f"unknown beam model {model!r}", "beam.model")


def _int(section: dict, key: str, default: int, minimum: int = 1) -> int:
    val = section.get(key, default)
    if isinstance(val, bool) or not isinstance(val, int) or val < minimum:
        raise ConfigError(f"{key} must be an integer >= {minimum}", key)
    return val


def _pair(section: dict, key: str, default) -> tuple[float, float]:
    val = section.get(key, default)
    if (not isinstance(val, (list, tuple)) or len(val) != 2
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in val)):
        raise ConfigError(f"{key} must be a two-element numeric list", key)
    return float(val[0]), float(val[1])


# ---------------------------------------------------------------------------
# Commands: each returns (resolved_config, payload) where payload is a
# dict (JSON), or a ready-made text for csv/svg.
# ---------------------------------------------------------------------------

def cmd_bound(cfg: dict, args) -> tuple[dict, Any]:
    _check_keys(cfg, {"phase", "beam", "mean_field", "epsrel"}, {"phase", "beam"}, "")
    phase, rp = parse_phase(cfg["phase"])
    beam, rb = parse_beam(cfg["beam"])
    mean_field = cfg.get("mean_field", False)
    if not isinstance(mean_field, bool):
        raise ConfigError("mean_field must be true or false", "mean_field")
    epsrel = _number(cfg, "epsrel", "", 1e-10)
    spectra = fisher_spectra(phase, beam, mean_field=mean_field)
    res = crb_mse(spectra.fc, spectra.fq, epsrel=epsrel)
    resolved = {"phase": rp, "beam": rb, "mean_field": mean_field, "epsrel": epsrel}
    return resolved, {"flux": spectra.flux, **res.to_dict()}


def cmd_validate(cfg: dict, args) -> tuple[dict, Any]:
    _check_keys(cfg, {"beam", "tolerance"}, {"beam"}, "")
    beam, rb = parse_beam(cfg["beam"], validate=False)
    tol = _number(cfg, "tolerance", "", 1e-10)
    general = beam.to_general()
    report = validate_beam_spectrum(general, tol=tol)
    return {"beam": rb, "tolerance": tol}, report.to_dict()


def _surface_grids(cfg: dict):
    g_lo, g_hi = _pair(cfg, "gamma_range", [0.0, 4.0])
    t_lo, t_hi = _pair(cfg, "tau_range", [0.0, 1.0])
    ng = _int(cfg, "gamma_points", 64)
    nt = _int(cfg, "tau_points", 32, minimum=1)
    if not (0 <= g_lo < g_hi) or not (0 <= t_lo <= t_hi <= 1):
        raise ConfigError("gamma_range must satisfy 0 <= lo < hi and tau_range lie in [0, 1]",
                          "gamma_range")
    step = (g_hi - g_lo) / ng
    gammas = np.linspace(g_lo + step if g_lo == 0 else g_lo, g_hi, ng)
    taus = np.linspace(t_lo, t_hi, nt)
    resolved = {"gamma_range": [g_lo, g_hi], "tau_range": [t_lo, t_hi],
                "gamma_points": ng, "tau_points": nt}
    return gammas, taus, resolved


def cmd_surface(cfg: dict, args) -> tuple[dict, Any]:
    _check_keys(cfg, {"gamma_range", "tau_range", "gamma_points", "tau_points"}, set(), "")
    gammas, taus, resolved = _surface_grids(cfg)
    rows = surface(gammas, taus, threads=args.threads)
    if args.format == "csv":
        return resolved, surface_to_csv(rows)
    if args.format == "svg":
        return resolved, surface_to_svg(rows)
    return resolved, {"rows": [[r.gamma_star, r.tau, r.C] for r in rows],
                      "columns": ["gamma_star", "tau", "C"]}


def cmd_optimize(cfg: dict, args) -> tuple[dict, Any]:
    _check_keys(cfg, {"gamma_range", "tau_range", "grid", "fatol"}, set(), "")
    g = _pair(cfg, "gamma_range", [0.0, 4.0])
    t = _pair(cfg, "tau_range", [0.0, 1.0])
    grid = cfg.get("grid", [64, 32])
    if (not isinstance(grid, list) or len(grid) != 2
            or not all(isinstance(v, int) and not isinstance(v, bool) and v >= 2 for v in grid)):
        raise ConfigError("grid must be two integers >= 2", "grid")
    fatol = _number(cfg, "fatol", "", 1e-6)
    res = _wrap(lambda: optimize_C(g, t, tuple(grid), fatol=fatol, threads=args.threads), "gamma_range")
    resolved = {"gamma_range": list(g), "tau_range": list(t), "grid": grid, "fatol": fatol}
    return resolved, res.to_dict()


def cmd_scaling(cfg: dict, args) -> tuple[dict, Any]:
    _check_keys(cfg, {"phase", "kind", "n_range", "points", "zeta"}, {"phase"}, "")
    phase, rp = parse_phase(cfg["phase"])
    kind = cfg.get("kind", "coherent")
    n_lo, n_hi = _pair(cfg, "n_range", [1e6, 1e12])
    points = _int(cfg, "points", 25, minimum=5)
    zeta = _number(cfg, "zeta", "", 17.0 / 4.0)
    if kind == "coherent":
        def fn(n):
            return coherent_bound(phase, n).value
    elif kind == "heisenberg":
        p = phase.p if isinstance(phase, PowerLaw) else 2.0

        def fn(n):
            return heisenberg_lower_bound(p, phase.kappa, n, zeta=zeta).value
    else:
        raise ConfigError(f"kind must be 'coherent' or 'heisenberg', got {kind!r}", "kind")
    fit = _wrap(lambda: scaling_exponent_fit(fn, (n_lo, n_hi), points), "n_range")
    resolved = {"phase": rp, "kind": kind, "n_range": [n_lo, n_hi], "points": points, "zeta": zeta}
    ns = np.geomspace(n_lo, n_hi, points)
    vals = np.array([fn(float(n)) for n in ns])
    if args.format == "csv":
        lines = ["N,bound,fit_slope_running"]
        for i, (n, v) in enumerate(zip(ns, vals)):
            run = np.polyfit(np.log(ns[: i + 1]), np.log(vals[: i + 1]), 1)[0] if i else math.nan
            lines.append(f"{n:.17g},{v:.17g},{run:.17g}")
        return resolved, "\n".join(lines) + "\n"
    return resolved, {"slope": fit.slope, "intercept": fit.intercept, "r2": fit.r2,
                      "n_used": fit.n_used, "dropped_first_decade": fit.dropped_first_decade,
                      "N": ns.tolist(), "bound": vals.tolist()}


def cmd_simulate(cfg: dict, args) -> tuple[dict, Any]:
    allowed = {"phase", "alpha", "dt", "duration", "burn_in", "trajectories", "feedback",
               "dump_trajectories", "dump_stride"}
    _check_keys(cfg, allowed, {"phase", "alpha"}, "")
    phase, rp = parse_phase(cfg["phase"])
    alpha = _number(cfg, "alpha", "")
    kappa = phase.kappa
    lam = getattr(phase, "lam", 0.0)
    tcorr = 1.0 / math.sqrt(lam * lam + 4 * alpha * alpha * kappa)
    fastest = max(lam, 4 * alpha * alpha, kappa)
    dt = _number(cfg, "dt", "", 1e-2 / fastest)
    burn_in = _number(cfg, "burn_in", "", 10 * tcorr)
    duration = _number(cfg, "duration", "", 1000 * tcorr)
    trajectories = _int(cfg, "trajectories", 100)
    feedback = cfg.get("feedback", "linearized")
    dump = cfg.get("dump_trajectories", [])
    if not isinstance(dump, list) or not all(isinstance(i, int) and i >= 0 for i in dump):
        raise ConfigError("dump_trajectories must be a list of trajectory indices", "dump_trajectories")
    stride = _int(cfg, "dump_stride", 1)
    if dump and not args.out:
        raise ConfigError("dump_trajectories needs --out to name the CSV files", "dump_trajectories")
    tc = _wrap(lambda: TrackingConfig(phase, alpha, dt, duration, burn_in, trajectories,
                                      args.seed, feedback), "dt")
    result, records = monte_carlo_mse(tc, threads=args.threads, keep=dump)
    for i, rec in records.items():
        _atomic_write(f"{args.out}.traj{i}.csv", records_to_csv(rec, stride))
    resolved = {"phase": rp, **{k: v for k, v in tc.to_dict().items() if k not in ("kappa", "lambda")},
                "dump_trajectories": dump, "dump_stride": stride}
    return resolved, result.to_dict()


HANDLERS = {
    "bound": cmd_bound,
    "surface": cmd_surface,
    "optimize": cmd_optimize,
    "scaling": cmd_scaling,
    "simulate": cmd_simulate,
    "validate": cmd_validate,
}

FORMATS = {
    "bound": ("json",),
    "validate": ("json",),
    "optimize": ("json",),
    "simulate": ("json",),
    "surface": ("csv", "json", "svg"),
    "scaling": ("csv", "json"),
}


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".phasecrb-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _dumps(obj) -> str:
    # NaN/inf are emitted as JSON null to stay strictly standard
    def clean(v):
        if isinstance(v, float) and not math.isfinite(v):
            return None
        if isinstance(v, dict):
            return {k: clean(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [clean(x) for x in v]
        return v

    return json.dumps(clean(obj), indent=2, sort_keys=True, default=_json_default) + "\n"


def _threads(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get(THREADS_ENV)
    if env is None:
        return 1
    try:
        n = int(env)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {env!r}", THREADS_ENV)
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {env!r}", THREADS_ENV)
    return n


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phasecrb", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--out", help="output path (stdout when omitted)")
        p.add_argument("--format", choices=("json", "csv", "svg"), default=None)
        p.add_argument("--seed", type=int, default=0, help="unsigned 64-bit seed")
        p.add_argument("--threads", type=int, default=None,
                       help=f"worker threads (fallback: ${THREADS_ENV}, then 1)")
    return parser


def _error(exc: BaseException, field: str | None = None) -> int:
    payload = {"error": {"type": type(exc).__name__, "message": str(exc), "field": field}}
    sys.stdout.write(_dumps(payload))
    return 1


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.threads = _threads(args.threads)
        if args.threads < 1:
            raise ConfigError("--threads must be positive", "threads")
        if not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer", "seed")
        allowed = FORMATS[args.command]
        args.format = args.format or allowed[0]
        if args.format not in allowed:
            raise ConfigError(f"{args.command} cannot write {args.format}", "format")
        cfg: dict = {}
        if args.config:
            try:
                with open(args.config, encoding="utf-8") as fh:
                    cfg = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"malformed JSON: {exc}", "config") from exc
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc}", "config") from exc
        if not isinstance(cfg, dict):
            raise ConfigError("configuration must be a JSON object", "config")
        resolved, payload = HANDLERS[args.command](cfg, args)
    except ConfigError as exc:
        return _error(exc, exc.field)
    except Exception as exc:  # convergence failures and the like
        return _error(exc)

    manifest = {
        "command": args.command,
        "config": resolved,
        "format": args.format,
        "seed": args.seed,
        "threads": args.threads,
        "version": __version__,
    }
    if args.format == "json":
        text = _dumps({"result": payload, "manifest": manifest})
    else:
        text = payload
    if args.out:
        _atomic_write(args.out, text)
        if args.format != "json":
            _atomic_write(args.out + ".manifest.json", _dumps(manifest))
    else:
        sys.stdout.write(text)
    if args.command == "validate" and not payload["pass"]:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
