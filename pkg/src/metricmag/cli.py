"""Command-line front end: ingest spaces, run computations, emit curves/reports.

Commands: magnitude, diversity, dimension, ultra, generate, verify.
Inputs are point-cloud CSVs, distance-matrix CSV/JSON files, or inline
generator specs like ``gen:circle:radius=1,n=64,metric=geodesic``. Outputs
are deterministic CSV/JSON files (17 significant digits); a human summary
at 6 significant digits goes to standard output, diagnostics to standard
error. Exit codes: 0 ok, 1 verification failure, 2 config error, 3 I/O
error, 4 compute error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import dimension as dim_mod
from . import diversity as div_mod
from . import magnitude as mag_mod
from . import metric_core, spaces, ultra
from ._format import fmt6
from .errors import (
    ConfigError,
    IllConditionedWarning,
    MetricMagError,
    NoAmbientDimension,
    WindowTooNarrow,
)

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_COMPUTE = 4

_CONFIG_KEYS = {
    "command", "input", "input_type", "t_grid", "epsilon_grid", "tolerance",
    "threads", "output", "format", "seed", "estimator", "include_mu",
    "volume", "dim_tolerance", "skip_dimension", "step",
}

_GENERATORS = {
    "interval", "cantor", "circle", "sierpinski", "grid2d", "random", "ultratree",
}


@dataclass
class RunConfig:
    """Validated run description; grids normalized to sorted arrays."""

    command: str
    input: str | None = None
    input_type: str = "auto"            # auto | points | matrix
    t_grid: np.ndarray | None = None
    epsilon_grid: np.ndarray | None = None
    tolerance: float = 1e-10
    threads: int | None = None
    output: str | None = None
    format: str = "csv"                 # csv | json
    seed: int | None = None
    estimator: str = "minkowski"
    include_mu: bool = False
    volume: float | None = None
    dim_tolerance: float = 0.1
    skip_dimension: bool = False
    step: float = 1e-3
    generate_kind: str | None = None
    generate_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.tolerance is not None and not self.tolerance > 0:
            raise ConfigError("tolerance must be positive")
        for name in ("t_grid", "epsilon_grid"):
            g = getattr(self, name)
            if g is not None:
                g = np.asarray(g, dtype=float)
                if g.size == 0:
                    raise ConfigError(f"{name} must be nonempty")
                if not (g > 0).all():
                    raise ConfigError(f"{name} values must be positive")
                g = np.sort(g)
                if np.unique(g).size != g.size:
                    raise ConfigError(f"{name} has repeated values")
                setattr(self, name, g)
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, got {self.format!r}")


def _parse_grid(text: str) -> np.ndarray:
    """Grid syntax: 'v1,v2,...' or 'min:max:count[:log|lin]'."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) not in (3, 4):
            raise ConfigError(f"bad grid range {text!r} (want min:max:count[:log|lin])")
        lo, hi = float(parts[0]), float(parts[1])
        count = int(parts[2])
        spacing = parts[3] if len(parts) == 4 else "log"
        if count < 1 or not (0 < lo <= hi):
            raise ConfigError(f"bad grid range {text!r}")
        if spacing == "log":
            return np.geomspace(lo, hi, count)
        if spacing == "lin":
            return np.linspace(lo, hi, count)
        raise ConfigError(f"bad grid spacing {spacing!r}")
    try:
        return np.asarray([float(v) for v in text.split(",") if v.strip()])
    except ValueError as exc:
        raise ConfigError(f"bad grid {text!r}: {exc}") from exc


def _parse_generator_spec(spec: str, seed: int | None):
    """Parse 'gen:NAME:key=value,...' into a space (or ultrametric space)."""
    parts = spec.split(":", 2)
    if len(parts) < 2 or parts[0] != "gen":
        raise ConfigError(f"bad generator spec {spec!r}")
    name = parts[1]
    if name not in _GENERATORS:
        raise ConfigError(f"unknown generator {name!r} (have {sorted(_GENERATORS)})")
    params: dict[str, str] = {}
    if len(parts) == 3 and parts[2]:
        for item in parts[2].split(","):
            if "=" not in item:
                raise ConfigError(f"bad generator parameter {item!r}")
            k, v = item.split("=", 1)
            params[k.strip()] = v.strip()
    return _build_generator(name, params, seed)


def _pop(params: dict, key: str, conv, default=None, required=False):
    if key in params:
        raw = params.pop(key)
        try:
            return conv(raw)
        except ValueError as exc:
            raise ConfigError(f"bad value {raw!r} for {key}: {exc}") from exc
    if required:
        raise ConfigError(f"generator parameter {key!r} is required")
    return default


def _build_generator(name: str, params: dict, seed: int | None):
    if name == "interval":
        out = spaces.interval_grid(
            _pop(params, "length", float, 1.0), _pop(params, "n", int, required=True)
        )
    elif name == "cantor":
        out = spaces.cantor_endpoints(_pop(params, "level", int, required=True))
    elif name == "circle":
        out = spaces.circle_uniform(
            _pop(params, "radius", float, 1.0),
            _pop(params, "n", int, required=True),
            _pop(params, "metric", str, "geodesic"),
        )
    elif name == "sierpinski":
        out = spaces.sierpinski_points(_pop(params, "level", int, required=True))
    elif name == "grid2d":
        out = spaces.grid2d(
            _pop(params, "side", float, 1.0), _pop(params, "n", int, required=True)
        )
    elif name == "random":
        s = _pop(params, "seed", int, seed)
        if s is None:
            raise ConfigError("random generator requires a seed")
        out = spaces.random_cloud(
            _pop(params, "n", int, required=True), _pop(params, "dim", int, 2), s
        )
    elif name == "ultratree":
        levels = [float(v) for v in _pop(params, "levels", str, required=True).split("/")]
        out = ultra.ultrametric_tree(
            _pop(params, "depth", int, len(levels)),
            _pop(params, "branching", int, 2),
            levels,
            _pop(params, "seed", int, seed),
        )
    if params:
        raise ConfigError(f"unknown generator parameters {sorted(params)}")
    return out


def _load_space(config: RunConfig):
    """Resolve the input to a space; generator specs pass through as built."""
    if config.input is None:
        raise ConfigError("an --input path or generator spec is required")
    if config.input.startswith("gen:"):
        return _parse_generator_spec(config.input, config.seed)
    path = config.input
    kind = config.input_type
    if kind == "auto":
        kind = "matrix" if path.endswith(".json") else "points"
    if kind == "points":
        return metric_core.load_points_csv(path)
    if kind == "matrix":
        if path.endswith(".json"):
            return metric_core.load_distance_json(path)
        return metric_core.load_distance_csv(path)
    raise ConfigError(f"input_type must be auto, points, or matrix; got {kind!r}")


def _as_plain_space(obj) -> metric_core.FiniteMetricSpace:
    if isinstance(obj, spaces.HomogeneousSpace):
        return obj.base
    if isinstance(obj, ultra.UltrametricSpace):
        return obj.base
    return obj


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def report_render(results) -> str:
    """Render a results structure as an aligned text table (6 digits)."""
    if not results:
        return "no results\n"
    if isinstance(results, dict):
        results = [results]
    rows = []
    for rec in results:
        rows.append({k: (fmt6(v) if isinstance(v, float) else str(v))
                     for k, v in rec.items()})
    cols = list(rows[0].keys())
    widths = {c: max(len(c), *(len(r.get(c, "")) for r in rows)) for c in cols}
    lines = ["  ".join(c.ljust(widths[c]) for c in cols)]
    for r in rows:
        lines.append("  ".join(r.get(c, "").ljust(widths[c]) for c in cols))
    return "\n".join(lines) + "\n"


# --- command runners ---

def _run_magnitude(config: RunConfig) -> int:
    if config.t_grid is None:
        raise ConfigError("magnitude needs a t grid")
    space = _as_plain_space(_load_space(config))
    curve = mag_mod.magnitude_function(
        space, config.t_grid, tolerance=config.tolerance, threads=config.threads
    )
    if config.output:
        if config.format == "csv":
            mag_mod.write_magnitude_csv(curve, config.output)
        else:
            _write_json(config.output, mag_mod.magnitude_curve_json(curve))
    sys.stdout.write(report_render(
        [{"t": float(t), "magnitude": float(v), "residual": float(r)}
         for t, v, r in zip(curve.ts, curve.values, curve.residuals)]
    ))
    failed = [m for m in curve.solver_meta if m["error"] is not None]
    for m in failed:
        sys.stderr.write(f"warning: t={m['t']}: {m['error']}\n")
    return EXIT_COMPUTE if len(failed) == len(curve.solver_meta) else EXIT_OK


def _run_diversity(config: RunConfig) -> int:
    if config.t_grid is None:
        raise ConfigError("diversity needs a t grid")
    space = _as_plain_space(_load_space(config))
    curve = div_mod.diversity_function(
        space, config.t_grid, tolerance=config.tolerance, keep_mu=config.include_mu
    )
    if config.output:
        if config.format == "csv":
            div_mod.write_diversity_csv(curve, config.output)
        else:
            _write_json(
                config.output,
                div_mod.diversity_curve_json(curve, include_mu=config.include_mu),
            )
    sys.stdout.write(report_render(
        [{"t": float(t), "diversity": float(v), "gap": float(g), "iterations": int(i)}
         for t, v, g, i in zip(curve.ts, curve.values, curve.gaps, curve.iterations)]
    ))
    for t, ok in zip(curve.ts, curve.converged):
        if not ok:
            sys.stderr.write(f"warning: t={t}: hit the iteration cap\n")
    return EXIT_OK


def _run_dimension(config: RunConfig) -> int:
    space = _as_plain_space(_load_space(config))
    if config.estimator == "minkowski":
        if config.epsilon_grid is None:
            raise ConfigError("minkowski estimator needs an epsilon grid")
        est = dim_mod.minkowski_dimension(space, config.epsilon_grid)
        exact_flags = [
            dim_mod.covering_number(space, e).exact for e in config.epsilon_grid
        ]
        if config.output:
            if config.format == "csv":
                dim_mod.write_counts_csv(space, config.epsilon_grid, config.output)
            else:
                _write_json(config.output, dim_mod.estimate_json(est, exact_flags))
    elif config.estimator in ("magnitude", "diversity"):
        if config.t_grid is None:
            raise ConfigError(f"{config.estimator} estimator needs a t grid")
        if config.estimator == "magnitude":
            curve = mag_mod.magnitude_function(
                space, config.t_grid, tolerance=min(config.tolerance, 1e-10),
                threads=config.threads,
            )
            est = dim_mod.magnitude_dimension(curve)
        else:
            curve = div_mod.diversity_function(
                space, config.t_grid, tolerance=config.tolerance
            )
            est = dim_mod.diversity_dimension(curve)
        if config.output:
            if config.format == "csv":
                writer = (mag_mod.write_magnitude_csv
                          if config.estimator == "magnitude"
                          else div_mod.write_diversity_csv)
                writer(curve, config.output)
            else:
                _write_json(config.output, dim_mod.estimate_json(est))
    else:
        raise ConfigError(f"unknown estimator {config.estimator!r}")
    sys.stdout.write(report_render([{
        "estimator": config.estimator,
        "slope": est.slope,
        "window_low": est.window[0],
        "window_high": est.window[1],
        "r2": est.r_squared,
    }]))
    return EXIT_OK


def _run_ultra(config: RunConfig) -> int:
    obj = _load_space(config)
    if isinstance(obj, ultra.UltrametricSpace):
        uspace = obj
    else:
        uspace = ultra.validate_ultrametric(_as_plain_space(obj))
    steps = ultra.ultramagnitude_breakpoints(uspace)
    if config.output:
        if config.format == "csv":
            from ._format import fmt17

            with open(config.output, "w", encoding="utf-8") as fh:
                fh.write("t,ultramagnitude\n")
                for t, v in steps:
                    fh.write(f"{fmt17(t)},{v}\n")
        else:
            _write_json(config.output, {
                "n_points": uspace.n,
                "breakpoints": [{"t": t, "ultramagnitude": v} for t, v in steps],
            })
    sys.stdout.write(report_render(
        [{"t": t, "ultramagnitude": v} for t, v in steps]
    ))
    return EXIT_OK


def _run_generate(config: RunConfig) -> int:
    if config.generate_kind is None:
        raise ConfigError("generate needs a generator kind")
    if config.generate_kind == "random" and config.seed is None \
            and "seed" not in config.generate_params:
        raise ConfigError("random generator requires --seed")
    obj = _build_generator(
        config.generate_kind, dict(config.generate_params), config.seed
    )
    space = _as_plain_space(obj)
    if not config.output:
        raise ConfigError("generate needs --output")
    if config.format == "csv":
        if space.ambient is None:
            raise ConfigError(
                "this generator has no point coordinates; use --format json"
            )
        metric_core.write_points_csv(space, config.output)
    else:
        metric_core.write_distance_json(space, config.output)
    sys.stdout.write(report_render([{
        "generator": config.generate_kind, "n": space.n, "output": config.output,
    }]))
    return EXIT_OK


def _verify_checks(config: RunConfig, obj) -> list[dict]:
    """Run the inequality suite; returns one record per check."""
    space = _as_plain_space(obj)
    tol = config.tolerance
    diam = space.diameter
    if config.t_grid is not None:
        t_grid = config.t_grid
    else:
        hi = 2.0 / space.min_spacing if space.n > 1 else 10.0
        lo = 0.5 / diam if diam > 0 else 0.1
        t_grid = np.geomspace(lo, max(hi, lo * 40.0), 14)
    checks: list[dict] = []

    mags, divs = [], []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IllConditionedWarning)
        dcurve = div_mod.diversity_function(space, t_grid, tolerance=tol)
        for t in t_grid:
            mags.append(mag_mod.magnitude(space, float(t)))
    mags = np.asarray(mags)
    divs = dcurve.values

    sandwich_bad = int((divs > mags + 10.0 * tol).sum())
    checks.append({"check": "sandwich diversity<=magnitude",
                   "violations": sandwich_bad, "passed": sandwich_bad == 0})
    mono_bad = int((np.diff(divs) < -10.0 * tol).sum())
    checks.append({"check": "diversity nondecreasing",
                   "violations": mono_bad, "passed": mono_bad == 0})
    diam_bad = int((divs > np.exp(t_grid * diam) * (1.0 + 1e-12)).sum())
    checks.append({"check": "diameter bound",
                   "violations": diam_bad, "passed": diam_bad == 0})
    # informational only: empirical magnitude monotonicity is an open question
    mag_mono = int((np.diff(mags) < -10.0 * tol).sum())
    checks.append({"check": "magnitude nondecreasing (informational)",
                   "violations": mag_mono, "passed": True})

    if space.ambient is not None:
        pairs = [(1.0, float(t)) for t in t_grid if t >= 1.0][:6] or [(1.0, 1.0)]
        rep = dim_mod.scaling_bounds_check(space, pairs)
        checks.append({"check": "scaling bounds",
                       "violations": rep.violations, "passed": rep.passed})
        if config.volume is not None:
            vrep = dim_mod.volume_bound_check(
                space, float(t_grid[-1]), config.volume
            )
            checks.append({"check": "volume bound",
                           "violations": 0 if vrep.passed else 1,
                           "passed": vrep.passed})
    else:
        checks.append({"check": "scaling bounds", "violations": 0,
                       "passed": True, "note": "skipped: no ambient coordinates"})

    if isinstance(obj, spaces.HomogeneousSpace) and obj.transitive:
        errs = [
            abs(spaces.homogeneous_magnitude(obj, float(t)) - m) / m
            for t, m in zip(t_grid, mags)
        ]
        worst = max(errs)
        checks.append({"check": "homogeneous formula vs solve",
                       "violations": int(worst > 1e-8), "passed": worst <= 1e-8})

    if not config.skip_dimension and space.n > 2:
        try:
            mcurve = mag_mod.MagnitudeCurve(
                ts=np.asarray(t_grid), values=mags,
                residuals=np.zeros_like(mags), space_id="verify",
                n_points=space.n,
            )
            est_mag = dim_mod.magnitude_dimension(mcurve)
            est_div = dim_mod.diversity_dimension(dcurve)
            eps_grid = np.geomspace(
                2.0 * space.min_spacing, max(diam / 2.0,
                                             2.0 * space.min_spacing * 40.0), 12
            )
            est_mink = dim_mod.minkowski_dimension(space, eps_grid)
            spread = max(
                abs(est_mag.slope - est_mink.slope),
                abs(est_div.slope - est_mink.slope),
                abs(est_mag.slope - est_div.slope),
            )
            checks.append({
                "check": "dimension agreement",
                "violations": int(spread > config.dim_tolerance),
                "passed": spread <= config.dim_tolerance,
                "note": f"mink={est_mink.slope:.3f} mag={est_mag.slope:.3f} "
                        f"div={est_div.slope:.3f}",
            })
        except (WindowTooNarrow, NoAmbientDimension) as exc:
            checks.append({"check": "dimension agreement", "violations": 0,
                           "passed": True, "note": f"skipped: {exc}"})
    return checks


def _run_verify(config: RunConfig) -> int:
    obj = _load_space(config)
    checks = _verify_checks(config, obj)
    if config.output:
        _write_json(config.output, {"checks": checks})
    sys.stdout.write(report_render(checks))
    failed = [c for c in checks if not c["passed"]]
    for c in failed:
        sys.stderr.write(f"verification failed: {c['check']}\n")
    return EXIT_VERIFY_FAILED if failed else EXIT_OK


_RUNNERS = {
    "magnitude": _run_magnitude,
    "diversity": _run_diversity,
    "dimension": _run_dimension,
    "ultra": _run_ultra,
    "generate": _run_generate,
    "verify": _run_verify,
}


def run(config: RunConfig) -> int:
    """Execute a validated configuration; returns the process exit code."""
    return _RUNNERS[config.command](config)


# --- argument parsing ---

def _add_common(p: argparse.ArgumentParser) -> None:
    # defaults are None sentinels so config-file values lose only to
    # explicitly given flags; RunConfig supplies the real defaults
    p.add_argument("--input", help="input file or generator spec (gen:NAME:k=v,...)")
    p.add_argument("--input-type", dest="input_type", default=None,
                   choices=["auto", "points", "matrix"])
    p.add_argument("--t-grid", dest="t_grid",
                   help="comma list '1,2,5' or range 'min:max:count[:log|lin]'")
    p.add_argument("--epsilon-grid", dest="epsilon_grid",
                   help="same syntax as --t-grid")
    p.add_argument("--tolerance", type=float, default=None)
    p.add_argument("--threads", type=int, default=None,
                   help=f"default from ${mag_mod.THREADS_ENV_VAR} or 1")
    p.add_argument("--output", help="output file path")
    p.add_argument("--format", default=None, choices=["csv", "json"])
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", help="JSON config file; flags override its values")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="metricmag",
        description="Magnitude, diversity, dimension, and ultramagnitude "
                    "of finite metric spaces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("magnitude", help="magnitude function over a t grid")
    _add_common(p)

    p = sub.add_parser("diversity", help="maximum diversity over a t grid")
    _add_common(p)
    p.add_argument("--include-mu", dest="include_mu", action="store_true",
                   default=None, help="include the optimal distribution in JSON output")

    p = sub.add_parser("dimension", help="dimension estimates")
    _add_common(p)
    p.add_argument("--estimator", default=None,
                   choices=["minkowski", "magnitude", "diversity"])

    p = sub.add_parser("ultra", help="ultramagnitude step function")
    _add_common(p)

    p = sub.add_parser("generate", help="emit a canonical test space")
    _add_common(p)
    p.add_argument("kind", choices=sorted(_GENERATORS))
    p.add_argument("params", nargs="*", metavar="key=value")

    p = sub.add_parser("verify", help="run the inequality suite")
    _add_common(p)
    p.add_argument("--volume", type=float, default=None,
                   help="declared continuum volume for the volume bound")
    p.add_argument("--dim-tolerance", dest="dim_tolerance", type=float, default=None)
    p.add_argument("--skip-dimension", dest="skip_dimension", action="store_true",
                   default=None)
    return parser


def _normalize_grid_value(val):
    """Grids from a config file may be lists, range dicts, or grid strings."""
    if val is None:
        return None
    if isinstance(val, str):
        return _parse_grid(val)
    if isinstance(val, dict):
        try:
            spacing = val.get("spacing", "log")
            return _parse_grid(f"{val['min']}:{val['max']}:{val['count']}:{spacing}")
        except KeyError as exc:
            raise ConfigError(f"grid range object missing key {exc}") from exc
    return np.asarray(val, dtype=float)


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg: dict = {}
    if getattr(args, "config", None):
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                loaded = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"bad config file: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(loaded) - _CONFIG_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        if "command" in loaded and loaded["command"] != args.command:
            raise ConfigError(
                f"config file command {loaded['command']!r} != {args.command!r}"
            )
        cfg.update({k: v for k, v in loaded.items() if k != "command"})
    for key in ("t_grid", "epsilon_grid"):
        if key in cfg:
            cfg[key] = _normalize_grid_value(cfg[key])

    # explicitly given flags (non-None) override config-file values
    for key in ("input", "input_type", "tolerance", "threads", "output", "format",
                "seed", "estimator", "include_mu", "volume", "dim_tolerance",
                "skip_dimension"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    for key in ("t_grid", "epsilon_grid"):
        raw = getattr(args, key, None)
        if raw is not None:
            cfg[key] = _parse_grid(raw)

    if args.command == "generate":
        params = {}
        for item in getattr(args, "params", []) or []:
            if "=" not in item:
                raise ConfigError(f"bad generator parameter {item!r}")
            k, v = item.split("=", 1)
            params[k.strip()] = v.strip()
        cfg["generate_kind"] = args.kind
        cfg["generate_params"] = params

    cfg = {k: v for k, v in cfg.items() if v is not None}
    try:
        return RunConfig(command=args.command, **cfg)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed the message
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        config = _config_from_args(args)
        return run(config)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    except OSError as exc:
        sys.stderr.write(f"i/o error: {exc}\n")
        return EXIT_IO
    except MetricMagError as exc:
        sys.stderr.write(f"compute error: {type(exc).__name__}: {exc}\n")
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
