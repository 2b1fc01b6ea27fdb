"""Command-line driver: ``ptwell <subcommand> [options]``.

Every subcommand writes one table (CSV by default, JSON with --format json)
to --output or stdout. Well parameters and sweep settings can also come
from a key=value file passed with --config; explicit flags take precedence.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .boundstates import NotABoundStateError, bound_states, make_bound_state
from .core import InvalidParameterError, PTWellError, WellParams
from .scattering import scattering_coefficients
from .spectrum import trace_spectrum
from .transport import bound_flux, transport_profile

# builtin defaults
DEFAULTS = {
    "v0": 9.0,
    "vi": 15.0,
    "b": 1.0,
    "lambda": 0.0,
    "lambda_start": 0.0,
    "lambda_stop": 8.0,
    "steps": 161,
    "k_max": 20.0,
    "k_start": 0.01,
    "k_stop": 10.0,
    "k_index": None,
    "k_value": None,
    "x_min": None,
    "x_max": None,
    "points": 401,
    "level": "full",
    "format": "csv",
}

SPECTRUM_COLUMNS = ["lambda", "branch_id", "k_re", "k_im", "e_re", "e_im", "j_d_at_0"]
EP_COLUMNS = ["lambda_star", "k_star", "kappa_bound", "residual", "branch_a", "branch_b"]
SCATTER_COLUMNS = ["k", "t", "r_plus", "r_minus", "abs_r_prod", "unitarity_residual", "sign_used", "singular_flag"]
TRANSPORT_COLUMNS = ["x", "rho_d", "j_d", "q_d", "rho_e1", "rho_e2_smooth", "j_e", "q_e", "delta_point_mass", "c1_sq"]
BOUNDSTATE_COLUMNS = ["index", "k", "e", "c1_sq", "alpha_r", "alpha_i", "j_d_at_0"]


class CliError(Exception):
    def __init__(self, message: str, code: int = 2):
        super().__init__(message)
        self.code = code


# -- configuration -------------------------------------------------------------


def read_config(path: str) -> dict:
    """Parse a key=value file; '#' starts a comment, keys use - or _."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lower().replace("-", "_")
        if key not in DEFAULTS:
            raise CliError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def _resolve(args: argparse.Namespace, config: dict, key: str, kind=float):
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config:
        try:
            return kind(config[key])
        except ValueError as exc:
            raise CliError(f"config value for {key} is not a valid {kind.__name__}: {config[key]!r}") from exc
    return DEFAULTS[key]


def well_params(args, config) -> WellParams:
    try:
        return WellParams(
            v0=_resolve(args, config, "v0"),
            vI=_resolve(args, config, "vi"),
            b=_resolve(args, config, "b"),
            Lambda=_resolve(args, config, "lambda"),
        )
    except InvalidParameterError as exc:
        raise CliError(str(exc)) from exc


def default_jobs() -> int:
    raw = os.environ.get("PTWELL_JOBS", "1")
    try:
        jobs = int(raw)
    except ValueError:
        raise CliError(f"PTWELL_JOBS must be an integer, got {raw!r}")
    return max(1, jobs)


def _sweep(start: float, stop: float, steps: int) -> np.ndarray:
    if steps < 2:
        raise CliError(f"steps must be >= 2, got {steps}")
    if not start < stop:
        raise CliError(f"range start must be < stop, got {start} >= {stop}")
    return np.linspace(start, stop, steps)


# -- output ----------------------------------------------------------------------


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return "nan"
    return f"{float(v):.17g}"


def render(columns: list, rows: list, fmt: str) -> str:
    if fmt == "json":
        data = {c: [None if isinstance(r[i], float) and math.isnan(r[i]) else r[i] for r in rows] for i, c in enumerate(columns)}
        return json.dumps({"columns": columns, "data": data}, default=_json_default) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([format_value(v) for v in r])
    return buf.getvalue()


def _json_default(v):
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    if isinstance(v, np.bool_):
        return bool(v)
    raise TypeError(type(v))


def emit(text: str, path) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", code=3) from exc


def _ep_path(args) -> str | None:
    if args.ep_output:
        return args.ep_output
    if args.output in (None, "-"):
        return None
    out = Path(args.output)
    return str(out.with_name(out.stem + "_ep" + out.suffix))


# -- subcommands -----------------------------------------------------------------


def _flux_at_zero(p: WellParams, lam: float, k: complex) -> float:
    if abs(k.imag) > 0:
        return float("nan")
    try:
        s = make_bound_state(p.with_lambda(lam), k.real, check=False)
    except PTWellError:
        return float("nan")
    return float(bound_flux(s, 0.0))


def _spectrum_data(args, config):
    p = well_params(args, config)
    lams = _sweep(
        _resolve(args, config, "lambda_start"), _resolve(args, config, "lambda_stop"), int(_resolve(args, config, "steps", int))
    )
    step = float(lams[1] - lams[0])
    branches, eps, failures = trace_spectrum(
        p, (lams[0], lams[-1]), step, _resolve(args, config, "k_max"), jobs=args.jobs
    )
    for f in failures:
        print(f"warning: {f}", file=sys.stderr)
    return p, branches, eps


def ep_rows(eps) -> list:
    return [[e.Lambda_star, e.k_star, e.kappa_bound, e.residual, e.branch_pair[0], e.branch_pair[1]] for e in eps]


def cmd_spectrum(args, config) -> int:
    p, branches, eps = _spectrum_data(args, config)
    rows = []
    for br in branches:
        for lam, k in br.samples:
            E = k * k
            rows.append([lam, br.branch_id, k.real, k.imag, E.real, E.imag, _flux_at_zero(p, lam, k)])
    rows.sort(key=lambda r: (r[1], r[0]))
    emit(render(SPECTRUM_COLUMNS, rows, args.format), args.output)
    ep_path = _ep_path(args)
    if ep_path is not None:
        emit(render(EP_COLUMNS, ep_rows(eps), args.format), ep_path)
    return 0


def cmd_ep(args, config) -> int:
    _, _, eps = _spectrum_data(args, config)
    emit(render(EP_COLUMNS, ep_rows(eps), args.format), args.output)
    return 0


def _scatter_row(task):
    p, k = task
    d = scattering_coefficients(p, k)
    return [k, d.T, d.R_plus, d.R_minus, abs(d.r_plus * d.r_minus), d.unitarity_residual, d.sign_used, d.singular]


def cmd_scatter(args, config) -> int:
    p = well_params(args, config)
    ks = _sweep(_resolve(args, config, "k_start"), _resolve(args, config, "k_stop"), int(_resolve(args, config, "steps", int)))
    if ks[0] <= 0:
        raise CliError("k range must be positive")
    tasks = [(p, float(k)) for k in ks]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_scatter_row, tasks, chunksize=max(1, len(tasks) // (4 * args.jobs))))
    else:
        rows = [_scatter_row(t) for t in tasks]
    rows.sort(key=lambda r: r[0])
    emit(render(SCATTER_COLUMNS, rows, args.format), args.output)
    return 0


def _select_state(p: WellParams, args, config):
    k_value = _resolve(args, config, "k_value")
    k_index = _resolve(args, config, "k_index", int)
    k_max = _resolve(args, config, "k_max")
    if k_value is not None:
        try:
            return make_bound_state(p, k_value)
        except NotABoundStateError as exc:
            raise CliError(f"no bound state at k={k_value}: {exc}", code=3) from exc
    states = bound_states(p, k_max)
    index = 0 if k_index is None else int(k_index)
    if not 0 <= index < len(states):
        raise CliError(f"no bound state with index {index}; found {len(states)} below k_max={k_max}", code=3)
    return states[index]


def cmd_transport(args, config) -> int:
    p = well_params(args, config)
    s = _select_state(p, args, config)
    tail = 3 * p.b + 5 / s.alpha.alpha_r
    x_min = _resolve(args, config, "x_min")
    x_max = _resolve(args, config, "x_max")
    x = _sweep(-tail if x_min is None else x_min, tail if x_max is None else x_max, int(_resolve(args, config, "points", int)))
    prof = transport_profile(s, x)
    rows = [
        [xi, r, j, q, e1, e2, je, qe, prof.delta_point_mass, s.c1_sq]
        for xi, r, j, q, e1, e2, je, qe in zip(
            prof.grid, prof.rho_d, prof.J_d, prof.Q_d, prof.rho_E1, prof.rho_E2, prof.J_E, prof.Q_E
        )
    ]
    emit(render(TRANSPORT_COLUMNS, rows, args.format), args.output)
    return 0


def cmd_boundstates(args, config) -> int:
    p = well_params(args, config)
    rows = [
        [i, s.k, s.E, s.c1_sq, s.alpha.alpha_r, s.alpha.alpha_i, float(bound_flux(s, 0.0))]
        for i, s in enumerate(bound_states(p, _resolve(args, config, "k_max")))
    ]
    emit(render(BOUNDSTATE_COLUMNS, rows, args.format), args.output)
    return 0


def cmd_validate(args, config) -> int:
    from .validation import run_validation

    # parameters are validated even though the suite runs on fixed sets
    well_params(args, config)
    level = _resolve(args, config, "level", str)
    if level not in ("quick", "full"):
        raise CliError(f"level must be quick or full, got {level!r}")
    lines = []

    def report(line):
        lines.append(line)
        print(line, flush=True)

    results = run_validation(level, report)
    failed = [r for r in results if not r.skipped and not r.passed]
    summary = f"{len(results) - len(failed)}/{len(results)} criteria passed"
    print(summary)
    if args.output not in (None, "-"):
        emit("\n".join(lines + [summary]) + "\n", args.output)
    return 1 if failed else 0


# -- parser ------------------------------------------------------------------------


def _add_params(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("well parameters (reduced units)")
    g.add_argument("--v0", type=float, help="real well depth (default 9)")
    g.add_argument("--vi", type=float, help="gain/loss strength vI >= 0 (default 15)")
    g.add_argument("--b", type=float, help="half-width b > 0 (default 1)")
    g.add_argument("--lambda", dest="lambda", type=float, help="delta strength (default 0)")


def _add_output(p: argparse.ArgumentParser) -> None:
    p.add_argument("-o", "--output", help="output file (default stdout)")
    p.add_argument("--format", choices=["csv", "json"], help="table format (default csv)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ptwell", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="key=value file; explicit flags override its entries")
    parser.add_argument("--jobs", type=int, default=None, help="worker processes (default $PTWELL_JOBS or 1)")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("spectrum", help="trace k(Lambda) for every branch; EPs go to a second file")
    _add_params(sp)
    sp.add_argument("--lambda-start", type=float)
    sp.add_argument("--lambda-stop", type=float)
    sp.add_argument("--steps", type=int, help="number of Lambda checkpoints (>= 2)")
    sp.add_argument("--k-max", type=float, help="largest real k seeded at the start value")
    sp.add_argument("--ep-output", help="EP table path (default: <output>_ep.<ext>)")
    _add_output(sp)
    sp.set_defaults(func=cmd_spectrum)

    ep = sub.add_parser("ep", help="locate exceptional points over a Lambda range")
    _add_params(ep)
    ep.add_argument("--lambda-start", type=float)
    ep.add_argument("--lambda-stop", type=float)
    ep.add_argument("--steps", type=int)
    ep.add_argument("--k-max", type=float)
    _add_output(ep)
    ep.set_defaults(func=cmd_ep)

    sc = sub.add_parser("scatter", help="pseudo-transmission and reflections over a k grid")
    _add_params(sc)
    sc.add_argument("--k-start", type=float)
    sc.add_argument("--k-stop", type=float)
    sc.add_argument("--steps", type=int)
    _add_output(sc)
    sc.set_defaults(func=cmd_scatter)

    tr = sub.add_parser("transport", help="density, flux and energy profiles of one bound state")
    _add_params(tr)
    which = tr.add_mutually_exclusive_group()
    which.add_argument("--k-index", type=int, help="index of the bound state, lowest first (default 0)")
    which.add_argument("--k-value", type=float, help="k of the bound state")
    tr.add_argument("--k-max", type=float)
    tr.add_argument("--x-min", type=float)
    tr.add_argument("--x-max", type=float)
    tr.add_argument("--points", type=int)
    _add_output(tr)
    tr.set_defaults(func=cmd_transport)

    bs = sub.add_parser("boundstates", help="real roots, normalization and flux of each bound state")
    _add_params(bs)
    bs.add_argument("--k-max", type=float)
    _add_output(bs)
    bs.set_defaults(func=cmd_boundstates)

    va = sub.add_parser("validate", help="run the acceptance suite and report residuals")
    _add_params(va)
    va.add_argument("--level", choices=["quick", "full"])
    va.add_argument("-o", "--output", help="also write the report here")
    va.set_defaults(func=cmd_validate, format=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = read_config(args.config) if args.config else {}
        if args.jobs is None:
            args.jobs = default_jobs()
        if args.jobs < 1:
            raise CliError("--jobs must be >= 1")
        args.format = _resolve(args, config, "format", str)
        if args.format not in ("csv", "json"):
            raise CliError(f"format must be csv or json, got {args.format!r}")
        return args.func(args, config)
    except CliError as exc:
        if exc.code == 2:
            parser.error(str(exc))
        print(f"ptwell: error: {exc}", file=sys.stderr)
        return exc.code
    except PTWellError as exc:
        print(f"ptwell: error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
