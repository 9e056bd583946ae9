"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data or domain error, 3 eigensolver
failure. Errors are also written to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import os
import sys
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .backtest import BacktestConfig, calibrate, naive_baseline, run_backtest
from .errors import ConvergenceError, DomainError, MMLadderError
from .model import PARAM_KEYS, Variant, build_matrix, validate_params
from .ode import value_ladder
from .quotes import (
    StaticsGrid,
    asymptotic_quotes,
    comparative_statics_report,
    gaussian_approximation,
    gaussian_spread,
    statics_disagreements,
    taylor_quotes_near_T,
    write_asymptotic_table,
    write_quote_surface,
    write_statics_table,
)
from .simulator import (
    OptimalPolicy,
    TaylorPolicy,
    asymptotic_policy,
    constant_policy,
    gaussian_policy,
    simulate,
    write_paths_csv,
)
from .tape import ingest_trades

CONFIG_ENV = "MMLADDER_CONFIG"
COMMANDS = ("quotes", "asymptotic", "approx", "statics", "simulate", "backtest", "calibrate")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _add_params(p: argparse.ArgumentParser, with_variant: bool = True) -> None:
    p.add_argument("--config", help=f"JSON parameter file (default: ${CONFIG_ENV})")
    for key in PARAM_KEYS:
        p.add_argument(f"--{key}", type=int if key == "Q" else float, default=None)
    if with_variant:
        p.add_argument("--variant", choices=[v.value for v in Variant], default="base")
    p.add_argument("--out", help="output file (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mmladder", description="Inventory-constrained market making toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("quotes", help="optimal quote surface over a time grid")
    _add_params(p)
    p.add_argument("--t-grid", default=None, help="start:stop:step in seconds, stop included (default 0:T:T/100)")

    p = sub.add_parser("asymptotic", help="ground state and long-horizon quotes")
    _add_params(p)

    p = sub.add_parser("approx", help="closed-form and near-terminal approximations")
    _add_params(p)
    p.add_argument("--t", type=float, default=0.0, help="time for the near-terminal expansion")

    p = sub.add_parser("statics", help="comparative statics sign table")
    _add_params(p, with_variant=False)
    p.add_argument("--rel-step", type=float, default=1e-4)
    p.add_argument("--q", type=int, nargs="*", default=None)

    p = sub.add_parser("simulate", help="Monte Carlo P&L of a quoting policy")
    _add_params(p)
    p.add_argument("--policy", choices=["optimal", "asymptotic", "gaussian", "taylor", "constant"], default="optimal")
    p.add_argument("--delta", type=float, default=None, help="offset for --policy constant (default: half the approximate spread)")
    p.add_argument("--n-paths", type=int, default=1000)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--q0", type=int, default=0)
    p.add_argument("--s0", type=float, default=100.0)
    p.add_argument("--paths-csv", default=None, help="dump the first --max-paths trajectories here")
    p.add_argument("--max-paths", type=int, default=10)

    p = sub.add_parser("backtest", help="replay a policy on a trade tape")
    _add_params(p)
    p.add_argument("--trades", required=True)
    p.add_argument("--policy", choices=["optimal", "asymptotic", "gaussian", "naive"], default="asymptotic")
    p.add_argument("--tick-size", type=float, default=1.0)
    p.add_argument("--requote-dt", type=float, default=5.0)
    p.add_argument("--ats", type=float, default=1.0)
    p.add_argument("--reference", choices=["mid", "last", "ewma"], default="mid")
    p.add_argument("--half-life", type=float, default=30.0)
    p.add_argument("--no-rounding", action="store_true")
    p.add_argument("--baseline", action="store_true", help="also run the naive baseline")
    p.add_argument("--format", choices=["json", "csv"], default="json")

    p = sub.add_parser("calibrate", help="estimate sigma, A and k from a trade tape")
    p.add_argument("--trades", required=True)
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--tick-size", type=float, default=1.0)
    p.add_argument("--min-trades", type=int, default=500)
    p.add_argument("--out", default=None)

    p = sub.add_parser("rerun", help="re-execute the command recorded in a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", default=None)
    return parser


def resolve_params(args: argparse.Namespace) -> dict[str, Any]:
    """Flags override the config file, which overrides defaults."""
    raw: dict[str, Any] = {}
    path = args.config or os.environ.get(CONFIG_ENV)
    if path:
        with open(path) as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise DomainError("config", "parameter file must hold a JSON object")
        raw.update(loaded)
    for key in PARAM_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            raw[key] = value
    raw.setdefault("mu", 0.0)
    raw.setdefault("xi", 0.0)
    return validate_params(raw).to_dict()


def _parse_grid(text: str | None, T: float) -> np.ndarray:
    if text is None:
        return np.linspace(0.0, T, 101)
    try:
        start, stop, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise UsageError(f"--t-grid must be start:stop:step, got {text!r}") from None
    if step <= 0 or stop < start:
        raise UsageError("--t-grid needs step > 0 and stop >= start")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    grid = start + step * np.arange(n)
    if not np.isclose(grid[-1], stop, rtol=0, atol=1e-9 * max(1.0, abs(stop))):
        grid = np.append(grid, stop)
    grid[-1] = min(grid[-1], stop)
    return grid


def _fmt(x):
    return "" if x is None else repr(float(x))


def _run(command: str, opts: dict[str, Any], out) -> dict[str, Any]:
    """Execute one command with fully resolved options; returns extra manifest fields."""
    params = validate_params(opts["params"]) if "params" in opts else None
    extra: dict[str, Any] = {}
    if command == "quotes":
        ladder = value_ladder(build_matrix(params, opts["variant"]))
        write_quote_surface(ladder, _parse_grid(opts["t_grid"], params.T), out)
    elif command == "asymptotic":
        sol = asymptotic_quotes(build_matrix(params, opts["variant"]))
        write_asymptotic_table(sol, out)
        extra["lambda0"] = sol.lambda0
    elif command == "approx":
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["q", "delta_b_gauss", "delta_a_gauss", "psi_gauss", "t", "delta_b_taylor", "delta_a_taylor", "psi_taylor"])
        psi = gaussian_spread(params, opts["variant"])
        for q in range(-params.Q, params.Q + 1):
            g = gaussian_approximation(params, opts["variant"], q)
            tq = taylor_quotes_near_T(params, opts["t"], q)
            w.writerow([q, _fmt(g.delta_b), _fmt(g.delta_a), _fmt(psi if g.spread is not None else None),
                        repr(float(opts["t"])), _fmt(tq.delta_b), _fmt(tq.delta_a), _fmt(tq.spread)])
    elif command == "statics":
        rows = comparative_statics_report(params, StaticsGrid(rel_step=opts["rel_step"], q_values=opts["q"]))
        write_statics_table(rows, out)
        bad = statics_disagreements(rows)
        extra["disagreements"] = len(bad)
        if bad:
            print(json.dumps({"warning": "sign claims contradicted", "count": len(bad),
                              "rows": [[r.parameter, r.q, r.quantity] for r in bad]}), file=sys.stderr)
    elif command == "simulate":
        policy = _policy(opts, params)
        result = simulate(params, policy, opts["n_paths"], opts["dt"], opts["seed"], variant=opts["variant"],
                          q0=opts["q0"], s0=opts["s0"], keep_paths=opts["max_paths"] if opts["paths_csv"] else 0)
        out.write(result.summary.to_json() + "\n")
        if opts["paths_csv"]:
            with open(opts["paths_csv"], "w", newline="") as fh:
                write_paths_csv(result.paths, fh, opts["max_paths"])
            extra["paths_csv"] = opts["paths_csv"]
    elif command == "backtest":
        records = ingest_trades(opts["trades"])
        cfg = BacktestConfig(params, tick_size=opts["tick_size"], requote_dt=opts["requote_dt"], ats=opts["ats"],
                             reference_price_rule=opts["reference"], ewma_half_life=opts["half_life"],
                             tick_rounding=not opts["no_rounding"])
        if opts["policy"] == "naive":
            report = naive_baseline(records, cfg)
        else:
            report = run_backtest(records, cfg, _policy(opts, params))
        if opts["format"] == "csv":
            report.write_csv(out)
        else:
            payload = report.to_dict()
            if opts["baseline"]:
                payload["baseline"] = naive_baseline(records, cfg).to_dict()
            json.dump(payload, out, indent=1)
            out.write("\n")
    elif command == "calibrate":
        records = ingest_trades(opts["trades"])
        cal = calibrate(records, opts["window"], tick_size=opts["tick_size"], min_trades=opts["min_trades"])
        json.dump({"sigma": cal.sigma, "A": cal.A, "k": cal.k, "n_trades": cal.n_trades,
                   "duration": cal.duration}, out, indent=2, sort_keys=True)
        out.write("\n")
    else:  # pragma: no cover
        raise UsageError(f"unknown command {command!r}")
    return extra


def _policy(opts, params):
    name = opts["policy"]
    variant = opts.get("variant", "base")
    if name == "optimal":
        return OptimalPolicy(value_ladder(build_matrix(params, variant)))
    if name == "asymptotic":
        return asymptotic_policy(asymptotic_quotes(build_matrix(params, variant)))
    if name == "gaussian":
        return gaussian_policy(params, variant)
    if name == "taylor":
        return TaylorPolicy(params)
    delta = opts.get("delta")
    if delta is None:
        delta = gaussian_spread(params, variant) / 2
    return constant_policy(delta, delta, params.Q)


_OPTION_KEYS = {
    "quotes": ("variant", "t_grid"),
    "asymptotic": ("variant",),
    "approx": ("variant", "t"),
    "statics": ("rel_step", "q"),
    "simulate": ("variant", "policy", "delta", "n_paths", "dt", "seed", "q0", "s0", "paths_csv", "max_paths"),
    "backtest": ("variant", "trades", "policy", "tick_size", "requote_dt", "ats", "reference", "half_life",
                 "no_rounding", "baseline", "format"),
    "calibrate": ("trades", "window", "tick_size", "min_trades"),
}


def _resolve(args: argparse.Namespace) -> dict[str, Any]:
    opts = {key: getattr(args, key) for key in _OPTION_KEYS[args.command]}
    if args.command != "calibrate":
        opts["params"] = resolve_params(args)
    return opts


def _execute(command: str, opts: dict[str, Any], out_path: str | None) -> None:
    if out_path is None:
        _run(command, opts, sys.stdout)
        return
    buf = io.StringIO()
    extra = _run(command, opts, buf)
    Path(out_path).write_text(buf.getvalue())
    manifest = {
        "command": command,
        "config": opts,
        "seed": opts.get("seed"),
        "version": __version__,
        "outputs": [out_path] + ([extra["paths_csv"]] if "paths_csv" in extra else []),
        "extra": {k: v for k, v in extra.items() if k != "paths_csv"},
    }
    Path(out_path + ".manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _error(kind: str, exc: BaseException, code: int) -> int:
    payload = {"error": kind, "type": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, DomainError):
        payload["field"] = exc.field
    print(json.dumps(payload), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:  # --help / --version
            return int(exc.code or 0)
        if args.command == "rerun":
            manifest = json.loads(Path(args.manifest).read_text())
            command, config = manifest.get("command"), manifest.get("config")
            if command not in COMMANDS or not isinstance(config, dict):
                raise DomainError("manifest", "not a run manifest")
            missing = set(_OPTION_KEYS[command]) - set(config)
            if missing or (command != "calibrate" and "params" not in config):
                raise DomainError("manifest", f"config lacks {sorted(missing) or ['params']}")
            _execute(manifest["command"], manifest["config"], args.out)
        else:
            _execute(args.command, _resolve(args), args.out)
    except UsageError as exc:
        return _error("usage", exc, 1)
    except ConvergenceError as exc:
        return _error("convergence", exc, 3)
    except (MMLadderError, OSError, json.JSONDecodeError) as exc:
        return _error("data", exc, 2)
    return 0


if __name__ == "__main__":  # pragma: no cover
    with contextlib.suppress(BrokenPipeError):
        sys.exit(main())
