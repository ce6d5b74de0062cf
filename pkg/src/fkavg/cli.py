"""Command line interface.

Subcommands: simulate, functional, mvt, limit, converge, check-assumptions.
A JSON config file may supply any long-flag value; explicit flags override
file values, and unknown file keys are rejected.  Exit codes: 0 success,
2 configuration error, 3 numerical failure, 4 assumption violation.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import AssumptionViolationError, ConfigError, NumericalError
from .fields import DEFAULT_SCAN_DOMAIN, check_assumptions, field_from_spec
from .harness import (RunConfig, convergence_csv, mvt_csv, path_csv, run_converge,
                      run_functional, run_limit, run_mvt, run_simulate, series_csv)
from .sde import model_from_spec

_CONFIG_KEYS = {
    "model", "q", "K", "T", "dt", "paths", "seed", "x0", "out",
    "allow_violations", "workers", "T_ladder", "windows",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fkavg",
        description="Simulate exponential path functionals of ergodic diffusions "
                    "and verify their time averages.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file with default option values")
        p.add_argument("--model", help="model spec, e.g. ou(theta=1,mu=0,sigma=1.4142136)")
        p.add_argument("--q", help="source field spec, e.g. const(1)")
        p.add_argument("--K", help="decay field spec, e.g. offset_sin(a=2,b=1)")
        p.add_argument("--T", type=float, help="time horizon")
        p.add_argument("--dt", type=float, help="grid step (T/dt must be integral)")
        p.add_argument("--paths", type=int, help="ensemble size (default 1)")
        p.add_argument("--seed", type=int, help="master seed (default 0)")
        p.add_argument("--x0", help="initial state: a real number or 'stationary'")
        p.add_argument("--out", help="output CSV path (default: stdout)")
        p.add_argument("--allow-violations", dest="allow_violations",
                       action="store_const", const=True,
                       help="run even if the assumption check reports violations")
        p.add_argument("--workers", type=int, help="parallel workers (default 1)")

    for name, descr in [
        ("simulate", "simulate sample paths and dump t,x CSV"),
        ("functional", "simulate and dump the functional series t,A,Y,ebar"),
        ("mvt", "verify the mean-value identity on random windows"),
        ("limit", "compare the ensemble time average to the quadrature target"),
        ("converge", "run a ladder of horizons against the quadrature target"),
    ]:
        p = sub.add_parser(name, help=descr)
        common(p)
        if name == "mvt":
            p.add_argument("--windows", type=int, help="windows per path (default 20)")
        if name == "converge":
            p.add_argument("--T-ladder", dest="T_ladder",
                           help="comma-separated increasing horizons, e.g. 50,100,200")

    p = sub.add_parser("check-assumptions", help="scan field bounds on a domain")
    p.add_argument("--q", required=True)
    p.add_argument("--K", required=True)
    p.add_argument("--scan-domain", default=f"{DEFAULT_SCAN_DOMAIN[0]:g},{DEFAULT_SCAN_DOMAIN[1]:g}",
                   help="scan interval lo,hi (default -12,12)")
    p.add_argument("--grid-points", type=int, default=2001)
    return parser


def _merge_config(args: argparse.Namespace) -> dict:
    """File values fill in anything the command line left unset."""
    merged: dict = {}
    if getattr(args, "config", None):
        text = Path(args.config).read_text()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {args.config}: {exc}") from None
        unknown = set(data) - _CONFIG_KEYS
        if unknown:
            raise ConfigError(f"unknown config key {sorted(unknown)[0]!r} in {args.config}")
        merged.update(data)
    for key in _CONFIG_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    return merged


def _require(merged: dict, *keys: str) -> None:
    for key in keys:
        if merged.get(key) is None:
            raise ConfigError(f"missing required option --{key}")


def _parse_x0(raw) -> float | str | None:
    if raw is None:
        return None
    if isinstance(raw, (int, float)):
        return float(raw)
    if raw == "stationary":
        return "stationary"
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"--x0 must be a real number or 'stationary', got {raw!r}") from None


def _parse_ladder(raw) -> tuple[float, ...]:
    if isinstance(raw, (list, tuple)):
        return tuple(float(v) for v in raw)
    try:
        return tuple(float(tok) for tok in str(raw).split(","))
    except ValueError:
        raise ConfigError(f"bad T ladder {raw!r}; expected comma-separated reals") from None


def _run_config(args: argparse.Namespace, need_ladder: bool = False) -> RunConfig:
    merged = _merge_config(args)
    _require(merged, "model", "q", "K", "dt")
    if need_ladder:
        _require(merged, "T_ladder")
        ladder = _parse_ladder(merged["T_ladder"])
        horizon: dict = {"t_ladder": ladder}
    else:
        _require(merged, "T")
        horizon = {"T": float(merged["T"])}
    return RunConfig(
        model=model_from_spec(merged["model"]),
        q=field_from_spec(merged["q"]),
        K=field_from_spec(merged["K"]),
        dt=float(merged["dt"]),
        n_paths=int(merged.get("paths", 1)),
        master_seed=int(merged.get("seed", 0)),
        x0=_parse_x0(merged.get("x0")),
        out=merged.get("out"),
        allow_violations=bool(merged.get("allow_violations", False)),
        workers=int(merged.get("workers", 1)),
        windows=int(merged.get("windows", 20)),
        **horizon,
    ).validate()


def parse_config(argv: list[str]) -> tuple[str, RunConfig | argparse.Namespace]:
    """Parse a full command line into (command, config)."""
    args = _build_parser().parse_args(argv)
    if args.command == "check-assumptions":
        return args.command, args
    return args.command, _run_config(args, need_ladder=(args.command == "converge"))


def _open_out(config: RunConfig, suffix: str = ""):
    if config.out is None:
        return sys.stdout, False
    out = Path(config.out)
    if suffix:
        out = out.with_name(out.stem + suffix + out.suffix)
    return open(out, "w", newline=""), True


def _emit_per_path(config: RunConfig, items, writer) -> None:
    multi = len(items) > 1
    if multi and config.out is None:
        raise ConfigError("dumping more than one path needs --out (one file per path)")
    for i, item in enumerate(items):
        stream, close = _open_out(config, f"_p{i}" if multi else "")
        try:
            writer(stream, item)
        finally:
            if close:
                stream.close()


def _cmd_check_assumptions(args: argparse.Namespace) -> int:
    try:
        lo, hi = (float(tok) for tok in args.scan_domain.split(","))
    except ValueError:
        raise ConfigError(f"bad --scan-domain {args.scan_domain!r}; expected lo,hi") from None
    report = check_assumptions(field_from_spec(args.q), field_from_spec(args.K),
                               domain=(lo, hi), grid_points=args.grid_points)
    print(f"domain: [{report.domain[0]:g}, {report.domain[1]:g}]  "
          f"grid_points: {report.grid_points}")
    print(f"inf_K: {report.inf_K:.6g}  (positivity floor {report.k_floor:g})")
    print(f"sup_abs_q: {report.sup_abs_q:.6g}")
    print(f"sup_abs_ratio_deriv: {report.sup_abs_ratio_deriv:.6g}")
    if report.violations:
        for cond, x, val in report.violations:
            print(f"violation: {cond} at x={x:.6g} (value {val:.6g})")
        return 4
    print("no violations")
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        parser = _build_parser()
        args = parser.parse_args(argv)
        if args.command == "check-assumptions":
            return _cmd_check_assumptions(args)
        config = _run_config(args, need_ladder=(args.command == "converge"))

        if args.command == "simulate":
            _emit_per_path(config, run_simulate(config), lambda s, p: path_csv(s, p))
        elif args.command == "functional":
            _emit_per_path(config, run_functional(config), lambda s, fs: series_csv(s, fs))
        elif args.command == "mvt":
            records, summary = run_mvt(config)
            stream, close = _open_out(config)
            try:
                mvt_csv(stream, records, config.dt)
            finally:
                if close:
                    stream.close()
            print(
                f"windows: {summary['n_records']}  skipped: {summary['n_skipped']}  "
                f"max|residual|: {summary['max_abs_residual']:.3e}  "
                f"p95|residual|: {summary['p95_abs_residual']:.3e}  "
                f"crossing rate: {summary['crossing_rate']:.3f}",
                file=sys.stderr,
            )
        elif args.command == "limit":
            row = run_limit(config)
            stream, close = _open_out(config)
            try:
                convergence_csv(stream, [row])
            finally:
                if close:
                    stream.close()
        elif args.command == "converge":
            rows = run_converge(config)
            stream, close = _open_out(config)
            try:
                convergence_csv(stream, rows)
            finally:
                if close:
                    stream.close()
        return 0
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except AssumptionViolationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print("rerun with --allow-violations to proceed anyway", file=sys.stderr)
        return 4
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
