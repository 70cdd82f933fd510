"""Command line entry point: ``safectl run|sweep|bench|validate``.

Exit codes: 0 success, 2 configuration or usage error, 1 runtime failure
(an episode raised or its state became non-finite).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from importlib import resources
from pathlib import Path

from ..errors import ConfigError
from .config import apply_overrides, load_config
from .experiment import AXES, benchmark_throughput, grid_from_text, robustness_sweep, run_experiment, sweep_table
from .export import _clean, _write, export_results, results_root

log = logging.getLogger("safectl")

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}\n{schema_hint()}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def schema_hint() -> str:
    path = resources.files("safectl.harness").joinpath("schema.json")
    return f"configuration schema: {path}"


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="safectl", description="Safe-control benchmark harness")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("config", type=Path)
        sp.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="dotted config path and YAML value, e.g. controller.horizon=10")

    r = sub.add_parser("run", help="run all seeds/episodes and export traces")
    common(r)
    r.add_argument("--seed", type=int, action="append", help="seed(s) replacing the configured list")
    r.add_argument("--workers", type=int)
    r.add_argument("--out", type=Path, help="output root (default: $SAFECTL_RESULTS_DIR or output.dir)")

    s = sub.add_parser("sweep", help="robustness sweep over one axis")
    common(s)
    s.add_argument("--axis", required=True, choices=AXES)
    s.add_argument("--grid", required=True, help="comma list or lo:hi:n")
    s.add_argument("--seed", type=int, action="append")
    s.add_argument("--workers", type=int)
    s.add_argument("--out", type=Path)

    b = sub.add_parser("bench", help="simulation throughput and realtime factor")
    common(b)
    b.add_argument("--duration", type=float, default=10.0, help="simulated seconds")
    b.add_argument("--no-log", action="store_true", help="skip trace recording")
    b.add_argument("--with-controller", action="store_true", help="run the configured controller")

    v = sub.add_parser("validate", help="check a configuration against the schema")
    common(v)
    return p


def _load(args):
    cfg = load_config(args.config)
    overrides = list(args.override)
    if getattr(args, "seed", None):
        overrides.append((["seeds"], list(args.seed)))
    return apply_overrides(cfg, overrides) if overrides else cfg


def _cmd_validate(args) -> int:
    cfg = _load(args)
    print(f"ok: {args.config} ({cfg.system_name}, controller={cfg.controller['name']}, filter={cfg.filter['name']})")
    return EXIT_OK


def _cmd_run(args) -> int:
    cfg = _load(args)
    out = results_root(cfg, args.out) / cfg.name
    traces, reports = run_experiment(cfg, args.workers)
    export_results(traces, reports, out, cfg)
    failed = [t for t in traces if t.error or t.failed]
    for tr, rep in zip(traces, reports):
        status = "error" if tr.error else "diverged" if tr.failed else "done" if rep.completed else "terminated"
        print(f"seed={tr.seed} ep={tr.episode} steps={rep.steps} rmse={rep.rmse:.6g} "
              f"violations={rep.violation_fraction:.4g} {status}")
    print(f"results: {out}")
    for tr in failed:
        print(f"episode seed={tr.seed} ep={tr.episode} failed: {tr.error or 'non-finite state'}", file=sys.stderr)
    return EXIT_RUNTIME if failed else EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = _load(args)
    grid = grid_from_text(args.grid)
    points = robustness_sweep(cfg, args.axis, grid, workers=args.workers)
    table = sweep_table(points, args.axis)
    out = results_root(cfg, args.out) / cfg.name
    _write(out / f"sweep_{args.axis}.json", json.dumps(_clean(table), indent=2, sort_keys=True) + "\n")
    for row in table["points"]:
        print(f"{args.axis}={row['value']:.6g} rmse={row['rmse_mean']:.6g}±{row['rmse_std']:.3g} "
              f"completed={row['completed']}/{row['episodes']}")
    if table["spearman_rmse"] is not None:
        print(f"spearman(value, rmse) = {table['spearman_rmse']:.4f}")
    print(f"results: {out}")
    return EXIT_OK


def _cmd_bench(args) -> int:
    cfg = _load(args)
    res = benchmark_throughput(cfg, args.duration, logging=not args.no_log, use_controller=args.with_controller)
    print(json.dumps(res.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "sweep": _cmd_sweep, "bench": _cmd_bench, "validate": _cmd_validate}


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_CONFIG
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}\n{schema_hint()}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # pragma: no cover - reported as runtime failure
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
