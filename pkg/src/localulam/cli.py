"""Command-line entry point.

Exit status is 0 on success, 1 for configuration errors, 2 for data and
I/O errors and 3 for numerical failures.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .errors import ConfigError, DataError, LocalUlamError, NumericalError

__all__ = ["main", "build_parser", "EXIT_OK", "EXIT_CONFIG", "EXIT_DATA", "EXIT_NUMERICAL"]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3

log = logging.getLogger("localulam")


def _overrides(args):
    from .pipeline import with_overrides, load_config

    cfg = load_config(args.config)
    kw = {"output_dir": args.out, "t_F": args.t_final, "workers": args.workers,
          "backend": args.backend}
    if args.dataset is not None:
        if cfg.source != "dataset":
            raise ConfigError("--dataset only applies to dataset configurations")
        kw["dataset"] = args.dataset
    return with_overrides(cfg, **kw)


def _cmd_analyze(args) -> int:
    from .pipeline import dry_run, run_analysis

    cfg = _overrides(args)
    if args.dry_run:
        print(json.dumps(dry_run(cfg), indent=2))
        return EXIT_OK
    res = run_analysis(cfg, render=not args.no_render)
    print(f"p={res.p} lifespans={len(res.lifespans)} output={cfg.output_dir}")
    return EXIT_OK


def _cmd_select_p(args) -> int:
    from .pipeline import run_select_p

    cfg = _overrides(args)
    doc = run_select_p(cfg)
    print(json.dumps(doc, indent=2))
    return EXIT_OK


def _cmd_gen_dwp(args) -> int:
    from .pipeline import generate_dwp_dataset

    if not args.step > 0 or args.t1 < args.t0:
        raise ConfigError("need step > 0 and t1 >= t0")
    count = int(np.floor((args.t1 - args.t0) / args.step + 1e-9)) + 1
    times = args.t0 + args.step * np.arange(count)
    generate_dwp_dataset(args.nx, args.ny, times, args.out)
    print(f"wrote {count} slices of {args.nx}x{args.ny} to {args.out}")
    return EXIT_OK


def _cmd_render(args) -> int:
    from .pipeline import load_modes
    from .render import render_vector

    grid, lookup = load_modes(args.run_dir)
    vec, bins = lookup(args.vector, args.time, args.mode)
    try:
        render_vector(vec, bins, grid, args.out)
    except OSError as exc:
        raise DataError(f"cannot write {args.out}: {exc}") from exc
    return EXIT_OK


def _run_opts(p):
    p.add_argument("config", help="JSON configuration file")
    p.add_argument("--out", help="output directory (overrides output_dir)")
    p.add_argument("--t-final", type=float, help="override t_F")
    p.add_argument("--dataset", help="override the dataset path")
    p.add_argument("--workers", type=int, help="advection threads")
    p.add_argument("--backend", choices=("python", "cython"), help="kernel backend")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="localulam",
                                 description="Coherent-structure lifespans from patch-local Ulam matrices.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="run the full analysis")
    _run_opts(p)
    p.add_argument("--dry-run", action="store_true", help="validate inputs without integrating")
    p.add_argument("--no-render", action="store_true", help="skip PGM images")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("select-p", help="score the candidate quasi-norm exponents")
    _run_opts(p)
    p.set_defaults(func=_cmd_select_p)

    p = sub.add_parser("gen-dwp", help="write a gridded double-well dataset")
    p.add_argument("--nx", type=int, required=True)
    p.add_argument("--ny", type=int, required=True)
    p.add_argument("--t0", type=float, required=True)
    p.add_argument("--t1", type=float, required=True)
    p.add_argument("--step", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen_dwp)

    p = sub.add_parser("render", help="render a stored singular vector as PGM")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--mode", type=int, required=True, help="one-based tracked mode")
    p.add_argument("--time", type=float, required=True, help="window start time")
    p.add_argument("--vector", choices=("u", "v"), default="v")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_render)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except LocalUlamError as exc:
        print(f"localulam: error: {exc}", file=sys.stderr)
        return _exit_code(exc)


def _exit_code(exc: LocalUlamError) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, DataError):
        return EXIT_DATA
    if isinstance(exc, NumericalError):
        return EXIT_NUMERICAL
    return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
