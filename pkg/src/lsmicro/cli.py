"""Command line entry point: ``lsmicro run | presets | validate``.

Exit codes: 0 converged, 1 usage or configuration error, 2 iteration cap
reached, 3 design collapse.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .artifacts import emit_fields, emit_history, emit_summary, read_config
from .driver import PRESETS, RunConfig, run
from .grid import ParameterError
from .levelset import DesignCollapseError

EXIT_OK, EXIT_USAGE, EXIT_MAX_ITER, EXIT_COLLAPSE = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ParameterError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lsmicro", description="Level set microstructure optimisation")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    r = sub.add_parser("run", help="run an optimisation")
    r.add_argument("--config", type=Path)
    r.add_argument("--preset", choices=sorted(PRESETS))
    r.add_argument("--method", choices=("projection", "slp"))
    r.add_argument("--out", type=Path)
    r.add_argument("--n", type=int)
    r.add_argument("--snapshot-every", type=int, default=None)
    r.add_argument("-v", "--verbose", action="store_true")
    sub.add_parser("presets", help="list built-in problems")
    v = sub.add_parser("validate", help="check a config file without running")
    v.add_argument("--config", type=Path, required=True)
    return p


def _run(args) -> int:
    output: dict = {}
    if args.config is not None:
        config, output = read_config(args.config)
        if args.preset and args.preset != config.preset:
            config = RunConfig.for_preset(args.preset, **{k: getattr(config, k) for k in
                                                          ("n", "method", "holes", "hole_radius", "solver")})
    else:
        config = RunConfig.for_preset(args.preset or "bulk2d")
    if args.method:
        config = replace(config, method=args.method)
    if args.n:
        config = replace(config, n=args.n)
    config.validate()
    out = Path(args.out or output.get("out") or "lsmicro_out")
    snap = args.snapshot_every if args.snapshot_every is not None else int(output.get("snapshot_every", 0))
    out.mkdir(parents=True, exist_ok=True)

    def on_step(record, state):
        if snap and record.iteration % snap == 0:
            emit_fields(state, out, f"{record.iteration:04d}")

    try:
        result = run(config, callback=on_step)
    except DesignCollapseError as exc:
        print(f"design collapse: {exc}", file=sys.stderr)
        return EXIT_COLLAPSE
    if result.history:
        emit_history(result.history, out / "history.csv")
    emit_fields(result.state, out, "final")
    emit_summary(result.summary(), out / "summary.json")
    print(f"{result.status} after {result.iterations} iterations, objective {result.objective:.6g}")
    return EXIT_OK if result.status == "converged" else EXIT_MAX_ITER


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        if args.command == "presets":
            for name in PRESETS:
                print(name)
            return EXIT_OK
        if args.command == "validate":
            config, _ = read_config(args.config)
            print(f"ok: preset {config.preset}, method {config.method}, n={config.n}")
            return EXIT_OK
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
        return _run(args)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
