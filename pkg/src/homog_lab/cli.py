"""Command-line entry point: ``homog-lab <command> --config exp.json``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import dumps, harness, solver
from .errors import ConfigurationError, HomogLabError

COMMANDS = ("cell", "solve", "approx", "doubling", "nodal", "sweep")
EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="homog-lab", description="Periodic homogenization experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="experiment JSON file")
        p.add_argument("--out", help="output directory (default: output_dir from the config)")
        p.add_argument("--eps", type=float, action="append",
                       help="run only this epsilon (repeatable); overrides eps_list")
        p.add_argument("--quiet", action="store_true", help="only log errors")
        p.add_argument("--dump-fields", action="store_true", help="write torus/box grid dumps")
        p.add_argument("--jobs", type=int, default=None,
                       help=f"parallel epsilon tasks (default ${harness.JOBS_ENV} or 1)")
    return parser


def _load(args) -> harness.ExperimentConfig:
    config = harness.ExperimentConfig.load(args.config)
    if args.eps:
        eps = sorted(set(args.eps), reverse=True)
        config = harness.ExperimentConfig.from_dict(config.to_dict() | {"eps_list": eps})
    if args.command in ("approx", "doubling", "nodal"):
        config = replace(config, analyses=[args.command])
    return config


def _cmd_cell(config, out: Path, args) -> int:
    cres = harness.run_cell(config)
    harness.write_cell_json(out / "cell.json", cres)
    dumps.dump_torus(out / "chi1.torus", cres.chi.chi1)
    dumps.dump_torus(out / "chi2.torus", cres.chi.chi2)
    return EXIT_OK


def _cmd_solve(config, out: Path, args) -> int:
    field = config.coefficient_field()
    info = {}
    for eps in config.eps_list:
        u = solver.solve_dirichlet(field, eps, config.grid_for(eps), config.boundary_function(),
                                   tol=config.solve_tol)
        path = out / f"u_eps_{eps:.6g}.box"
        dumps.dump_box(path, u)
        info[dumps.fmt(eps)] = {"file": path.name, "m": u.grid.m, "h": u.grid.h, "residual": u.residual}
    (out / "solve.json").write_text(json.dumps(info, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def _cmd_sweep(config, out: Path, args) -> int:
    rep = harness.run_sweep(config, out, jobs=args.jobs, dump_fields=args.dump_fields)
    for f in rep.failures:
        logging.error("eps=%s failed: %s", dumps.fmt(f["eps"]), f["error"])
    return EXIT_OK if rep.ok else EXIT_FAILURE


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = _load(args)
    except ConfigurationError as exc:
        print(f"homog-lab {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(args.out or config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    handler = {"cell": _cmd_cell, "solve": _cmd_solve}.get(args.command, _cmd_sweep)
    try:
        return handler(config, out, args)
    except HomogLabError as exc:
        logging.error("%s: %s", type(exc).__name__, exc)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
