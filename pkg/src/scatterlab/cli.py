"""Command-line front end.

    scatterlab run <config.toml> [--out DIR] [--level N]
    scatterlab converge <config.toml> --levels K [--out DIR]
    scatterlab validate <config.toml>

Exit codes: 0 all gates pass, 1 tolerance failure, 2 config error,
3 solver error.  Worker threads come from SCATTERLAB_THREADS.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from .config import RunConfig, load, validate_config
from .errors import ConfigError, ScatterlabError
from .report import (
    convergence_study,
    emit_artifacts,
    report_exit_code,
    run_tasks,
)

EXIT_PASS = 0
EXIT_TOLERANCE = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scatterlab",
        description="Scattering-energy experiments on convex surface domains.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute the configured task list")
    p_run.add_argument("config", type=Path)
    p_run.add_argument("--out", type=Path, default=None,
                       help="artifact directory (overrides output.dir)")
    p_run.add_argument("--level", type=int, default=None,
                       help="override resolutions with the standard level "
                            "coupling (boundary nodes = N)")

    p_conv = sub.add_parser("converge", help="doubling-resolution study")
    p_conv.add_argument("config", type=Path)
    p_conv.add_argument("--levels", type=int, default=3,
                        help="number of doubling levels starting at 128")
    p_conv.add_argument("--out", type=Path, default=None)

    p_val = sub.add_parser("validate", help="parse and validate a config")
    p_val.add_argument("config", type=Path)
    return parser


def _apply_level(cfg: RunConfig, level: int) -> None:
    cfg.resolutions["n_boundary"] = level
    cfg.resolutions["dense"] = 16 * level
    cfg.resolutions["n_theta"] = max(16, level // 2)
    validate_config(cfg)


def _load_config(path: Path) -> RunConfig:
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return load(path)


def _cmd_run(args) -> int:
    cfg = _load_config(args.config)
    if args.level is not None:
        _apply_level(cfg, args.level)
    if args.out is not None:
        cfg.output["dir"] = str(args.out)
    report = run_tasks(cfg)
    for entry in report.results:
        if entry["error"] is not None:
            print(f"{entry['task']:10s} ERROR  {entry['error']}")
        else:
            verdict = "pass" if entry["passed"] else "FAIL"
            print(f"{entry['task']:10s} {verdict}")
    written = emit_artifacts(report, cfg.output["dir"])
    for path in written:
        print(f"wrote {path}")
    return report_exit_code(report)


def _cmd_converge(args) -> int:
    cfg = _load_config(args.config)
    if args.levels < 2:
        raise ConfigError(f"--levels must be at least 2 (got {args.levels})")
    levels = tuple(128 * 2 ** k for k in range(args.levels))
    study = convergence_study(cfg, levels)
    print("level  santalo_residual  identity_residual")
    for row in study["rows"]:
        print(f"{row['level']:5d}  {row['santalo_residual']:16.6e}  "
              f"{row['identity_residual']:17.6e}")
    print(f"order: santalo {study['order_santalo']:.2f}  "
          f"identity {study['order_identity']:.2f}  "
          f"monotone {study['monotone']}")
    outdir = args.out if args.out is not None else Path(cfg.output["dir"])
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    table = outdir / "convergence.csv"
    with open(table, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["level", "length", "energy",
                         "santalo_residual", "identity_residual"])
        for row in study["rows"]:
            writer.writerow([row["level"], repr(row["length"]),
                             repr(row["energy"]),
                             repr(row["santalo_residual"]),
                             repr(row["identity_residual"])])
    print(f"wrote {table}")
    return EXIT_PASS if study["passed"] else EXIT_TOLERANCE


def _cmd_validate(args) -> int:
    cfg = _load_config(args.config)
    print(f"config OK: tasks={','.join(cfg.tasks)} "
          f"metric={cfg.metric['name']} domain={cfg.domain['name']}")
    return EXIT_PASS


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {"run": _cmd_run, "converge": _cmd_converge,
                "validate": _cmd_validate}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ScatterlabError as exc:
        print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
