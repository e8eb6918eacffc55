"""Command-line entry point.

    memrc device-demo | fsdd | mackey-glass | sweep-d2d | sweep-regions [--config FILE] [--out DIR] ...
    memrc plot TABLE.csv --x COL --y COL[,COL] --out FILE.svg

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import config as cfgmod
from . import experiments
from .csvio import read_csv
from .errors import ConfigurationError, DataError, MemrcError
from .plotting import emit_svg, table_plot

log = logging.getLogger("memrc")

TASK_OF = {"device-demo": "device-demo", "fsdd": "fsdd", "mackey-glass": "mackey-glass",
           "sweep-d2d": "fsdd", "sweep-regions": "fsdd"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="memrc", description="Memristive reservoir computing simulator")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in TASK_OF:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="key = value config file (defaults otherwise)")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", type=Path)
        p.add_argument("--keep-fraction", type=float)
        p.add_argument("--ideal-weights", action="store_true")
        p.add_argument("--epochs", type=int)
        p.add_argument("--data", help="FSDD WAV directory or MFCC .npz")
        p.add_argument("--n-seeds", type=int)
        p.add_argument("--max-samples", type=int)
    p = sub.add_parser("plot")
    p.add_argument("table", type=Path)
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True, help="comma-separated column names")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--scatter", action="store_true")
    p.add_argument("--title", default="")
    return parser


def resolve_config(args) -> cfgmod.ExperimentConfig:
    cfg = cfgmod.load(args.config) if args.config else cfgmod.ExperimentConfig()
    changes = {"task": TASK_OF[args.command]}
    for key in ("seed", "out", "keep_fraction", "epochs", "data", "n_seeds", "max_samples"):
        value = getattr(args, key)
        if value is not None:
            changes[key] = str(value) if isinstance(value, Path) else value
    if args.ideal_weights:
        changes["ideal_weights"] = True
    try:
        return replace(cfg, run=replace(cfg.run, **changes))
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from None


def _run(args) -> int:
    if args.command == "plot":
        if not args.table.is_file():
            raise DataError(f"table {str(args.table)!r} not found")
        header, rows = read_csv(args.table)
        spec = table_plot(header, rows, args.x, [c.strip() for c in args.y.split(",")],
                          "scatter" if args.scatter else "line", args.title)
        emit_svg(args.out, spec)
        print(args.out)
        return 0

    cfg = resolve_config(args)
    out = Path(cfg.run.out)
    if args.command == "device-demo":
        res = experiments.device_demo(cfg, out)
        print(f"{len(res['dm_states'])} DM states, {len(res['pulse_response'])} NVM pulses -> {out}")
    elif args.command == "fsdd":
        s = experiments.run_fsdd(cfg, out)
        print(f"train_acc={s.final['train_acc']:.4f} val_acc={s.final['val_acc']:.4f} -> {out}")
    elif args.command == "mackey-glass":
        s = experiments.run_mg(cfg, out)
        print(f"nrmse={s.nrmse:.4f} -> {out}")
    elif args.command == "sweep-d2d":
        res = experiments.sweep_d2d(cfg, out)
        for row in res["summary"]:
            print(f"sigma={row['sigma']:.2f} val={row['val_mean']:.4f}+-{row['val_std']:.4f}")
    elif args.command == "sweep-regions":
        res = experiments.sweep_regions(cfg, out)
        for row in res["summary"]:
            print(f"{row['region']} val={row['val_mean']:.4f}+-{row['val_std']:.4f}")
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    args = _build_parser().parse_args(argv)
    try:
        return _run(args)
    except MemrcError as exc:
        log.error("%s", exc)
        return exc.exit_code
    except FloatingPointError as exc:
        log.error("numerical failure: %s", exc)
        return 3


if __name__ == "__main__":
    sys.exit(main())
