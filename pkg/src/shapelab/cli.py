"""Command line entry point.

Exit codes: 0 on success, 1 for configuration errors (bad keys, flags or
values), 2 for numerical failures.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from shapelab.experiments import (
    ConfigError,
    NumericalFailure,
    make_config,
    parse_settings,
    rate_tables_from_sweep,
    read_config_file,
    run_ex,
    run_greedy,
    run_preasymptotic,
    run_spectrum,
    run_sweep_cli,
)
from shapelab.rates import BoundaryData, predict_optimal_eps
from shapelab.kernels import TAGS
from shapelab.spectral import default_window, eigen_decay_exponent
from shapelab.targets import get_target

log = logging.getLogger("shapelab")

# flag -> config key
FLAGS = {
    "--eps-grid": "eps_grid",
    "--n-ladder": "n_ladder",
    "--kernels": "kernels",
    "--m-eval": "m_eval",
    "--mercer-grid": "mercer_grid",
    "--gamma": "gamma",
    "--greedy-m": "greedy_m",
    "--checkpoints": "checkpoints",
    "--out": "output_dir",
    "--threads": "threads",
    "--target": "target",
    "--eps": "eps",
    "--k-top": "k_top",
    "--dim": "dim",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError("arguments", message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="flat key = value settings file")
    common.add_argument("-v", "--verbose", action="store_true")
    for flag, key in FLAGS.items():
        common.add_argument(flag, dest=key, default=None, metavar=key.upper())

    parser = _Parser(prog="shapelab", description="Shape-parameter experiments for Sobolev kernels.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("sweep", parents=[common], help="error sweep over eps and n for one target")
    sub.add_parser("spectrum", parents=[common], help="discrete Mercer eigenpairs of a kernel")
    sub.add_parser("greedy", parents=[common], help="P-greedy points on the unit square")
    rates = sub.add_parser("rates", parents=[common], help="rate tables from a sweep CSV")
    rates.add_argument("--input", type=Path, help="sweep CSV; runs the sweep when omitted")
    rep = sub.add_parser("reproduce", parents=[common], help="reproduce a published experiment")
    rep.add_argument("which", choices=["ex1", "ex2", "preasymptotic"])
    return parser


def _config(args, experiment: str):
    file_settings = read_config_file(args.config) if args.config else {}
    flags = {key: getattr(args, key) for key in FLAGS.values() if getattr(args, key) is not None}
    return make_config(experiment, file_settings, parse_settings(flags))


def _run(args) -> list:
    cmd = args.command
    if cmd == "reproduce":
        config = _config(args, args.which)
        if args.which == "preasymptotic":
            run_preasymptotic(config)
            return sorted(Path(config.output_dir).glob("preasymptotic_*.csv"))
        return list(run_ex(config)["paths"].values())
    if cmd == "sweep":
        return run_sweep_cli(_config(args, "sweep"))["paths"]
    if cmd == "spectrum":
        config = _config(args, "spectrum")
        res = run_spectrum(config)
        M = res["mercer"]
        lo, hi = default_window(len(M.grid))
        if M.size >= hi:
            print(f"eigenvalue decay exponent on [{lo}, {hi}]: {eigen_decay_exponent(M, lo, hi):.4f}")
        return res["paths"]
    if cmd == "greedy":
        return run_greedy(_config(args, "greedy"))["paths"]
    if cmd == "rates":
        config = _config(args, "rates")
        if args.input is not None:
            if not args.input.exists():
                raise ConfigError("input", f"{args.input} does not exist")
            tables = rate_tables_from_sweep(args.input)
        else:
            tables = {r.kernel: r.table for r in run_sweep_cli(config)["results"]}
        out = Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        target = get_target(config.target)
        bd = BoundaryData.from_function(target.func, target.deriv)
        paths = []
        for tag, table in tables.items():
            p = out / f"rates_{tag}.csv"
            table.to_csv(p)
            paths.append(p)
            if tag in TAGS and tag != "matern":
                pred = predict_optimal_eps(bd, tag, table.eps_grid)
                print(f"{tag}: predicted optimal eps for {target.name}: "
                      + (", ".join(f"{e:.6g}" for e in pred) or "none"))
        return paths
    raise ConfigError("command", f"unknown command {cmd!r}")


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        for p in _run(args):
            print(p)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except NumericalFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
