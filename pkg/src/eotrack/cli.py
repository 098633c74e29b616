"""Command-line entry point ``eotrack``.

Exit codes: 0 success, 2 invalid configuration or arguments, 1 runtime error.
"""
import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .consensus import generate_network, write_edge_list
from .errors import ConfigError, EOTrackError
from .experiment import PLOT_KINDS, emit_plot_data, load_config, read_results, run_experiment

log = logging.getLogger("eotrack")


def _overrides(args):
    return {
        "experiment.seed": args.seed,
        "experiment.runs": args.runs,
        "experiment.variants": args.variants,
        "experiment.out": args.out,
        "experiment.jobs": getattr(args, "jobs", None),
        "scenario.id": args.scenario,
    }


def _add_common(p):
    p.add_argument("config", nargs="?", help="INI configuration file")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--scenario", choices=("S1", "S2"), help="scenario id")
    p.add_argument("--variants", help="comma-separated variant names")
    p.add_argument("--runs", type=int, help="Monte-Carlo runs")
    p.add_argument("--out", help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(prog="eotrack", description="Distributed extended-object tracking experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a Monte-Carlo experiment")
    _add_common(p)
    p.add_argument("--jobs", type=int, help="worker processes")

    p = sub.add_parser("validate", help="check a configuration and print the resolved settings")
    _add_common(p)

    p = sub.add_parser("plot-data", help="write plot tables from a results directory")
    p.add_argument("results", help="directory written by 'run'")
    p.add_argument("--kind", choices=PLOT_KINDS + ("all",), default="all")
    p.add_argument("--out", help="output directory (default: <results>/plots)")

    p = sub.add_parser("gen-network", help="write a random connected sensor network as an edge list")
    p.add_argument("output", help="edge-list path")
    p.add_argument("--nodes", type=int, default=20)
    p.add_argument("--side", type=float, default=2.5)
    p.add_argument("--radius", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _cmd_run(args):
    cfg = load_config(args.config, _overrides(args))
    results = run_experiment(cfg)
    from .experiment import mean_rgwe

    for name, value in mean_rgwe(results.records).items():
        print(f"{name:18s} mean RGWE {value:12.4f}")
    print(f"results written to {cfg.out}")


def _cmd_validate(args):
    from .experiment import config_to_ini

    cfg = load_config(args.config, _overrides(args))
    sys.stdout.write(config_to_ini(cfg))


def _cmd_plot(args):
    results = read_results(args.results)
    out = Path(args.out) if args.out else Path(args.results) / "plots"
    kinds = PLOT_KINDS if args.kind == "all" else (args.kind,)
    for kind in kinds:
        try:
            print(emit_plot_data(results, kind, out))
        except EOTrackError as exc:
            if args.kind != "all":
                raise
            log.info("skipping %s: %s", kind, exc)


def _cmd_network(args):
    rng = np.random.default_rng(np.random.SeedSequence([args.seed, 0x6E6574]))
    net = generate_network(args.nodes, args.side, args.radius, rng)
    write_edge_list(net, args.output)
    print(f"{net.n_nodes} nodes, {len(net.edges)} edges -> {args.output}")


COMMANDS = {"run": _cmd_run, "validate": _cmd_validate, "plot-data": _cmd_plot, "gen-network": _cmd_network}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (EOTrackError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
