"""Command-line entry point for convergence studies.

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .errors import ConfigError, LayerPotError
from .harness import RunConfig, run
from .reference import CATALOG


def _rho(text):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad rho list {text!r}") from None


def build_parser():
    p = argparse.ArgumentParser(
        prog="layerpot",
        description="Run an h-convergence study of near-singular layer potentials on a catalog case.")
    p.add_argument("--config", help="JSON file with RunConfig fields; command-line flags override it")
    p.add_argument("--case", choices=sorted(CATALOG))
    p.add_argument("--h", help="comma-separated grid spacings, e.g. 1/32,1/48,1/64")
    p.add_argument("--rho", type=_rho, help="comma-separated delta multipliers, e.g. 2,3,4")
    p.add_argument("--order", type=int, choices=(5, 7))
    p.add_argument("--q", type=float, help="fractional delta exponent (1 = proportional)")
    p.add_argument("--h0", type=float, help="anchor spacing for fractional delta")
    p.add_argument("--far-cutoff", type=float,
                   help="plain sums for |b| >= this multiple of the largest delta")
    sel = p.add_mutually_exclusive_group()
    sel.add_argument("--band", action="store_true", help="targets with |b| <= h (default)")
    sel.add_argument("--shell", type=int, metavar="M", help="targets with M h < |b| <= (M+1) h")
    p.add_argument("--octant", action=argparse.BooleanOptionalAction, default=None,
                   help="restrict targets to the first octant")
    p.add_argument("--side", choices=("inside", "outside", "both"))
    p.add_argument("--baseline", action="store_true", default=None,
                   help="also report the unregularised sum")
    p.add_argument("--out", help="output directory")
    p.add_argument("--threads", type=int)
    p.add_argument("--dump-targets", action="store_true", default=None,
                   help="write per-target errors")
    p.add_argument("--dump-nodes", action="store_true", default=None,
                   help="write the quadrature nodes for each h")
    p.add_argument("--no-plot", dest="plot", action="store_false", default=None,
                   help="do not write the plotting script")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def make_config(args):
    base = RunConfig.from_file(args.config) if args.config else RunConfig()
    data = vars(base).copy()
    for key in ("case", "h", "rho", "order", "q", "h0", "far_cutoff", "shell", "octant", "side", "baseline",
                "out", "threads", "dump_targets", "dump_nodes", "plot"):
        val = getattr(args, key)
        if val is not None:
            data[key] = val
    if args.band:
        data["shell"] = None
    return RunConfig.from_mapping(data)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = make_config(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    try:
        report = run(config)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except LayerPotError as exc:
        print(f"numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 2
    print(report.summary())
    print(f"wrote {report.csv_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
