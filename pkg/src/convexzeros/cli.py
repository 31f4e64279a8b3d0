"""Command line harness: one subcommand per experiment.

Exit status is 0 when every threshold check passes, 2 when a check fails
and 1 on configuration or runtime errors.
"""

import argparse
import csv
import json
import logging
import sys
import time

from .errors import ConvexZerosError
from .experiments import EXPERIMENTS, ExperimentConfig, format_cell, run_experiment

log = logging.getLogger("convexzeros")

EXIT_OK, EXIT_ERROR, EXIT_THRESHOLD = 0, 1, 2

HELP = {
    "oracle-check": "cross-check the transform evaluation routes",
    "model-error": "decay of the stationary-phase model error",
    "shells": "zero shells along rays and inside the balls B",
    "xset-entropy": "entropy exponents of X(eta, B) over the eta grid",
    "cube-spectrum": "cube lattice spectrum certificates and entropy",
    "residual-stats": "phase residual percentiles on X samples",
}


def build_parser():
    parser = argparse.ArgumentParser(prog="convexzeros", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--config", help="flat key = value configuration file")
        p.add_argument("--body", help="body spec, e.g. 'ball', 'kind=ellipsoid axes=2,1'")
        p.add_argument("--dim", type=int)
        p.add_argument("--R", dest="R", help="comma separated radii, e.g. 16,32,64,128")
        p.add_argument("--eta", help="semicolon separated vectors, e.g. '1,0;0,1'")
        p.add_argument("--seed", type=int)
        p.add_argument("--c-delta", dest="c_delta", type=float, help="thickening constant (tol = c_delta / R)")
        p.add_argument("--tol-doubling", dest="tol_doubling", action="store_const", const="true",
                       help="also run with 2 c_delta and check the exponent shift")
        p.add_argument("--out-dir", dest="out_dir")
        p.add_argument("--format", choices=("csv", "json"), help="what to print on stdout")
    return parser


def config_from_args(args):
    cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    return cfg.merged(
        experiment=args.command, body=args.body, dim=args.dim, R=args.R, eta=args.eta, seed=args.seed,
        c_delta=args.c_delta, tol_doubling=args.tol_doubling, out_dir=args.out_dir, format=args.format,
    )


def _print_rows(rows, stream):
    if not rows:
        return
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(list(rows[0]))
    for row in rows:
        w.writerow([format_cell(v) for v in row.values()])


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        start = time.perf_counter()
        report = run_experiment(cfg)
        csv_path, json_path = report.write(cfg.out_dir)
    except (ConvexZerosError, ValueError, OSError) as exc:
        print(f"error ({args.command}): {exc}", file=sys.stderr)
        return EXIT_ERROR
    log.info("%s finished in %.1f s; wrote %s and %s", args.command, time.perf_counter() - start, csv_path, json_path)
    if cfg.format == "json":
        json.dump(report.payload(), sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    else:
        _print_rows(report.rows, sys.stdout)
    for c in report.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.value} {c.relation} {c.threshold}", file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_THRESHOLD


if __name__ == "__main__":
    sys.exit(main())
