"""current-lab command line: run a verification suite on a network file.

Exit status: 0 every check passed, 1 at least one check failed, 2 bad
input (malformed network, invalid arguments, I/O trouble).
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import CapacityError, ValidationError
from .harness import SUITES, ExperimentConfig, run_experiment


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="current-lab",
        description="Verification suites for the Ising / current / FK / "
                    "field / loop-soup couplings on a finite weighted graph.",
    )
    parser.add_argument("suite", choices=SUITES, help="verification suite to run")
    parser.add_argument("--network", required=True, help="network JSON file")
    parser.add_argument("--seed", type=int, default=0, help="master seed (u64)")
    parser.add_argument("--replicas", type=int, default=100_000,
                        help="replica count for statistical checks")
    parser.add_argument("--order", type=str, default=None,
                        help="comma-separated vertex order for the jump process")
    parser.add_argument("--alpha", type=float, default=0.5, help="loop-soup intensity")
    parser.add_argument("--cutoff", type=int, default=24, help="loop length cutoff")
    parser.add_argument("--out", type=str, default="out", help="output directory")
    parser.add_argument("--tv-exact", type=float, default=1e-12,
                        help="tolerance for exact identity checks")
    parser.add_argument("--tv-recon", type=float, default=1e-10,
                        help="tolerance for the trace reconstruction check")
    parser.add_argument("--sigma-level", type=float, default=3.0,
                        help="nominal sigma band for statistical checks")
    parser.add_argument("--burn-in", type=int, default=None, help="chain burn-in sweeps")
    parser.add_argument("--thinning", type=int, default=None, help="chain thinning sweeps")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker pool size (default: CURRENT_LAB_THREADS or 4)")
    parser.add_argument("--no-figures", action="store_true",
                        help="skip figure rendering, emit CSV/JSON only")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    order = None
    if args.order:
        try:
            order = tuple(int(tok) for tok in args.order.split(","))
        except ValueError:
            print(f"error: --order must be comma-separated integers, got {args.order!r}",
                  file=sys.stderr)
            return 2
    config = ExperimentConfig(
        network=args.network,
        suite=args.suite,
        replicas=args.replicas,
        seed=args.seed,
        tv_exact=args.tv_exact,
        tv_recon=args.tv_recon,
        sigma_level=args.sigma_level,
        alpha=args.alpha,
        cutoff=args.cutoff,
        order=order,
        burn_in=args.burn_in,
        thinning=args.thinning,
        out_dir=args.out,
        figures=not args.no_figures,
        threads=args.threads,
    )
    try:
        report = run_experiment(config)
    except (ValidationError, CapacityError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for check in report.checks:
        mark = "PASS" if check.passed else "FAIL"
        print(f"[{mark}] {check.name}: statistic={check.statistic:.6g} "
              f"bound={check.bound:.6g}")
    print(f"verdict: {'pass' if report.passed else 'fail'} "
          f"(report: {config.out_dir}/report.json)")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
