"""Command-line driver: solve, verify, exponents and sweep subcommands.

Exit codes: 0 success; 1 configuration error; 2 solve non-convergence
(partial artifacts are still written); 3 verify without artifacts; 4 verify
with failing claim rows; 5 flagged degenerate configuration under --strict.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

from .config import load_config, norm_request_from
from .errors import ConfigError, IncompleteTableError, NonConvergenceError, SingmixError
from .estimates import uniform_bound_report
from .exponents import compute_p_condition, regularity_exponents
from .grid import strip_covers_interior
from .operators import assemble_operator
from .solver import load_report, save_report, solve_sequence

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NONCONVERGED = 2
EXIT_MISSING = 3
EXIT_FAILED_ROWS = 4
EXIT_STRICT = 5


def _threads(args):
    if args.threads is not None:
        return args.threads
    env = os.environ.get("SMP_THREADS")
    return int(env) if env else None


def _out_dir(args, config):
    return args.out or config.out_dir


def _h_dirs(out_dir, h_list):
    if len(h_list) == 1:
        return [out_dir]
    return [os.path.join(out_dir, f"h_{h:g}") for h in h_list]


def _solve_one(config, grid, out_dir, workers, strict):
    delta_star = None
    strip_flags = []
    if config.p_condition_eps is not None:
        pcond = compute_p_condition(config.delta, grid, config.p_condition_eps)
        delta_star = pcond.delta_star
        if strip_covers_interior(grid, config.p_condition_eps):
            strip_flags.append("strip-covers-interior")
    elif config.delta.constant_value is not None:
        delta_star = max(1.0, config.delta.constant_value)

    op = assemble_operator(grid, config.coefficient, config.kernel,
                           dense_cap=config.dense_cap, workers=workers)
    norms = norm_request_from(config, delta_star)
    exit_code = EXIT_OK
    try:
        report = solve_sequence(
            op, config.data, config.delta, grid, config.n_list_for(grid),
            opts=config.fixed_point, probes=config.probes, norms=norms,
            rel_gap_threshold=config.rel_gap_threshold,
            compute_residuals=config.compute_residuals,
            width_scale=config.width_scale)
    except NonConvergenceError as err:
        report = getattr(err, "partial_report", None)
        print(f"solve: non-convergence: {err}", file=sys.stderr)
        exit_code = EXIT_NONCONVERGED
        if report is None:
            return exit_code, None
    report.flags.extend(strip_flags)
    if delta_star is not None:
        report.fp_stats["delta_star"] = delta_star
    save_report(report, out_dir)
    if strict and report.flags and exit_code == EXIT_OK:
        print(f"strict mode: flagged configuration {report.flags}", file=sys.stderr)
        exit_code = EXIT_STRICT
    return exit_code, report


def cmd_solve(args):
    config = load_config(args.config)
    out_dir = _out_dir(args, config)
    workers = _threads(args)
    worst = EXIT_OK
    for grid, sub in zip(config.grids(), _h_dirs(out_dir, config.h_list)):
        code, _ = _solve_one(config, grid, sub, workers, args.strict)
        worst = max(worst, code)
        if code == EXIT_NONCONVERGED:
            break
    return worst


def cmd_sweep(args):
    # refinement study: same pipeline, one artifact directory per spacing
    return cmd_solve(args)


def cmd_verify(args):
    config = load_config(args.config)
    out_dir = _out_dir(args, config)
    dirs = _h_dirs(out_dir, config.h_list)
    bundles = []
    for sub in dirs:
        if not os.path.exists(os.path.join(sub, "report.json")):
            if args.inline:
                code, _ = _solve_one(config, None, sub, None, False)
            else:
                print(f"verify: missing artifacts in {sub} "
                      f"(run solve first or pass --inline)", file=sys.stderr)
                return EXIT_MISSING
    if args.inline:
        workers = _threads(args)
        for grid, sub in zip(config.grids(), dirs):
            if not os.path.exists(os.path.join(sub, "report.json")):
                code, _ = _solve_one(config, grid, sub, workers, False)
                if code == EXIT_NONCONVERGED:
                    return code
    for sub in dirs:
        bundles.append(load_report(sub))
    try:
        table = uniform_bound_report(bundles, config.claims)
    except IncompleteTableError as exc:
        print(f"verify: {exc}", file=sys.stderr)
        return EXIT_MISSING
    csv_path = os.path.join(out_dir, "conformance.csv")
    os.makedirs(out_dir, exist_ok=True)
    table.write_csv(csv_path)
    for row in table.rows:
        status = "pass" if row.passed else "FAIL"
        print(f"{status}  {row.claim_id:<24} {row.statistic:<24} "
              f"value={row.value:.6g} threshold={row.threshold:g}")
    if args.strict:
        for _, report in bundles:
            if report.flags:
                print(f"strict mode: flagged configuration {report.flags}",
                      file=sys.stderr)
                return EXIT_STRICT
    return EXIT_OK if table.all_passed else EXIT_FAILED_ROWS


def cmd_exponents(args):
    delta = args.delta
    delta_star = args.delta_star
    report = regularity_exponents(args.N, args.r, args.m, delta=delta,
                                  delta_star=delta_star)
    print(f"table {report.table}  case {report.case_id}")
    if not report.prediction:
        print(f"no prediction: {report.reason}")
    elif report.space == "Linf":
        print("target space: L^inf")
    else:
        print(f"target space: L^q with q = {report.exponent:.6g}")
    if report.sobolev_q is not None:
        kind = "attained" if report.sobolev_q_attained else "open upper bound"
        print(f"energy exponent q = {report.sobolev_q:.6g} ({kind})")
    if args.json_out:
        with open(args.json_out, "w") as fh:
            json.dump(report.to_json_dict(), fh, sort_keys=True, indent=1)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="singmix",
        description="mixed local-nonlocal singular-problem solver and verifier")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--out", default=None, help="artifact directory")
        p.add_argument("--threads", type=int, default=None,
                       help="FFT worker threads (SMP_THREADS as fallback)")
        p.add_argument("--strict", action="store_true",
                       help="fail on flagged degenerate configurations")

    p_solve = sub.add_parser("solve", help="run the approximation sweep")
    common(p_solve)
    p_solve.set_defaults(func=cmd_solve)

    p_sweep = sub.add_parser("sweep", help="refinement study over h_list")
    common(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_verify = sub.add_parser("verify", help="evaluate conformance claims")
    common(p_verify)
    p_verify.add_argument("--inline", action="store_true",
                          help="solve missing artifacts on the fly")
    p_verify.set_defaults(func=cmd_verify)

    p_exp = sub.add_parser("exponents", help="print predicted target spaces")
    p_exp.add_argument("--N", type=int, required=True)
    p_exp.add_argument("--r", type=float, required=True)
    p_exp.add_argument("--m", type=float, default=math.inf)
    group = p_exp.add_mutually_exclusive_group(required=True)
    group.add_argument("--delta", type=float, default=None)
    group.add_argument("--delta-star", dest="delta_star", type=float, default=None)
    p_exp.add_argument("--json-out", default=None)
    p_exp.set_defaults(func=cmd_exponents)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SingmixError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def entry():  # console-script shim
    sys.exit(main())


if __name__ == "__main__":
    entry()
