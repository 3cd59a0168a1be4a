"""Command line entry point: ``ratmin solve`` and ``ratmin check-certificate``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .certificate import CertificateError, bundle_to_json, check_certificate
from .parser import ProblemError, load_problem
from .pipeline import SolveConfig, best_dual_certificate, solve_program

log = logging.getLogger("ratmin")


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ratmin", description="Global minimization of rational functions")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve a problem file")
    s.add_argument("--problem", required=True)
    s.add_argument("--max-order", type=int, default=8)
    s.add_argument("--min-order", type=int, default=None)
    s.add_argument("--tol", type=float, default=1e-6)
    s.add_argument("--solver", choices=["internal", "export"], default="internal")
    s.add_argument("--square-denominator", action="store_true")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default=None, help="report path (default: stdout)")
    s.add_argument("--export-dir", default=None, help="where --solver export writes .dat-s files")
    s.add_argument("--certificate-out", default=None,
                   help="write the dual certificate of the order with the smallest gap")

    c = sub.add_parser("check-certificate", help="verify a certificate file")
    c.add_argument("--certificate", required=True)
    c.add_argument("--problem", required=True)
    c.add_argument("--out", default=None)
    return ap


def _emit(doc: dict, out: str | None):
    text = json.dumps(doc, indent=2, sort_keys=False)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def run_solve(args) -> int:
    try:
        rp = load_problem(args.problem)
    except (OSError, ProblemError) as e:
        print(f"ratmin: cannot read problem: {e}", file=sys.stderr)
        return 1
    cfg = SolveConfig(max_order=args.max_order, min_order=args.min_order, tol=args.tol,
                      square_denominator=args.square_denominator, seed=args.seed,
                      solver=args.solver, export_dir=args.export_dir)
    if args.solver == "export" and cfg.export_dir is None:
        cfg.export_dir = str(Path(args.out).parent) if args.out else "."
    capture = {} if args.certificate_out else None
    try:
        report = solve_program(rp, cfg, capture=capture)
    except (ValueError, ArithmeticError) as e:
        print(f"ratmin: {e}", file=sys.stderr)
        return 1
    _emit(report.to_json(), args.out)
    if args.certificate_out:
        found = best_dual_certificate(capture)
        if found is None:
            print("ratmin: no dual certificate available", file=sys.stderr)
        else:
            bundle, names, kind = found
            doc = bundle_to_json(bundle, capture["jap"], names, kind)
            Path(args.certificate_out).write_text(json.dumps(doc) + "\n", encoding="utf-8")
    return report.exit_code


def run_check_certificate(args) -> int:
    try:
        rp = load_problem(args.problem)
        with open(args.certificate, encoding="utf-8") as fh:
            text = fh.read()
        chk, names = check_certificate(text, rp)
    except (OSError, ProblemError, CertificateError) as e:
        print(f"ratmin: {e}", file=sys.stderr)
        return 1
    _emit(chk.to_json(names), args.out)
    return 0 if chk.passed else 1


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "solve":
        return run_solve(args)
    return run_check_certificate(args)


if __name__ == "__main__":
    sys.exit(main())
