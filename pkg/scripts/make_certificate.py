#!/usr/bin/env python3
"""Solve a problem, write the dual SOS certificate and check it.

    python scripts/make_certificate.py problems/motzkin.json cert.json
"""

import argparse
import json
import sys

from ratmin.certificate import bundle_to_json, check_certificate
from ratmin.parser import load_problem
from ratmin.pipeline import SolveConfig, best_dual_certificate, solve_program


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("problem")
    ap.add_argument("out")
    ap.add_argument("--max-order", type=int, default=8)
    ap.add_argument("--tol", type=float, default=1e-5, help="sampling tolerance of the check")
    args = ap.parse_args(argv)

    rp = load_problem(args.problem)
    capture: dict = {}
    rep = solve_program(rp, SolveConfig(max_order=args.max_order), capture=capture)
    found = best_dual_certificate(capture)
    if found is None:
        print("no order produced dual variables", file=sys.stderr)
        return 1
    bundle, names, kind = found
    doc = bundle_to_json(bundle, capture["jap"], names, kind, tol=args.tol)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
    chk, _ = check_certificate(doc, rp)
    print(f"optimum {rep.optimum}  gamma {bundle.gamma:.10g}  "
          f"sampled residual {chk.sampled_max:.3e}  {'PASS' if chk.passed else 'FAIL'}")
    return 0 if chk.passed else 1


if __name__ == "__main__":
    sys.exit(main())
