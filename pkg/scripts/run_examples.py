#!/usr/bin/env python3
"""Solve every problem file and print a one-line summary per problem.

    python scripts/run_examples.py [problems/*.json] [--max-order 8] [--json-dir DIR]
"""

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from ratmin.parser import load_problem
from ratmin.pipeline import SolveConfig, solve_program

ROOT = Path(__file__).resolve().parents[1]


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("problems", nargs="*", type=Path)
    ap.add_argument("--max-order", type=int, default=8)
    ap.add_argument("--json-dir", type=Path, default=None, help="also write each report here")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    files = args.problems or sorted((ROOT / "problems").glob("*.json"))
    if args.json_dir:
        args.json_dir.mkdir(parents=True, exist_ok=True)
    print(f"{'problem':<26} {'exit':>4} {'optimum':>14} {'N':>3} {'time':>7}  minimizers")
    for path in files:
        t0 = time.perf_counter()
        rep = solve_program(load_problem(path), SolveConfig(max_order=args.max_order))
        secs = time.perf_counter() - t0
        doc = rep.to_json()
        opt = "-" if rep.optimum is None else f"{rep.optimum:.8g}"
        n = rep.extraction["N"] if rep.extraction else (rep.per_order[-1].N if rep.per_order else "-")
        mins = [[round(v, 4) for v in m] for m in doc["minimizers"]]
        extra = f" +{len(doc['asymptotic'])} asymptotic" if doc["asymptotic"] else ""
        print(f"{path.stem:<26} {rep.exit_code:>4} {opt:>14} {n:>3} {secs:>6.1f}s  {mins}{extra}")
        if args.json_dir:
            (args.json_dir / f"{path.stem}.json").write_text(json.dumps(doc, indent=2) + "\n")
        sys.stdout.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
