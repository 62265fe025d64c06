"""Run the seeded factory suite and compare against the per-degree oracle.

    python3 scripts/factory_suite.py --count 20 --steps 3
"""
import argparse
import time

import numpy as np

from torusnf.engine import RunOptions, classical_oracle, run
from torusnf.factory import factory_suite


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--count", type=int, default=20)
    ap.add_argument("--steps", type=int, default=3)
    ap.add_argument("--degree-cap", type=int, default=17)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    top = 2**args.steps + 1
    print(f"{'name':<12} {'d':>2} {'b2 err':>10} {'b3 err':>10} {'oracle diff':>12} {'|R_out|':>10} {'sec':>6}")
    for inst in factory_suite(args.count, degree_cap=args.degree_cap, seed=args.seed):
        prof = inst["profile"]
        t0 = time.perf_counter()
        res = run(inst["H"], prof.omega, args.steps, args.degree_cap, RunOptions(compose=False))
        elapsed = time.perf_counter() - t0
        errs = [abs(res.b_original[j] / prof.coefficient(j) - 1) for j in (2, 3)]
        ref = classical_oracle(inst["H"], prof.omega, min(top, args.degree_cap)).normal_form
        diff = res.normal_form.project_degrees(0, ref.degree_cap) - ref
        rel = float(np.abs(diff.coeffs).max() / np.abs(ref.coeffs).max()) if len(diff) else 0.0
        print(f"{inst['name']:<12} {prof.dim:>2} {errs[0]:>10.2e} {errs[1]:>10.2e} {rel:>12.2e} "
              f"{res.steps[-1].norms['R_out']:>10.2e} {elapsed:>6.2f}")


if __name__ == "__main__":
    main()
