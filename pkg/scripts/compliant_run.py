"""One compliant-mode run with the per-step remainder contraction.

    python3 scripts/compliant_run.py --index 1
"""
import argparse

from torusnf.engine import RunOptions, run
from torusnf.factory import factory_suite


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--index", type=int, default=1, help="factory suite entry")
    ap.add_argument("--steps", type=int, default=3)
    args = ap.parse_args()
    inst = factory_suite(args.index + 1)[args.index]
    prof = inst["profile"]
    res = run(inst["H"], prof.omega, args.steps, inst["degree_cap"],
              RunOptions(mode="compliant", profile=prof, compose=False))
    print(f"{inst['name']}: scale {res.scale:.3e}, working degree cap {res.degree_cap}")
    print(f"{'n':>2} {'|R_n|':>10} {'bound':>10} {'|R_n+1|':>10} {'bound':>10} {'|C_n|':>10} {'C bound':>10}")
    for rep in res.steps:
        nm = rep.norms
        print(f"{rep.n:>2} {nm['R_in']:>10.2e} {nm['R_bound_in']:>10.2e} {nm['R_out']:>10.2e} "
              f"{nm['R_bound_out']:>10.2e} {nm['C']:>10.2e} {nm['C_bound']:>10.2e}")
    print("b_j:", {j: round(v, 12) for j, v in res.b_original.items()})


if __name__ == "__main__":
    main()
