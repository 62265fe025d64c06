"""Record the largest homological norm ratio over a seeded random suite.

The printed maximum is the frozen envelope used by the acceptance tests:

    python3 scripts/homological_envelope.py --first 0 --count 100
"""
import argparse

import numpy as np

from torusnf.factory import random_generator
from torusnf.homology import QuadraticForm, homological_norm_ratio, solve_homological
from torusnf.series import DomainBox, poisson_bracket

OMEGAS = {1: [[1.0]], 2: [[1.0, 0.3], [0.3, -1.5]], 3: [[2.0, 0.0, 0.5], [0.0, -1.0, 0.2], [0.5, 0.2, 1.0]]}
BOX = DomainBox(0.5, 0.5)
DELTA = GAMMA = 0.125


def ratio_for_seed(seed: int) -> float:
    d = 1 + seed % 3
    omega = QuadraticForm(np.array(OMEGAS[d]))
    F0 = random_generator(d, seed, degrees=(2, 8), max_mode=5, n_modes=3, terms_per_mode=3, degree_cap=9)
    Q = poisson_bracket(omega.n0(9), F0, 9)
    F = solve_homological(omega, Q).F
    return homological_norm_ratio(F, Q, BOX, DELTA, GAMMA)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--first", type=int, default=0)
    ap.add_argument("--count", type=int, default=100)
    args = ap.parse_args()
    ratios = [ratio_for_seed(s) for s in range(args.first, args.first + args.count)]
    worst = int(np.argmax(ratios))
    print(f"max ratio {max(ratios)!r} at seed {args.first + worst}; median {float(np.median(ratios)):.6e}")


if __name__ == "__main__":
    main()
