import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from torusnf.schedule import FAMILIES, build, check_convergence_chain, majorant_recursion, rho_limit_bracket


def direct_recursion(P):
    """Quadratic-time evaluation of S_j = P_j + sum_i 4^-i S_(j-i)."""
    S = []
    for j, p in enumerate(P):
        S.append(p + sum(4.0 ** -i * S[j - i] for i in range(1, j + 1)))
    return np.array(S)


def test_constants_for_one_dimension():
    s = build(1, 1.0, 10)
    assert s.kappa == 7
    assert s.b == 2.0**-10
    assert s.delta[0] == 2.0**-13
    assert s.delta[5] == 2.0**-18


def test_normalized_degrees():
    assert build(2, 0.5, 6).m[:5] == (2, 3, 5, 9, 17)


def test_q_and_rho_recurrences():
    s = build(3, 0.5, 8)
    for n in range(8):
        assert s.q[n] == pytest.approx((2 * s.b) ** (2.0 ** -(n + 1)), rel=1e-15)
        assert s.rho[n + 1] == pytest.approx((s.rho[n] - 3 * s.delta[n]) * s.q[n], rel=1e-15)
        assert s.shrunk_radius(n) == s.rho[n] - 3 * s.delta[n]
        assert s.remainder_bound(n) == s.delta[n] ** s.kappa


@pytest.mark.parametrize("args", [(0, 1.0, 5), (1, 0.0, 5), (1, 1.5, 5), (1, 1.0, 0), (1.5, 1.0, 5)])
def test_build_validation(args):
    with pytest.raises(ValueError):
        build(*args)


@pytest.mark.parametrize("d", [1, 4])
def test_ledger_passes(d):
    rows = check_convergence_chain(build(d, 1.0, 30))
    assert len(rows) == 5 * 30
    assert {r.family for r in rows} == set(FAMILIES)
    assert all(r.passed for r in rows)


def test_inflated_delta_breaks_family_a():
    s = build(1, 1.0, 30)
    bad = build(1, 1.0, 30, delta0=100 * s.delta[0])
    rows = check_convergence_chain(bad)
    assert not any(r.passed for r in rows if r.family == "a")


def test_ledger_rows_are_machine_readable():
    row = check_convergence_chain(build(2, 0.5, 3))[0]
    assert set(row.as_dict()) == {"family", "n", "lhs", "rhs", "passed"}


@pytest.mark.parametrize("d", [1, 3, 6])
def test_delta_series_sums_to_twice_delta0(d):
    s = build(d, 1.0, 5)
    total = math.fsum(math.ldexp(s.delta[0], -k) for k in range(1100))
    assert abs(total - 2 * s.delta[0]) <= 1e-15 * 2 * s.delta[0]


@pytest.mark.parametrize("d,rho0", [(1, 1.0), (2, 0.5), (6, 0.25)])
def test_rho_limit_bracket(d, rho0):
    s = build(d, rho0, 64)
    lo, hi = rho_limit_bracket(s)
    assert s.b * rho0 < lo <= hi < rho0
    # monotone; late decrements fall below one ulp
    assert all(np.diff(s.rho) <= 0)


# -- majorant recursion --------------------------------------------------------

def test_recursion_constant_input():
    S = majorant_recursion([1.0, 1.0, 1.0])
    assert S == pytest.approx([1.0, 1.25, 1.375], rel=1e-15)


def test_recursion_single_impulse():
    S = majorant_recursion([1.0] + [0.0] * 20)
    ref = direct_recursion([1.0] + [0.0] * 20)
    assert S == pytest.approx(ref, rel=1e-13)
    assert S[1:] == pytest.approx([2.0 ** -(j + 1) for j in range(1, 21)], rel=1e-13)
    assert S.max() <= 2


def test_recursion_validation():
    with pytest.raises(ValueError):
        majorant_recursion([1.0, -0.1])
    with pytest.raises(ValueError):
        majorant_recursion([1.0, 2.0], epsilon=1.0)


@given(st.lists(st.floats(0, 1), min_size=1, max_size=200))
def test_recursion_matches_direct_evaluation(P):
    assert majorant_recursion(P) == pytest.approx(direct_recursion(P), rel=1e-12, abs=1e-300)


@given(st.integers(0, 2**32 - 1), st.integers(1, 1025), st.floats(1e-6, 1e3))
def test_recursion_bounds(seed, m, eps):
    P = np.random.default_rng(seed).uniform(0, eps, size=m)
    S = majorant_recursion(P, eps)
    assert S.max() <= 2 * eps
    assert np.all(S[1:] <= P[1:] + S[:-1] / 2 + 1e-12 * eps)


@pytest.mark.parametrize("d", [1, 6])
def test_ledger_survives_long_horizons(d):
    # the margins in families c and d shrink like 2^-n, far below double resolution of q_n
    assert all(r.passed for r in check_convergence_chain(build(d, 0.5, 300)))
