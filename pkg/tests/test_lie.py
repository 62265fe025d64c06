import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from torusnf.factory import random_generator
from torusnf.homology import QuadraticForm
from torusnf.lie import (CoordinateMap, cbd_combine, cbd_exact_degree, compose_maps, compose_with_flow,
                         flow_coordinates, lie_pullback, substitute, symplecticity_defect)
from torusnf.series import TFSeries, check_real_symmetric, max_coeff_error, mul, poisson_bracket

from conftest import random_series

seeds = st.integers(0, 2**32 - 1)
dims = st.integers(1, 2)


def small_generator(d, seed, cap, lo=2, hi=3, amplitude=0.05):
    return random_generator(d, seed, degrees=(lo, hi), max_mode=2, n_modes=2, amplitude=amplitude, degree_cap=cap)


def low(f, top):
    return f.project_degrees(0, top)


def test_action_generator_leaves_n0_fixed():
    om = QuadraticForm(np.array([[1.0, 0.2], [0.2, 3.0]]))
    F = TFSeries.monomial(2, 8, [2, 1], c=0.3) + TFSeries.monomial(2, 8, [0, 3], c=-1.0)
    assert lie_pullback(om.n0(8), F, 8).identical(om.n0(8))


def test_single_bracket_example():
    c = 0.05
    H = TFSeries.monomial(1, 3, [2])
    F = TFSeries.from_terms(1, 3, {((2,), (1,)): c, ((2,), (-1,)): c})
    expected = H + TFSeries.from_terms(1, 3, {((3,), (1,)): 4j * math.pi * c, ((3,), (-1,)): -4j * math.pi * c})
    assert max_coeff_error(lie_pullback(H, F, 3), expected) < 1e-15


def test_rejects_low_degree_generator():
    with pytest.raises(ValueError):
        lie_pullback(TFSeries.monomial(1, 4, [2]), TFSeries.monomial(1, 4, [1], [1]), 4)


@given(seeds, dims)
def test_flow_inversion(seed, d):
    D = 9
    F = small_generator(d, seed, D)
    H = random_series(np.random.default_rng(seed), d, D, degrees=(2, 5), n_terms=5)
    back = lie_pullback(lie_pullback(H, F, D), -F, D)
    slack = F.min_degree - 1
    assert max_coeff_error(low(back, D - slack), low(H, D - slack)) <= 1e-10


@given(seeds, dims)
def test_pullback_is_an_algebra_morphism(seed, d):
    D = 10
    rng = np.random.default_rng(seed)
    F = small_generator(d, seed, D, lo=3, hi=4)
    f, g = random_series(rng, d, D, degrees=(1, 3), n_terms=4), random_series(rng, d, D, degrees=(1, 3), n_terms=4)
    pf, pg = lie_pullback(f, F, D), lie_pullback(g, F, D)
    assert max_coeff_error(lie_pullback(mul(f, g, D), F, D), mul(pf, pg, D)) <= 1e-10
    # brackets lose one degree of exactness to the truncation
    top = D - 1
    lhs = low(lie_pullback(poisson_bracket(f, g, D), F, D), top)
    rhs = low(poisson_bracket(pf, pg, D), top)
    assert max_coeff_error(lhs, rhs) <= 1e-10


@given(seeds, dims)
def test_energy_is_conserved(seed, d):
    F = small_generator(d, seed, 12)
    assert max_coeff_error(lie_pullback(F, F, 12), F) == 0.0


@given(seeds, dims, st.integers(2, 4))
def test_degree_floor(seed, d, a):
    D = 12
    rng = np.random.default_rng(seed)
    H = random_series(rng, d, D, degrees=(a, a + 2), n_terms=5)
    F = small_generator(d, seed, D, lo=3, hi=4)
    corr = lie_pullback(H, F, D) - H
    if len(corr):
        assert corr.min_degree >= a + F.min_degree - 1


@given(seeds, dims)
def test_real_symmetry_preserved(seed, d):
    D = 8
    rng = np.random.default_rng(seed)
    H = random_series(rng, d, D, degrees=(2, 4), n_terms=4)
    F = small_generator(d, seed, D)
    G = small_generator(d, seed + 1, D)
    outs = [lie_pullback(H, F, D), cbd_combine(F, G, D)]
    fc = flow_coordinates(F, D)
    outs += list(fc.U) + list(fc.v)
    for h in outs:
        scale = float(np.abs(h.coeffs).max()) if len(h) else 1.0
        assert check_real_symmetric(h, 1e-12 * scale)[0]


# -- coordinate maps -----------------------------------------------------------

def test_zero_generator_gives_identity():
    cm = flow_coordinates(TFSeries.zero(2, 6), 6)
    ident = CoordinateMap.identity(2, 6)
    assert all(u.identical(w) for u, w in zip(cm.U, ident.U))
    assert all(len(v) == 0 for v in cm.v)


def test_tangent_to_identity(rng):
    F = small_generator(2, 7, 8, lo=3, hi=4)
    cm = flow_coordinates(F, 8)
    for du in cm.action_deviations():
        assert du.min_degree >= F.min_degree
    for v in cm.v:
        assert v.min_degree >= F.min_degree - 1


@pytest.mark.parametrize("d", [1, 2])
def test_flow_then_inverse_by_substitution(d):
    D = 8
    F = small_generator(d, 11 + d, D)
    phi, phi_inv = flow_coordinates(F, D), flow_coordinates(-F, D)
    ident = compose_maps(phi, phi_inv, D)
    top = D - (F.min_degree - 1)
    for i in range(d):
        assert max_coeff_error(low(ident.U[i], top), TFSeries.action(d, i, D), relative=False) <= 1e-10
        assert max_coeff_error(low(ident.v[i], top - 1), TFSeries.zero(d, D), relative=False) <= 1e-10


def test_substitution_matches_lie_pullback():
    D = 8
    F = small_generator(2, 3, D)
    H = random_series(np.random.default_rng(3), 2, D, degrees=(2, 4), n_terms=5)
    via_map = substitute(H, flow_coordinates(F, D), D)
    top = D - (F.min_degree - 1)
    assert max_coeff_error(low(via_map, top), low(lie_pullback(H, F, D), top)) <= 1e-10


def test_compose_with_flow_matches_substitution():
    D = 8
    F, G = small_generator(2, 5, D), small_generator(2, 6, D)
    base = flow_coordinates(F, D)
    fast = compose_with_flow(base, G, D)
    slow = compose_maps(base, flow_coordinates(G, D), D)
    top = D - 1
    for a, b in zip(fast.U + fast.v, slow.U + slow.v):
        assert max_coeff_error(low(a, top), low(b, top), relative=False) <= 1e-10


def test_deviation_norm_of_identity():
    from torusnf.series import DomainBox
    assert CoordinateMap.identity(2, 5).deviation_norm(DomainBox(0.5, 0.5)) == 0.0


# -- CBD combination -------------------------------------------------------------

def test_cbd_commuting_generators():
    G = TFSeries.monomial(2, 8, [2, 1], c=0.3)
    K = TFSeries.monomial(2, 8, [0, 3], c=-0.2)
    assert max_coeff_error(cbd_combine(G, K, 8), G + K) == 0.0


def test_cbd_identity_element():
    G = small_generator(2, 1, 8)
    assert cbd_combine(G, TFSeries.zero(2, 8), 8).identical(G)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_cbd_matches_sequential_pullbacks(seed):
    D = 12
    G = small_generator(2, seed, D, lo=3, hi=3)
    K = small_generator(2, seed + 50, D, lo=3, hi=3)
    H = random_series(np.random.default_rng(seed), 2, D, degrees=(2, 3), n_terms=4)
    # pulling back by X_G^1 then X_K^1 realizes X_G^1 o X_K^1
    two_step = lie_pullback(lie_pullback(H, G, D), K, D)
    one_step = lie_pullback(H, cbd_combine(G, K, D), D)
    exact_gen = cbd_exact_degree(G, K)
    top = exact_gen + H.min_degree - 1
    assert top >= H.min_degree + 3
    assert max_coeff_error(low(one_step, top), low(two_step, top)) <= 1e-12
    # the truncated formula is not exact beyond that range
    assert max_coeff_error(one_step, two_step) > 1e-12


# -- symplecticity -----------------------------------------------------------------

def test_identity_is_symplectic():
    assert symplecticity_defect(CoordinateMap.identity(2, 6)) == 0.0


@given(seeds, dims)
def test_flows_are_symplectic(seed, d):
    F = small_generator(d, seed, 9)
    assert symplecticity_defect(flow_coordinates(F, 9)) <= 1e-10


def test_corrupted_map_is_detected():
    F = small_generator(2, 4, 8)
    cm = flow_coordinates(F, 8)
    bad_u0 = cm.U[0] + TFSeries.monomial(2, 8, [1, 0], c=1e-3)
    bad = CoordinateMap((bad_u0,) + cm.U[1:], cm.v)
    assert symplecticity_defect(bad) >= 1e-4
