"""Test instances with known normal form.

``make_instance`` reads a normalization backwards: if ``H o X_G^1 = N`` then
``H = N o X_{-G}^1``, so ``H`` is normalizable by construction and its normal
form is the prescribed ``N``.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg

from .homology import QuadraticForm, _multiplication_matrix, monomials
from .lie import lie_pullback
from .normal_form import NormalFormProfile
from .series import TFSeries

__all__ = [
    "random_generator",
    "make_instance",
    "plant_obstruction_block",
    "obstruction_instance",
    "factory_suite",
]


def _random_wave_vector(rng: np.random.Generator, dim: int, max_mode: int) -> np.ndarray:
    while True:
        k = rng.integers(-max_mode, max_mode + 1, size=dim)
        if k.any() and np.abs(k).sum() <= max_mode:
            return k


def random_generator(dim: int, seed: int, *, degrees=(3, 4), max_mode: int = 4, n_modes: int = 2,
                     terms_per_mode: int = 2, amplitude: float = 0.05, degree_cap: int = 17) -> TFSeries:
    """Seeded real, zero-average generator with lowest degree ``>= 2``.

    Each chosen wave vector ``k`` gets a few monomials of degree in
    ``degrees`` (inclusive), mirrored at ``-k`` with conjugate coefficients;
    the coefficient moduli are at most ``amplitude``.
    """
    lo, hi = degrees
    if lo < 2:
        raise ValueError("generator degrees must be >= 2")
    rng = np.random.default_rng(seed)
    keys, coeffs = [], []
    seen = set()
    for _ in range(n_modes):
        k = _random_wave_vector(rng, dim, max_mode)
        if tuple(k) in seen or tuple(-k) in seen:
            continue
        seen.add(tuple(k))
        used = set()
        for _ in range(terms_per_mode):
            e = int(rng.integers(lo, hi + 1))
            j = rng.multinomial(e, np.full(dim, 1.0 / dim))
            if tuple(j) in used:
                continue
            used.add(tuple(j))
            c = amplitude * rng.uniform(0.2, 1.0) * np.exp(2j * np.pi * rng.uniform())
            keys += [list(j) + list(k), list(j) + list(-k)]
            coeffs += [c, np.conj(c)]
    return TFSeries(dim, degree_cap, keys, coeffs)


def make_instance(profile: NormalFormProfile, generator: TFSeries, degree_cap: int) -> TFSeries:
    """``H = B(N_0) o X_{-G}^1`` through ``degree_cap``."""
    if len(generator) and generator.zero_mode():
        raise ValueError("generator must have zero theta-average")
    return lie_pullback(profile.normal_form(degree_cap), -generator.with_cap(degree_cap), degree_cap)


def plant_obstruction_block(omega: QuadraticForm, k, degree: int, rng: np.random.Generator,
                            residue: float = 1.0, divisible_part: float = 1.0) -> tuple[TFSeries, float]:
    """A degree-``degree`` block ``<Omega k, I> p + r`` at mode ``k`` (and its mirror).

    ``r`` lies in the orthogonal complement of the range of multiplication by
    the linear form, so its norm is exactly the least-squares residue.  With
    ``residue = 0`` the block is divisible.  Returns the series and the
    residue norm of the ``k`` block.
    """
    d = omega.dim
    k = np.asarray(k, dtype=int)
    v = omega.omega @ k
    M = _multiplication_matrix(v, degree - 1)
    p = rng.normal(size=M.shape[1]) + 1j * rng.normal(size=M.shape[1])
    block = divisible_part * (M @ p)
    r_norm = 0.0
    if residue:
        null = scipy.linalg.null_space(M.T)
        if null.shape[1] == 0:
            raise ValueError(f"every degree-{degree} block is divisible by <Omega k, I> for k={tuple(k)}")
        z = null @ (rng.normal(size=null.shape[1]) + 1j * rng.normal(size=null.shape[1]))
        z *= residue / scipy.linalg.norm(z)
        block = block + z
        r_norm = residue
    rows = monomials(d, degree)
    keys = [list(m) + list(k) for m in rows] + [list(m) + list(-k) for m in rows]
    coeffs = list(block) + list(np.conj(block))
    return TFSeries(d, degree, keys, coeffs), r_norm


def obstruction_instance(omega: QuadraticForm, degree_cap: int, seed: int, *, degree: int = 3,
                         residue: float = 0.01) -> TFSeries:
    """``N_0`` plus a small planted non-divisible block at ``degree``."""
    d = omega.dim
    if d < 2:
        raise ValueError("in one dimension every positive-degree block is divisible")
    rng = np.random.default_rng(seed)
    k = _random_wave_vector(rng, d, 2)
    block, _ = plant_obstruction_block(omega, k, degree, rng, residue=residue, divisible_part=residue)
    return omega.n0(degree_cap) + block.with_cap(degree_cap)


def factory_suite(count: int = 20, *, degree_cap: int = 17, seed: int = 0) -> list[dict]:
    """Seeded instances over ``d in {1, 2}`` with known ``b_2, b_3``.

    Each entry holds ``profile``, ``generator`` and the Hamiltonian ``H``.
    """
    rng = np.random.default_rng(seed)
    omegas = {1: [[[1.0]], [[-0.5]]], 2: [[[1.0, 0.0], [0.0, 2.0]], [[1.0, 0.3], [0.3, -1.5]]]}
    suite = []
    for idx in range(count):
        d = 1 + idx % 2
        omega = QuadraticForm(np.array(omegas[d][(idx // 2) % 2]))
        b = (round(float(rng.uniform(-0.2, 0.2)), 6), round(float(rng.uniform(-0.2, 0.2)), 6))
        profile = NormalFormProfile(omega, b)
        G = random_generator(d, seed * 1000 + idx, degree_cap=degree_cap)
        suite.append({"name": f"factory-{idx:02d}", "profile": profile, "generator": G,
                      "H": make_instance(profile, G, degree_cap), "degree_cap": degree_cap})
    return suite
