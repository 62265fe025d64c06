"""Shared helpers: random series builders and slow pure-Python reference algebra."""
from __future__ import annotations

import cmath
import math
from collections import defaultdict

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from torusnf.series import TFSeries

settings.register_profile("repo", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


def random_series(rng: np.random.Generator, dim: int, cap: int, *, degrees=(0, 4), max_mode: int = 2,
                  n_terms: int = 6, symmetric: bool = True, zero_average: bool = False) -> TFSeries:
    """Random sparse series; ``symmetric`` adds the conjugate partner of every term."""
    lo, hi = degrees
    keys, coeffs = [], []
    for _ in range(n_terms):
        e = int(rng.integers(lo, hi + 1))
        j = rng.multinomial(e, np.full(dim, 1.0 / dim)) if e else np.zeros(dim, dtype=int)
        k = rng.integers(-max_mode, max_mode + 1, size=dim)
        if zero_average and not k.any():
            k[int(rng.integers(dim))] = 1
        c = complex(rng.normal(), rng.normal())
        if symmetric and not k.any():
            c = c.real
        keys.append(list(j) + list(k))
        coeffs.append(c)
        if symmetric and k.any():
            keys.append(list(j) + list(-k))
            coeffs.append(c.conjugate())
    return TFSeries(dim, cap, keys, coeffs)


def random_homogeneous(rng, dim, cap, degree, **kw) -> TFSeries:
    return random_series(rng, dim, cap, degrees=(degree, degree), **kw)


# -- slow reference algebra on plain dicts ----------------------------------

def to_terms(f: TFSeries) -> dict:
    return {(j, k): c for j, k, c in f.terms()}


def ref_mul(f: dict, g: dict, cap: int) -> dict:
    out = defaultdict(complex)
    for (j1, k1), a in f.items():
        for (j2, k2), b in g.items():
            j = tuple(x + y for x, y in zip(j1, j2))
            if sum(j) <= cap:
                out[(j, tuple(x + y for x, y in zip(k1, k2)))] += a * b
    return dict(out)


def ref_bracket(g: dict, f: dict, cap: int) -> dict:
    """``sum_i dg/dI_i df/dtheta_i - dg/dtheta_i df/dI_i`` term by term."""
    out = defaultdict(complex)
    for (j1, k1), a in g.items():
        for (j2, k2), b in f.items():
            j = [x + y for x, y in zip(j1, j2)]
            k = tuple(x + y for x, y in zip(k1, k2))
            for i in range(len(j1)):
                if sum(j) - 1 > cap:
                    continue
                c = j1[i] * a * (2j * math.pi * k2[i]) * b - (2j * math.pi * k1[i]) * a * j2[i] * b
                if c and (j1[i] or j2[i]):
                    jj = list(j)
                    jj[i] -= 1
                    out[(tuple(jj), k)] += c
    return dict(out)


def ref_eval(f: dict, I, theta) -> complex:
    total = 0j
    for (j, k), c in f.items():
        mon = math.prod(x**p for x, p in zip(I, j))
        total += c * mon * cmath.exp(2j * math.pi * sum(a * b for a, b in zip(k, theta)))
    return total


def dict_error(a: dict, b: dict) -> float:
    """Largest coefficient difference over the union of keys, relative to ``max |b|``."""
    keys = set(a) | set(b)
    err = max((abs(a.get(key, 0) - b.get(key, 0)) for key in keys), default=0.0)
    scale = max((abs(v) for v in b.values()), default=0.0) or 1.0
    return err / scale


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
