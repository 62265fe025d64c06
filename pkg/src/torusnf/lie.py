"""Time-one Hamiltonian flows as finite Lie series.

Throughout, ``X_F^t`` is the flow of ``dI/dt = dF/dtheta, dtheta/dt = -dF/dI``
and the pullback of a function ``H`` by its time-one map is

    H o X_F^1 = sum_m ad_F^m H / m!,    ad_F H = {H, F}.

For a generator whose lowest I-degree is at least 2 every bracket raises the
degree, so the series is finite under a degree cap and the result is exact
through that cap.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .series import DomainBox, TFSeries, majorant_norm, mul, poisson_bracket

__all__ = [
    "CoordinateMap",
    "lie_pullback",
    "record_magnitudes",
    "flow_coordinates",
    "substitute",
    "compose_maps",
    "compose_with_flow",
    "cbd_combine",
    "cbd_exact_degree",
    "symplecticity_defect",
]


def _check_generator(F: TFSeries):
    if len(F) and F.min_degree < 2:
        raise ValueError(f"generator has terms of I-degree {F.min_degree}; need lowest degree >= 2")


def record_magnitudes(magnitudes: dict | None, f: TFSeries):
    """Raise ``magnitudes[e]`` to the coefficient norm of each degree block of ``f``."""
    if magnitudes is None:
        return
    for e, v in f.block_norms().items():
        if v > magnitudes.get(e, 0.0):
            magnitudes[e] = v


def lie_pullback(H: TFSeries, F: TFSeries, degree_cap: int | None = None, *,
                 magnitudes: dict | None = None) -> TFSeries:
    """``H o X_F^1`` through total I-degree ``degree_cap``.

    If ``magnitudes`` is a dict it is updated with the largest per-degree
    block norm of every Lie-series term, which bounds the scale of the
    rounding error left in each degree of the result.
    """
    H._check(F)
    _check_generator(F)
    cap = max(H.degree_cap, F.degree_cap) if degree_cap is None else int(degree_cap)
    total = H.with_cap(cap)
    record_magnitudes(magnitudes, total)
    if len(F) == 0:
        return total
    term = total
    m = 0
    while len(term):
        m += 1
        term = poisson_bracket(term, F, cap) / m
        if len(term) == 0:
            break
        record_magnitudes(magnitudes, term)
        total = total + term
    return total


@dataclass(frozen=True)
class CoordinateMap:
    """A near-identity map ``(I, theta) -> (U(I, theta), theta + v(I, theta))``.

    ``U`` holds the image actions; ``v`` holds the angle deviations, which are
    periodic and therefore live in the same series carrier.
    """

    U: tuple
    v: tuple

    @property
    def dim(self) -> int:
        return len(self.U)

    @classmethod
    def identity(cls, dim: int, degree_cap: int) -> "CoordinateMap":
        return cls(tuple(TFSeries.action(dim, i, degree_cap) for i in range(dim)),
                   tuple(TFSeries.zero(dim, degree_cap) for _ in range(dim)))

    def action_deviations(self) -> tuple:
        return tuple(u - TFSeries.action(u.dim, i, u.degree_cap) for i, u in enumerate(self.U))

    def deviation_norm(self, box: DomainBox) -> float:
        """``sum_j |U_j - I_j| + |v_j|`` in the majorant norm."""
        return sum(majorant_norm(du, box) for du in self.action_deviations()) + \
            sum(majorant_norm(vj, box) for vj in self.v)

    def pullback(self, f: TFSeries, degree_cap: int | None = None) -> TFSeries:
        return substitute(f, self, degree_cap)


def flow_coordinates(F: TFSeries, degree_cap: int | None = None) -> CoordinateMap:
    """Coordinate functions of ``X_F^1``; the inverse map is ``flow_coordinates(-F)``."""
    _check_generator(F)
    d = F.dim
    cap = F.degree_cap if degree_cap is None else int(degree_cap)
    U = tuple(lie_pullback(TFSeries.action(d, i, cap), F, cap) for i in range(d))
    v = []
    for i in range(d):
        # ad_F theta_i = {theta_i, F} = -dF/dI_i; continue the series from there
        term = (-F.diff_action(i)).with_cap(cap)
        total = term
        m = 1
        while len(term):
            m += 1
            term = poisson_bracket(term, F, cap) / m
            total = total + term
        v.append(total)
    return CoordinateMap(U, tuple(v))


def _exponential(arg: TFSeries, cap: int) -> TFSeries:
    """``exp(arg)`` for a series without degree-0 part."""
    out = TFSeries.constant(arg.dim, cap, 1.0)
    if len(arg) == 0:
        return out
    if arg.min_degree < 1:
        raise ValueError("angle deviation must vanish at I = 0")
    term = out
    m = 0
    while len(term):
        m += 1
        term = mul(term, arg, cap) / m
        out = out + term
    return out


def _combine(weighted: list, dim: int, cap: int) -> TFSeries:
    """``sum c_i s_i`` with a single aggregation pass."""
    weighted = [(c, s) for c, s in weighted if len(s)]
    if not weighted:
        return TFSeries.zero(dim, cap)
    keys = np.concatenate([s.keys for _, s in weighted])
    coeffs = np.concatenate([c * s.coeffs for c, s in weighted])
    return TFSeries(dim, cap, keys, coeffs)


def _shift_modes(f: TFSeries, k) -> TFSeries:
    keys = f.keys.copy()
    keys[:, f.dim:] += np.asarray(k, dtype=keys.dtype)
    return TFSeries(f.dim, f.degree_cap, keys, f.coeffs)


def substitute(f: TFSeries, cmap: CoordinateMap, degree_cap: int | None = None) -> TFSeries:
    """``f(U(I, theta), theta + v(I, theta))`` by direct series substitution.

    Monomials ``U^j`` and the factors ``exp(+-2 pi i v_i)^n`` are cached, so
    each distinct monomial and each angle power costs one product.
    """
    if cmap.dim != f.dim:
        raise ValueError("dimension mismatch")
    d = f.dim
    cap = f.degree_cap if degree_cap is None else int(degree_cap)
    for u in cmap.U:
        if len(u) and u.min_degree < 1:
            raise ValueError("action images must vanish at I = 0")
    one = TFSeries.constant(d, cap, 1.0)
    monos = {(0,) * d: one}

    def upow(j):
        if j not in monos:
            i = next(a for a in range(d) if j[a])
            lower = j[:i] + (j[i] - 1,) + j[i + 1:]
            monos[j] = mul(upow(lower), cmap.U[i], cap)
        return monos[j]

    angle = {}

    def epow(i, n):
        # exp(2 pi i n v_i), built from the unit factors by repeated products
        if n == 0:
            return one
        if (i, n) not in angle:
            step = 1 if n > 0 else -1
            if abs(n) == 1:
                angle[(i, n)] = _exponential(cmap.v[i] * (2j * np.pi * step), cap)
            else:
                angle[(i, n)] = mul(epow(i, n - step), epow(i, step), cap)
        return angle[(i, n)]

    pieces = []
    for kvec in f.modes():
        block = f.mode(kvec)
        poly = _combine([(c, upow(j)) for j, _, c in block.terms()], d, cap)
        factor = one
        for i, ki in enumerate(kvec):
            if ki:
                factor = mul(factor, epow(i, ki), cap)
        pieces.append((1.0, _shift_modes(mul(poly, factor, cap), kvec)))
    return _combine(pieces, d, cap)


def compose_maps(outer: CoordinateMap, inner: CoordinateMap, degree_cap: int) -> CoordinateMap:
    """Coordinate functions of ``outer o inner`` (apply ``inner`` first)."""
    U = tuple(substitute(u, inner, degree_cap) for u in outer.U)
    v = tuple(vi_in.with_cap(degree_cap) + substitute(vi_out, inner, degree_cap)
              for vi_out, vi_in in zip(outer.v, inner.v))
    return CoordinateMap(U, v)


def compose_with_flow(cmap: CoordinateMap, F: TFSeries, degree_cap: int,
                      flow: CoordinateMap | None = None) -> CoordinateMap:
    """Coordinate functions of ``cmap o X_F^1`` using pullbacks only.

    ``U o X_F^1`` is a Lie pullback, and the angle deviation of the composite
    is ``v_flow + v o X_F^1``.  ``flow`` may pass precomputed
    ``flow_coordinates(F)``.
    """
    flow = flow_coordinates(F, degree_cap) if flow is None else flow
    U = tuple(lie_pullback(u, F, degree_cap) for u in cmap.U)
    v = tuple(vf.with_cap(degree_cap) + lie_pullback(vi, F, degree_cap) for vf, vi in zip(flow.v, cmap.v))
    return CoordinateMap(U, v)


def cbd_combine(G: TFSeries, K: TFSeries, degree_cap: int | None = None) -> TFSeries:
    """Generator of ``X_G^1 o X_K^1`` through double brackets.

    With pullbacks ``f o X_G^1 o X_K^1 = exp(ad_K) exp(ad_G) f`` and
    ``[ad_A, ad_B] = ad_{B,A}``, the Baker-Campbell-Hausdorff series gives

        G + K + 1/2 {G,K} + 1/12 {G,{G,K}} + 1/12 {K,{K,G}} + ...

    Exact on degrees below the lowest possible triple-bracket degree.
    """
    _check_generator(G)
    _check_generator(K)
    cap = max(G.degree_cap, K.degree_cap) if degree_cap is None else int(degree_cap)
    GK = poisson_bracket(G, K, cap)
    return (G.with_cap(cap) + K.with_cap(cap) + GK * 0.5
            + poisson_bracket(G, GK, cap) * (1 / 12) - poisson_bracket(K, GK, cap) * (1 / 12))


def cbd_exact_degree(G: TFSeries, K: TFSeries) -> int:
    """Highest generator degree on which the double-bracket truncation is exact."""
    lo = min(x.min_degree for x in (G, K) if len(x)) if (len(G) or len(K)) else 2
    return 4 * lo - 4


def _bracket_with_theta(f: TFSeries, j: int, left: bool) -> TFSeries:
    # {f, theta_j} = df/dI_j ; {theta_j, f} = -df/dI_j
    return f.diff_action(j) if left else -f.diff_action(j)


def symplecticity_defect(cmap: CoordinateMap, degree_cap: int | None = None,
                         box: DomainBox = DomainBox(0.1, 0.1),
                         exact_degree: int | None = None) -> float:
    """Largest majorant norm among the canonical-relation defects.

    The relations are ``{U_i, U_j} = 0``, ``{V_i, V_j} = 0`` and
    ``{U_i, V_j} = delta_ij`` with ``V_j = theta_j + v_j``.  A map whose
    coordinates are truncated at ``D`` is only reliable through degree
    ``D - 1`` (an ``I``-derivative of a dropped degree ``D + 1`` term lands
    there), so defects are restricted to degrees ``<= exact_degree``, which
    defaults to ``D - 1``.
    """
    d = cmap.dim
    cap = max(u.degree_cap for u in cmap.U) if degree_cap is None else int(degree_cap)
    top = cap - 1 if exact_degree is None else int(exact_degree)
    worst = 0.0

    def record(s: TFSeries):
        nonlocal worst
        worst = max(worst, majorant_norm(s.project_degrees(0, max(top, 0)), box))

    for i in range(d):
        for j in range(d):
            uv = _bracket_with_theta(cmap.U[i], j, True) + poisson_bracket(cmap.U[i], cmap.v[j], cap)
            if i == j:
                uv = uv - 1.0
            record(uv)
            if j > i:
                record(poisson_bracket(cmap.U[i], cmap.U[j], cap))
                vv = (_bracket_with_theta(cmap.v[j], i, False) + _bracket_with_theta(cmap.v[i], j, True)
                      + poisson_bracket(cmap.v[i], cmap.v[j], cap))
                record(vv)
    return worst
