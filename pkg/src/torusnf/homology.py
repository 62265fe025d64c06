"""The degenerate homological equation ``{N_0, F} = Q`` for ``N_0 = I^T Omega I``.

Mode by mode the equation reads ``Q_k(I) = 4 pi i <Omega k, I> F_k(I)``, so
each Fourier block of ``Q`` must be divisible by the linear form
``<Omega k, I>``.  Division is done per (mode, degree) block as a least
squares problem for the injective map "multiply by the linear form"; the
residual of that problem measures the failure of divisibility.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np
import scipy.linalg

from .series import DomainBox, TFSeries, majorant_norm

__all__ = [
    "DIVISIBILITY_RTOL",
    "ObstructionDetected",
    "QuadraticForm",
    "HomologySolution",
    "monomials",
    "linear_form",
    "divide_by_linear_form",
    "solve_homological",
    "homological_norm_ratio",
]

DIVISIBILITY_RTOL = 1e-9
FOUR_PI_I = 4j * np.pi


class ObstructionDetected(ArithmeticError):
    """A Fourier block of the right-hand side is not divisible by ``<Omega k, I>``.

    Attributes
    ----------
    residues : dict
        Residue norm per wave vector.
    mode : tuple
        The worst offending wave vector.
    """

    def __init__(self, residues: dict, mode: tuple, residue: float):
        self.residues = dict(residues)
        self.mode = mode
        self.residue = residue
        super().__init__(f"homological equation not formally solvable: mode {mode} has residue {residue:.3e}")


@dataclass(frozen=True)
class QuadraticForm:
    """Symmetric nondegenerate ``Omega``; ``N_0(I) = I^T Omega I``."""

    omega: np.ndarray
    det_floor: float = 1e-10

    def __post_init__(self):
        om = np.array(self.omega, dtype=float)
        if om.ndim == 0:
            om = om.reshape(1, 1)
        if om.ndim != 2 or om.shape[0] != om.shape[1]:
            raise ValueError(f"omega must be a square matrix, got shape {om.shape}")
        if np.max(np.abs(om - om.T), initial=0.0) > 1e-12:
            raise ValueError("omega is not symmetric")
        if abs(np.linalg.det(om)) <= self.det_floor:
            raise ValueError("omega is degenerate (|det| below floor)")
        om.setflags(write=False)
        object.__setattr__(self, "omega", om)

    @property
    def dim(self) -> int:
        return self.omega.shape[0]

    def n0(self, degree_cap: int = 2) -> TFSeries:
        d = self.dim
        keys, coeffs = [], []
        for a in range(d):
            for b in range(d):
                j = [0] * d
                j[a] += 1
                j[b] += 1
                keys.append(j + [0] * d)
                coeffs.append(self.omega[a, b])
        return TFSeries(d, degree_cap, keys, coeffs)

    def __eq__(self, other):
        return isinstance(other, QuadraticForm) and np.array_equal(self.omega, other.omega)

    def __hash__(self):
        return hash(self.omega.tobytes())


@dataclass
class HomologySolution:
    F: TFSeries
    absorbed: TFSeries
    residues: dict = field(default_factory=dict)

    @property
    def max_residue(self) -> float:
        return max(self.residues.values(), default=0.0)


@lru_cache(maxsize=None)
def monomials(dim: int, degree: int) -> tuple[tuple[int, ...], ...]:
    """Exponent vectors of total degree ``degree`` in a fixed order."""
    out = []
    for combo in combinations_with_replacement(range(dim), degree):
        e = [0] * dim
        for i in combo:
            e[i] += 1
        out.append(tuple(e))
    return tuple(sorted(out, reverse=True))


@lru_cache(maxsize=None)
def _monomial_index(dim: int, degree: int) -> dict:
    return {m: i for i, m in enumerate(monomials(dim, degree))}


def _multiplication_matrix(v: np.ndarray, e: int) -> np.ndarray:
    """Matrix of ``p -> (sum_i v_i I_i) p`` from degree ``e`` to ``e + 1``."""
    d = len(v)
    rows = _monomial_index(d, e + 1)
    cols = monomials(d, e)
    M = np.zeros((len(rows), len(cols)))
    for c, m in enumerate(cols):
        for i in range(d):
            if v[i] != 0:
                t = list(m)
                t[i] += 1
                M[rows[tuple(t)], c] += v[i]
    return M


class _Divider:
    """Cached orthogonal factorizations for one linear form."""

    def __init__(self, v: np.ndarray):
        self.v = np.asarray(v, dtype=float)
        self._qr: dict[int, tuple] = {}

    def factor(self, e: int):
        if e not in self._qr:
            M = _multiplication_matrix(self.v, e)
            Q, R = np.linalg.qr(M)
            self._qr[e] = (M, Q, R)
        return self._qr[e]

    def divide(self, p: np.ndarray, e: int) -> tuple[np.ndarray, float]:
        M, Q, R = self.factor(e)
        q = scipy.linalg.solve_triangular(R, Q.T @ p.real) + 1j * scipy.linalg.solve_triangular(R, Q.T @ p.imag)
        residue = float(scipy.linalg.norm(p - M @ q))
        return q, residue


def linear_form(omega: QuadraticForm, k) -> TFSeries:
    """The degree-one polynomial ``<Omega k, I>``."""
    v = omega.omega @ np.asarray(k, dtype=float)
    d = omega.dim
    keys = [[int(i == a) for i in range(d)] + [0] * d for a in range(d)]
    return TFSeries(d, 1, keys, v, prune=False)


def _as_block(p: TFSeries, e: int) -> np.ndarray:
    idx = _monomial_index(p.dim, e)
    vec = np.zeros(len(idx), dtype=complex)
    for j, _, c in p.terms():
        vec[idx[j]] += c
    return vec


def divide_by_linear_form(p: TFSeries, v: TFSeries) -> tuple[TFSeries, float]:
    """Least-squares quotient of a homogeneous action polynomial by a linear form.

    Returns the quotient ``q`` minimizing ``||p - v q||`` over polynomials of
    one degree less, and that minimal residual (coefficient 2-norm).
    """
    if not (p.is_action_only and v.is_action_only):
        raise ValueError("divide_by_linear_form works on theta-independent polynomials")
    if len(v) == 0:
        raise ZeroDivisionError("zero linear form")
    if set(v.degrees.tolist()) != {1}:
        raise ValueError("divisor must be homogeneous of degree one")
    d = p.dim
    if len(p) == 0:
        return TFSeries.zero(d, max(p.degree_cap - 1, 0)), 0.0
    degs = set(p.degrees.tolist())
    if len(degs) != 1:
        raise ValueError("dividend must be homogeneous")
    e1 = degs.pop()
    if e1 == 0:
        return TFSeries.zero(d, 0), float(scipy.linalg.norm(p.coeffs))
    vec = np.zeros(d)
    for j, _, c in v.terms():
        vec[j.index(1)] = c.real
    q, residue = _Divider(vec).divide(_as_block(p, e1), e1 - 1)
    cols = monomials(d, e1 - 1)
    quotient = TFSeries(d, max(p.degree_cap - 1, e1 - 1), [list(m) + [0] * d for m in cols], q)
    return quotient, residue


def solve_homological(omega: QuadraticForm, Q: TFSeries, tol: float = DIVISIBILITY_RTOL,
                      strict: bool = True, reference: dict | None = None) -> HomologySolution:
    """Solve ``{N_0, F} = Q`` with ``F`` of zero theta-average.

    The ``k = 0`` part of ``Q`` lies outside the range of ``{N_0, .}`` and is
    returned whole as ``absorbed``.  A block counts as divisible when its
    residual is at most ``tol`` times the coefficient norm of all of ``Q`` in
    the same degree, so cancellation noise in a nearly empty mode is not
    mistaken for an obstruction.  ``reference`` optionally maps a degree to
    the magnitude of the data ``Q`` was computed from; it raises the floor for
    blocks that are pure rounding residue of a cancellation.  In strict
    mode any non-divisible block raises :class:`ObstructionDetected` (after all
    blocks are examined, so the error carries every residue); otherwise the
    least-squares quotient is kept and residues are recorded.
    """
    if Q.dim != omega.dim:
        raise ValueError(f"dimension mismatch: omega is {omega.dim}x{omega.dim}, Q has dim {Q.dim}")
    d = Q.dim
    absorbed = Q.zero_mode()
    osc = Q.oscillating()
    residues: dict[tuple, float] = {}
    if len(osc) == 0:
        return HomologySolution(TFSeries.zero(d, Q.degree_cap), absorbed, residues)

    deg = osc.degrees
    kk = osc.k
    # group rows by (k, degree); canonical order keeps this deterministic
    order = np.lexsort([deg] + [kk[:, c] for c in range(d - 1, -1, -1)])
    keys_sorted = np.column_stack([kk[order], deg[order]])
    breaks = np.nonzero(np.any(np.diff(keys_sorted, axis=0) != 0, axis=1))[0] + 1
    groups = np.split(order, breaks)

    degree_scale = Q.block_norms()
    for e, v in (reference or {}).items():
        degree_scale[e] = max(degree_scale.get(e, 0.0), float(v))
    out_keys, out_coeffs = [], []
    worst = (0.0, None)
    dividers: dict[tuple, _Divider] = {}
    for rows in groups:
        k = tuple(int(x) for x in kk[rows[0]])
        e1 = int(deg[rows[0]])
        idx = _monomial_index(d, e1)
        p = np.zeros(len(idx), dtype=complex)
        for r in rows:
            p[idx[tuple(int(x) for x in osc.keys[r, :d])]] += osc.coeffs[r]
        if e1 == 0:
            q, residue = None, float(scipy.linalg.norm(p))
        else:
            if k not in dividers:
                dividers[k] = _Divider(omega.omega @ np.asarray(k, dtype=float))
            q, residue = dividers[k].divide(p, e1 - 1)
        residues[k] = float(np.hypot(residues.get(k, 0.0), residue))
        scale = max(float(scipy.linalg.norm(p)), degree_scale.get(e1, 0.0))
        if residue > tol * scale:
            rel = residue / scale
            if rel > worst[0]:
                worst = (rel, k)
        if q is not None:
            cols = monomials(d, e1 - 1)
            out_keys.extend(list(m) + list(k) for m in cols)
            out_coeffs.extend(q / FOUR_PI_I)
    if strict and worst[1] is not None:
        raise ObstructionDetected(residues, worst[1], residues[worst[1]])
    F = TFSeries(d, Q.degree_cap, out_keys, out_coeffs) if out_keys else TFSeries.zero(d, Q.degree_cap)
    return HomologySolution(F, absorbed, residues)


def homological_norm_ratio(F: TFSeries, Q: TFSeries, box: DomainBox, delta: float, gamma: float) -> float:
    """``|F|_{rho-delta, sigma-gamma} * delta * gamma**d / |Q|_{rho, sigma}``.

    An empirical reading of the constant in the tame estimate for the
    solution of the homological equation.
    """
    if not (0 < delta < box.rho and 0 < gamma < box.sigma):
        raise ValueError("need 0 < delta < rho and 0 < gamma < sigma")
    qn = majorant_norm(Q, box)
    if qn == 0:
        raise ZeroDivisionError("|Q| = 0")
    fn = majorant_norm(F, DomainBox(box.rho - delta, box.sigma - gamma))
    return fn * delta * gamma ** F.dim / qn
