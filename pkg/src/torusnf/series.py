"""Sparse truncated Taylor-Fourier series in d actions and d angles.

A series ``f(I, theta) = sum_{j,k} f_{j,k} I^j exp(2 pi i <k, theta>)`` is
stored as an integer key table (one row ``[j_1..j_d, k_1..k_d]`` per term)
and a matching complex coefficient vector.  Rows are kept in a canonical
order (I-degree, then j, then k) so that every derived quantity, including
serialized output, is deterministic.

Products and brackets are vectorized through an additive integer encoding of
the keys: with a base ``B`` large enough, ``code(a + b) = code(a) + code(b)``
and the code is injective, so aggregation of like terms is a sort plus a
weighted bincount.

Norm convention: the majorant norm takes the sup over the max-norm polydisc
``|I_i| <= rho`` and weights Fourier modes by ``exp(2 pi |k|_1 sigma)``.

Pruning: after every operation, a coefficient is dropped when its modulus is
at most ``PRUNE_RTOL`` times the largest modulus *within the same I-degree*.
The per-degree reference makes pruning commute with the action rescaling
``H(aI)/a**2`` used to enter the small-remainder regime.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np
import scipy.linalg

__all__ = [
    "PRUNE_RTOL",
    "DimensionMismatch",
    "DomainBox",
    "TFSeries",
    "add",
    "mul",
    "poisson_bracket",
    "project_degrees",
    "majorant_norm",
    "check_real_symmetric",
    "max_coeff_error",
]

PRUNE_RTOL = 1e-14
TWO_PI = 2.0 * np.pi

# pairs materialized at once inside mul/bracket; bounds peak memory
_PAIR_CHUNK = 2_000_000
_CODE_LIMIT = 2**62


class DimensionMismatch(ValueError):
    """Raised when two series over different numbers of degrees of freedom meet."""


@dataclass(frozen=True)
class DomainBox:
    """Complex domain ``|I_i| < rho``, ``|Im theta_i| < sigma``."""

    rho: float
    sigma: float

    def __post_init__(self):
        if not (self.rho > 0 and self.sigma > 0):
            raise ValueError(f"DomainBox needs rho > 0 and sigma > 0, got {self.rho}, {self.sigma}")


# ---------------------------------------------------------------------------
# key encoding
# ---------------------------------------------------------------------------

def _base_for(max_j: int, max_k: int) -> int:
    return max(int(max_j) + 1, 2 * int(max_k) + 2, 2)


def _powers(base: int, dim: int) -> np.ndarray | None:
    if base ** (2 * dim) >= _CODE_LIMIT:
        return None
    return base ** np.arange(2 * dim, dtype=np.int64)


def _encode(keys: np.ndarray, pw: np.ndarray) -> np.ndarray:
    return keys.astype(np.int64) @ pw


def _decode(codes: np.ndarray, base: int, dim: int) -> np.ndarray:
    x = codes.astype(np.int64).copy()
    out = np.empty((x.size, 2 * dim), dtype=np.int64)
    half = base // 2
    for p in range(2 * dim):
        r = np.mod(x, base)
        if p >= dim:
            r = np.where(r >= half, r - base, r)
        out[:, p] = r
        x = (x - r) // base
    return out


def _sum_like_terms(keys: np.ndarray, coeffs: np.ndarray, dim: int,
                    base: int | None = None, codes: np.ndarray | None = None):
    """Merge duplicate keys, summing coefficients."""
    if keys is not None and len(keys) == 0 or codes is not None and len(codes) == 0:
        return np.zeros((0, 2 * dim), dtype=np.int64), np.zeros(0, dtype=complex)
    if codes is None:
        base = _base_for(keys[:, :dim].max(), np.abs(keys[:, dim:]).max())
        pw = _powers(base, dim)
        if pw is None:
            uk, inv = np.unique(keys, axis=0, return_inverse=True)
            inv = inv.ravel()
            re = np.bincount(inv, weights=coeffs.real, minlength=len(uk))
            im = np.bincount(inv, weights=coeffs.imag, minlength=len(uk))
            return uk.astype(np.int64), re + 1j * im
        codes = _encode(keys, pw)
    uc, inv = np.unique(codes, return_inverse=True)
    re = np.bincount(inv, weights=coeffs.real, minlength=len(uc))
    im = np.bincount(inv, weights=coeffs.imag, minlength=len(uc))
    return _decode(uc, base, dim), re + 1j * im


def _prune(keys: np.ndarray, coeffs: np.ndarray, dim: int, rtol: float = PRUNE_RTOL):
    if len(coeffs) == 0:
        return keys, coeffs
    mag = np.abs(coeffs)
    deg = keys[:, :dim].sum(axis=1)
    ref = np.zeros(int(deg.max()) + 1)
    np.maximum.at(ref, deg, mag)
    keep = mag > rtol * ref[deg]
    return keys[keep], coeffs[keep]


def _canonical(keys: np.ndarray, coeffs: np.ndarray, dim: int):
    if len(coeffs) == 0:
        return keys, coeffs
    deg = keys[:, :dim].sum(axis=1)
    cols = [keys[:, c] for c in range(2 * dim - 1, -1, -1)] + [deg]
    order = np.lexsort(cols)
    return keys[order], coeffs[order]


# ---------------------------------------------------------------------------
# the series type
# ---------------------------------------------------------------------------

class TFSeries:
    """Immutable sparse Taylor-Fourier series.

    Parameters
    ----------
    dim : int
        Number of action/angle pairs ``d``.
    degree_cap : int
        Terms with total I-degree above the cap are discarded.
    keys : array_like of int, shape (n, 2*dim), optional
        Rows ``[j, k]``; duplicate rows are summed.
    coeffs : array_like of complex, shape (n,), optional
    prune : bool
        Apply the per-degree relative prune (default True).
    """

    __slots__ = ("dim", "degree_cap", "keys", "coeffs", "_codes", "_index")

    def __init__(self, dim: int, degree_cap: int, keys=None, coeffs=None, *, prune: bool = True):
        if dim < 1:
            raise ValueError("dim must be positive")
        if degree_cap < 0:
            raise ValueError("degree_cap must be non-negative")
        if keys is None:
            keys = np.zeros((0, 2 * dim), dtype=np.int64)
            coeffs = np.zeros(0, dtype=complex)
        keys = np.asarray(keys, dtype=np.int64).reshape(-1, 2 * dim)
        coeffs = np.asarray(coeffs, dtype=complex).reshape(-1)
        if len(keys) != len(coeffs):
            raise ValueError("keys and coeffs differ in length")
        if np.any(keys[:, :dim] < 0):
            raise ValueError("negative action exponent")
        within = keys[:, :dim].sum(axis=1) <= degree_cap
        keys, coeffs = _sum_like_terms(keys[within], coeffs[within], dim)
        self._set(dim, degree_cap, keys, coeffs, prune)

    def _set(self, dim, degree_cap, keys, coeffs, prune):
        if prune:
            keys, coeffs = _prune(keys, coeffs, dim)
        else:
            nz = coeffs != 0
            keys, coeffs = keys[nz], coeffs[nz]
        keys, coeffs = _canonical(keys, coeffs, dim)
        keys.setflags(write=False)
        coeffs.setflags(write=False)
        object.__setattr__(self, "dim", int(dim))
        object.__setattr__(self, "degree_cap", int(degree_cap))
        object.__setattr__(self, "keys", keys)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "_codes", None)
        object.__setattr__(self, "_index", None)

    @classmethod
    def _raw(cls, dim, degree_cap, keys, coeffs, prune=True) -> "TFSeries":
        # keys already unique
        obj = cls.__new__(cls)
        obj._set(dim, degree_cap, keys, coeffs, prune)
        return obj

    def __setattr__(self, name, value):
        raise AttributeError("TFSeries is immutable")

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls, dim: int, degree_cap: int) -> "TFSeries":
        return cls(dim, degree_cap)

    @classmethod
    def constant(cls, dim: int, degree_cap: int, c: complex) -> "TFSeries":
        return cls(dim, degree_cap, [[0] * (2 * dim)], [c])

    @classmethod
    def monomial(cls, dim: int, degree_cap: int, j: Sequence[int], k: Sequence[int] | None = None,
                 c: complex = 1.0) -> "TFSeries":
        k = [0] * dim if k is None else list(k)
        if len(j) != dim or len(k) != dim:
            raise DimensionMismatch("exponent vectors must have length dim")
        return cls(dim, degree_cap, [list(j) + k], [c])

    @classmethod
    def action(cls, dim: int, i: int, degree_cap: int = 1) -> "TFSeries":
        """The coordinate function ``I_i``."""
        j = [0] * dim
        j[i] = 1
        return cls.monomial(dim, degree_cap, j)

    @classmethod
    def from_terms(cls, dim: int, degree_cap: int,
                   terms: Mapping[tuple, complex] | Iterable[tuple]) -> "TFSeries":
        """Build from ``{(j, k): c}`` or an iterable of ``(j, k, c)``."""
        if isinstance(terms, Mapping):
            items = list(terms.items())
        else:
            items = [((t[0], t[1]), t[2]) for t in terms]
        keys, coeffs = [], []
        for (j, k), c in items:
            if len(j) != dim or len(k) != dim:
                raise DimensionMismatch("exponent vectors must have length dim")
            keys.append(list(j) + list(k))
            coeffs.append(c)
        return cls(dim, degree_cap, keys, coeffs)

    # -- basic accessors ----------------------------------------------------

    def __len__(self) -> int:
        return len(self.coeffs)

    def __bool__(self) -> bool:
        return len(self.coeffs) > 0

    def __repr__(self) -> str:
        return f"TFSeries(dim={self.dim}, degree_cap={self.degree_cap}, nterms={len(self)})"

    @property
    def j(self) -> np.ndarray:
        return self.keys[:, :self.dim]

    @property
    def k(self) -> np.ndarray:
        return self.keys[:, self.dim:]

    @property
    def degrees(self) -> np.ndarray:
        return self.keys[:, :self.dim].sum(axis=1)

    @property
    def min_degree(self) -> int | None:
        return int(self.degrees.min()) if len(self) else None

    @property
    def max_degree(self) -> int | None:
        return int(self.degrees.max()) if len(self) else None

    @property
    def max_mode(self) -> int:
        return int(np.abs(self.k).max()) if len(self) else 0

    def terms(self) -> Iterator[tuple[tuple[int, ...], tuple[int, ...], complex]]:
        for row, c in zip(self.keys, self.coeffs):
            yield tuple(int(x) for x in row[:self.dim]), tuple(int(x) for x in row[self.dim:]), complex(c)

    def _lookup(self):
        if self._index is None:
            base = _base_for(self.degree_cap, self.max_mode + 1)
            pw = _powers(base, self.dim)
            if pw is None:
                index = {tuple(r): i for i, r in enumerate(self.keys.tolist())}
                object.__setattr__(self, "_index", ("dict", index))
            else:
                codes = _encode(self.keys, pw)
                order = np.argsort(codes)
                object.__setattr__(self, "_index", ("codes", pw, codes[order], order))
        return self._index

    def find(self, keys: np.ndarray) -> np.ndarray:
        """Row indices of the given keys, ``-1`` where absent."""
        keys = np.asarray(keys, dtype=np.int64).reshape(-1, 2 * self.dim)
        out = np.full(len(keys), -1, dtype=np.int64)
        if len(self) == 0 or len(keys) == 0:
            return out
        idx = self._lookup()
        if idx[0] == "dict":
            for n, r in enumerate(keys.tolist()):
                out[n] = idx[1].get(tuple(r), -1)
            return out
        _, pw, sorted_codes, order = idx
        base = int(pw[1]) if len(pw) > 1 else 2
        ok = (keys[:, :self.dim] >= 0).all(axis=1) & (keys[:, :self.dim] < base).all(axis=1) \
            & (np.abs(keys[:, self.dim:]) < base // 2).all(axis=1)
        codes = _encode(keys[ok], pw)
        pos = np.searchsorted(sorted_codes, codes)
        pos = np.minimum(pos, len(sorted_codes) - 1)
        hit = sorted_codes[pos] == codes
        res = np.where(hit, order[pos], -1)
        out[np.nonzero(ok)[0]] = res
        return out

    def coeff(self, j: Sequence[int], k: Sequence[int] | None = None) -> complex:
        k = [0] * self.dim if k is None else list(k)
        i = self.find(np.array([list(j) + k]))[0]
        return complex(self.coeffs[i]) if i >= 0 else 0j

    def as_dict(self) -> dict[tuple[tuple[int, ...], tuple[int, ...]], complex]:
        return {(j, k): c for j, k, c in self.terms()}

    # -- structural helpers -------------------------------------------------

    def _select(self, mask: np.ndarray, degree_cap: int | None = None) -> "TFSeries":
        return TFSeries._raw(self.dim, self.degree_cap if degree_cap is None else degree_cap,
                             self.keys[mask].copy(), self.coeffs[mask].copy(), prune=False)

    def with_cap(self, degree_cap: int) -> "TFSeries":
        return self._select(self.degrees <= degree_cap, degree_cap)

    def project_degrees(self, lo: int, hi: int) -> "TFSeries":
        if lo < 0 or hi < lo:
            raise ValueError(f"need 0 <= lo <= hi, got {lo}, {hi}")
        d = self.degrees
        return self._select((d >= lo) & (d <= hi))

    def homogeneous(self, e: int) -> "TFSeries":
        return self.project_degrees(e, e)

    def zero_mode(self) -> "TFSeries":
        """The theta-average (all ``k = 0`` terms)."""
        return self._select(~self.k.any(axis=1))

    def oscillating(self) -> "TFSeries":
        """All terms with ``k != 0``."""
        return self._select(self.k.any(axis=1))

    def mode(self, k: Sequence[int]) -> "TFSeries":
        return self._select((self.k == np.asarray(k)).all(axis=1))

    @property
    def is_action_only(self) -> bool:
        return not self.k.any()

    def modes(self) -> list[tuple[int, ...]]:
        if len(self) == 0:
            return []
        return [tuple(int(x) for x in r) for r in np.unique(self.k, axis=0)]

    def block_norms(self) -> dict[int, float]:
        """Coefficient 2-norm of each homogeneous degree block."""
        out: dict[int, float] = {}
        for e in np.unique(self.degrees):
            out[int(e)] = float(scipy.linalg.norm(self.coeffs[self.degrees == e]))
        return out

    # -- arithmetic ---------------------------------------------------------

    def _check(self, other: "TFSeries"):
        if not isinstance(other, TFSeries):
            raise TypeError(f"expected TFSeries, got {type(other).__name__}")
        if other.dim != self.dim:
            raise DimensionMismatch(f"dim {self.dim} vs {other.dim}")

    def __add__(self, other):
        if isinstance(other, TFSeries):
            return add(self, other)
        if np.isscalar(other):
            return add(self, TFSeries.constant(self.dim, self.degree_cap, other))
        return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        return TFSeries._raw(self.dim, self.degree_cap, self.keys.copy(), -self.coeffs, prune=False)

    def __sub__(self, other):
        if isinstance(other, TFSeries):
            return add(self, -other)
        if np.isscalar(other):
            return self + (-other)
        return NotImplemented

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, TFSeries):
            return mul(self, other)
        if np.isscalar(other):
            return TFSeries._raw(self.dim, self.degree_cap, self.keys.copy(), self.coeffs * other)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if np.isscalar(other):
            return self * (1.0 / other)
        return NotImplemented

    def conj(self) -> "TFSeries":
        """Coefficientwise conjugate with ``k -> -k`` (the real-symmetric partner)."""
        keys = self.keys.copy()
        keys[:, self.dim:] *= -1
        return TFSeries._raw(self.dim, self.degree_cap, keys, np.conj(self.coeffs), prune=False)

    def diff_action(self, i: int) -> "TFSeries":
        """``d/dI_i``."""
        ji = self.keys[:, i]
        m = ji > 0
        keys = self.keys[m].copy()
        keys[:, i] -= 1
        return TFSeries._raw(self.dim, self.degree_cap, keys, self.coeffs[m] * ji[m], prune=False)

    def diff_angle(self, i: int) -> "TFSeries":
        """``d/dtheta_i`` (mode ``k`` picks up ``2 pi i k_i``)."""
        ki = self.keys[:, self.dim + i]
        m = ki != 0
        return TFSeries._raw(self.dim, self.degree_cap, self.keys[m].copy(),
                             self.coeffs[m] * (1j * TWO_PI * ki[m]), prune=False)

    def scale_actions(self, a: float) -> "TFSeries":
        """Coefficient of ``(j, k)`` times ``a**|j|``."""
        return TFSeries._raw(self.dim, self.degree_cap, self.keys.copy(),
                             self.coeffs * np.power(float(a), self.degrees.astype(float)), prune=False)

    def __call__(self, I, theta) -> np.ndarray:
        """Evaluate at points; ``I`` and ``theta`` have shape ``(..., dim)``."""
        I = np.asarray(I, dtype=complex)
        theta = np.asarray(theta, dtype=complex)
        shape = I.shape[:-1]
        I2 = I.reshape(-1, self.dim)
        t2 = theta.reshape(-1, self.dim)
        if len(self) == 0:
            return np.zeros(shape, dtype=complex)
        mon = np.prod(I2[:, None, :] ** self.j[None, :, :], axis=2)
        phase = np.exp(1j * TWO_PI * (t2 @ self.k.T.astype(float)))
        return (mon * phase @ self.coeffs).reshape(shape)

    # -- serialization ------------------------------------------------------

    def to_records(self) -> list[dict]:
        return [{"j": list(j), "k": list(k), "re": c.real, "im": c.imag} for j, k, c in self.terms()]

    def to_dict(self) -> dict:
        return {"dim": self.dim, "degree_cap": self.degree_cap, "terms": self.to_records()}

    @classmethod
    def from_records(cls, dim: int, degree_cap: int, records: Iterable[Mapping]) -> "TFSeries":
        keys, coeffs = [], []
        for r in records:
            j, k = list(r["j"]), list(r["k"])
            if len(j) != dim or len(k) != dim:
                raise DimensionMismatch(f"record {r!r} does not match dim {dim}")
            keys.append(j + k)
            coeffs.append(complex(float(r.get("re", 0.0)), float(r.get("im", 0.0))))
        return cls(dim, degree_cap, keys, coeffs, prune=False)

    @classmethod
    def from_dict(cls, doc: Mapping) -> "TFSeries":
        return cls.from_records(int(doc["dim"]), int(doc["degree_cap"]), doc["terms"])

    def dumps(self) -> str:
        # repr-based float output is the shortest string that round-trips exactly
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def loads(cls, text: str) -> "TFSeries":
        return cls.from_dict(json.loads(text))

    def identical(self, other: "TFSeries") -> bool:
        """Bitwise equality of keys and coefficients."""
        return (self.dim == other.dim and self.degree_cap == other.degree_cap
                and self.keys.shape == other.keys.shape
                and bool(np.array_equal(self.keys, other.keys))
                and bool(np.array_equal(self.coeffs, other.coeffs)))


# ---------------------------------------------------------------------------
# algebra
# ---------------------------------------------------------------------------

def add(f: TFSeries, g: TFSeries, *, prune: bool = True) -> TFSeries:
    """Coefficientwise sum; the result carries the larger degree cap."""
    f._check(g)
    keys = np.concatenate([f.keys, g.keys])
    coeffs = np.concatenate([f.coeffs, g.coeffs])
    keys, coeffs = _sum_like_terms(keys, coeffs, f.dim)
    return TFSeries._raw(f.dim, max(f.degree_cap, g.degree_cap), keys, coeffs, prune=prune)


def _pair_loop(f: TFSeries, g: TFSeries, cap: int, shift: int):
    """Yield index pairs ``(ia, ib)`` with ``deg_a + deg_b + shift <= cap``, in chunks."""
    if len(f) == 0 or len(g) == 0:
        return
    da, db = f.degrees, g.degrees
    order_b = np.argsort(db, kind="stable")
    db_sorted = db[order_b]
    # number of admissible partners for each row of f
    counts = np.searchsorted(db_sorted, cap - shift - da, side="right")
    cum = np.cumsum(counts)
    total = int(cum[-1])
    if total == 0:
        return
    cuts = np.searchsorted(cum, np.arange(1, total // _PAIR_CHUNK + 1) * _PAIR_CHUNK)
    edges = np.unique(np.concatenate([[0], cuts, [len(f)]]))
    for start, stop in zip(edges[:-1], edges[1:]):
        c = counts[start:stop]
        tot = int(c.sum())
        if tot == 0:
            continue
        ia = np.repeat(np.arange(start, stop), c)
        offsets = np.arange(tot) - np.repeat(np.cumsum(c) - c, c)
        yield ia, order_b[offsets]


def _product_base(f: TFSeries, g: TFSeries, cap: int):
    base = _base_for(cap, f.max_mode + g.max_mode)
    return base, _powers(base, f.dim)


def _reduce(chunks, dim, base, cap, prune=True):
    if not chunks:
        return TFSeries.zero(dim, cap)
    codes = np.concatenate([c for c, _ in chunks])
    vals = np.concatenate([v for _, v in chunks])
    keys, coeffs = _sum_like_terms(None, vals, dim, base=base, codes=codes)
    return TFSeries._raw(dim, cap, keys, coeffs, prune=prune)


def _partial_reduce(codes, vals):
    uc, inv = np.unique(codes, return_inverse=True)
    re = np.bincount(inv, weights=vals.real, minlength=len(uc))
    im = np.bincount(inv, weights=vals.imag, minlength=len(uc))
    return uc, re + 1j * im


def mul(f: TFSeries, g: TFSeries, degree_cap: int | None = None) -> TFSeries:
    """Truncated Cauchy product; terms above ``degree_cap`` are discarded."""
    f._check(g)
    cap = max(f.degree_cap, g.degree_cap) if degree_cap is None else int(degree_cap)
    base, pw = _product_base(f, g, cap)
    if pw is None:
        return _mul_slow(f, g, cap)
    ca, cb = _encode(f.keys, pw), _encode(g.keys, pw)
    chunks = []
    for ia, ib in _pair_loop(f, g, cap, 0):
        chunks.append(_partial_reduce(ca[ia] + cb[ib], f.coeffs[ia] * g.coeffs[ib]))
    return _reduce(chunks, f.dim, base, cap)


def _mul_slow(f, g, cap):
    keys, vals = [], []
    for ia, ib in _pair_loop(f, g, cap, 0):
        keys.append(f.keys[ia] + g.keys[ib])
        vals.append(f.coeffs[ia] * g.coeffs[ib])
    if not keys:
        return TFSeries.zero(f.dim, cap)
    return TFSeries(f.dim, cap, np.concatenate(keys), np.concatenate(vals))


def poisson_bracket(g: TFSeries, f: TFSeries, degree_cap: int | None = None) -> TFSeries:
    """``{g, f} = sum_i dg/dI_i df/dtheta_i - dg/dtheta_i df/dI_i``, truncated.

    With this sign the time-t flow of ``f`` satisfies
    ``d/dt (g o X_f^t) = {g, f} o X_f^t``.
    """
    g._check(f)
    cap = max(f.degree_cap, g.degree_cap) if degree_cap is None else int(degree_cap)
    if g is f or g.identical(f):
        # antisymmetry; summing the pair terms would leave rounding residue
        return TFSeries.zero(g.dim, cap)
    d = g.dim
    base, pw = _product_base(g, f, cap)
    if pw is None:
        return _bracket_slow(g, f, cap)
    ca, cb = _encode(g.keys, pw), _encode(f.keys, pw)
    chunks = []
    for ia, ib in _pair_loop(g, f, cap, -1):
        prod = g.coeffs[ia] * f.coeffs[ib]
        base_code = ca[ia] + cb[ib]
        codes, vals = [], []
        for i in range(d):
            w = g.keys[ia, i] * f.keys[ib, d + i] - g.keys[ia, d + i] * f.keys[ib, i]
            m = w != 0
            if not m.any():
                continue
            codes.append(base_code[m] - pw[i])
            vals.append(prod[m] * (1j * TWO_PI) * w[m])
        if codes:
            chunks.append(_partial_reduce(np.concatenate(codes), np.concatenate(vals)))
    return _reduce(chunks, d, base, cap)


def _bracket_slow(g, f, cap):
    out = TFSeries.zero(g.dim, cap)
    for i in range(g.dim):
        out = out + mul(g.diff_action(i), f.diff_angle(i), cap) - mul(g.diff_angle(i), f.diff_action(i), cap)
    return out


def project_degrees(f: TFSeries, lo: int, hi: int) -> TFSeries:
    """Keep exactly the terms with ``lo <= |j|_1 <= hi``."""
    return f.project_degrees(lo, hi)


def majorant_norm(f: TFSeries, box: DomainBox) -> float:
    """``sum |f_jk| rho^|j| exp(2 pi |k|_1 sigma)``."""
    if len(f) == 0:
        return 0.0
    with np.errstate(over="ignore"):
        w = np.power(box.rho, f.degrees.astype(float)) * np.exp(TWO_PI * box.sigma * np.abs(f.k).sum(axis=1))
        return float(np.sum(np.abs(f.coeffs) * w))


def check_real_symmetric(f: TFSeries, tol: float = 1e-12) -> tuple[bool, float]:
    """Check ``coeff(j, -k) == conj(coeff(j, k))``; returns ``(ok, worst defect)``."""
    if len(f) == 0:
        return True, 0.0
    partner_keys = f.keys.copy()
    partner_keys[:, f.dim:] *= -1
    idx = f.find(partner_keys)
    partner = np.where(idx >= 0, f.coeffs[np.maximum(idx, 0)], 0)
    defect = np.abs(partner - np.conj(f.coeffs))
    worst = float(defect.max())
    return worst <= tol, worst


def max_coeff_error(f: TFSeries, g: TFSeries, relative: bool = True) -> float:
    """Largest coefficientwise ``|f - g|``, optionally over ``max |g|`` (no pruning)."""
    f._check(g)
    diff = add(f, -g, prune=False)
    err = float(np.abs(diff.coeffs).max()) if len(diff) else 0.0
    if not relative:
        return err
    scale = float(np.abs(g.coeffs).max()) if len(g) else 0.0
    if scale == 0.0:
        scale = float(np.abs(f.coeffs).max()) if len(f) else 0.0
    return err / scale if scale > 0 else err
