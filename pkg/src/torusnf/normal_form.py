"""Normal forms of the type ``N = B(N_0) = N_0 + sum_j b_j N_0^j``.

Under this structure the bracket with any truncation of ``N`` factors through
``{N_0, .}``: ``{N_0^j, F} = j N_0^(j-1) {N_0, F}``.  The multipliers
``g_(2j) = j b_j N_0^(j-1)`` (with ``g_2 = 1`` and odd ones zero) carry that
factorization into the degree-by-degree Newton solve.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .homology import QuadraticForm
from .series import TFSeries, mul

__all__ = [
    "A3Violation",
    "NormalFormProfile",
    "A3Fit",
    "n0_powers",
    "verify_A3",
    "scale_hamiltonian",
]

A3_RTOL = 1e-8


class A3Violation(ArithmeticError):
    """The computed normal form is not a function of ``N_0`` alone."""

    def __init__(self, fit: "A3Fit"):
        self.fit = fit
        bad = ", ".join(f"degree {e}: {r:.3e}" for e, r in sorted(fit.failures().items()))
        super().__init__(f"normal form is not of the form B(N_0); relative residuals {bad}")


def n0_powers(omega: QuadraticForm, top: int, degree_cap: int) -> list[TFSeries]:
    """``[1, N_0, N_0^2, ...]`` up to ``N_0^top``."""
    d = omega.dim
    n0 = omega.n0(degree_cap)
    out = [TFSeries.constant(d, degree_cap, 1.0)]
    for _ in range(top):
        out.append(mul(out[-1], n0, degree_cap))
    return out


@dataclass(frozen=True)
class NormalFormProfile:
    """``omega`` and ``b = (b_2, b_3, ...)``; ``b[0]`` is the coefficient of ``N_0^2``."""

    omega: QuadraticForm
    b: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "b", tuple(float(x) for x in self.b))

    @property
    def dim(self) -> int:
        return self.omega.dim

    def coefficient(self, j: int) -> float:
        """``b_j`` with ``b_1 = 1`` and zero beyond the stored list."""
        if j == 1:
            return 1.0
        if j < 1 or j - 2 >= len(self.b):
            return 0.0
        return self.b[j - 2]

    def normal_form(self, degree_cap: int) -> TFSeries:
        """``B(N_0)`` truncated at ``degree_cap``."""
        pw = n0_powers(self.omega, degree_cap // 2, degree_cap)
        out = pw[1]
        for j in range(2, degree_cap // 2 + 1):
            if self.coefficient(j):
                out = out + pw[j] * self.coefficient(j)
        return out

    def multiplier(self, a: int, degree_cap: int) -> TFSeries:
        """``g_a``: ``j b_j N_0^(j-1)`` for ``a = 2j``, zero for odd ``a``."""
        d = self.dim
        if a % 2 or a < 2:
            return TFSeries.zero(d, degree_cap)
        j = a // 2
        c = j * self.coefficient(j)
        if c == 0:
            return TFSeries.zero(d, degree_cap)
        return n0_powers(self.omega, j - 1, degree_cap)[j - 1] * c

    def scaled(self, a: float) -> "NormalFormProfile":
        """Profile after ``H -> H(aI)/a^2``: ``b_j -> b_j a^(2(j-1))``."""
        return NormalFormProfile(self.omega, tuple(bj * a ** (2 * (j + 1)) for j, bj in enumerate(self.b)))


@dataclass
class A3Fit:
    """Per-degree least-squares fit of ``N^[e]`` against ``N_0^(e/2)``."""

    b: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)
    relative: dict = field(default_factory=dict)
    tol: float = A3_RTOL

    def failures(self) -> dict:
        return {e: r for e, r in self.relative.items() if r > self.tol}

    @property
    def passed(self) -> bool:
        return not self.failures()

    def profile(self, omega: QuadraticForm) -> NormalFormProfile:
        top = max(self.b, default=1)
        return NormalFormProfile(omega, tuple(self.b.get(j, 0.0) for j in range(2, top + 1)))


def _aligned(p: TFSeries, q: TFSeries) -> tuple[np.ndarray, np.ndarray]:
    keys = sorted(set(p.as_dict()) | set(q.as_dict()))
    pd, qd = p.as_dict(), q.as_dict()
    return (np.array([pd.get(key, 0.0) for key in keys], dtype=complex),
            np.array([qd.get(key, 0.0) for key in keys], dtype=complex))


def verify_A3(N: TFSeries, omega: QuadraticForm, tol: float = A3_RTOL,
              scale: dict | None = None) -> A3Fit:
    """Fit ``b_j`` degree by degree and report how far ``N`` is from ``B(N_0)``.

    Odd degrees and any ``k != 0`` content count as residual in full.  The
    relative residual of degree ``e`` divides by ``max(|N^[e]|, scale[e])``;
    ``scale`` lets a caller supply the roundoff scale of the data the block
    was extracted from, so that cancellation noise in a block that should be
    empty is not mistaken for a violation.
    """
    scale = scale or {}
    fit = A3Fit(tol=tol)
    if len(N) == 0:
        return fit
    if N.min_degree < 2:
        raise ValueError("normal form must start at degree 2")
    cap = N.max_degree
    powers = n0_powers(omega, cap // 2, cap)
    for e in range(2, cap + 1):
        block = N.homogeneous(e)
        ref = max(float(scipy.linalg.norm(block.coeffs)), float(scale.get(e, 0.0)))
        if len(block) == 0:
            continue
        stray = block.oscillating()
        block = block.zero_mode()
        if e % 2:
            residual = float(np.hypot(scipy.linalg.norm(block.coeffs), scipy.linalg.norm(stray.coeffs)))
        else:
            p, q = _aligned(block, powers[e // 2])
            bj = float(np.real(np.vdot(q, p)) / np.real(np.vdot(q, q)))
            fit.b[e // 2] = bj
            residual = float(np.hypot(scipy.linalg.norm(p - bj * q), scipy.linalg.norm(stray.coeffs)))
        fit.residuals[e] = residual
        fit.relative[e] = residual / ref if ref > 0 else 0.0
    return fit


def scale_hamiltonian(H: TFSeries, a: float) -> TFSeries:
    """``H(aI, theta) / a^2``: the ``(j, k)`` coefficient picks up ``a^(|j|-2)``.

    Coefficients that underflow to zero are dropped.
    """
    if not a > 0:
        raise ValueError(f"scale factor must be positive, got {a}")
    if len(H) == 0:
        return H
    with np.errstate(under="ignore"):
        factor = np.power(float(a), H.degrees.astype(float) - 2.0)
    keep = factor != 0
    return TFSeries(H.dim, H.degree_cap, H.keys[keep], H.coeffs[keep] * factor[keep])
