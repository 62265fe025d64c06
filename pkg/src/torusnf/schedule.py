"""Constants of the Newton iteration and the closed-form inequalities they satisfy.

    kappa = d + 6                 b = 2^-(kappa + 3)
    delta_0 = rho_0 2^-(kappa+6)  delta_(n+1) = delta_n / 2
    q_n = (2b)^(2^-(n+1))         rho_(n+1) = (rho_n - 3 delta_n) q_n
    m_n = 2^n + 1

Quantities like ``q_n^(m_(n+1)+1)`` are evaluated through logarithms so
nothing overflows or underflows over the default 64-step horizon.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.signal import lfilter

__all__ = [
    "DEFAULT_HORIZON",
    "ConstantsSchedule",
    "LedgerRow",
    "build",
    "check_convergence_chain",
    "rho_limit_bracket",
    "majorant_recursion",
]

DEFAULT_HORIZON = 64
FAMILIES = ("a", "b", "c", "d", "e")


@dataclass(frozen=True)
class ConstantsSchedule:
    dim: int
    rho0: float
    horizon: int
    kappa: int
    b: float
    delta: tuple
    q: tuple
    rho: tuple
    m: tuple

    def box_radius(self, n: int) -> float:
        return self.rho[n]

    def shrunk_radius(self, n: int) -> float:
        """``rho_n - 3 delta_n``, the radius on which the step-``n`` map is controlled."""
        return self.rho[n] - 3 * self.delta[n]

    def remainder_bound(self, n: int) -> float:
        """``delta_n^kappa``."""
        return self.delta[n] ** self.kappa


def build(d: int, rho0: float, horizon: int = DEFAULT_HORIZON, *, delta0: float | None = None) -> ConstantsSchedule:
    """Materialize every sequence for ``n = 0..horizon``.

    ``delta0`` overrides the prescribed ``rho_0 2^-(kappa+6)``; it exists to
    plant violations in the ledger.
    """
    if int(d) != d or d < 1:
        raise ValueError(f"dimension must be a positive integer, got {d}")
    if not 0 < rho0 <= 1:
        raise ValueError(f"rho0 must lie in (0, 1], got {rho0}")
    if int(horizon) != horizon or horizon < 1:
        raise ValueError(f"horizon must be a positive integer, got {horizon}")
    d, horizon = int(d), int(horizon)
    kappa = d + 6
    b = math.ldexp(1.0, -(kappa + 3))
    d0 = rho0 * math.ldexp(1.0, -(kappa + 6)) if delta0 is None else float(delta0)
    delta = tuple(math.ldexp(d0, -n) for n in range(horizon + 1))
    q = tuple((2 * b) ** math.ldexp(1.0, -(n + 1)) for n in range(horizon + 1))
    rho = [float(rho0)]
    for n in range(horizon):
        rho.append((rho[n] - 3 * delta[n]) * q[n])
    m = tuple(2**n + 1 for n in range(horizon + 1))
    return ConstantsSchedule(d, float(rho0), horizon, kappa, b, delta, q, tuple(rho), m)


@dataclass(frozen=True)
class LedgerRow:
    family: str
    n: int
    lhs: float
    rhs: float
    passed: bool

    def as_dict(self) -> dict:
        return asdict(self)


def _tail_sum(delta0: float, n: int) -> float:
    # delta_j = delta_0 2^-j is exact in binary; 1100 terms reach below the subnormal range
    return math.fsum(math.ldexp(delta0, -j) for j in range(n, n + 1100))


def check_convergence_chain(s: ConstantsSchedule, rtol: float = 1e-15) -> list[LedgerRow]:
    """One row per family per ``n = 0..horizon-1``.

    a. ``3 sum_(k<=n) delta_k <= 6 delta_0 < b rho_0``
    b. ``rho_(n+1) > b rho_0``
    c. ``prod_(j<=n) q_j >= 2b``
    d. ``q_n^(m_(n+1)+1) < 2b``
    e. ``sum_(j>=n) delta_j = 2^(1-n) delta_0`` (relative ``rtol``)
    """
    rows = []
    brho = s.b * s.rho0
    log2b = math.log(2 * s.b)
    partial = 0.0
    log_prod = 0.0
    for n in range(s.horizon):
        partial += s.delta[n]
        lhs = 3 * partial
        rows.append(LedgerRow("a", n, lhs, brho, lhs <= 6 * s.delta[0] and 6 * s.delta[0] < brho))
        rows.append(LedgerRow("b", n, s.rho[n + 1], brho, s.rho[n + 1] > brho))
        # log q_n is exact in binary; log(q_n) of the rounded q_n loses the margin once n ~ 30
        log_q = math.ldexp(log2b, -(n + 1))
        log_prod += log_q
        rows.append(LedgerRow("c", n, math.exp(log_prod), 2 * s.b, log_prod >= log2b - 1e-15 * abs(log2b)))
        # (m+1) 2^-(n+1) = 1 + excess; the product alone stops resolving excess past n ~ 52
        margin = math.ldexp(log2b * (s.m[n + 1] + 1 - 2 ** (n + 1)), -(n + 1))
        rows.append(LedgerRow("d", n, math.exp(log2b + margin), 2 * s.b, margin < 0))
        tail = _tail_sum(s.delta[0], n)
        closed = math.ldexp(s.delta[0], 1 - n)
        rows.append(LedgerRow("e", n, tail, closed, abs(tail - closed) <= rtol * closed))
    rows.sort(key=lambda r: (r.family, r.n))
    return rows


def rho_limit_bracket(s: ConstantsSchedule) -> tuple[float, float]:
    """Bounds ``lo <= rho_inf <= hi`` from the last materialized radius.

    ``rho`` is decreasing, so ``hi = rho_N``; the tail product of ``q_j`` over
    ``j >= N`` is ``(2b)^(2^-N)`` and the tail of ``3 delta_j`` is
    ``3 * 2^(1-N) delta_0``, which gives ``lo``.
    """
    N = s.horizon
    hi = s.rho[N]
    lo = s.rho[N] * (2 * s.b) ** math.ldexp(1.0, -N) - 3 * math.ldexp(s.delta[0], 1 - N)
    return lo, hi


def majorant_recursion(P, epsilon: float | None = None) -> np.ndarray:
    """``S_j = P_j + sum_(i=1)^(j-1) 4^-i S_(j-i)`` along the last axis.

    The convolution kernel ``4^-i`` is geometric, so the recursion collapses
    to the two-term filter ``S_j = P_j - P_(j-1)/4 + S_(j-1)/2``.  When
    ``epsilon`` is given, ``0 <= P_j <= epsilon`` is enforced.
    """
    P = np.asarray(P, dtype=float)
    if P.size == 0:
        return P.copy()
    if np.any(P < 0) or not np.all(np.isfinite(P)):
        raise ValueError("P must be finite and non-negative")
    if epsilon is not None and np.any(P > epsilon):
        raise ValueError(f"P exceeds epsilon = {epsilon}")
    return lfilter([1.0, -0.25], [1.0, -0.5], P, axis=-1)
