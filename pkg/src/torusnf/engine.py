"""Degree-doubling Newton normalization and a one-degree-at-a-time oracle.

A state ``H_n = N_n + R_n`` has its normal form ``N_n`` (theta-independent,
degrees ``2..m_n``) and a remainder of degrees ``> m_n``, ``m_n = 2^n + 1``.
One step builds ``F_n`` of degrees ``m_n..m_(n+1)-1`` so that ``H_n o X_F^1``
has no theta-dependence through degree ``m_(n+1) = 2 m_n - 1``.

With ``X_j = {N_0, F^[m+j-1]}`` and the multipliers ``g_a`` of the normal
form, degree ``m + j`` of the conjugacy equation reads

    X_j + sum_(i<j) g_(j-i+2) X_i + R^[m+j] - N^[m+j] = 0,

a lower-triangular system solved for ``j = 1..m-1`` in order: the ``k = 0``
part gives the new normal-form block, the rest is a homological equation.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from .homology import DIVISIBILITY_RTOL, ObstructionDetected, QuadraticForm, solve_homological
from .lie import CoordinateMap, compose_with_flow, flow_coordinates, lie_pullback, record_magnitudes
from .normal_form import A3_RTOL, A3Fit, A3Violation, NormalFormProfile, scale_hamiltonian, verify_A3
from .schedule import ConstantsSchedule, build, majorant_recursion
from .series import DomainBox, TFSeries, majorant_norm, mul

from .factory import make_instance  # noqa: F401  (re-exported)

__all__ = [
    "A3Violation",
    "ObstructionDetected",
    "DegreeBudgetExceeded",
    "ScheduleHypothesisFailed",
    "HamiltonianState",
    "NewtonStepReport",
    "RunOptions",
    "RunResult",
    "OracleResult",
    "newton_step",
    "run",
    "classical_oracle",
    "compliant_scale",
    "scale_hamiltonian",
    "make_instance",
    "verify_A3",
    "normalized_degree",
]

log = logging.getLogger(__name__)

# the action rescaling makes degree-e coefficients of size a^(e-2); stop
# before they approach the subnormal range
_SCALED_FLOOR = 1e-250
# relative size of k != 0 content tolerated where the step should have removed it
STRUCTURE_RTOL = 1e-9


class DegreeBudgetExceeded(ValueError):
    """The degree cap cannot hold the normalized degree of the requested step."""


class ScheduleHypothesisFailed(RuntimeError):
    """A compliant-mode step violated one of the smallness estimates."""

    def __init__(self, report: "NewtonStepReport", failed: list[str]):
        self.report = report
        self.failed = failed
        super().__init__(f"step {report.n}: estimates failed: {', '.join(failed)}")


def normalized_degree(n: int) -> int:
    """``m_n = 2^n + 1``."""
    return 2**n + 1


@dataclass(frozen=True)
class HamiltonianState:
    """``H = N + R_tilde`` with ``N`` of degrees ``2..m_n`` and ``R_tilde`` above.

    ``magnitudes`` maps each degree to the largest block norm met while
    computing ``H``; it sets the rounding floor for tolerance checks.
    """

    H: TFSeries
    n: int
    N: TFSeries
    R_tilde: TFSeries
    magnitudes: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def m(self) -> int:
        return normalized_degree(self.n)

    @property
    def dim(self) -> int:
        return self.H.dim

    @classmethod
    def from_hamiltonian(cls, H: TFSeries, n: int = 0) -> "HamiltonianState":
        m = normalized_degree(n)
        if len(H) and H.min_degree < 2:
            raise ValueError(f"Hamiltonian has terms of degree {H.min_degree} < 2")
        low = H.project_degrees(0, m)
        if len(low.oscillating()):
            raise ValueError(f"Hamiltonian has theta-dependent terms of degree <= m_{n} = {m}")
        high = H.project_degrees(m + 1, H.degree_cap) if H.degree_cap > m else TFSeries.zero(H.dim, H.degree_cap)
        return cls(H, n, low.zero_mode(), high, H.block_norms())

    def advance(self, N: TFSeries, R_tilde: TFSeries, magnitudes: dict) -> "HamiltonianState":
        return HamiltonianState(N + R_tilde, self.n + 1, N, R_tilde, dict(magnitudes))


@dataclass
class NewtonStepReport:
    n: int
    m: int
    m_next: int
    degree_cap: int
    F: TFSeries
    X: list
    C: TFSeries
    new_state: HamiltonianState
    discarded: TFSeries
    structural_defect: float
    b_fit: A3Fit
    residues: dict
    norms: dict
    flags: dict
    flow: CoordinateMap | None = None
    flow_inverse: CoordinateMap | None = None

    @property
    def failed_flags(self) -> list[str]:
        return [k for k, v in self.flags.items() if v is False]


def _multipliers(b_profile: NormalFormProfile, m: int, cap: int) -> dict[int, TFSeries]:
    return {a: b_profile.multiplier(a, cap) for a in range(3, m + 1)}


def _c_formula(g: dict, X: list, m: int, cap: int) -> TFSeries:
    """``C_n = sum_(k=1)^(m-2) sum_(a=k+2)^m g_a X_(m-k)``: the part of ``{N_n, F_n}`` above ``m_(n+1)``."""
    d = X[0].dim if X else 1
    out = TFSeries.zero(d, cap)
    for k in range(1, m - 1):
        gsum = TFSeries.zero(d, cap)
        for a in range(k + 2, m + 1):
            if len(g[a]):
                gsum = gsum + g[a]
        if len(gsum):
            out = out + mul(gsum, X[m - k - 1], cap)
    return out


def newton_step(state: HamiltonianState, omega: QuadraticForm, degree_cap: int, *,
                profile: NormalFormProfile | str | None = None, tol: float = DIVISIBILITY_RTOL,
                schedule: ConstantsSchedule | None = None, strict: bool = True,
                a3_tol: float = A3_RTOL, flows: bool = True) -> NewtonStepReport:
    """One degree-doubling step from ``m_n`` to ``m_(n+1)``.

    ``profile`` prescribes the multipliers ``g_a``; ``None`` or
    ``"discover"`` fits them from ``state.N`` instead.  Norm diagnostics and
    estimate flags use the boxes of ``schedule`` (default: ``rho_0 = 1``).

    Raises ``DegreeBudgetExceeded`` when ``degree_cap < m_(n+1)``,
    ``ObstructionDetected`` from the homological solves (strict mode) and
    ``A3Violation`` when the new normal form is not a function of ``N_0``.
    """
    n, m = state.n, state.m
    m1 = 2 * m - 1
    D = int(degree_cap)
    d = state.dim
    if D < m1:
        raise DegreeBudgetExceeded(f"step {n} normalizes through degree {m1} but the degree cap is {D}")
    if omega.dim != d:
        raise ValueError(f"dimension mismatch: omega is {omega.dim}x{omega.dim}, H has dim {d}")
    schedule = schedule or build(d, 1.0, max(n + 1, 1))
    if schedule.horizon < n + 1:
        raise ValueError(f"schedule horizon {schedule.horizon} does not cover step {n}")

    if profile is None or profile == "discover":
        prior = verify_A3(state.N, omega, a3_tol, state.magnitudes) if len(state.N) else A3Fit()
        if not prior.passed:
            raise A3Violation(prior)
        profile_used = prior.profile(omega)
    else:
        profile_used = profile
    g = _multipliers(profile_used, m, D)

    R = state.R_tilde
    mags = dict(state.magnitudes)
    record_magnitudes(mags, state.H)
    X: list[TFSeries] = []
    pieces = []
    new_blocks = []
    residues: dict = {}
    for j in range(1, m):
        e = m + j
        rhs = R.homogeneous(e)
        for i in range(1, j):
            ga = g.get(j - i + 2)
            if ga is not None and len(ga):
                term = mul(ga, X[i - 1], D)
                record_magnitudes(mags, term)
                rhs = rhs + term
        new_blocks.append(rhs.zero_mode())
        Xj = -rhs.oscillating()
        sol = solve_homological(omega, Xj, tol, strict=strict, reference=mags)
        for k, r in sol.residues.items():
            residues[k] = float(np.hypot(residues.get(k, 0.0), r))
        X.append(Xj)
        pieces.append(sol.F)
    F = TFSeries.zero(d, D)
    for piece in pieces:
        F = F + piece.with_cap(D)

    H_next = lie_pullback(state.H, F, D, magnitudes=mags) if len(F) else state.H.with_cap(D)
    low = H_next.project_degrees(0, m1)
    N_next = low.zero_mode()
    discarded = low.oscillating()
    R_next = H_next.project_degrees(m1 + 1, D) if D > m1 else TFSeries.zero(d, D)
    defect = 0.0
    for e, v in discarded.block_norms().items():
        if v == 0:
            continue
        ref = mags.get(e, 0.0)
        defect = max(defect, v / ref if ref > 0 else math.inf)

    fit = verify_A3(N_next, omega, a3_tol, mags)
    C = _c_formula(g, X, m, D)

    rho_n = schedule.rho[n]
    box_n = DomainBox(rho_n, rho_n)
    box_next = DomainBox(schedule.rho[n + 1], schedule.rho[n + 1])
    shrunk = schedule.shrunk_radius(n)
    eps_n = schedule.remainder_bound(n)
    rho0_box = DomainBox(schedule.rho0, schedule.rho0)
    S = [majorant_norm(x, box_n) for x in X]
    P = [majorant_norm(nb, rho0_box) + majorant_norm(R.homogeneous(m + j), box_n)
         for j, nb in enumerate(new_blocks, start=1)]
    S_bound = majorant_recursion(P).tolist() if P else []
    g_norms = {a: majorant_norm(ga, box_n) for a, ga in g.items()}
    n_norms = {e: majorant_norm(N_next.homogeneous(e), box_n) for e in range(max(3, m), m1 + 1)}
    C_bound = sum(4.0 ** -(k + 1) * S[m - k - 1] for k in range(1, m - 1)) / 3
    norms = {
        "R_in": majorant_norm(R, box_n),
        "R_out": majorant_norm(R_next, box_next),
        "R_out_shrunk": majorant_norm(R_next, DomainBox(shrunk, shrunk)),
        "R_bound_in": eps_n,
        "R_bound_out": schedule.remainder_bound(n + 1),
        "S": S,
        "P": P,
        "S_bound": S_bound,
        "g": g_norms,
        "N": n_norms,
        "C": majorant_norm(C, box_n),
        "C_bound": C_bound,
        "F": majorant_norm(F, DomainBox(rho_n - schedule.delta[n], rho_n - schedule.delta[n])),
    }
    flow = flow_inv = None
    if flows:
        flow = flow_coordinates(F, D)
        flow_inv = flow_coordinates(-F, D)
        sbox = DomainBox(shrunk, shrunk)
        norms["phi"] = flow.deviation_norm(sbox)
        norms["phi_inv"] = flow_inv.deviation_norm(sbox)

    g_ok = all(v <= 4.0 ** -a for a, v in g_norms.items())
    flags = {
        "est_R": norms["R_in"] <= eps_n,
        "est_N": all(v < schedule.delta[n] ** (schedule.kappa + 1) for v in n_norms.values()),
        "est_g": g_ok,
        "S_bound": all(s <= b * (1 + 1e-12) + 1e-300 for s, b in zip(S, S_bound)) if g_ok else None,
        "C_bound": norms["C"] <= C_bound * (1 + 1e-12) + 1e-300 if g_ok else None,
        "C_small": norms["C"] <= eps_n,
        "est_Rn": norms["R_out"] <= schedule.remainder_bound(n + 1),
        "est_Phi": norms["phi"] < schedule.delta[n] if flows else None,
        "est_Phi_inv": norms["phi_inv"] < schedule.delta[n] if flows else None,
        "structure": defect <= STRUCTURE_RTOL,
        "A3": fit.passed,
    }
    report = NewtonStepReport(n=n, m=m, m_next=m1, degree_cap=D, F=F, X=X, C=C,
                              new_state=state.advance(N_next, R_next, mags), discarded=discarded,
                              structural_defect=defect, b_fit=fit, residues=residues,
                              norms=norms, flags=flags, flow=flow, flow_inverse=flow_inv)
    if not fit.passed:
        raise A3Violation(fit)
    log.debug("step %d: |R_in| %.3e -> |R_out| %.3e, |F| %.3e", n, norms["R_in"], norms["R_out"], norms["F"])
    return report


@dataclass
class RunOptions:
    """``mode`` is ``"free"`` (report only) or ``"compliant"`` (rescale and enforce estimates)."""

    mode: str = "free"
    profile: NormalFormProfile | None = None
    tol: float = DIVISIBILITY_RTOL
    a3_tol: float = A3_RTOL
    rho0: float = 1.0
    strict: bool = True
    compose: bool = True
    with_inverse: bool = False
    flows: bool = True
    scale: float | None = None

    def __post_init__(self):
        if self.mode not in ("free", "compliant"):
            raise ValueError(f"mode must be 'free' or 'compliant', got {self.mode!r}")


@dataclass
class RunResult:
    steps: list
    final_state: HamiltonianState
    schedule: ConstantsSchedule
    scale: float
    degree_cap: int
    transform: CoordinateMap | None = None
    inverse: CoordinateMap | None = None

    @property
    def normal_form(self) -> TFSeries:
        return self.final_state.N

    @property
    def b_fit(self) -> dict:
        """Fitted ``b_j`` of the working (possibly rescaled) Hamiltonian."""
        return dict(self.steps[-1].b_fit.b) if self.steps else {}

    @property
    def b_original(self) -> dict:
        """``b_j`` undone for the rescaling: ``b_j / a^(2(j-1))``."""
        return {j: bj / self.scale ** (2 * (j - 1)) for j, bj in self.b_fit.items()}

    @property
    def generators(self) -> list:
        return [s.F for s in self.steps]


def _check_initial(H: TFSeries, omega: QuadraticForm):
    if H.dim != omega.dim:
        raise ValueError(f"dimension mismatch: omega is {omega.dim}x{omega.dim}, H has dim {H.dim}")
    if len(H) == 0 or H.min_degree < 2:
        raise ValueError("Hamiltonian must start at degree 2")
    quad = H.homogeneous(2)
    if len(quad.oscillating()):
        raise ValueError("degree-2 part of H depends on theta")
    ref = omega.n0(2)
    err = quad - ref
    if len(err) and np.abs(err.coeffs).max() > 1e-12 * np.abs(ref.coeffs).max():
        raise ValueError("degree-2 part of H does not match I^T Omega I")


def compliant_scale(H: TFSeries, schedule: ConstantsSchedule, steps: int,
                    profile: NormalFormProfile | None = None, safety: float = 0.5) -> float:
    """Largest ``a <= 1`` (up to ``safety``) putting the rescaled input in the small regime.

    Requires ``|R_0|_(rho_0, rho_0) <= delta_0^kappa``; with a profile the
    normal-form estimates ``|N^[e]|_(rho_n) < delta_n^(kappa+1)`` and
    ``|g_a|_(rho_n) <= 4^-a`` over the first ``steps`` steps are imposed as
    well, otherwise the remainder target is tightened to ``delta_0^(kappa+1)``.
    """
    box0 = DomainBox(schedule.rho0, schedule.rho0)
    R0 = H.project_degrees(3, H.degree_cap)
    target = schedule.remainder_bound(0) * (1.0 if profile is not None else schedule.delta[0])
    blocks = [(e, majorant_norm(R0.homogeneous(e), box0)) for e in range(3, H.degree_cap + 1)]
    blocks = [(e, c) for e, c in blocks if c > 0]
    bounds = [1.0]
    if blocks:
        log_c = np.log([c for _, c in blocks])
        powers = np.array([e - 2 for e, _ in blocks], dtype=float)

        def excess(log_a):
            return float(logsumexp(log_c + powers * log_a)) - math.log(target)
        if excess(0.0) > 0:
            bounds.append(math.exp(brentq(excess, -700.0, 0.0, xtol=1e-12)))
    if profile is not None:
        cap = 2 * normalized_degree(steps)
        for n in range(min(steps, schedule.horizon) + 1):
            box = DomainBox(schedule.rho[n], schedule.rho[n])
            m = normalized_degree(n)
            for e in range(max(4, m), 2 * m + 1, 1):
                if e % 2:
                    continue
                j = e // 2
                bj = profile.coefficient(j)
                if bj == 0:
                    continue
                nj = majorant_norm(profile.omega.n0(cap), box) ** j * abs(bj)
                lim = schedule.delta[n] ** (schedule.kappa + 1)
                bounds.append(math.exp((math.log(lim) - math.log(nj)) / (e - 2)))
                gj = majorant_norm(profile.multiplier(e, cap), box)
                if gj:
                    bounds.append(math.exp((math.log(4.0 ** -e) - math.log(gj)) / (e - 2)))
    a = min(bounds)
    return a if a >= 1.0 else a * safety


def _effective_cap(a: float, D: int) -> int:
    if a >= 1.0:
        return D
    return min(D, 2 + int(math.log(_SCALED_FLOOR) / math.log(a)))


def run(H0: TFSeries, omega: QuadraticForm, steps: int, degree_cap: int,
        options: RunOptions | None = None) -> RunResult:
    """Iterate ``newton_step`` and compose ``T_n = Phi_0 o ... o Phi_(n-1)``.

    In compliant mode the input is first rescaled by ``H(aI)/a^2`` (see
    ``compliant_scale``), the working degree cap is lowered so the rescaled
    coefficients stay in normal floating-point range, and any failed estimate
    raises ``ScheduleHypothesisFailed``.
    """
    opts = options or RunOptions()
    _check_initial(H0, omega)
    if steps < 0:
        raise ValueError("steps must be non-negative")
    schedule = build(omega.dim, opts.rho0, max(steps, 1))
    D = int(degree_cap)
    profile = opts.profile
    a = 1.0
    H = H0.with_cap(D)
    if opts.mode == "compliant":
        a = opts.scale if opts.scale is not None else compliant_scale(H, schedule, steps, profile)
        H = scale_hamiltonian(H, a)
        D = _effective_cap(a, D)
        H = H.with_cap(D)
        if profile is not None:
            profile = profile.scaled(a)
        log.info("compliant mode: scale %.3e, working degree cap %d", a, D)
    if steps and D < normalized_degree(steps):
        raise DegreeBudgetExceeded(f"{steps} steps normalize through degree {normalized_degree(steps)} "
                                   f"but the working degree cap is {D}")
    state = HamiltonianState.from_hamiltonian(H, 0)
    reports = []
    T = CoordinateMap.identity(omega.dim, D) if opts.compose else None
    for _ in range(steps):
        rep = newton_step(state, omega, D, profile=profile, tol=opts.tol, schedule=schedule,
                          strict=opts.strict, a3_tol=opts.a3_tol, flows=opts.flows or opts.compose)
        reports.append(rep)
        if opts.mode == "compliant" and rep.failed_flags:
            raise ScheduleHypothesisFailed(rep, rep.failed_flags)
        if T is not None:
            T = compose_with_flow(T, rep.F, D, rep.flow)
        state = rep.new_state
    inverse = None
    if opts.compose and opts.with_inverse:
        inverse = CoordinateMap.identity(omega.dim, D)
        for rep in reversed(reports):
            inverse = compose_with_flow(inverse, -rep.F, D, rep.flow_inverse)
    return RunResult(reports, state, schedule, a, D, T, inverse)


@dataclass
class OracleResult:
    normal_form: TFSeries
    generators: dict = field(default_factory=dict)
    H: TFSeries | None = None
    residues: dict = field(default_factory=dict)
    magnitudes: dict = field(default_factory=dict, repr=False)

    def fit(self, omega: QuadraticForm, tol: float = A3_RTOL) -> A3Fit:
        """``verify_A3`` with the rounding floor accumulated during elimination."""
        return verify_A3(self.normal_form, omega, tol, self.magnitudes)


def classical_oracle(H: TFSeries, omega: QuadraticForm, degree_cap: int, *,
                     tol: float = DIVISIBILITY_RTOL, strict: bool = True) -> OracleResult:
    """Remove theta-dependence one degree at a time, ``e = 3..degree_cap``.

    Each degree gets its own homological solve ``{N_0, F} = -Q^[e]`` and a
    full pullback; the normal form is the ``k = 0`` part of the result.
    """
    _check_initial(H, omega)
    D = int(degree_cap)
    cur = H.with_cap(D)
    mags = cur.block_norms()
    gens: dict[int, TFSeries] = {}
    residues: dict = {}
    for e in range(3, D + 1):
        Q = cur.homogeneous(e).oscillating()
        if len(Q) == 0:
            continue
        sol = solve_homological(omega, -Q, tol, strict=strict, reference=mags)
        residues.update({(e, k): r for k, r in sol.residues.items() if r})
        if len(sol.F) == 0:
            continue
        gens[e - 1] = sol.F
        cur = lie_pullback(cur, sol.F, D, magnitudes=mags)
    return OracleResult(cur.zero_mode(), gens, cur, residues, mags)
