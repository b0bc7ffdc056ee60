"""Analytic certificates: super-solution ODEs, the decaying-eigenmode super-solution,
the blow-up functional ``Phi`` with its audits, and the threshold predicates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import minimize_scalar
from scipy.special import gammaln

from .grid import RadialField, log_cell_volumes
from .heat_kernel import NumericalKernel, semigroup_apply
from .spectral import GroundState, solve_ground_state

GLOBAL = "GlobalForSmallData"
BLOWUP = "BlowUpAll"
UNKNOWN = "BorderlineUnknown"

_EXP_LIMIT = 700.0
# beyond this exponent the remaining escape time is ~e^-12 and t-stepping loses precision
ESCAPE_EXPONENT = 12.0


class PreconditionError(ValueError):
    """Inputs outside the range where a certificate is defined."""


class QuadratureFlag(RuntimeError):
    """An audit inequality failed by more than its tolerance (a numerical problem, not a counterexample)."""


@dataclass(frozen=True)
class ThresholdVerdict:
    kind: str
    certificate: str
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in (GLOBAL, BLOWUP, UNKNOWN):
            raise ValueError(f"unknown threshold verdict {self.kind!r}")


# thresholds -------------------------------------------------------------------


def threshold_typeII(mu, p, m, lambda1_estimate=None):
    """Global-vs-blow-up prediction for ``e^{mu t} s (e^{beta s^p} - 1)``.

    On H^n the split is exactly at ``mu = p lambda_1`` (equality is global).
    On other models global existence needs ``mu < p lambda_*``; blow-up needs
    ``mu > p lambda_1(M)``, which is only used when an estimate is supplied.
    """
    if not (mu >= 0 and p > 0):
        raise PreconditionError("need mu >= 0 and p > 0")
    params = {"mu": mu, "p": p, "model": m.to_dict()}
    if m.is_hyperbolic_space:
        lam = m.lambda_star()
        params["lambda1"] = lam
        if mu <= p * lam:
            return ThresholdVerdict(GLOBAL, "mu <= p*lambda_1", params)
        return ThresholdVerdict(BLOWUP, "mu > p*lambda_1", params)
    lam_star = m.lambda_star()
    params["lambda_star"] = lam_star
    if mu < p * lam_star:
        return ThresholdVerdict(GLOBAL, "mu < p*lambda_star(M)", params)
    if lambda1_estimate is not None:
        params["lambda1_estimate"] = lambda1_estimate
        if mu > p * lambda1_estimate:
            return ThresholdVerdict(BLOWUP, "mu > p*lambda_1(M)", params)
    return ThresholdVerdict(UNKNOWN, "p*lambda_star(M) <= mu <= p*lambda_1(M)", params)


def optimal_delta(alpha, lam):
    """Minimiser of ``delta + delta^(-1/alpha)`` over ``(0, lam)`` and the minimum.

    The stationary point ``alpha^(-alpha/(alpha+1))`` is clamped into the
    interval and confirmed by a bounded scalar search.
    """
    if lam <= 0:
        return None, math.inf
    cost = lambda d: d + d ** (-1.0 / alpha)
    d_star = alpha ** (-alpha / (alpha + 1.0))
    d_star = min(d_star, lam * (1 - 1e-12))
    res = minimize_scalar(cost, bounds=(1e-9 * lam, lam * (1 - 1e-12)), method="bounded",
                          options={"xatol": 1e-12})
    if cost(res.x) < cost(d_star) - 1e-9:
        d_star = float(res.x)
    return d_star, cost(d_star)


def threshold_typeI(q, alpha, m):
    """Prediction for ``t^q g(s)`` with ``g(s) = s |ln s|^(-alpha)`` near zero."""
    if not (q > 0 and alpha > 0):
        raise PreconditionError("need q > 0 and alpha > 0")
    params = {"q": q, "alpha": alpha, "model": m.to_dict()}
    if q < alpha:
        return ThresholdVerdict(GLOBAL, "q < alpha", params)
    if q > alpha:
        return ThresholdVerdict(BLOWUP, "q > alpha", params)
    lam_star = m.lambda_star()
    params["lambda_star"] = lam_star
    if m.is_hyperbolic_space and lam_star ** (alpha + 1) < 1.0:
        return ThresholdVerdict(BLOWUP, "q = alpha and lambda_1^(alpha+1) < 1", params)
    d_star, best = optimal_delta(alpha, lam_star)
    params["delta"] = d_star
    if best <= lam_star:
        return ThresholdVerdict(GLOBAL, "q = alpha and min(delta + delta^(-1/alpha)) <= lambda_star", params)
    return ThresholdVerdict(UNKNOWN, "q = alpha: neither certificate applies", params)


# super-solutions -----------------------------------------------------------------


@dataclass
class OdeSupersolution:
    """``a(t)`` with ``a' = h(t) a (e^{beta (C a)^p} - 1)``, ``a(0) = 1``; ``C a`` dominates the PDE."""

    C: float
    t: np.ndarray
    a: np.ndarray
    escaped: bool
    escape_time: float | None
    _dense: object = field(default=None, repr=False)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self._dense is None:
            return np.ones_like(t)
        return self._dense(t)[0]

    def bound(self, t):
        return self.C * self(t)


def ode_supersolution(spec, C, horizon, rtol=1e-10, atol=1e-12, method="DOP853"):
    """Solve the amplitude ODE up to ``horizon`` or its escape.

    Integration stops once ``beta (C a)^p`` reaches ``ESCAPE_EXPONENT``; the
    time still needed to reach infinity from there is added by quadrature
    with the time weight frozen (an upper bound on a tail of order ``e^-12``).
    """
    if C < 0:
        raise PreconditionError("C must be non-negative")
    if C == 0:
        return OdeSupersolution(0.0, np.array([0.0, horizon]), np.ones(2), False, None)
    mu, beta, p = spec.mu, spec.beta, spec.p

    def tail_time(t_e, U_e):
        # dt = dU / (h U (e^{beta U^p} - 1)) in log form
        tail, _ = quad(lambda U: math.exp(-math.log(U) - math.log(math.expm1(min(beta * U**p, _EXP_LIMIT)))),
                       U_e, np.inf, limit=200)
        return t_e + tail * math.exp(-mu * t_e)

    if beta * C**p >= ESCAPE_EXPONENT:
        return OdeSupersolution(C, np.array([0.0]), np.ones(1), True, tail_time(0.0, C))

    def rhs(t, y):
        # python floats: a rejected trial step may overflow to inf harmlessly
        a = float(y[0])
        e = beta * (C * a) ** p
        return [math.exp(mu * t) * a * math.expm1(min(e, _EXP_LIMIT))]

    def overflow(t, y):
        return beta * (C * y[0]) ** p - ESCAPE_EXPONENT
    overflow.terminal = True
    overflow.direction = 1

    sol = solve_ivp(rhs, (0.0, horizon), [1.0], method=method, rtol=rtol, atol=atol,
                    dense_output=True, events=overflow)
    if sol.status == -1:
        raise RuntimeError(f"amplitude ODE failed: {sol.message}")
    escaped = sol.status == 1
    escape = None
    if escaped:
        escape = tail_time(float(sol.t[-1]), C * float(sol.y[0, -1]))
    return OdeSupersolution(C, sol.t, sol.y[0], escaped, escape, sol.sol)


@dataclass
class SupersolutionCert:
    """``u_bar(x, t) = theta e^{(delta - lambda) t} phi(x)`` for the Type-I equation."""

    theta: float
    delta: float
    gamma_exp: float
    eps_regime: float
    horizon: float
    lam: float
    ground_state: GroundState = field(repr=False)
    q: float = 0.0
    alpha: float = 1.0

    def evaluate(self, r, t):
        return self.theta * math.exp((self.delta - self.lam) * t) * self.ground_state(r)

    @property
    def is_global(self):
        return math.isinf(self.horizon)


def _log_margin_sup(delta, lam, gamma, q, alpha):
    """``sup_{t >= 0} (delta - lam) t + gamma t^{q/alpha}`` (``inf`` when unbounded)."""
    a = delta - lam
    e = q / alpha
    if e < 1:
        t_star = (gamma * e / (-a)) ** (1.0 / (1.0 - e))
        return a * t_star + gamma * t_star**e
    if e == 1:
        return 0.0 if a + gamma <= 0 else math.inf
    return math.inf


def _first_crossing(delta, lam, gamma, q, alpha, level):
    """First ``t`` with ``(delta - lam) t + gamma t^{q/alpha} >= level`` (``level > 0``)."""
    a, e = delta - lam, q / alpha
    E = lambda t: a * t + gamma * t**e - level
    hi = 1.0
    while E(hi) < 0:
        hi *= 2.0
        if hi > 1e12:
            return math.inf
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if E(mid) < 0:
            lo = mid
        else:
            hi = mid
    return hi


def build_typeI_supersolution(m, spec, theta, delta, ground_state=None):
    """Certificate for ``theta e^{delta t} e^{-lambda t} phi``.

    The horizon is infinite iff ``(delta - lambda) t + gamma t^{q/alpha} + ln theta
    + ln sup phi < ln eps`` for every ``t >= 0``, with ``gamma = delta^(-1/alpha)``;
    otherwise it is the first time that inequality fails.
    """
    lam = m.lambda_star()
    if not 0 < delta < lam:
        raise PreconditionError(f"delta must lie in (0, lambda_star={lam:g})")
    if not theta > 0:
        raise PreconditionError("theta must be positive")
    gs = ground_state if ground_state is not None else solve_ground_state(m, lam)
    eps = spec.eps_splice
    sup_phi = gs.sup
    if theta * sup_phi >= eps:
        raise PreconditionError("theta * sup(phi) must be below the splice point")
    gamma = delta ** (-1.0 / spec.alpha)
    level = math.log(eps) - math.log(theta) - math.log(sup_phi)
    peak = _log_margin_sup(delta, lam, gamma, spec.q, spec.alpha)
    horizon = math.inf if peak < level else _first_crossing(delta, lam, gamma, spec.q, spec.alpha, level)
    return SupersolutionCert(theta, delta, gamma, eps, horizon, lam, gs, spec.q, spec.alpha)


def certified_theta(m, spec, delta, ground_state=None, safety=0.5):
    """An amplitude ``theta`` (``safety`` times the supremum) for which the certificate is global.

    Returns ``None`` when no amplitude works for this ``delta``.
    """
    lam = m.lambda_star()
    gs = ground_state if ground_state is not None else solve_ground_state(m, lam)
    gamma = delta ** (-1.0 / spec.alpha)
    peak = _log_margin_sup(delta, lam, gamma, spec.q, spec.alpha)
    if math.isinf(peak):
        return None
    log_theta = math.log(spec.eps_splice) - math.log(gs.sup) - max(peak, 0.0) + math.log(safety)
    return math.exp(log_theta)


def best_certificate(m, spec, ground_state=None, safety=0.5):
    """Global certificate with the largest amplitude, optimising ``delta`` over ``(0, lambda_star)``.

    Returns ``None`` when no ``delta`` gives a bounded margin.
    """
    lam = m.lambda_star()
    gs = ground_state if ground_state is not None else solve_ground_state(m, lam)

    def peak(d):
        return _log_margin_sup(d, lam, d ** (-1.0 / spec.alpha), spec.q, spec.alpha)

    res = minimize_scalar(lambda x: min(peak(lam / (1 + math.exp(-x))), 1e300),
                          bounds=(-30.0, 30.0), method="bounded", options={"xatol": 1e-10})
    delta = lam / (1 + math.exp(-res.x))
    if math.isinf(peak(delta)):
        return None
    theta = certified_theta(m, spec, delta, gs, safety)
    return build_typeI_supersolution(m, spec, theta, delta, gs)


def dominance_gap(traj, upper, tol=None):
    """Largest ``u - u_bar`` over saved snapshots; ``upper(r, t)`` is the super-solution.

    Returns ``(gap, tol)``; dominance holds when ``gap <= tol``.
    """
    worst = -math.inf
    ref = 0.0
    for t, f in zip(traj.times, traj.fields):
        ub = np.asarray(upper(f.r, t), dtype=float)
        ref = max(ref, float(np.max(ub)))
        worst = max(worst, float(np.max(f.values - ub)))
    if tol is None:
        tol = 1e-6 * ref + 1e-12
    return worst, tol


# blow-up functional -----------------------------------------------------------------


@dataclass
class PhiAudit:
    times: np.ndarray
    phi: np.ndarray
    jensen_lhs: np.ndarray
    jensen_rhs: np.ndarray
    jensen_ok: bool
    growth_ok: bool
    C_fit: float | None
    C_samples: dict
    C_ok: bool | None
    tol: float

    @property
    def passed(self):
        return self.jensen_ok and self.growth_ok and (self.C_ok is not False)


def _origin_pairing(m, kernel, field_, tau):
    """``int K(o, y, tau) v(y) dv(y)`` for radial ``v``."""
    if tau <= kernel.t0:
        return float(field_.values[0])
    log_V = log_cell_volumes(m, field_.r)
    k = kernel(field_.r, tau)
    return float(m.sphere_area * np.sum(np.exp(log_V) * k * field_.values))


def phi_functional(traj, m, T, spec=None, kernel=None, tol=0.05, fit_times=(4.0, 8.0, 16.0),
                   kernel_R=None, strict=False):
    """``Phi(o, t) = int K(o, y, T - t) u(y, t) dv`` over the saved snapshots in ``[0, T]``.

    Audits: (i) Jensen ``int K f(u) >= f(Phi)``; (ii) discrete growth
    ``Phi_{j+1} - Phi_j >= (1 - tol) int f(Phi)``; (iii) a least-squares fit
    of ``C`` in ``Phi(o, 0) >= C T^{-3/2} e^{-lambda_1 T}`` over ``fit_times``.
    With ``strict`` a failed audit raises :class:`QuadratureFlag`.
    """
    times = np.asarray(traj.times)
    keep = times <= T + 1e-12
    times = times[keep]
    fields = [f for f, k in zip(traj.fields, keep) if k]
    if abs(times[-1] - T) > 1e-9 * max(1.0, T):
        raise KeyError(f"no snapshot at T={T}")
    if kernel is None:
        R = kernel_R or traj.grid.R
        kernel = NumericalKernel(m, R=R, N=max(400, int(round(R / 0.05))))
    rate = (lambda u, s: np.zeros_like(u)) if spec is None else \
        (lambda u, s: np.asarray(spec.rate(np.asarray(u, dtype=float), s), dtype=float))

    phi = np.array([_origin_pairing(m, kernel, f, T - s) for s, f in zip(times, fields)])
    lhs = np.array([_origin_pairing(m, kernel, RadialField(f.r, rate(f.values, s)), T - s)
                    for s, f in zip(times, fields)])
    rhs = np.array([float(rate(np.array([p]), s)[0]) for p, s in zip(phi, times)])
    floor = 1e-12 * max(float(np.max(np.abs(phi))), 1e-300)
    jensen_ok = bool(np.all(lhs >= (1 - tol) * rhs - floor))

    dphi = np.diff(phi)
    lower = 0.5 * np.diff(times) * (rhs[1:] + rhs[:-1])
    if spec is None:
        growth_ok = bool(np.all(np.abs(dphi) <= tol * max(float(np.max(phi)), 1e-300) + floor))
    else:
        growth_ok = bool(np.all(dphi >= (1 - tol) * lower - tol * np.abs(dphi) - floor))

    C_fit, C_samples, C_ok = None, {}, None
    if m.is_hyperbolic_space and fit_times:
        lam = m.lambda_star()
        big = kernel if kernel.R >= 40.0 or m.r_max < 40.0 else None
        if big is None:
            big = NumericalKernel(m, R=min(40.0, m.r_max), N=800)
        u0 = fields[0]
        for Tf in fit_times:
            val = semigroup_apply(m, u0, Tf, eval_r=np.array([0.0]), kernel_obj=big).values[0]
            if val > 0:
                C_samples[float(Tf)] = val * Tf**1.5 * math.exp(lam * Tf)
        if C_samples:
            logs = np.log(list(C_samples.values()))
            # least squares for a constant in log space is the mean
            C_fit = float(np.exp(np.mean(logs)))
            # a T-independent lower constant exists only if the samples do not decay
            C_ok = bool(np.all(np.diff(logs) >= math.log(1.0 - tol)))
    audit = PhiAudit(times, phi, lhs, rhs, jensen_ok, growth_ok, C_fit, C_samples, C_ok, tol)
    if strict and not audit.passed:
        raise QuadratureFlag(f"Phi audit failed: jensen={jensen_ok} growth={growth_ok} C={C_ok}")
    return audit


def series_audit(mu, p, beta, C, T, lambda1, k_max=60):
    """Partial sums of ``[p (e^{mu T}-1)/mu T^{3p/2} e^{p lambda_1 T} / (beta C^p)] sum Upsilon^{k+1}/(k+1)!``.

    ``Upsilon = beta C^p T^{-3p/2} e^{-p lambda_1 T}``.  For a solution that
    exists up to ``T`` the sum stays below ``sum 1/(k(k+1)) <= 1``.  Terms are
    accumulated in log space.
    """
    log_ups = math.log(beta) + p * math.log(C) - 1.5 * p * math.log(T) - p * lambda1 * T
    growth = (math.expm1(mu * T) / mu) if mu > 0 else T
    log_pref = math.log(p) + math.log(growth) - log_ups
    k = np.arange(1, k_max + 1)
    log_terms = log_pref + (k + 1) * log_ups - gammaln(k + 2)
    partial = np.cumsum(np.exp(log_terms))
    bound = np.cumsum(1.0 / (k * (k + 1.0)))
    ups = math.exp(log_ups)
    closed = math.exp(log_pref) * (math.expm1(ups) - ups)
    return {"upsilon": ups, "partial_sums": partial, "bounds": bound,
            "closed_form": closed, "holds": bool(partial[-1] <= 1.0)}
