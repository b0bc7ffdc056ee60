"""Radial ground states ``phi'' + m(r) phi' + lam phi = 0`` with ``phi(0)=1, phi'(0)=0``."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .geometry import ManifoldModel
from .grid import RadialField, discretize, refine_nodes, operator_on

R0 = 1e-6
ODE_RTOL = 1e-10
# the H^n tail drops to ~1e-13 at r=20, so the absolute tolerance must be far below ODE_RTOL
ODE_ATOL = 1e-22
_FD_STEP = 1e-2


class EigenvalueTooLargeError(ValueError):
    """The radial solution changed sign: ``lam`` exceeds the bottom of the spectrum on ``[0, R]``."""


class NotSupersolutionError(ValueError):
    """``-Delta phi - lam phi`` is negative somewhere in the interior."""


@dataclass
class GroundState:
    manifold: ManifoldModel
    lam: float
    profile: RadialField
    envelope_constants: tuple | None = None
    _phi: object = field(default=None, repr=False)
    _dphi: object = field(default=None, repr=False)

    def __call__(self, r):
        return self._phi(np.asarray(r, dtype=float))

    def derivative(self, r):
        return self._dphi(np.asarray(r, dtype=float))

    @property
    def sup(self):
        return self.profile.sup()

    @classmethod
    def constant(cls, m, value=1.0, lam=None, R=20.0, N=400):
        lam = m.lambda_star() if lam is None else lam
        r = np.linspace(0.0, R, N)
        return cls(m, lam, RadialField(r, np.full(N, float(value))),
                   _phi=lambda x: np.full(np.shape(x), float(value)),
                   _dphi=lambda x: np.zeros(np.shape(x)))


def _envelope_rate(m):
    if m.variant == "hyperbolic":
        return 1.0
    if m.variant == "scaled_hyperbolic":
        return m.kappa
    return None


def envelope_constants(m, r, phi):
    """Min and max of ``phi / ((1 + k r) exp(-(n-1) k r / 2))`` over the samples."""
    k = _envelope_rate(m)
    if k is None:
        return None
    env = np.log1p(k * r) - 0.5 * (m.n - 1) * k * r
    ratio = np.exp(np.log(phi) - env)
    return float(ratio.min()), float(ratio.max())


def solve_ground_state(m, lam=None, R=20.0, N=800):
    """Integrate the radial eigen-equation from the pole with a Taylor start at ``r = 1e-6``."""
    lam = m.lambda_star() if lam is None else float(lam)
    if R > m.r_max:
        raise ValueError(f"R={R} exceeds r_max={m.r_max}")
    if N < 200:
        raise ValueError("N must be at least 200")
    n = m.n

    def rhs(r, y):
        return [y[1], -m.radial_drift(r) * y[1] - lam * y[0]]

    def crossing(r, y):
        return y[0]
    crossing.terminal = True
    crossing.direction = -1

    y0 = [1.0 - lam * R0**2 / (2 * n), -lam * R0 / n]
    sol = solve_ivp(rhs, (R0, R), y0, method="DOP853", rtol=ODE_RTOL, atol=ODE_ATOL,
                    dense_output=True, events=crossing)
    if sol.status == 1 or np.any(sol.y[0] <= 0):
        raise EigenvalueTooLargeError(
            f"radial solution vanishes at r={sol.t[-1]:.4g}; lam={lam} exceeds the bottom of the spectrum on [0, {R}]")
    dense = sol.sol

    def phi(x):
        x = np.asarray(x, dtype=float)
        xc = np.clip(np.abs(x), R0, R)
        out = np.asarray(dense(xc.ravel())[0]).reshape(x.shape)
        small = np.abs(x) < R0
        return np.where(small, 1.0 - lam * x**2 / (2 * n), out)

    def dphi(x):
        x = np.asarray(x, dtype=float)
        xc = np.clip(np.abs(x), R0, R)
        out = np.asarray(dense(xc.ravel())[1]).reshape(x.shape)
        small = np.abs(x) < R0
        # odd extension through the pole
        return np.where(small, -lam * x / n, np.sign(x) * out)

    r = np.linspace(0.0, R, N)
    values = phi(r)
    return GroundState(m, lam, RadialField(r, values), envelope_constants(m, r, values),
                       _phi=phi, _dphi=dphi)


def _second_derivative(gs, r):
    h = _FD_STEP
    d = gs.derivative
    return (-d(r + 2 * h) + 8 * d(r + h) - 8 * d(r - h) + d(r - 2 * h)) / (12 * h)


def ode_residual(gs, r=None):
    """``phi'' + m phi' + lam phi`` with ``phi''`` from finite differences of the dense ``phi'``."""
    m = gs.manifold
    r = gs.profile.r if r is None else np.asarray(r, dtype=float)
    r = r[r <= gs.profile.r[-1] - 2 * _FD_STEP]
    d2 = _second_derivative(gs, r)
    lap = np.empty_like(r)
    pole = r == 0
    lap[pole] = m.n * d2[pole]
    rp = r[~pole]
    lap[~pole] = d2[~pole] + m.radial_drift(rp) * gs.derivative(rp)
    return RadialField(r, lap + gs.lam * gs(r))


def supersolution_residual(phi, lam=None, tol=None):
    """Pointwise ``-Delta phi - lam phi``; raises if it dips below ``-tol`` (default ``1e-6 sup|phi|``)."""
    lam = phi.lam if lam is None else lam
    base = ode_residual(phi)
    res = RadialField(base.r, -(base.values - phi.lam * phi(base.r)) - lam * phi(base.r))
    tol = 1e-6 * phi.sup if tol is None else tol
    bad = res.values < -tol
    if np.any(bad):
        i = int(np.argmax(bad))
        raise NotSupersolutionError(
            f"-Delta phi - lam phi = {res.values[i]:.3g} < -{tol:.1g} at r={res.r[i]:.4g}")
    return res


def bottom_of_spectrum(m, R=None, N=1200):
    """Bottom of the Dirichlet spectrum on ``B(0, R)``, Richardson-extrapolated over two grids.

    For ``power_decay`` models with ``gamma > 0`` the ground state decays faster
    than any exponential, so a moderate ``R`` already gives ``lambda_1(M)``.
    """
    R = min(m.r_max, 30.0) if R is None else R
    coarse = discretize(m, R, N)
    fine = operator_on(m, refine_nodes(coarse.nodes))
    lc = -coarse.eigensystem()[0][-1]
    lf = -fine.eigensystem()[0][-1]
    return float((4 * lf - lc) / 3)
