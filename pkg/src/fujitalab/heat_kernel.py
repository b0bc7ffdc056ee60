"""Heat kernels on model manifolds.

Two kernels are available:

* ``h_n`` - the explicit comparison function that bounds the hyperbolic heat
  kernel from above and below up to constants.  It is a proxy, not a kernel.
* :class:`NumericalKernel` - the radial fundamental solution ``K(o, r, t)``
  obtained from a normalised narrow bump evolved by the exact discrete
  semigroup on two nested grids and Richardson extrapolated.

On homogeneous models the kernel only depends on the geodesic distance, so the
radial profile ``K(o, ., t)`` is the whole kernel and :func:`semigroup_apply`
integrates it against radial data with the law of cosines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .geometry import sphere_measure
from .grid import RadialField, discretize, log_cell_volumes, operator_on, refine_nodes

_THETA_X, _THETA_W = np.polynomial.legendre.leggauss(64)
_LOG_FLOOR = -745.0
# kernel values more than e^-40 below the peak are dropped from quadratures
_SUPPORT_DROP = 40.0


class CalibrationError(RuntimeError):
    """The kernel ratio spreads too much to be a discretisation of a two-sided bound."""


class KernelDataError(ValueError):
    """Kernel samples unusable for a log-rate fit."""


def log_h_n(n, r, t):
    """Natural log of the comparison function ``h_n(r, t)``."""
    r = np.asarray(r, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("h_n needs t > 0")
    if np.any(r < 0):
        raise ValueError("h_n needs r >= 0")
    return (-0.5 * n * np.log(4 * math.pi * t) - (n - 1) ** 2 * t / 4.0 - (n - 1) * r / 2.0
            - r**2 / (4 * t) + 0.5 * (n - 3) * np.log1p(r + t) + np.log1p(r))


def h_n(n, r, t):
    """``(4 pi t)^(-n/2) exp(-(n-1)^2 t/4 - (n-1) r/2 - r^2/(4t)) (1+r+t)^((n-3)/2) (1+r)``."""
    out = np.exp(log_h_n(n, r, t))
    return float(out) if np.ndim(out) == 0 else out


class NumericalKernel:
    """Radial heat kernel from the pole, ``k_t(r) = K(o, r, t)``, on ``B(o, R)`` with Dirichlet data.

    The initial bump is the small-time kernel at ``t0 = (width * h)^2 / 2``
    (Gaussian times the volume-density correction), normalised to unit mass on
    the grid, and is evolved for ``t - t0`` by the exact discrete semigroup.
    Short times use uniformisation (a Poisson-weighted sum of non-negative
    matrix powers, accurate entry by entry deep into the Gaussian tail); long
    times use the eigendecomposition.  Two nested grids are combined by
    Richardson extrapolation.  The kernel is sub-Markov (mass leaks through
    ``r = R``).
    """

    # uniformisation is used while rate * t stays below this many matrix-vector products
    UNIFORMIZATION_BUDGET = 60000

    def __init__(self, manifold, R=20.0, N=800, bump_width=2.0, richardson=True):
        self.manifold = manifold
        self.R = R
        self.N = N
        self.richardson = richardson
        self.coarse = discretize(manifold, R, N, refine=1.0)
        self.nodes = self.coarse.nodes
        self.t0 = 0.5 * (bump_width * self.nodes[1]) ** 2
        self._parts = [self._prepare(self.coarse)]
        if richardson:
            self.fine = operator_on(manifold, refine_nodes(self.nodes))
            self._parts.append(self._prepare(self.fine))
        self._cache = {}

    def _prepare(self, grid):
        m = self.manifold
        r = grid.nodes
        log_bump = -r**2 / (4 * self.t0)
        rp = r[1:]
        # leading small-time correction (r / psi)^((n-1)/2)
        log_bump[1:] += 0.5 * (m.n - 1) * (np.log(rp) - m.log_psi(rp))
        bump = np.exp(log_bump - log_bump.max())
        bump[-1] = 0.0
        bump /= grid.integrate(bump)
        return {"grid": grid, "u0": bump[:-1], "rate": float(np.max(-grid.diag))}

    @staticmethod
    def _eigen(part, t):
        grid = part["grid"]
        lam, Q = grid.eigensystem()
        half = np.exp(0.5 * grid.log_volumes[:-1])
        u = Q @ (np.exp(lam * t) * (Q.T @ (half * part["u0"])))
        return u / half

    @staticmethod
    def _uniformized(part, t):
        grid, c = part["grid"], part["rate"]
        ct = c * t
        k_max = int(ct + 12.0 * math.sqrt(ct) + 40)
        k = np.arange(k_max + 1)
        log_w = -ct + k * math.log(ct) - gammaln(k + 1)
        lo, di, up = grid.lower / c, 1.0 + grid.diag / c, grid.upper / c
        v = part["u0"].copy()
        acc = np.zeros_like(v)
        for j in range(k_max + 1):
            if log_w[j] > -745.0:
                acc += math.exp(log_w[j]) * v
            w = di * v
            w[1:] += lo * v[:-1]
            w[:-1] += up * v[1:]
            v = w
        return acc

    def _evolve(self, part, t):
        s = t - self.t0
        if part["rate"] * s <= self.UNIFORMIZATION_BUDGET:
            u = self._uniformized(part, s)
        else:
            u = self._eigen(part, s)
        return np.append(np.maximum(u, 0.0), 0.0)

    def profile(self, t):
        """``K(o, r_i, t)`` at the coarse nodes."""
        if t <= self.t0:
            raise ValueError(f"kernel resolved only for t > {self.t0:.3g}")
        key = float(t)
        if key in self._cache:
            return self._cache[key]
        kc = self._evolve(self._parts[0], t)
        if not self.richardson:
            out = kc
        else:
            kf = self._evolve(self._parts[1], t)[::2]
            with np.errstate(divide="ignore", invalid="ignore"):
                # extrapolate ln k so the deep tail stays positive
                lk = (4.0 * np.log(kf) - np.log(kc)) / 3.0
                out = np.where((kf > 0) & (kc > 0), np.exp(lk), kf)
            # extrapolation may add O(h^2) mass; the coarse discrete semigroup is exactly sub-Markov
            cap = self.coarse.integrate(kc)
            mass = self.coarse.integrate(out)
            if mass > cap:
                out = out * (cap / mass)
        if len(self._cache) > 64:
            self._cache.clear()
        self._cache[key] = out
        return out

    def at(self, t):
        return RadialField(self.nodes, self.profile(t))

    def log_profile(self, t):
        k = self.profile(t)
        with np.errstate(divide="ignore"):
            return np.where(k > 0, np.log(np.maximum(k, 1e-320)), _LOG_FLOOR)

    def __call__(self, r, t):
        """Kernel at arbitrary radii, interpolated in ``ln k``."""
        lk = np.interp(r, self.nodes, self.log_profile(t), right=_LOG_FLOOR)
        return np.where(lk > _LOG_FLOOR, np.exp(lk), 0.0)

    def mass(self, t):
        return self.coarse.integrate(self.profile(t))

    def origin_value(self, t):
        return float(self.profile(t)[0])


class ProxyKernel:
    """``h_n`` presented with the same interface as :class:`NumericalKernel` (H^n only)."""

    def __init__(self, manifold, R=20.0, N=2001):
        if not manifold.is_hyperbolic_space:
            raise ValueError("h_n proxy is defined on H^n only")
        self.manifold = manifold
        self.R = R
        self.nodes = np.linspace(0.0, R, N)

    def log_profile(self, t):
        return log_h_n(self.manifold.n, self.nodes, t)

    def profile(self, t):
        return np.exp(self.log_profile(t))

    def __call__(self, r, t):
        return h_n(self.manifold.n, r, t)


def _shell_average(m, kernel_nodes, log_k, x, rho, d_cut):
    """``omega_{n-2} int_0^pi k(d(x, rho, theta)) sin^(n-2) theta dtheta`` for one x, many rho."""
    n = m.n
    out = np.zeros_like(rho)
    if x == 0.0:
        return sphere_measure(n - 1) * np.exp(np.interp(rho, kernel_nodes, log_k, right=_LOG_FLOOR))
    pole = rho == 0.0
    out[pole] = sphere_measure(n - 1) * math.exp(np.interp(x, kernel_nodes, log_k, right=_LOG_FLOOR))
    rr = rho[~pole]
    k = m.kappa if m.variant == "scaled_hyperbolic" else 1.0
    if m.variant == "euclidean":
        s2max = (d_cut**2 - (x - rr) ** 2) / (4 * x * rr)
    else:
        s2max = (np.sinh(0.5 * k * d_cut) ** 2 - np.sinh(0.5 * k * (x - rr)) ** 2) / (
            np.sinh(k * x) * np.sinh(k * rr))
    theta_max = 2 * np.arcsin(np.sqrt(np.clip(s2max, 0.0, 1.0)))
    theta = 0.5 * theta_max[:, None] * (_THETA_X[None, :] + 1.0)
    d = m.geodesic_distance(x, rr[:, None], theta)
    lk = np.interp(d, kernel_nodes, log_k, right=_LOG_FLOOR)
    integrand = np.exp(lk) * np.sin(theta) ** (n - 2)
    out[~pole] = sphere_measure(n - 2) * 0.5 * theta_max * (integrand @ _THETA_W)
    return out


def _support_radius(nodes, log_k):
    keep = log_k > log_k.max() - _SUPPORT_DROP
    return float(nodes[np.nonzero(keep)[0][-1]])


def semigroup_apply(m, u0, t, kernel="numerical", eval_r=None, R=20.0, N=800, kernel_obj=None):
    """Apply the heat semigroup to radial data ``u0`` (a :class:`RadialField`).

    ``kernel="numerical"`` integrates the numerical kernel against ``u0`` by
    quadrature on homogeneous models; on other models the kernel is not a
    function of distance alone and the discrete semigroup is applied directly.
    ``kernel="h_n"`` uses the comparison function instead (H^n only).
    Results are returned at ``eval_r`` (default: the nodes of ``u0``).
    """
    eval_r = u0.r if eval_r is None else np.asarray(eval_r, dtype=float)
    if t == 0:
        return RadialField(eval_r, u0(eval_r))
    if t < 0:
        raise ValueError("t must be non-negative")
    if np.any(u0.values < 0):
        raise ValueError("semigroup_apply expects non-negative data")
    if not np.any(u0.values):
        return RadialField(eval_r, np.zeros_like(eval_r))
    if kernel == "numerical" and not m.is_homogeneous:
        return _direct_semigroup(m, u0, t, eval_r, R, N)
    if kernel_obj is None:
        kernel_obj = ProxyKernel(m, R=R) if kernel == "h_n" else NumericalKernel(m, R=R, N=N)
    log_k = kernel_obj.log_profile(t)
    knodes = kernel_obj.nodes
    d_cut = _support_radius(knodes, log_k)

    src = u0.r
    live = u0.values > 0
    src, vals = src[live], u0.values[live]
    log_V = log_cell_volumes(m, u0.r)[live]
    out = np.zeros_like(eval_r)
    for j, x in enumerate(eval_r):
        near = np.abs(src - x) <= d_cut
        if not np.any(near):
            continue
        J = _shell_average(m, knodes, log_k, float(x), src[near], d_cut)
        out[j] = np.sum(np.exp(log_V[near]) * vals[near] * J)
    return RadialField(eval_r, out)


def _direct_semigroup(m, u0, t, eval_r, R, N):
    grid = discretize(m, R, N)
    lam, Q = grid.eigensystem()
    half = np.exp(0.5 * grid.log_volumes[:-1])
    v = u0(grid.nodes)[:-1]
    u = np.append(Q @ (np.exp(lam * t) * (Q.T @ (half * v))) / half, 0.0)
    return RadialField(eval_r, np.interp(eval_r, grid.nodes, np.maximum(u, 0.0), right=0.0))


@dataclass
class BoundCalibration:
    A_n: float
    B_n: float
    sample_domain: tuple
    ratios: np.ndarray

    @property
    def dispersion(self):
        return self.B_n / self.A_n


def calibrate_bounds(m, r_values, t_values, R=20.0, N=800, kernel=None, max_dispersion=1e3):
    """Empirical ``[A_n, B_n]`` with ``A_n h_n <= K_num <= B_n h_n`` on the ``(r, t)`` samples."""
    if not m.is_hyperbolic_space:
        raise ValueError("the h_n bounds are stated on H^n")
    kernel = NumericalKernel(m, R=R, N=N) if kernel is None else kernel
    r_values = np.atleast_1d(np.asarray(r_values, dtype=float))
    t_values = np.atleast_1d(np.asarray(t_values, dtype=float))
    ratios = np.empty((len(t_values), len(r_values)))
    for i, t in enumerate(t_values):
        lk = np.log(np.maximum(kernel(r_values, t), 1e-320))
        ratios[i] = np.exp(lk - log_h_n(m.n, r_values, t))
    A, B = float(ratios.min()), float(ratios.max())
    if not A > 0:
        raise CalibrationError("numerical kernel vanished on the sample domain")
    if B / A > max_dispersion:
        raise CalibrationError(f"ratio dispersion B/A = {B / A:.3g} exceeds {max_dispersion:g}; grid too coarse")
    domain = ((float(r_values.min()), float(r_values.max())), (float(t_values.min()), float(t_values.max())))
    return BoundCalibration(A, B, domain, ratios)


def log_rate(times, samples):
    """Exponential rate of ``K(x0, x0, t)`` from samples at increasing times.

    Fits ``ln K = a + b t + c ln t`` by least squares over the later half of the
    samples (at least three) and returns ``b``.  The ``ln t`` column absorbs the
    algebraic prefactor of the on-diagonal kernel, which otherwise biases a
    plain slope by roughly ``c / t``.
    """
    times = np.asarray(times, dtype=float)
    samples = np.asarray(samples, dtype=float)
    if len(times) < 3:
        raise KernelDataError("need at least 3 samples")
    if np.any(np.diff(times) <= 0) or times[0] <= 0:
        raise KernelDataError("times must be positive and increasing")
    if times[-1] < 20:
        raise KernelDataError("largest time must be at least 20")
    if np.any(~(samples > 0)):
        raise KernelDataError("kernel samples must be positive")
    k = min(len(times) // 2, len(times) - 3)
    t, y = times[k:], np.log(samples[k:])
    design = np.column_stack([np.ones_like(t), t, np.log(t)])
    coef = np.linalg.lstsq(design, y, rcond=None)[0]
    return float(coef[1])
