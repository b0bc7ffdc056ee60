"""Rotationally symmetric model manifolds ``dr^2 + psi(r)^2 dw^2``.

A model is fixed by its dimension and a warp function ``psi``.  Everything the
solvers need (radial drift, volume density, log-space weights, geodesic
distance on homogeneous models) is derived from ``psi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import gammaln

VARIANTS = ("euclidean", "hyperbolic", "scaled_hyperbolic", "power_decay")

# switch from (psi, psi') to (log psi, psi'/psi) once psi is safely positive
_RICCATI_SWITCH = 1.0


class DomainError(ValueError):
    """Argument outside the domain of a geometric formula."""


def sphere_measure(k):
    """Surface measure of the unit sphere S^k in R^(k+1)."""
    return math.exp(math.log(2.0) + 0.5 * (k + 1) * math.log(math.pi) - gammaln(0.5 * (k + 1)))


def ball_to_geodesic(x):
    """Hyperbolic distance to the origin of a point of the ball model with Euclidean norm ``x``."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x >= 1):
        raise DomainError("ball model requires 0 <= |x| < 1")
    out = 2.0 * np.arctanh(x)
    return float(out) if out.ndim == 0 else out


def _log_sinh(x):
    # log(sinh x) for x > 0 without overflow
    x = np.asarray(x, dtype=float)
    return x + np.log1p(-np.exp(-2.0 * x)) - math.log(2.0)


@dataclass(frozen=True)
class ManifoldModel:
    """Model manifold of dimension ``n`` with warp ``variant``.

    ``kappa`` is the curvature scale of ``scaled_hyperbolic`` and the assumed
    radial curvature bound ``-kappa^2`` used by :meth:`lambda_star`; ``gamma`` and ``c_hat`` define the
    radial curvature ``G(r) = c_hat (1 + r**gamma)`` of ``power_decay``.
    """

    n: int
    variant: str = "hyperbolic"
    kappa: float = 1.0
    gamma: float = 0.0
    c_hat: float = 1.0
    r_max: float = 40.0
    _dense: dict = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise DomainError(f"dimension must be an integer >= 2, got {self.n}")
        if self.variant not in VARIANTS:
            raise DomainError(f"unknown warp variant {self.variant!r}")
        if not self.kappa > 0:
            raise DomainError("kappa must be positive")
        if self.gamma < 0:
            raise DomainError("gamma must be non-negative")
        if not self.c_hat > 0:
            raise DomainError("c_hat must be positive")
        if not 0 < self.r_max < 700:
            raise DomainError("r_max must lie in (0, 700)")
        if self.variant == "power_decay":
            object.__setattr__(self, "_dense", self._integrate_warp())

    # constructors -------------------------------------------------------

    @classmethod
    def hyperbolic(cls, n, **kw):
        return cls(n=n, variant="hyperbolic", **kw)

    @classmethod
    def euclidean(cls, n, **kw):
        return cls(n=n, variant="euclidean", **kw)

    @classmethod
    def scaled_hyperbolic(cls, n, kappa, **kw):
        return cls(n=n, variant="scaled_hyperbolic", kappa=kappa, **kw)

    @classmethod
    def power_decay(cls, n, c_hat=1.0, gamma=1.0, **kw):
        return cls(n=n, variant="power_decay", c_hat=c_hat, gamma=gamma, **kw)

    def to_dict(self):
        return {"variant": self.variant, "n": self.n, "kappa": self.kappa,
                "gamma": self.gamma, "c_hat": self.c_hat, "r_max": self.r_max}

    # warp ---------------------------------------------------------------

    def curvature(self, r):
        """Radial curvature ``G(r) = psi''/psi``."""
        r = np.asarray(r, dtype=float)
        if self.variant == "euclidean":
            return np.zeros_like(r)
        if self.variant == "hyperbolic":
            return np.ones_like(r)
        if self.variant == "scaled_hyperbolic":
            return np.full_like(r, self.kappa**2)
        return self.c_hat * (1.0 + r**self.gamma)

    def _integrate_warp(self):
        G = lambda r: self.c_hat * (1.0 + r**self.gamma)
        r_sw = min(_RICCATI_SWITCH, self.r_max)
        near = solve_ivp(lambda r, y: [y[1], G(r) * y[0]], (0.0, r_sw), [0.0, 1.0],
                         method="DOP853", rtol=1e-12, atol=1e-14, dense_output=True)
        psi_sw, dpsi_sw = near.y[:, -1]
        far = None
        if self.r_max > r_sw:
            # (log psi)' = y, y' = G - y^2 with y = psi'/psi
            far = solve_ivp(lambda r, z: [z[1], G(r) - z[1] ** 2], (r_sw, self.r_max),
                            [math.log(psi_sw), dpsi_sw / psi_sw],
                            method="DOP853", rtol=1e-12, atol=1e-14, dense_output=True)
        return {"r_sw": r_sw, "near": near.sol, "far": far.sol if far is not None else None}

    def _check_r(self, r, allow_zero=True):
        r = np.asarray(r, dtype=float)
        if allow_zero and np.any(r < 0):
            raise DomainError("radius must be non-negative")
        if not allow_zero and np.any(r <= 0):
            raise DomainError("radius must be positive (coordinate singularity at the pole)")
        if np.any(r > self.r_max * (1 + 1e-12)):
            raise DomainError(f"radius exceeds r_max={self.r_max}")
        return r

    def _power_decay_eval(self, r):
        d = self._dense
        r = np.atleast_1d(r)
        log_psi = np.empty_like(r)
        ratio = np.empty_like(r)  # psi'/psi
        near = r <= d["r_sw"]
        if np.any(near):
            psi, dpsi = d["near"](r[near])
            with np.errstate(divide="ignore"):
                log_psi[near] = np.log(psi)
                ratio[near] = dpsi / psi
        if np.any(~near):
            lp, y = d["far"](r[~near])
            log_psi[~near] = lp
            ratio[~near] = y
        return log_psi, ratio

    def log_psi(self, r):
        r = self._check_r(r)
        scalar = r.ndim == 0
        with np.errstate(divide="ignore"):
            if self.variant == "euclidean":
                out = np.log(r)
            elif self.variant == "hyperbolic":
                out = np.where(r > 0, _log_sinh(np.maximum(r, 1e-300)), -np.inf)
            elif self.variant == "scaled_hyperbolic":
                k = self.kappa
                out = np.where(r > 0, _log_sinh(np.maximum(k * r, 1e-300)) - math.log(k), -np.inf)
            else:
                out = self._power_decay_eval(r)[0].reshape(r.shape)
        return float(out) if scalar else out

    def psi(self, r):
        """Warp function."""
        r = self._check_r(r)
        if self.variant == "euclidean":
            out = r.copy()
        elif self.variant == "hyperbolic":
            out = np.sinh(r)
        elif self.variant == "scaled_hyperbolic":
            out = np.sinh(self.kappa * r) / self.kappa
        else:
            out = np.exp(self.log_psi(r))
        return float(out) if np.ndim(out) == 0 else out

    def dpsi(self, r):
        r = self._check_r(r)
        if self.variant == "euclidean":
            out = np.ones_like(r)
        elif self.variant == "hyperbolic":
            out = np.cosh(r)
        elif self.variant == "scaled_hyperbolic":
            out = np.cosh(self.kappa * r)
        else:
            rr = np.atleast_1d(r)
            out = np.empty_like(rr)
            near = rr <= self._dense["r_sw"]
            if np.any(near):
                out[near] = self._dense["near"](rr[near])[1]
            if np.any(~near):
                lp, y = self._dense["far"](rr[~near])
                out[~near] = np.exp(lp) * y
            out = out.reshape(r.shape)
        return float(out) if np.ndim(out) == 0 else out

    def log_derivative(self, r):
        """``psi'(r) / psi(r)`` for ``r > 0``."""
        r = self._check_r(r, allow_zero=False)
        if self.variant == "euclidean":
            out = 1.0 / r
        elif self.variant == "hyperbolic":
            out = 1.0 / np.tanh(r)
        elif self.variant == "scaled_hyperbolic":
            out = self.kappa / np.tanh(self.kappa * r)
        else:
            out = self._power_decay_eval(r)[1].reshape(r.shape)
        return float(out) if np.ndim(out) == 0 else out

    def radial_drift(self, r):
        """Mean curvature ``(n-1) psi'/psi`` of the geodesic sphere of radius ``r``."""
        return (self.n - 1) * self.log_derivative(r)

    def volume_weight(self, r):
        """Radial volume density ``psi(r)**(n-1)`` (multiply by the unit-sphere measure)."""
        r = self._check_r(r)
        out = np.exp((self.n - 1) * self.log_psi(r)) if self.variant == "power_decay" \
            else np.asarray(self.psi(r)) ** (self.n - 1)
        return float(out) if np.ndim(out) == 0 else out

    def log_volume_weight(self, r):
        return (self.n - 1) * self.log_psi(r)

    @property
    def sphere_area(self):
        """Measure of the unit sphere S^(n-1)."""
        return sphere_measure(self.n - 1)

    # spectral constants -------------------------------------------------

    def lambda_star(self):
        """Spectral constant used by the global-existence certificates.

        ``(n-1)^2/4`` on H^n, ``(n-1)^2 kappa^2/4`` from the curvature bound ``-kappa^2`` alone, and the
        numerically computed bottom of the spectrum for ``power_decay`` with
        ``gamma > 0``.
        """
        if self.variant == "hyperbolic":
            return (self.n - 1) ** 2 / 4.0
        if self.variant == "euclidean":
            return 0.0
        if self.variant == "power_decay" and self.gamma > 0:
            from .spectral import bottom_of_spectrum
            return bottom_of_spectrum(self)
        if self.variant == "power_decay":
            # constant curvature -2 c_hat; kappa is the curvature bound actually assumed
            return (self.n - 1) ** 2 * min(self.kappa**2, 2 * self.c_hat) / 4.0
        return (self.n - 1) ** 2 * self.kappa**2 / 4.0

    @property
    def is_hyperbolic_space(self):
        return self.variant == "hyperbolic"

    @property
    def is_homogeneous(self):
        return self.variant in ("euclidean", "hyperbolic", "scaled_hyperbolic")

    def geodesic_distance(self, r, rho, theta):
        """Distance between points at radii ``r``, ``rho`` separated by angle ``theta``.

        Only available on homogeneous models, where it follows from the law of
        cosines; written in half-angle form to stay accurate for short distances.
        """
        r, rho, theta = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (r, rho, theta)))
        s2 = np.sin(0.5 * theta) ** 2
        if self.variant == "euclidean":
            return np.sqrt((r - rho) ** 2 + 4.0 * r * rho * s2)
        if self.variant not in ("hyperbolic", "scaled_hyperbolic"):
            raise DomainError("geodesic distance off the pole requires a homogeneous model")
        k = self.kappa if self.variant == "scaled_hyperbolic" else 1.0
        # cosh(kd) - 1 = 2 sinh^2(k(r-rho)/2) + 2 sinh(kr) sinh(k rho) sin^2(theta/2)
        half = np.sinh(0.5 * k * (r - rho)) ** 2 + np.sinh(k * r) * np.sinh(k * rho) * s2
        return 2.0 * np.arcsinh(np.sqrt(half)) / k


def radial_drift(m, r):
    return m.radial_drift(r)


def lambda_star(m):
    return m.lambda_star()


def volume_weight(m, r):
    return m.volume_weight(r)
