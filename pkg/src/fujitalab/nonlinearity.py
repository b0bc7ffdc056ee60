"""Reaction terms ``f(s, t) = h(t) g(s)`` for the two families studied here.

Type-I:  ``t**q * g(s)`` with ``g(s) = s |ln s|**(-alpha)`` near zero, a linear
middle piece and a quadratic tail ``kappa s**2 + c``.

Type-II: ``exp(mu t) * s * (exp(beta s**p) - 1)``.

Both families saturate to ``+inf`` instead of producing NaN so that blow-up
shows up as a monotone explosion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

_EXP_CAP = 700.0


class IntegrabilityError(ValueError):
    """``1/g`` is not integrable at infinity."""


def _singular(s, alpha):
    # s |ln s|^-alpha on (0, 1)
    return s * (-np.log(s)) ** (-alpha)


def _singular_slope(s, alpha):
    L = -math.log(s)
    return L ** (-alpha) * (1.0 + alpha / L)


@dataclass(frozen=True)
class TypeOneSpec:
    alpha: float
    q: float
    kappa_quad: float = 1.0
    eps_splice: float = field(init=False)
    slope: float = field(init=False)
    intercept: float = field(init=False)
    offset: float = field(init=False)

    def __post_init__(self):
        for name in ("alpha", "q", "kappa_quad"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v}")
        a, k = self.alpha, self.kappa_quad
        eps = math.exp(-2.0)
        if _singular_slope(eps, a) > k:
            if _singular_slope(1e-300, a) > k:
                raise ValueError(f"kappa_quad={k} is too small to splice a convex g for alpha={a}")
            # largest s with S'(s) = kappa keeps the kink at 1/2 convex
            eps = math.exp(brentq(lambda x: _singular_slope(math.exp(x), a) - k, math.log(1e-300), -2.0,
                                  xtol=1e-15, rtol=1e-15))
        s_eps = float(_singular(eps, a))
        slope = max(_singular_slope(eps, a), (k / 4.0 - s_eps) / (0.5 - eps))
        object.__setattr__(self, "eps_splice", eps)
        object.__setattr__(self, "slope", slope)
        object.__setattr__(self, "intercept", s_eps - slope * eps)
        # clamp rounding residue; the slope choice makes the exact offset >= 0
        object.__setattr__(self, "offset", max(s_eps + slope * (0.5 - eps) - k / 4.0, 0.0))

    kind = "I"

    def g(self, s):
        s = np.asarray(s, dtype=float)
        out = np.empty_like(s)
        low = s <= self.eps_splice
        mid = (s > self.eps_splice) & (s <= 0.5)
        high = s > 0.5
        with np.errstate(divide="ignore", invalid="ignore"):
            out[low] = np.where(s[low] > 0, _singular(np.where(s[low] > 0, s[low], 0.5), self.alpha), 0.0)
        out[mid] = self.intercept + self.slope * s[mid]
        with np.errstate(over="ignore"):
            out[high] = self.kappa_quad * s[high] ** 2 + self.offset
        return out if out.ndim else float(out)

    reaction = g

    def weight(self, t):
        return np.asarray(t, dtype=float) ** self.q

    def rate(self, s, t):
        w = self.weight(t)
        with np.errstate(invalid="ignore"):
            out = w * self.g(s)
        return np.where(w == 0, 0.0, out)

    def h(self, s):
        """Quadratic tail used for ``s > 1/2``."""
        return self.kappa_quad * np.asarray(s, dtype=float) ** 2 + self.offset

    def blowup_transform(self, s):
        # quadratic tail: 1/u is asymptotically linear in the time to blow-up
        return 1.0 / np.asarray(s, dtype=float)

    def to_dict(self):
        return {"type": "I", "alpha": self.alpha, "q": self.q, "kappa_quad": self.kappa_quad}


@dataclass(frozen=True)
class TypeTwoSpec:
    mu: float
    beta: float = 1.0
    p: float = 1.0

    kind = "II"

    def __post_init__(self):
        for name in ("beta", "p"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v}")
        if not (np.isfinite(self.mu) and self.mu >= 0):
            raise ValueError(f"mu must be non-negative and finite, got {self.mu}")

    def weight(self, t):
        with np.errstate(over="ignore"):
            return np.exp(self.mu * np.asarray(t, dtype=float))

    def reaction(self, s):
        """``s (exp(beta s^p) - 1)``, evaluated in log space once the exponent is large."""
        s = np.asarray(s, dtype=float)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            e = self.beta * np.abs(s) ** self.p
            small = s * np.expm1(np.minimum(e, _EXP_CAP))
            logv = np.log(np.abs(s)) + e
            big = np.where(logv > _EXP_CAP, np.inf, np.exp(np.minimum(logv, _EXP_CAP)))
            out = np.where(e > 500.0, big, small)
        out = np.where(np.isnan(s), np.nan, out)
        return out if out.ndim else float(out)

    def rate(self, s, t):
        w = self.weight(t)
        with np.errstate(over="ignore", invalid="ignore"):
            out = w * self.reaction(s)
        return np.where(np.asarray(self.reaction(s)) == 0, 0.0, out)

    def blowup_transform(self, s):
        # exp(-beta u^p) is close to linear in t just before the escape
        return np.exp(-self.beta * np.asarray(s, dtype=float) ** self.p)

    def to_dict(self):
        return {"type": "II", "mu": self.mu, "beta": self.beta, "p": self.p}


@dataclass(frozen=True)
class PowerReaction:
    """``exp(mu t) t**q s**p``; the classical power source, mostly for ODE oracles."""

    p: float = 2.0
    mu: float = 0.0
    q: float = 0.0

    kind = "power"

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError("power reaction needs p > 1")

    def weight(self, t):
        t = np.asarray(t, dtype=float)
        w = np.exp(self.mu * t)
        return w * t**self.q if self.q else w

    def reaction(self, s):
        with np.errstate(over="ignore"):
            return np.asarray(s, dtype=float) ** self.p

    def rate(self, s, t):
        return self.weight(t) * self.reaction(s)

    def blowup_transform(self, s):
        return np.asarray(s, dtype=float) ** (1.0 - self.p)

    def to_dict(self):
        return {"type": "power", "p": self.p, "mu": self.mu, "q": self.q}


def eval_g(spec, s):
    return spec.g(s)


def eval_f(spec, s, t):
    if np.any(np.asarray(s) < 0) or np.any(np.asarray(t) < 0):
        raise ValueError("reaction is defined for s >= 0 and t >= 0")
    return spec.rate(s, t)


def fujita_exponent(mu, lambda1):
    """Critical power ``1 + mu/lambda1`` for the exponentially weighted power source."""
    if not lambda1 > 0:
        raise ValueError("lambda1 must be positive")
    return 1.0 + mu / lambda1


def reciprocal_tail(g, start=0.5, tol=1e-10, max_octaves=80):
    """``int_start^inf ds / g(s)`` by dyadic panels, raising if the panels do not shrink.

    ``g`` is a :class:`TypeOneSpec` or any positive callable.
    """
    fn = g.g if isinstance(g, TypeOneSpec) else g
    total = 0.0
    incs = []
    a = start
    for _ in range(max_octaves):
        b = 2.0 * a
        inc, _ = quad(lambda s: 1.0 / fn(s), a, b, epsabs=0.0, epsrel=1e-12, limit=200)
        total += inc
        incs.append(inc)
        a = b
        if len(incs) >= 4:
            ratio = incs[-1] / incs[-2]
            if ratio < 0.9:
                # geometric remainder of the dyadic series
                tail = incs[-1] * ratio / (1.0 - ratio)
                if tail <= tol * max(total, 1e-300):
                    return total + tail
    raise IntegrabilityError(
        f"1/g does not look integrable at infinity (last dyadic panels {incs[-3:]})")
