"""scikit-learn style wrappers around the heat semigroup, the ground state and the solver.

Profiles are rows of ``X`` sampled on the estimator's grid nodes (``nodes_``).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_amplitudes, check_positive, check_profiles, make_manifold
from .grid import RadialField, discretize
from .heat_kernel import NumericalKernel, semigroup_apply
from .nonlinearity import TypeOneSpec, TypeTwoSpec
from .solver import Controls, ZeroReaction, evolve
from .spectral import ode_residual, solve_ground_state


class HeatSemigroup(TransformerMixin, BaseEstimator):
    """Applies ``e^{t Delta}`` to radial profiles."""

    def __init__(self, n=2, variant="hyperbolic", t=1.0, R=20.0, N=800):
        self.n = n
        self.variant = variant
        self.t = t
        self.R = R
        self.N = N

    def fit(self, X=None, y=None):
        check_positive(self.t, "t", strict=False)
        self.manifold_ = make_manifold(self.n, self.variant)
        self.grid_ = discretize(self.manifold_, self.R, int(self.N))
        self.nodes_ = self.grid_.nodes
        self.kernel_ = NumericalKernel(self.manifold_, R=self.R, N=int(self.N))
        if X is not None:
            check_profiles(X, len(self.nodes_))
        return self

    def transform(self, X):
        check_is_fitted(self, "kernel_")
        X = check_profiles(X, len(self.nodes_))
        if self.t == 0:
            return X.copy()
        out = np.empty_like(X)
        for i, row in enumerate(X):
            out[i] = semigroup_apply(self.manifold_, RadialField(self.nodes_, row), self.t,
                                     eval_r=self.nodes_, kernel_obj=self.kernel_).values
        return out


class GroundStateSolver(BaseEstimator):
    """Radial ground state at the spectral bottom (or a given ``lam``)."""

    def __init__(self, n=2, variant="hyperbolic", lam=None, R=20.0, N=800):
        self.n = n
        self.variant = variant
        self.lam = lam
        self.R = R
        self.N = N

    def fit(self, X=None, y=None):
        m = make_manifold(self.n, self.variant)
        self.ground_state_ = solve_ground_state(m, self.lam, R=self.R, N=int(self.N))
        self.lambda_ = self.ground_state_.lam
        self.residual_ = float(np.max(np.abs(ode_residual(self.ground_state_).values)))
        return self

    def transform(self, X):
        """Evaluates the ground state at the radii in the single column of ``X``."""
        check_is_fitted(self, "ground_state_")
        r = check_amplitudes(X)
        return self.ground_state_(r).reshape(-1, 1)

    def predict(self, X):
        return self.transform(X)[:, 0]


class SemilinearHeatFlow(BaseEstimator):
    """Classifies initial amplitudes ``theta`` (data ``theta * phi``) as Global or BlowUp.

    ``fit`` runs the solver for every amplitude in ``X`` and stores
    ``trajectories_`` and ``verdicts_``; ``predict`` returns the verdict kinds.
    """

    def __init__(self, n=2, variant="hyperbolic", reaction="II", mu=0.5, beta=1.0, p=1.0,
                 alpha=1.0, q=1.0, horizon=100.0, R=20.0, N=800, rtol=1e-3, M_big=1e6):
        self.n = n
        self.variant = variant
        self.reaction = reaction
        self.mu = mu
        self.beta = beta
        self.p = p
        self.alpha = alpha
        self.q = q
        self.horizon = horizon
        self.R = R
        self.N = N
        self.rtol = rtol
        self.M_big = M_big

    def _spec(self):
        if self.reaction == "II":
            return TypeTwoSpec(self.mu, self.beta, self.p)
        if self.reaction == "I":
            return TypeOneSpec(self.alpha, self.q)
        if self.reaction == "zero":
            return ZeroReaction()
        raise ValueError(f"reaction must be 'I', 'II' or 'zero', got {self.reaction!r}")

    def _run(self, thetas):
        trajs, verdicts = [], []
        for theta in thetas:
            tr, v = evolve(self.grid_, self.manifold_, self.spec_, theta * self.ground_state_(self.nodes_),
                           self.horizon, Controls(rtol=self.rtol, M_big=self.M_big))
            trajs.append(tr)
            verdicts.append(v)
        return trajs, verdicts

    def fit(self, X, y=None):
        check_positive(self.horizon, "horizon")
        check_positive(self.rtol, "rtol")
        thetas = check_amplitudes(X)
        self.manifold_ = make_manifold(self.n, self.variant)
        self.spec_ = self._spec()
        self.grid_ = discretize(self.manifold_, self.R, int(self.N))
        self.nodes_ = self.grid_.nodes
        self.ground_state_ = solve_ground_state(self.manifold_, R=self.R)
        self.trajectories_, self.verdicts_ = self._run(thetas)
        self.amplitudes_ = thetas
        return self

    def predict(self, X):
        check_is_fitted(self, "verdicts_")
        thetas = check_amplitudes(X)
        cached = {float(a): v for a, v in zip(self.amplitudes_, self.verdicts_)}
        missing = [t for t in thetas if float(t) not in cached]
        if missing:
            _, vs = self._run(missing)
            cached.update({float(a): v for a, v in zip(missing, vs)})
        return np.array([cached[float(t)].kind for t in thetas], dtype=object)

    def blowup_times(self):
        check_is_fitted(self, "verdicts_")
        return np.array([v.T_est if v.T_est is not None else np.nan for v in self.verdicts_])
