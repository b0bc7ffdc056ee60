"""Graded radial grids and the discrete radial Laplace-Beltrami operator.

The operator is written in flux form

    (L u)_i = [A_{i+1/2} (u_{i+1}-u_i)/h_{i+1/2} - A_{i-1/2} (u_i-u_{i-1})/h_{i-1/2}] / V_i

with ``A = psi^(n-1)`` at cell faces and ``V_i`` the exact volume of the cell
around node ``i``.  This is a second order discretisation of
``u'' + (n-1) psi'/psi u'``, it is symmetric with respect to the cell volumes
(so the same volumes are the quadrature weights), its off-diagonal entries are
positive (discrete maximum principle) and at the pole it reduces to the ghost
point formula ``n u''(0)``.  The outer node ``r = R`` carries a homogeneous
Dirichlet condition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import logsumexp

from .geometry import ManifoldModel

GRADING_RATIO = 1.05
MAX_SPACING = 0.2
MIN_POINTS = 200

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


class ResolutionError(ValueError):
    """Grid too coarse for the requested radius."""


@dataclass
class RadialField:
    """Radial function sampled on increasing nodes ``r``."""

    r: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.r.shape != self.values.shape:
            raise ValueError("nodes and values differ in shape")

    def __call__(self, x):
        """Piecewise linear interpolation, zero beyond the last node."""
        return np.interp(x, self.r, self.values, right=0.0)

    def sup(self):
        return float(np.max(np.abs(self.values)))


def graded_nodes(R, N, refine=20.0, ratio=GRADING_RATIO):
    """``N`` nodes on ``[0, R]``: geometric spacing (ratio 1.05) at the pole, uniform beyond.

    The first spacing is ``1/refine`` of the uniform spacing.
    """
    if N < MIN_POINTS:
        raise ResolutionError(f"need at least {MIN_POINTS} nodes, got {N}")
    M = N - 1
    K = int(math.ceil(math.log(refine) / math.log(ratio)))
    if M <= K:
        raise ResolutionError("too few nodes for the graded pole region")
    k = np.arange(M)
    rel = np.minimum(1.0, ratio ** (k - K).astype(float))
    h_u = R / rel.sum()
    if h_u > MAX_SPACING:
        raise ResolutionError(f"node spacing {h_u:.3g} > {MAX_SPACING} for R={R}, N={N}")
    nodes = np.concatenate([[0.0], np.cumsum(h_u * rel)])
    nodes[-1] = R
    return nodes


def refine_nodes(nodes):
    """Insert midpoints (halves every spacing)."""
    out = np.empty(2 * len(nodes) - 1)
    out[0::2] = nodes
    out[1::2] = 0.5 * (nodes[1:] + nodes[:-1])
    return out


@dataclass
class RadialGrid:
    """Nodes plus the discrete Laplacian of a model manifold.

    ``lower``/``diag``/``upper`` act on the interior unknowns ``0..N-2``; the
    last node is the Dirichlet boundary.  ``log_volumes`` are log cell volumes
    (without the sphere measure) for every node.
    """

    manifold: ManifoldModel
    nodes: np.ndarray
    log_volumes: np.ndarray
    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    sym_off: np.ndarray

    @property
    def R(self):
        return float(self.nodes[-1])

    @property
    def n_points(self):
        return len(self.nodes)

    @property
    def spacing(self):
        return np.diff(self.nodes)

    @property
    def weights(self):
        """Quadrature weights ``omega_{n-1} V_i`` (may be huge far from the pole)."""
        return self.manifold.sphere_area * np.exp(self.log_volumes)

    def integrate(self, values):
        """Volume integral of a radial function given at the nodes."""
        return float(np.dot(self.weights, np.asarray(values, dtype=float)))

    def apply(self, u):
        """Discrete Laplacian of node values ``u`` (boundary value taken as given, row dropped)."""
        u = np.asarray(u, dtype=float)
        out = self.diag * u[:-1]
        out[1:] += self.lower * u[:-2]
        out[:-1] += self.upper * u[1:-1]
        out[-1] += self.upper_boundary * u[-1]
        return out

    @property
    def upper_boundary(self):
        # coupling of the last interior node to the boundary node
        return self._upper_boundary

    def banded(self, dt):
        """Banded form of ``I - dt L`` for ``scipy.linalg.solve_banded((1, 1), ...)``."""
        ab = np.zeros((3, len(self.diag)))
        ab[0, 1:] = -dt * self.upper
        ab[1] = 1.0 - dt * self.diag
        ab[2, :-1] = -dt * self.lower
        return ab

    def field(self, values):
        return RadialField(self.nodes, values)

    def eigensystem(self):
        """Eigenpairs of the volume-symmetrised operator ``V^1/2 L V^-1/2``."""
        if getattr(self, "_eig", None) is None:
            w, Q = eigh_tridiagonal(self.diag, self.sym_off)
            self._eig = (w, Q)
        return self._eig


def discretize(m, R, N, refine=20.0):
    """Graded grid on ``[0, R]`` with ``N`` nodes and the flux-form radial Laplacian of ``m``."""
    if R > m.r_max:
        raise ResolutionError(f"R={R} exceeds the model's r_max={m.r_max}")
    return operator_on(m, graded_nodes(R, N, refine=refine))


def log_cell_volumes(m, nodes):
    """Log of ``int psi^(n-1) dr`` over the cell around each node (faces at midpoints)."""
    nodes = np.asarray(nodes, dtype=float)
    mid = 0.5 * (nodes[1:] + nodes[:-1])
    faces = np.concatenate([[nodes[0]], mid, [nodes[-1]]])
    a, b = faces[:-1], faces[1:]
    x = 0.5 * (b - a)[:, None] * _GL_X[None, :] + 0.5 * (b + a)[:, None]
    lw = m.log_volume_weight(x.ravel()).reshape(x.shape)
    with np.errstate(divide="ignore"):
        return logsumexp(lw + np.log(_GL_W)[None, :], axis=1) + np.log(0.5 * (b - a))


def operator_on(m, nodes):
    nodes = np.asarray(nodes, dtype=float)
    h = np.diff(nodes)
    mid = 0.5 * (nodes[1:] + nodes[:-1])
    log_A = m.log_volume_weight(mid)
    log_V = log_cell_volumes(m, nodes)

    nu = len(nodes) - 1  # interior unknowns
    up = np.exp(log_A - log_V[:-1]) / h          # coupling i -> i+1, i = 0..N-2
    lo = np.exp(log_A[:-1] - log_V[1:nu]) / h[:-1]  # coupling i -> i-1, i = 1..N-2
    diag = -up.copy()
    diag[1:] -= lo
    sym = np.exp(log_A[:-1] - 0.5 * (log_V[:nu - 1] + log_V[1:nu])) / h[:-1]
    grid = RadialGrid(m, nodes, log_V, lo, diag, up[:-1], sym)
    grid._upper_boundary = up[-1]
    grid._eig = None
    return grid
