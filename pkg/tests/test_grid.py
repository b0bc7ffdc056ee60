import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fujitalab.geometry import ManifoldModel
from fujitalab.grid import ResolutionError, discretize, graded_nodes


@settings(max_examples=30, deadline=None)
@given(st.floats(2.0, 40.0), st.integers(200, 2000))
def test_nodes_strictly_increasing_with_endpoints(R, N):
    if R / N > 0.15:
        return
    nodes = graded_nodes(R, N)
    assert nodes[0] == 0.0 and nodes[-1] == R
    assert len(nodes) == N
    assert np.all(np.diff(nodes) > 0)


def test_resolution_error():
    with pytest.raises(ResolutionError):
        graded_nodes(100.0, 300)
    with pytest.raises(ResolutionError):
        graded_nodes(5.0, 50)


def test_laplacian_of_constant_vanishes_in_interior():
    g = discretize(ManifoldModel.hyperbolic(3), 20.0, 400)
    out = g.apply(np.full(g.n_points, 3.0))
    assert np.max(np.abs(out)) < 1e-9 * np.max(np.abs(g.diag)) * 3.0


def test_laplacian_of_r_squared_euclidean():
    m = ManifoldModel.euclidean(3)
    errs = []
    for N in (400, 800):
        g = discretize(m, 10.0, N)
        out = g.apply(g.nodes**2)
        errs.append(np.max(np.abs(out[:-1] - 6.0)))
    assert errs[-1] < 1e-6
    assert errs[0] < 1e-6


def test_ground_state_eigen_residual_second_order():
    m = ManifoldModel.hyperbolic(3)
    errs = []
    for N in (250, 500, 1000):
        g = discretize(m, 10.0, N)
        r = g.nodes
        phi = np.where(r > 0, r / np.sinh(np.maximum(r, 1e-300)), 1.0)
        res = g.apply(phi)[:-1] + phi[:-2]
        errs.append(np.max(np.abs(res)))
    assert errs[0] / errs[1] > 3.0
    assert errs[1] / errs[2] > 3.0


def test_operator_is_m_matrix():
    g = discretize(ManifoldModel.hyperbolic(2), 20.0, 400)
    assert np.all(g.lower > 0) and np.all(g.upper > 0) and np.all(g.diag < 0)
    assert np.all(np.abs(g.diag[1:-1]) >= g.lower[:-1] + g.upper[1:] - 1e-12 * np.abs(g.diag[1:-1]))


def test_volume_quadrature_of_ball():
    m = ManifoldModel.hyperbolic(3)
    g = discretize(m, 5.0, 400)
    exact = 4 * np.pi * (np.sinh(10.0) / 4 - 5.0 / 2)
    assert g.integrate(np.ones(g.n_points)) == pytest.approx(exact, rel=1e-10)
