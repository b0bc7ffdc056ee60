import numpy as np
import pytest

from fujitalab.geometry import ManifoldModel
from fujitalab.spectral import (EigenvalueTooLargeError, GroundState, NotSupersolutionError,
                                bottom_of_spectrum, ode_residual, solve_ground_state,
                                supersolution_residual)


def test_h3_closed_form():
    gs = solve_ground_state(ManifoldModel.hyperbolic(3), 1.0)
    r = np.linspace(0.0, 20.0, 2001)
    exact = np.where(r > 0, r / np.sinh(np.maximum(r, 1e-300)), 1.0)
    assert np.max(np.abs(gs(r) - exact)) < 1e-6
    assert gs(1.0) == pytest.approx(1 / np.sinh(1.0), abs=1e-8)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_residual_small(n):
    gs = solve_ground_state(ManifoldModel.hyperbolic(n))
    assert np.max(np.abs(ode_residual(gs).values)) < 1e-6


def test_euclidean_zero_eigenvalue_is_constant():
    gs = solve_ground_state(ManifoldModel.euclidean(3), 0.0)
    assert np.max(np.abs(gs.profile.values - 1.0)) < 1e-12


@pytest.mark.parametrize("n", [2, 3, 4])
def test_envelope_ratio(n):
    gs = solve_ground_state(ManifoldModel.hyperbolic(n))
    lo, hi = gs.envelope_constants
    assert 0 < lo <= hi and hi / lo <= 10


def test_profile_invariants(gs_h2):
    assert gs_h2(0.0) == 1.0
    assert gs_h2.derivative(0.0) == 0.0
    assert np.all(gs_h2.profile.values > 0)
    tail = gs_h2(np.linspace(1.0, 20.0, 500))
    assert np.all(np.diff(tail) < 0)


def test_eigenvalue_too_large():
    with pytest.raises(EigenvalueTooLargeError):
        solve_ground_state(ManifoldModel.hyperbolic(2), 1.0)


def test_scaled_hyperbolic_supersolution():
    gs = solve_ground_state(ManifoldModel.scaled_hyperbolic(3, 2.0))
    assert gs.lam == 4.0
    res = supersolution_residual(gs)
    assert np.min(res.values) >= -1e-6


def test_constant_is_not_supersolution():
    m = ManifoldModel.hyperbolic(2)
    with pytest.raises(NotSupersolutionError):
        supersolution_residual(GroundState.constant(m))


def test_dirichlet_bottom_converges_to_quarter():
    lam = bottom_of_spectrum(ManifoldModel.hyperbolic(2), R=30.0)
    # Dirichlet bottom on a ball sits just above 1/4 and approaches it like pi^2/R^2
    assert 0.25 < lam < 0.25 + 1.2 * np.pi**2 / 30.0**2
