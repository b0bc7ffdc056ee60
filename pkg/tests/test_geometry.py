import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fujitalab.geometry import (DomainError, ManifoldModel, ball_to_geodesic, lambda_star,
                                radial_drift, sphere_measure, volume_weight)

mp.mp.dps = 40

MODELS = [
    ManifoldModel.euclidean(3),
    ManifoldModel.hyperbolic(2),
    ManifoldModel.hyperbolic(5),
    ManifoldModel.scaled_hyperbolic(3, 2.0),
    ManifoldModel.power_decay(3, c_hat=0.5, gamma=1.0),
    ManifoldModel.power_decay(2, c_hat=1.0, gamma=0.0),
]


def test_drift_h3_against_high_precision():
    expected = float(2 * mp.coth(1))
    assert radial_drift(ManifoldModel.hyperbolic(3), 1.0) == pytest.approx(expected, rel=1e-14)
    assert expected == pytest.approx(2.62607, abs=1e-5)


def test_drift_euclidean():
    assert radial_drift(ManifoldModel.euclidean(3), 2.0) == pytest.approx(1.0, rel=1e-15)


def test_drift_scaled_asymptote():
    m = ManifoldModel.scaled_hyperbolic(2, 2.0)
    assert abs(radial_drift(m, 30.0) - 2.0) < 1e-12


def test_drift_rejects_pole():
    with pytest.raises(DomainError):
        radial_drift(ManifoldModel.hyperbolic(2), 0.0)


@pytest.mark.parametrize("m, expected", [
    (ManifoldModel.hyperbolic(2), 0.25),
    (ManifoldModel.hyperbolic(4), 2.25),
    (ManifoldModel.scaled_hyperbolic(3, 2.0), 4.0),
])
def test_lambda_star_table(m, expected):
    assert lambda_star(m) == pytest.approx(expected, rel=1e-15)


def test_lambda_star_monotone_in_dimension():
    for variant_kw in ({"variant": "hyperbolic"}, {"variant": "scaled_hyperbolic", "kappa": 1.5}):
        vals = [ManifoldModel(n=n, **variant_kw).lambda_star() for n in range(2, 9)]
        assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_ball_to_geodesic_values():
    assert ball_to_geodesic(0.0) == 0.0
    assert ball_to_geodesic(0.5) == pytest.approx(float(mp.log(3)), rel=1e-15)
    x = (math.e - 1) / (math.e + 1)
    assert abs(ball_to_geodesic(x) - 1.0) < 1e-14
    with pytest.raises(DomainError):
        ball_to_geodesic(1.0)


@given(st.floats(0.0, 0.999), st.floats(0.0, 0.999))
def test_ball_to_geodesic_monotone(a, b):
    if a < b:
        assert ball_to_geodesic(a) <= ball_to_geodesic(b)


def test_volume_weight_values():
    assert volume_weight(ManifoldModel.hyperbolic(2), 1.7) == pytest.approx(math.sinh(1.7), rel=1e-14)
    assert volume_weight(ManifoldModel.hyperbolic(3), 1.0) == pytest.approx(float(mp.sinh(1) ** 2), rel=1e-14)
    assert volume_weight(ManifoldModel.euclidean(3), 2.0) == pytest.approx(4.0, rel=1e-15)


def test_sphere_measure():
    assert sphere_measure(1) == pytest.approx(2 * math.pi)
    assert sphere_measure(2) == pytest.approx(4 * math.pi)


@pytest.mark.parametrize("m", MODELS, ids=lambda m: f"{m.variant}-{m.n}")
def test_warp_dominates_identity_and_is_convex(m):
    r = np.linspace(0.0, 40.0, 4001)
    psi = np.asarray(m.psi(r))
    assert np.all(psi >= r * (1 - 1e-12))
    h = r[1] - r[0]
    second = psi[2:] - 2 * psi[1:-1] + psi[:-2]
    assert np.all(second >= -1e-9 * np.abs(psi[1:-1]) * h**0)


def test_warp_pole_conditions():
    for m in MODELS:
        assert m.psi(0.0) == 0.0
        assert m.dpsi(0.0) == pytest.approx(1.0, abs=1e-10)


def test_power_decay_solves_curvature_equation():
    m = ManifoldModel.power_decay(3, c_hat=0.5, gamma=1.0)
    r = np.linspace(0.5, 39.9, 400)
    h = 1e-3
    # second derivative of log psi plus (log psi')^2 equals psi''/psi
    lp = lambda x: np.asarray(m.log_derivative(x))
    d_ratio = (lp(r + h) - lp(r - h)) / (2 * h)
    G = d_ratio + lp(r) ** 2
    assert np.max(np.abs(G - 0.5 * (1 + r))) < 1e-6 * np.max(0.5 * (1 + r))


def test_hyperbolic_drift_matches_coth_series():
    m = ManifoldModel.hyperbolic(4)
    for r in (0.01, 0.3, 1.0, 7.0, 25.0):
        assert radial_drift(m, r) == pytest.approx(float(3 * mp.coth(r)), rel=1e-12)


def test_model_rejects_bad_input():
    with pytest.raises(DomainError):
        ManifoldModel(n=1)
    with pytest.raises(DomainError):
        ManifoldModel(n=2, variant="sphere")
    with pytest.raises(DomainError):
        ManifoldModel.hyperbolic(2).psi(41.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 39.0), st.floats(0.01, 39.0), st.floats(0.0, math.pi))
def test_geodesic_distance_triangle(r, rho, theta):
    m = ManifoldModel.hyperbolic(2)
    d = m.geodesic_distance(r, rho, theta)
    assert abs(r - rho) - 1e-7 <= d <= r + rho + 1e-7
