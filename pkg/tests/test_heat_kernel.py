import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fujitalab.grid import RadialField, discretize
from fujitalab.heat_kernel import (KernelDataError, NumericalKernel, ProxyKernel, calibrate_bounds,
                                   h_n, log_h_n, log_rate, semigroup_apply)

mp.mp.dps = 30


def _h_oracle(n, r, t):
    n, r, t = mp.mpf(n), mp.mpf(r), mp.mpf(t)
    return float((4 * mp.pi * t) ** (-n / 2) * mp.exp(-(n - 1) ** 2 * t / 4 - (n - 1) * r / 2 - r**2 / (4 * t))
                 * (1 + r + t) ** ((n - 3) / 2) * (1 + r))


@pytest.fixture(scope="module")
def kernel_h2(h2):
    return NumericalKernel(h2)


def test_h_n_values():
    assert h_n(3, 0.0, 1.0) == pytest.approx(_h_oracle(3, 0, 1), rel=1e-13)
    assert h_n(3, 0.0, 1.0) == pytest.approx(0.008262, rel=1e-3)
    assert h_n(2, 0.0, 1.0) == pytest.approx(_h_oracle(2, 0, 1), rel=1e-13)
    assert h_n(2, 0.0, 1.0) == pytest.approx(0.04380, rel=1e-3)


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 10), st.floats(0.0, 40.0), st.floats(1e-4, 1e3))
def test_log_h_n_finite_and_matches_oracle(n, r, t):
    v = log_h_n(n, r, t)
    assert np.isfinite(v)
    assert v == pytest.approx(float(mp.log(_h_oracle(n, r, t))) if _h_oracle(n, r, t) > 0 else v, rel=1e-10, abs=1e-9)


def test_h_n_decays_in_r():
    r = np.linspace(0, 40, 200)
    v = h_n(3, r, 0.7)
    assert np.all(np.diff(v) < 0) and v[-1] < 1e-100


def test_h_n_domain():
    with pytest.raises(ValueError):
        h_n(2, 0.0, 0.0)
    with pytest.raises(ValueError):
        h_n(2, -1.0, 1.0)


def test_log_rate_exact_exponential():
    t = np.linspace(10, 40, 13)
    assert log_rate(t, np.exp(-0.37 * t)) == pytest.approx(-0.37, abs=1e-12)


def test_log_rate_proxy_h3():
    t = np.linspace(10, 40, 16)
    assert log_rate(t, h_n(3, 0.0, t)) == pytest.approx(-1.0, abs=0.05)


def test_log_rate_errors():
    with pytest.raises(KernelDataError):
        log_rate([1, 2], [1, 1])
    with pytest.raises(KernelDataError):
        log_rate([1, 2, 3], [1, 1, 1])
    with pytest.raises(KernelDataError):
        log_rate([10, 20, 30], [1, 0, 1])


def test_numerical_kernel_positive_and_submarkov(kernel_h2):
    for t in (0.2, 1.0, 5.0, 20.0):
        assert np.all(kernel_h2.profile(t)[:-1] > 0)
        assert 0 < kernel_h2.mass(t) <= 1 + 1e-9


def test_single_point_calibration(h3):
    kern = NumericalKernel(h3, N=400)
    cal = calibrate_bounds(h3, [1.0], [1.0], kernel=kern)
    assert cal.A_n == cal.B_n


def test_semigroup_zero_and_copy(h2, grid_h2):
    zero = RadialField(grid_h2.nodes, np.zeros(grid_h2.n_points))
    assert np.all(semigroup_apply(h2, zero, 1.0).values == 0)
    u0 = RadialField(grid_h2.nodes, np.exp(-grid_h2.nodes**2))
    same = semigroup_apply(h2, u0, 0.0)
    assert np.array_equal(same.values, u0.values)


def test_semigroup_mass_audit(h2, grid_h2, kernel_h2):
    r = grid_h2.nodes
    u0 = RadialField(r, (r <= 1.0).astype(float))
    out = semigroup_apply(h2, u0, 1.0, eval_r=r, kernel_obj=kernel_h2)
    assert grid_h2.integrate(out.values) <= grid_h2.integrate(u0.values) + 1e-6
    assert np.all(out.values >= 0)


def test_semigroup_eigenmode(h2, gs_h2, grid_h2, kernel_h2):
    u0 = RadialField(grid_h2.nodes, gs_h2(grid_h2.nodes))
    r = np.linspace(0, 5, 21)
    out = semigroup_apply(h2, u0, 1.0, eval_r=r, kernel_obj=kernel_h2)
    assert np.max(np.abs(out.values - math.exp(-0.25) * gs_h2(r))) < 0.01


def test_semigroup_composition(h3):
    kern = NumericalKernel(h3, N=600)
    g = discretize(h3, 20.0, 600)
    u0 = RadialField(g.nodes, np.exp(-g.nodes**2))
    r = np.linspace(0, 5, 11)
    once = semigroup_apply(h3, u0, 1.5, eval_r=r, kernel_obj=kern)
    mid = semigroup_apply(h3, u0, 0.5, eval_r=g.nodes, kernel_obj=kern)
    twice = semigroup_apply(h3, mid, 1.0, eval_r=r, kernel_obj=kern)
    assert np.max(np.abs(once.values - twice.values)) / np.max(once.values) < 0.02


def test_proxy_kernel_matches_formula(h3):
    p = ProxyKernel(h3)
    assert p(np.array([0.0, 1.0]), 2.0) == pytest.approx(h_n(3, np.array([0.0, 1.0]), 2.0), rel=1e-6)


def test_semigroup_rejects_negative_data(h2, grid_h2):
    with pytest.raises(ValueError):
        semigroup_apply(h2, RadialField(grid_h2.nodes, -np.ones(grid_h2.n_points)), 1.0)
