import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from fujitalab.nonlinearity import (IntegrabilityError, TypeOneSpec, TypeTwoSpec, eval_f, eval_g,
                                    fujita_exponent, reciprocal_tail)

mp.mp.dps = 30


def test_g_singular_regime_values():
    assert eval_g(TypeOneSpec(2.0, 1.0), math.exp(-2)) == pytest.approx(float(mp.e ** -2 / 4), rel=1e-13)
    assert eval_g(TypeOneSpec(5.0, 1.0), math.exp(-4)) == pytest.approx(float(mp.e ** -4 * mp.mpf(4) ** -5), rel=1e-13)
    assert eval_g(TypeOneSpec(5.0, 1.0), math.exp(-4)) == pytest.approx(1.789e-5, rel=1e-3)


@pytest.mark.parametrize("alpha", [0.3, 1.0, 2.0, 5.0])
def test_g_at_zero(alpha):
    assert eval_g(TypeOneSpec(alpha, 1.0), 0.0) == 0.0


def test_type_two_value():
    assert eval_f(TypeTwoSpec(1.0, 1.0, 1.0), 1.0, 0.0) == pytest.approx(math.e - 1, rel=1e-14)


def test_type_one_vanishes_at_t0():
    spec = TypeOneSpec(1.0, 0.7)
    assert np.all(eval_f(spec, np.linspace(0, 5, 11), 0.0) == 0.0)


@pytest.mark.parametrize("p", [0.5, 1.0, 2.0])
def test_type_two_small_state_asymptotics(p):
    spec = TypeTwoSpec(0.3, 1.7, p)
    s = 1e-10
    assert eval_f(spec, s, 0.0) / s ** (p + 1) == pytest.approx(1.7, rel=1e-4)


def test_type_two_saturates():
    v = eval_f(TypeTwoSpec(0.0, 1.0, 1.0), 1e4, 0.0)
    assert v == math.inf


def test_fujita_exponent_values():
    assert fujita_exponent(0.25, 0.25) == 2.0
    assert fujita_exponent(0.0, 0.7) == 1.0
    assert fujita_exponent(2.25, 2.25) == 2.0


def test_reciprocal_tail():
    assert reciprocal_tail(lambda s: s * s) == pytest.approx(2.0, rel=1e-8)
    assert reciprocal_tail(TypeOneSpec(1.0, 1.0, kappa_quad=1.0)) <= 2.0 + 1e-6
    with pytest.raises(IntegrabilityError):
        reciprocal_tail(lambda s: s)


@pytest.mark.parametrize("alpha", [0.2, 0.5, 1.0, 2.0, 5.0, 12.0])
def test_splice_continuity(alpha):
    spec = TypeOneSpec(alpha, 1.0)
    for s in (spec.eps_splice, 0.5):
        left, right = eval_g(spec, s * (1 - 1e-15)), eval_g(spec, s * (1 + 1e-15))
        assert abs(left - right) < 1e-14 + 1e-13 * abs(left)


@pytest.mark.parametrize("alpha", [0.2, 0.5, 1.0, 2.0, 5.0])
def test_g_monotone_and_convex(alpha, rng):
    spec = TypeOneSpec(alpha, 1.0)
    s = np.linspace(0.0, 10.0, 100_001)
    g = eval_g(spec, s)
    assert np.all(np.diff(g) >= 0)
    trip = np.sort(rng.uniform(0, 10, size=(10_000, 3)), axis=1)
    s1, s2, s3 = trip.T
    ok = s3 > s1
    g1, g2, g3 = (eval_g(spec, x[ok]) for x in (s1, s2, s3))
    chord = g1 + (g3 - g1) * (s2[ok] - s1[ok]) / (s3[ok] - s1[ok])
    assert np.all(g2 <= chord + 1e-12)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 5.0), st.floats(0.0, 20.0), st.floats(0.1, 3.0), st.floats(0.1, 3.0))
def test_type_two_rate_per_state_nondecreasing(mu, t, beta, p):
    spec = TypeTwoSpec(mu, beta, p)
    s = np.linspace(1e-4, 3.0, 200)
    ratio = eval_f(spec, s, t) / s
    assert np.all(ratio >= 0)
    assert np.all(np.diff(ratio) >= -1e-12 * ratio[1:])


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 10.0), st.floats(0.05, 3.0))
def test_type_one_lower_quadratic_floor(alpha, kq):
    try:
        spec = TypeOneSpec(alpha, 1.0, kappa_quad=kq)
    except ValueError:
        # a too-small quadratic floor cannot be spliced convexly; rejection is the contract
        assume(False)
    s = np.linspace(0.5001, 50, 300)
    assert np.all(eval_g(spec, s) >= kq * s**2 * (1 - 1e-12))


def test_rejects_negative_state():
    with pytest.raises(ValueError):
        eval_f(TypeTwoSpec(0.1), -1.0, 0.0)
