import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

import oracles
from jumpfct.quadrature import (
    RuleKind,
    build_rule,
    integral_I,
    integral_I_panels,
    integrate_finite,
    integrate_time,
    laguerre,
    legendre,
    time_nodes,
)


def legendre_moment(k):
    return 0.0 if k % 2 else 2.0 / (k + 1)


def laguerre_moment(k, beta):
    return math.gamma(k + beta + 1)


@pytest.mark.parametrize("order", [4, 16, 32])
def test_legendre_matches_scipy(order):
    x, w = special.roots_legendre(order)
    rule = legendre(order)
    np.testing.assert_allclose(rule.nodes, x, rtol=0, atol=1e-14)
    np.testing.assert_allclose(rule.weights, w, rtol=1e-12)


@pytest.mark.parametrize("beta", [-0.5, 0.0, 1.5])
def test_laguerre_matches_scipy(beta):
    x, w = special.roots_genlaguerre(16, beta)
    rule = laguerre(16, beta)
    np.testing.assert_allclose(rule.nodes, x, rtol=1e-13)
    np.testing.assert_allclose(rule.weights, w, rtol=1e-10, atol=1e-300)


@pytest.mark.parametrize("k", range(32))
def test_legendre_monomials(k):
    rule = legendre(16)
    scale = np.sum(np.abs(rule.weights * rule.nodes**k))
    assert abs(rule.weights @ rule.nodes**k - legendre_moment(k)) <= 1e-12 * scale


@pytest.mark.parametrize("beta", [-0.5, 0.0])
def test_laguerre_monomials(beta):
    rule = laguerre(16, beta)
    for k in range(32):
        ref = laguerre_moment(k, beta)
        assert rule.weights @ rule.nodes**k == pytest.approx(ref, rel=1e-12)


def test_rule_validation():
    with pytest.raises(ValueError):
        build_rule(RuleKind.GAUSS_LEGENDRE, 0)
    with pytest.raises(ValueError):
        build_rule(RuleKind.GENERALIZED_GAUSS_LAGUERRE, 8, beta=-1.0)
    with pytest.raises(ValueError):
        integrate_finite(np.sin, 1.0, 1.0)
    with pytest.raises(ValueError):
        integrate_finite(np.sin, 0.0, 1.0, laguerre(8))
    assert legendre(16) is legendre(16)


def test_integrate_finite():
    assert integrate_finite(np.exp, 0.0, 1.0) == pytest.approx(math.e - 1, rel=1e-14)


def test_time_nodes_absorb_endpoint_singularity():
    # int_0^t dtheta / sqrt(t - theta) = 2 sqrt(t)
    for t in (0.5, 3.0):
        val = integrate_time(lambda th: 1.0 / np.sqrt(t - th), t)
        assert val == pytest.approx(2 * math.sqrt(t), rel=1e-13)
    theta, w = time_nodes(np.array([1.0, 2.0]), 8)
    assert theta.shape == w.shape == (2, 8)
    assert np.all((theta > 0) & (theta < np.array([[1.0], [2.0]])))


@pytest.mark.parametrize("a", [0.5, 1.0, 4.0])
@pytest.mark.parametrize("b", [-1.0, 0.0, 1.0])
def test_integral_I_c_zero_closed_form(a, b):
    # with c = 0, Phi(d) factors out; d = 0 gives one half
    ref = 0.5 * math.sqrt(math.pi / a) * oracles.phi_mp(b * math.sqrt(2 * a))
    assert abs(integral_I(a, b, 0.0, 0.0) - ref) <= 1e-10 * max(ref, 1.0)
    ls, mt = integral_I_panels(a, b, 0.0, 0.0)
    assert math.exp(ls) * mt == pytest.approx(ref, rel=1e-12)


CASES = [
    (1.0, 0.5, 1.0, -0.2),
    (0.3, 2.0, -2.0, 3.0),
    (5.0, -0.3, 0.7, 0.1),
    (2.0, 3.0, -5.0, 14.0),
    (0.8, 1.0, 0.0, 1.3),
]


SMOOTH = [case for case in CASES if abs(case[2]) <= math.sqrt(case[0])]
STEPPED = [case for case in CASES if abs(case[2]) > math.sqrt(case[0])]


@pytest.mark.parametrize("a,b,c,d", SMOOTH)
def test_integral_I_against_adaptive(a, b, c, d):
    ref = oracles.integral_I_adaptive(a, b, c, d)
    assert integral_I(a, b, c, d) == pytest.approx(ref, rel=1e-9)


@pytest.mark.parametrize("a,b,c,d", STEPPED)
def test_two_piece_split_degrades_on_sharp_steps(a, b, c, d):
    """A normal-cdf step narrower than the Gaussian is poorly resolved by the
    fixed 16-node split, which is why the cdf bound uses the panel version."""
    ref = oracles.integral_I_adaptive(a, b, c, d)
    split_err = abs(integral_I(a, b, c, d) / ref - 1)
    ls, mt = integral_I_panels(a, b, c, d)
    panel_err = abs(math.exp(ls) * mt / ref - 1)
    assert split_err < 1e-3
    assert panel_err < 1e-11


def mp_I(a, b, c, d):
    # mpmath stops on an absolute error, so normalise by the value at the
    # left-most candidate peak before integrating
    top = max(b, 0)
    scale = mp.exp(-a * (top - b) ** 2) * mp.ncdf(c * top + d)
    f = lambda x: mp.exp(-a * (x - b) ** 2) * mp.ncdf(c * x + d) / scale
    width = 1 / mp.sqrt(a)
    # geometric breakpoints off x = 0 catch a steep one-sided decay there
    edge = {float(width) * 2.0**-k for k in range(16)}
    pts = sorted({0, max(b, 0)} | edge | ({float(-d / c)} if c and 0 < -d / c < 60 * width else set()))
    pts = [mp.mpf(p) for p in pts] + [mp.mpf(max(b, 0)) + 60 * width]
    return scale * (mp.quad(f, pts) + mp.quad(f, [pts[-1], mp.inf]))


@pytest.mark.parametrize(
    "a,b,c,d",
    CASES
    + [
        (25.0, -3.0, 1.0, 0.0),  # peak far left of zero: tiny value
        (1.0, 4.0, -40.0, 80.0),  # sharp Phi step inside the Gaussian
        (0.05, 40.0, 1.0, -60.0),  # step in the far tail
    ],
)
def test_integral_I_panels_relative(a, b, c, d):
    ref = mp_I(mp.mpf(a), mp.mpf(b), mp.mpf(c), mp.mpf(d))
    ls, mt = integral_I_panels(a, b, c, d)
    got = mp.mpf(mt) * mp.exp(ls)
    assert float(abs(got - ref) / ref) < 1e-12


def test_integral_I_vectorised_and_validated():
    a = np.array([1.0, 2.0, 0.5])
    vals = integral_I(a, 0.5, 1.0, 0.0)
    assert vals.shape == (3,)
    for ai, v in zip(a, vals):
        assert v == pytest.approx(integral_I(ai, 0.5, 1.0, 0.0), rel=1e-15)
    with pytest.raises(ValueError):
        integral_I(0.0, 1.0, 1.0, 1.0)


@settings(max_examples=60, deadline=None)
@given(
    a=st.floats(0.1, 10),
    b=st.floats(-2, 5),
    c=st.floats(-5, 5),
    d=st.floats(-5, 5),
)
def test_integral_I_monotone_in_d(a, b, c, d):
    """Phi is increasing, so I grows with d; the split agrees where Phi is smooth."""
    ls, mt = integral_I_panels(a, b, c, d)
    ls2, mt2 = integral_I_panels(a, b, c, d + 0.5)
    lo, hi = math.exp(ls) * mt, math.exp(ls2) * mt2
    assert 0 < lo <= hi * (1 + 1e-13)
    assert lo <= math.sqrt(math.pi / a) * (1 + 1e-13)
    if abs(c) <= math.sqrt(a):
        assert integral_I(a, b, c, d) == pytest.approx(lo, rel=1e-8, abs=1e-14)
