import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from spin7kahler.fields import Chart, DomainError, evaluate
from spin7kahler.specialfns import (
    AIRY_DOMAIN,
    PCF_DOMAIN,
    ODESolution1D,
    airy_ai,
    airy_ai_field,
    airy_ai_prime_field,
    airy_solution,
    domain_threshold_u_less_one,
    oracle_constants,
    pcf_solution,
    pcf_u0,
    pcf_v_dot_field,
    pcf_v_field,
    wronskian,
)

mp.mp.dps = 30


def airy_maclaurin(x, n_terms=60):
    # Ai = c1 f - c2 g with the two power series solutions of y'' = x y
    x = mp.mpf(x)
    c1 = 1 / (mp.power(3, mp.mpf(2) / 3) * mp.gamma(mp.mpf(2) / 3))
    c2 = 1 / (mp.power(3, mp.mpf(1) / 3) * mp.gamma(mp.mpf(1) / 3))
    f = g = mp.mpf(0)
    tf, tg = mp.mpf(1), x
    for k in range(n_terms):
        f += tf
        g += tg
        tf *= x**3 / ((3 * k + 2) * (3 * k + 3))
        tg *= x**3 / ((3 * k + 3) * (3 * k + 4))
    return c1 * f - c2 * g


def test_fixture_constants_match_mpmath():
    c = oracle_constants()
    assert abs(c["airy_ai_0"] - 0.3550280538878172) < 1e-16
    assert abs(c["airy_ai_prime_0"] + 0.2588194037928068) < 1e-16
    assert abs(c["airy_ai_0"] - float(mp.airyai(0))) < 1e-16
    assert abs(c["airy_ai_prime_0"] - float(mp.airyai(0, derivative=1))) < 1e-16
    assert abs(c["pcfu_0"] - float(mp.pcfu(0, 0))) < 1e-15
    assert abs(c["pcfu_prime_0"] - float(mp.diff(lambda z: mp.pcfu(0, z), 0))) < 1e-15


def test_integrated_airy_reproduces_values_at_zero():
    y, d1, d2 = airy_ai(0.0)
    assert abs(y - 0.3550280538878172) < 1e-10
    assert abs(d1 + 0.2588194037928068) < 1e-10
    assert d2 == 0.0


def test_integrated_pcf_reproduces_values_at_zero():
    c = oracle_constants()
    v, vd, _ = pcf_u0(0.0)
    assert abs(v - c["pcfu_0"]) < 1e-10
    # v(s) = U(0, sqrt2 s)
    assert abs(vd - math.sqrt(2) * c["pcfu_prime_0"]) < 1e-10


def test_airy_against_series_oracle():
    for y in (-3.0, -1.0, 0.5, 1.7, 3.0):
        assert abs(airy_ai(y)[0] - float(airy_maclaurin(y))) < 1e-10


@given(y=st.floats(*AIRY_DOMAIN))
def test_airy_against_mpmath(y):
    v, d, _ = airy_ai(y)
    assert abs(v - float(mp.airyai(y))) < 1e-10
    assert abs(d - float(mp.airyai(y, derivative=1))) < 1e-9


@given(s=st.floats(*PCF_DOMAIN))
def test_pcf_against_mpmath(s):
    v, _, _ = pcf_u0(s)
    assert abs(v - float(mp.pcfu(0, math.sqrt(2) * s))) < 1e-10


def test_ode_residuals():
    ys = np.linspace(*AIRY_DOMAIN, 2001)
    assert np.max(airy_solution().ode_residual(ys)) < 1e-11
    assert airy_solution().ode_residual(1.7) < 1e-11
    ss = np.linspace(*PCF_DOMAIN, 2001)
    assert np.max(pcf_solution().ode_residual(ss)) < 1e-11
    assert pcf_solution().ode_residual(0.9) < 1e-11


def test_dense_output_resolves_the_ode():
    # second derivative of the interpolant itself, not the ODE-reconstructed one
    ys = np.linspace(-9.99, 9.99, 997)
    y = airy_ai(ys)[0]
    rel = airy_solution().interpolation_consistency(ys) / np.maximum(1e-3, np.abs(y))
    assert np.max(rel) < 1e-5


def test_interpolation_against_tighter_integration():
    loose = airy_solution()
    c = oracle_constants()
    tight = ODESolution1D.integrate(
        loose.q, loose.q_prime, AIRY_DOMAIN, 10.0, c["airy_ai_10"], c["airy_ai_prime_10"], spacing=0.0025, rtol=1e-13
    )
    xs = np.linspace(-9.9, 9.9, 333) + 0.0011
    a, b = loose(xs)[0], tight(xs)[0]
    assert np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-6)) < 1e-10


def test_v_decays():
    ss = np.linspace(0.5, 10.0, 500)
    v = pcf_u0(ss)[0]
    assert np.all(np.diff(v) < 0) and np.all(v > 0)
    assert pcf_u0(6.0)[0] < 1e-6


def test_out_of_domain():
    with pytest.raises(DomainError, match="outside"):
        airy_ai(10.5)
    with pytest.raises(DomainError):
        pcf_u0(-0.1)


def test_threshold_bisection_and_grid_scan():
    sstar = domain_threshold_u_less_one()
    v0 = pcf_u0(0.0)[0]
    assert v0 > 1.0
    assert abs(pcf_u0(sstar)[0] - 1.0) < 1e-9
    assert pcf_u0(sstar + 0.1)[0] < 1.0
    grid = np.arange(0.0, 2.0, 1e-4)
    above = np.flatnonzero(pcf_u0(grid)[0] >= 1.0)
    scan = grid[above[-1]]
    assert scan <= sstar < scan + 1e-4
    # refine the bracket from the grid with mpmath and compare to 1e-9
    ref = float(mp.findroot(lambda s: mp.pcfu(0, mp.sqrt(2) * s) - 1, (scan, scan + 1e-4), solver="anderson"))
    assert abs(sstar - ref) < 1e-9


def test_wronskian_constancy():
    c = oracle_constants()
    ai = airy_solution()
    # a second, growing-at-minus-infinity solution started at 0
    other = ODESolution1D.integrate(ai.q, ai.q_prime, AIRY_DOMAIN, 0.0, 0.0, 1.0)
    ys = np.linspace(*AIRY_DOMAIN, 401)
    w = wronskian(ai, other, ys)
    assert abs(w[0]) > 0.1
    assert np.max(np.abs(w - w[200])) < 1e-9 * max(1.0, abs(w[200]))
    assert abs(w[200] - c["airy_ai_0"]) < 1e-10
    pcf = pcf_solution()
    other = ODESolution1D.integrate(pcf.q, pcf.q_prime, (0.0, 4.0), 0.0, 1.0, 0.0)
    short = ODESolution1D.integrate(pcf.q, pcf.q_prime, (0.0, 4.0), 0.0, *pcf(0.0)[:2])
    ss = np.linspace(0.0, 4.0, 201)
    w = wronskian(short, other, ss)
    assert np.max(np.abs(w - w[0])) < 1e-9 * max(1.0, abs(w[0]))


@pytest.mark.parametrize(
    "make, lo, hi",
    [
        (airy_ai_field, -9.0, 9.0),
        (airy_ai_prime_field, -9.0, 9.0),
        (pcf_v_field, 0.2, 9.0),
        (pcf_v_dot_field, 0.2, 9.0),
    ],
)
def test_registered_fields_match_finite_differences(make, lo, hi):
    c = Chart(("y", "z"))
    y, z = c.coords()
    f = make(y * 0.7 + z * 0.2) * (z * z + 1.0)
    rng = np.random.default_rng(0)
    for _ in range(10):
        p = np.array([rng.uniform(lo, hi), rng.uniform(-1.0, 1.0)])
        p[0] = min(max(p[0], (lo - 0.2 * p[1]) / 0.7 + 0.1), (hi - 0.2 * p[1]) / 0.7 - 0.1)
        j = evaluate(f, p)
        for i in range(2):
            e = np.zeros(2)
            e[i] = 1e-4
            fd = (evaluate(f, p + e, order=0).value - evaluate(f, p - e, order=0).value) / 2e-4
            assert abs(j.gradient[i] - fd) <= 1e-7 * max(1.0, abs(fd))
            gfd = (evaluate(f, p + e, order=1).gradient - evaluate(f, p - e, order=1).gradient) / 2e-4
            np.testing.assert_allclose(j.hessian[i], gfd, rtol=1e-6, atol=1e-7)
