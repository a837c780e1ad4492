import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from spin7kahler.fields import (
    Chart,
    ChartMismatchError,
    DomainError,
    EvaluationError,
    Point,
    evaluate,
    field_arith,
    log,
    power,
    sin,
    cos,
    exp,
    atan,
)


def chart3():
    return Chart(("x", "y", "z"))


def test_square_derivatives():
    c = Chart(("x",))
    x = c.coord(0)
    j = evaluate(x * x, np.array([3.0]))
    assert j.value == 9.0
    assert j.gradient[0] == 6.0
    assert j.hessian[0, 0] == 2.0


def test_product_rule():
    c = Chart(("x", "y"))
    x, y = c.coords()
    j = evaluate(x * y, np.array([2.0, 5.0]))
    np.testing.assert_array_equal(j.gradient, [5.0, 2.0])
    np.testing.assert_array_equal(j.hessian, [[0.0, 1.0], [1.0, 0.0]])


def test_log_scale_matches_central_difference():
    c = Chart(("t", "s"), domain_box=[(0, math.inf), (0, math.inf)])
    t, s = c.coords()
    f = log(power(t, -0.5) * power(s, -1.0 / 3.0))
    p = np.array([1.3, 0.7])
    g = evaluate(f, p).gradient
    h = 1e-5
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        fd = (evaluate(f, p + e, order=0).value - evaluate(f, p - e, order=0).value) / (2 * h)
        assert abs(g[i] - fd) <= 1e-8 * abs(fd)


def test_constant_and_coordinate_jets():
    c = chart3()
    p = np.array([0.1, -0.4, 2.0])
    j = evaluate(c.const(7.0), p)
    assert j.value == 7.0
    assert not j.gradient.any() and not j.hessian.any()
    j = evaluate(c.coord(2), p)
    assert j.value == 2.0
    np.testing.assert_array_equal(j.gradient, [0, 0, 1])
    assert not j.hessian.any()


def test_sin_against_series():
    c = Chart(("x",))
    x0 = 0.3
    terms = range(20)
    s = sum((-1) ** k * x0 ** (2 * k + 1) / math.factorial(2 * k + 1) for k in terms)
    co = sum((-1) ** k * x0 ** (2 * k) / math.factorial(2 * k) for k in terms)
    j = evaluate(sin(c.coord(0)), np.array([x0]))
    assert abs(j.value - s) < 1e-12
    assert abs(j.gradient[0] - co) < 1e-12
    assert abs(j.hessian[0, 0] + s) < 1e-12


def test_out_of_domain_names_interval():
    c = Chart(("t",), domain_box=[(0.0, math.inf)])
    with pytest.raises(DomainError, match="t=-1"):
        evaluate(c.coord(0), np.array([-1.0]))


def test_chart_mismatch():
    with pytest.raises(ChartMismatchError):
        Chart(("x",)).coord(0) + Chart(("y",)).coord(0)


def test_division_by_zero_constant():
    c = Chart(("x",))
    with pytest.raises(EvaluationError):
        c.coord(0) / c.const(0.0)


def test_division_by_vanishing_field_reports_point():
    c = Chart(("x",))
    x = c.coord(0)
    with pytest.raises(EvaluationError, match="point"):
        evaluate(1.0 / x, np.array([0.0]))


def test_periodic_point_is_reduced():
    c = Chart(("x", "y"), domain_box=[(0, 2 * math.pi), (-1, 1)], periodic_mask=(True, False))
    p = Point(c, [2 * math.pi + 0.5, 0.0])
    assert abs(p.coords[0] - 0.5) < 1e-15


def test_field_arith_dispatch():
    c = Chart(("x",))
    x = c.coord(0)
    f = field_arith("compose_univariate", field_arith("pow", field_arith("add", x, 1.0), 2.0), "sin")
    j = evaluate(f, np.array([0.5]))
    assert abs(j.value - math.sin(2.25)) < 1e-15
    assert abs(j.gradient[0] - math.cos(2.25) * 3.0) < 1e-14


# ---------------------------------------------------------------------------
# random composite fields against Richardson differences


def random_field(c: Chart, rng: np.random.Generator, depth: int):
    xs = c.coords()
    if depth == 0:
        if rng.random() < 0.3:
            return c.const(float(rng.uniform(-2, 2)))
        return xs[int(rng.integers(len(xs)))] * float(rng.uniform(0.5, 1.5))
    op = int(rng.integers(7))
    a = random_field(c, rng, depth - 1)
    if op == 0:
        return a + random_field(c, rng, depth - 1)
    if op == 1:
        return a * random_field(c, rng, depth - 1)
    if op == 2:
        return sin(a)
    if op == 3:
        return cos(a) * 0.5
    if op == 4:
        return exp(sin(a))
    if op == 5:
        return log(a * a + 1.0)
    return power(atan(a) + 2.0, float(rng.uniform(-1.5, 1.5)))


def richardson_gradient(f, p, h=1e-3):
    def cd(step):
        out = np.zeros(p.size)
        for i in range(p.size):
            e = np.zeros(p.size)
            e[i] = step
            out[i] = (evaluate(f, p + e, order=0).value - evaluate(f, p - e, order=0).value) / (2 * step)
        return out

    return (4 * cd(h / 2) - cd(h)) / 3


def richardson_hessian(f, p, h=1e-2):
    n = p.size

    def val(q):
        return evaluate(f, q, order=0).value

    def cd(step):
        H = np.zeros((n, n))
        for i in range(n):
            for j in range(n):
                ei = np.zeros(n)
                ej = np.zeros(n)
                ei[i] = step
                ej[j] = step
                H[i, j] = (val(p + ei + ej) - val(p + ei - ej) - val(p - ei + ej) + val(p - ei - ej)) / (4 * step * step)
        return H

    return (4 * cd(h / 2) - cd(h)) / 3


@given(seed=st.integers(0, 2**32 - 1))
def test_jets_match_richardson(seed):
    rng = np.random.default_rng(seed)
    c = chart3()
    f = random_field(c, rng, int(rng.integers(1, 4)))
    p = rng.uniform(-1, 1, 3)
    j = evaluate(f, p)
    g = richardson_gradient(f, p)
    assert np.all(np.abs(j.gradient - g) <= 1e-7 * max(1.0, np.max(np.abs(g))))
    H = richardson_hessian(f, p)
    assert np.all(np.abs(j.hessian - H) <= 1e-5 * max(1.0, np.max(np.abs(H))))
    np.testing.assert_array_equal(j.hessian, j.hessian.T)


def test_many_random_composites_batched(rng):
    # the batched path on 1000 (field, point) pairs, gradient only
    c = chart3()
    worst = 0.0
    for _ in range(100):
        f = random_field(c, rng, 3)
        pts = rng.uniform(-1, 1, (10, 3))
        j = evaluate(f, pts, order=1)
        h = 1e-3
        for i in range(3):
            e = np.zeros(3)
            e[i] = h
            d1 = (evaluate(f, pts + e, order=0).value - evaluate(f, pts - e, order=0).value) / (2 * h)
            e[i] = h / 2
            d2 = (evaluate(f, pts + e, order=0).value - evaluate(f, pts - e, order=0).value) / h
            fd = (4 * d2 - d1) / 3
            worst = max(worst, float(np.max(np.abs(j.gradient[:, i] - fd) / np.maximum(1.0, np.abs(fd)))))
    assert worst < 1e-7


@given(coeffs=st.lists(st.floats(-3, 3), min_size=15, max_size=15), p=st.tuples(*[st.floats(-2, 2)] * 2))
def test_polynomials_are_exact(coeffs, p):
    # all monomials x^i y^j with i + j <= 4
    c = Chart(("x", "y"))
    x, y = c.coords()
    mons = [(i, j) for i in range(5) for j in range(5 - i)]
    f = c.const(0.0)
    for a, (i, j) in zip(coeffs, mons):
        f = f + power(x, float(i)) * power(y, float(j)) * a if (i or j) else f + a
    X, Y = p
    val = sum(a * X**i * Y**j for a, (i, j) in zip(coeffs, mons))
    gx = sum(a * i * X ** max(i - 1, 0) * Y**j for a, (i, j) in zip(coeffs, mons) if i)
    gyy = sum(a * j * (j - 1) * X**i * Y ** max(j - 2, 0) for a, (i, j) in zip(coeffs, mons) if j > 1)
    gxy = sum(a * i * j * X ** max(i - 1, 0) * Y ** max(j - 1, 0) for a, (i, j) in zip(coeffs, mons) if i and j)
    jt = evaluate(f, np.array([X, Y]))
    scale = max(1.0, sum(abs(a) for a in coeffs) * 2**4 * 16)
    assert abs(jt.value - val) <= 1e-13 * scale
    assert abs(jt.gradient[0] - gx) <= 1e-13 * scale
    assert abs(jt.hessian[1, 1] - gyy) <= 1e-13 * scale
    assert abs(jt.hessian[0, 1] - gxy) <= 1e-13 * scale


def test_symbolic_derivative_has_full_jet():
    c = chart3()
    x, y, z = c.coords()
    f = sin(x * y) + exp(z) * x
    df = f.diff("x")
    p = np.array([0.3, 0.8, -0.2])
    j = evaluate(df, p)
    assert abs(j.value - (0.8 * math.cos(0.24) + math.exp(-0.2))) < 1e-15
    H = evaluate(f, p).hessian
    np.testing.assert_allclose(j.gradient, H[0], atol=1e-15)
