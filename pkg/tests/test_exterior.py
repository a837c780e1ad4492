import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spin7kahler.exterior import (
    ComplexStructure,
    ConsistencyError,
    DifferentialForm,
    FormError,
    MetricField,
    VectorField,
    dc,
    dx,
    exterior_derivative,
    hodge_star,
    inner_product,
    interior_product,
    perm_sign,
    wedge,
)
from spin7kahler.fields import Chart, Constant, cos, exp, log, sin
from spin7kahler.structures import model_g2_form, model_spin7_form

# ---------------------------------------------------------------------------
# independent numpy oracles on constant-coefficient forms


def as_dict(form: DifferentialForm, point):
    return {k: float(v[0]) for k, v in form.values(np.atleast_2d(point)).items()}


def brute_wedge(a: dict, b: dict):
    out = {}
    for I, x in a.items():
        for J, y in b.items():
            K = I + J
            s = perm_sign(K)
            if s == 0:
                continue
            key = tuple(sorted(K))
            out[key] = out.get(key, 0.0) + s * x * y
    return {k: v for k, v in out.items() if v != 0.0}


def brute_star(a: dict, G: np.ndarray, k: int, orientation=1):
    """(*a)_J = sqrt(det g) sum_I a^I eps_{IJ}, with a^I from minors of g^{-1}."""
    n = G.shape[0]
    Gi = np.linalg.inv(G)
    vol = math.sqrt(np.linalg.det(G)) * orientation
    out = {}
    for I in itertools.combinations(range(n), k):
        up = sum(np.linalg.det(Gi[np.ix_(I, K)]) * v for K, v in a.items())
        if up == 0:
            continue
        J = tuple(x for x in range(n) if x not in I)
        out[J] = out.get(J, 0.0) + vol * perm_sign(I + J) * up
    return out


def close(a: dict, b: dict, tol):
    keys = set(a) | set(b)
    return all(abs(a.get(k, 0.0) - b.get(k, 0.0)) < tol for k in keys)


def random_constant_form(chart, k, rng):
    terms = {I: Constant(chart, float(rng.normal())) for I in itertools.combinations(range(chart.dim), k)}
    return DifferentialForm(chart, k, terms)


def random_metric(chart, rng, diagonal=False):
    n = chart.dim
    if diagonal:
        G = np.diag(rng.uniform(0.5, 2.0, n))
    else:
        M = rng.normal(size=(n, n))
        G = M @ M.T + n * np.eye(n)
    return MetricField(chart, G.tolist()), G


def R(n):
    return Chart(tuple(f"x{i}" for i in range(n)))


# ---------------------------------------------------------------------------
# wedge


def test_wedge_basic():
    c = R(4)
    w = wedge(dx(c, 1), dx(c, 2))
    assert as_dict(w, np.zeros(4)) == {(1, 2): 1.0}
    assert not wedge(dx(c, 1), dx(c, 1)).coeffs


def test_phi0_wedge_phi0_is_14_vol():
    P = model_spin7_form().Phi
    p = np.zeros(8)
    lib = as_dict(wedge(P, P), p)
    oracle = brute_wedge(as_dict(P, p), as_dict(P, p))
    assert close(lib, oracle, 1e-12)
    assert close(lib, {tuple(range(8)): 14.0}, 1e-12)


def test_wedge_degree_overflow():
    c = R(2)
    with pytest.raises(FormError):
        wedge(dx(c, 0, 1), dx(c, 0))


@given(seed=st.integers(0, 2**31), k=st.integers(1, 3), l=st.integers(1, 3))
def test_graded_commutativity(seed, k, l):
    rng = np.random.default_rng(seed)
    c = R(7)
    a, b = random_constant_form(c, k, rng), random_constant_form(c, l, rng)
    p = np.zeros(7)
    lhs = as_dict(wedge(a, b), p)
    rhs = as_dict(wedge(b, a) * (-1) ** (k * l), p)
    assert close(lhs, rhs, 1e-11)
    assert close(lhs, brute_wedge(as_dict(a, p), as_dict(b, p)), 1e-11)


# ---------------------------------------------------------------------------
# exterior derivative


def test_d_of_x1_dx2():
    c = R(4)
    f = dx(c, 2) * c.coord(1)
    assert as_dict(exterior_derivative(f), np.ones(4)) == {(1, 2): 1.0}


def test_de5():
    c = Chart(("x1", "x2", "x3", "x4", "x5"))
    x2, x3 = c.coord(1), c.coord(2)
    e5 = dx(c, 4) - dx(c, 0) * x3 - dx(c, 3) * x2
    target = dx(c, 0, 2) + dx(c, 3, 1)
    p = np.random.default_rng(0).normal(size=(5, 5))
    assert (exterior_derivative(e5) - target).max_abs(p) == 0.0


def random_scalar(c, rng, depth=3):
    xs = c.coords()
    if depth == 0:
        return xs[int(rng.integers(c.dim))] * float(rng.uniform(0.5, 1.5)) + float(rng.uniform(-1, 1))
    a = random_scalar(c, rng, depth - 1)
    b = random_scalar(c, rng, depth - 1)
    op = int(rng.integers(4))
    if op == 0:
        return a * b
    if op == 1:
        return sin(a) + b
    if op == 2:
        return exp(cos(a)) * b
    return log(a * a + 1.0) - b


def random_one_form(c, rng):
    return DifferentialForm(c, 1, {(i,): random_scalar(c, rng, 2) for i in range(c.dim)})


def test_dd_zero_on_functions(rng):
    c = R(5)
    pts = rng.uniform(-1, 1, (100, 5))
    for _ in range(5):
        f = DifferentialForm.scalar(random_scalar(c, rng))
        assert exterior_derivative(exterior_derivative(f)).max_abs(pts) < 1e-13


@given(seed=st.integers(0, 2**31))
def test_dd_zero_on_one_forms(seed):
    rng = np.random.default_rng(seed)
    c = R(4)
    a = random_one_form(c, rng)
    pts = rng.uniform(-1, 1, (20, 4))
    assert exterior_derivative(exterior_derivative(a)).max_abs(pts) < 1e-12


@given(seed=st.integers(0, 2**31))
def test_leibniz(seed):
    rng = np.random.default_rng(seed)
    c = R(5)
    a = random_one_form(c, rng)
    b = wedge(random_one_form(c, rng), random_one_form(c, rng))
    pts = rng.uniform(-1, 1, (10, 5))
    lhs = exterior_derivative(wedge(a, b))
    rhs = wedge(exterior_derivative(a), b) - wedge(a, exterior_derivative(b))
    assert (lhs - rhs).max_abs(pts) < 1e-11 * max(1.0, lhs.max_abs(pts))


# ---------------------------------------------------------------------------
# interior product


def test_contract_top_form():
    c = R(4)
    X = VectorField.coordinate(c, 0)
    assert as_dict(interior_product(X, dx(c, 0, 1, 2, 3)), np.zeros(4)) == {(1, 2, 3): 1.0}


def test_contract_phi0_gives_phi0():
    Phi = model_spin7_form().Phi
    X = VectorField.coordinate(Phi.chart, 0)
    phi = as_dict(interior_product(X, Phi), np.zeros(8))
    # term-by-term: drop the leading 0 from each term containing it
    expected = {}
    for I, v in as_dict(Phi, np.zeros(8)).items():
        if I[0] == 0:
            expected[I[1:]] = v
    assert phi == expected
    assert len(phi) == 7
    g2 = as_dict(model_g2_form().phi, np.zeros(7))
    assert {tuple(i + 1 for i in k): v for k, v in g2.items()} == phi


@given(v=st.lists(st.floats(-2, 2), min_size=8, max_size=8))
def test_double_contraction_vanishes(v):
    Phi = model_spin7_form().Phi
    X = VectorField(Phi.chart, v)
    assert interior_product(X, interior_product(X, Phi)).max_abs(np.zeros((1, 8))) < 1e-14


def test_contraction_is_antiderivation(rng):
    c = R(6)
    X = VectorField(c, [random_scalar(c, rng, 1) for _ in range(6)])
    a, b = random_one_form(c, rng), wedge(random_one_form(c, rng), random_one_form(c, rng))
    pts = rng.uniform(-1, 1, (5, 6))
    lhs = interior_product(X, wedge(a, b))
    rhs = wedge(interior_product(X, a), b) - wedge(a, interior_product(X, b))
    assert (lhs - rhs).max_abs(pts) < 1e-12


# ---------------------------------------------------------------------------
# Hodge star


def test_star_flat_r4():
    c = R(4)
    s = hodge_star(dx(c, 0, 1), MetricField.identity(c))
    assert close(as_dict(s, np.zeros(4)), {(2, 3): 1.0}, 1e-15)


def test_phi0_self_dual_against_oracle():
    sp = model_spin7_form()
    p = np.zeros(8)
    lib = as_dict(hodge_star(sp.Phi, sp.metric), p)
    oracle = brute_star(as_dict(sp.Phi, p), np.eye(8), 4)
    assert close(lib, oracle, 1e-12)
    assert close(lib, as_dict(sp.Phi, p), 1e-12)


def test_star_against_minor_oracle(rng):
    c = R(6)
    g, G = random_metric(c, rng)
    for k in range(7):
        a = random_constant_form(c, k, rng)
        p = np.zeros(6)
        assert close(as_dict(hodge_star(a, g), p), brute_star(as_dict(a, p), G, k), 1e-10)


def test_double_star_on_random_three_forms(rng):
    c = R(7)
    worst = 0.0
    for _ in range(50):
        g, _ = random_metric(c, rng, diagonal=True)
        a = random_constant_form(c, 3, rng)
        worst = max(worst, (hodge_star(hodge_star(a, g), g) - a).max_abs(np.zeros((1, 7))))
    assert worst < 1e-10


@settings(max_examples=12)
@given(seed=st.integers(0, 2**31), n=st.sampled_from([4, 6, 7, 8]), data=st.data())
def test_hodge_involution_sign(seed, n, data):
    k = data.draw(st.integers(0, n))
    rng = np.random.default_rng(seed)
    c = R(n)
    M = rng.normal(size=(n, n)) * 0.3
    x = c.coords()
    # a non-constant metric: constant SPD part plus a positive diagonal bump
    G = M @ M.T + np.eye(n)
    entries = [[G[i][j] + (0.2 * sin(x[i]) ** 2 if i == j else 0.0) for j in range(n)] for i in range(n)]
    g = MetricField(c, entries)
    a = DifferentialForm(c, k, {I: random_scalar(c, rng, 0) for I in itertools.combinations(range(n), k)})
    pts = rng.uniform(-1, 1, (3, n))
    lhs = hodge_star(hodge_star(a, g), g)
    sign = (-1) ** (k * (n - k))
    assert (lhs - a * sign).max_abs(pts) < 1e-9 * max(1.0, a.max_abs(pts))


def test_norm_identity(rng):
    c = R(5)
    g, _ = random_metric(c, rng)
    x = c.coords()
    a = wedge(dx(c, 0) * sin(x[1]) + dx(c, 2), dx(c, 3) * x[0] + dx(c, 4))
    pts = rng.uniform(-1, 1, (4, 5))
    lhs = wedge(a, hodge_star(a, g))
    rhs = g.volume_form() * inner_product(a, a, g)
    assert (lhs - rhs).max_abs(pts) < 1e-12
    assert np.all(inner_product(a, a, g)(pts) > 0)


# ---------------------------------------------------------------------------
# d^c and the sign convention


def standard_J(c):
    return ComplexStructure.from_matrix(c, [[0.0, -1.0], [1.0, 0.0]])


def test_dc_of_x1():
    c = Chart(("x1", "x2"))
    J = standard_J(c)
    w = dc(DifferentialForm.scalar(c.coord(0)), J)
    assert as_dict(w, np.zeros(2)) == {(1,): -1.0}
    # d^c f (X) = df(J X) checked pointwise
    Jm = J.values(np.zeros((1, 2)))[0]
    for i in range(2):
        e = np.zeros(2)
        e[i] = 1.0
        assert as_dict(w, np.zeros(2)).get((i,), 0.0) == np.array([1.0, 0.0]) @ Jm @ e


def test_dc_of_constant():
    c = Chart(("x1", "x2"))
    assert not dc(DifferentialForm.scalar(c.const(3.0)), standard_J(c)).coeffs


def test_convention_ddc_of_radius_squared():
    # the single convention test: d d^c (x1^2 + x2^2) = -4 dx1 ^ dx2
    c = Chart(("x1", "x2"))
    x1, x2 = c.coords()
    w = exterior_derivative(dc(DifferentialForm.scalar(x1 * x1 + x2 * x2), standard_J(c)))
    assert as_dict(w, np.array([0.3, -0.2])) == {(0, 1): -4.0}


def test_dc_rejects_non_complex_structure():
    c = Chart(("x1", "x2"))
    J = ComplexStructure.from_matrix(c, [[0.0, -1.0], [1.1, 0.0]])
    with pytest.raises(ConsistencyError):
        dc(DifferentialForm.scalar(c.coord(0) * c.coord(1)), J).max_abs(np.zeros((1, 2)))
