import json

import numpy as np
import pytest

from spin7kahler import catalog
from spin7kahler.catalog import (
    CatalogError,
    ParameterError,
    PreconditionError,
    flat_hyperkahler,
    gibbons_hawking_triple,
    invariant_gram,
    monopole_connection,
)
from spin7kahler.curvature import curvature_at, curvature_operator_rank
from spin7kahler.exterior import dx, exterior_derivative, restrict
from spin7kahler.fields import Chart, Constant, power

SPIN7 = [n for n in catalog.names() if catalog.REGISTRY[n][1] == "spin7"]
PRINTED = ["glps_spin7", "nil24_spin7", "constant_I", "gh_spin7", "tod_spin7", "perturbed_glps",
           "constant_II", "log_example", "airy_example", "glps_su4"]


@pytest.fixture(scope="module")
def bundles():
    return {n: catalog.build(n) for n in catalog.names()}


def test_registry_kinds_and_provenance(bundles):
    for n, b in bundles.items():
        builder, kind, prov = catalog.REGISTRY[n]
        assert b.name == n and b.kind == kind and b.provenance == prov


@pytest.mark.parametrize("name", SPIN7)
def test_spin7_entries_closed_and_self_dual(bundles, name):
    b = bundles[name]
    pts = b.sample_points(np.random.default_rng(1), 100)
    assert exterior_derivative(b.structure.Phi).max_abs(pts) < 1e-8
    res = b.structure.invariant_residuals(pts)
    assert res["self_duality"] < 1e-9 and res["phi_wedge_phi_14vol"] < 1e-9


@pytest.mark.parametrize("name", PRINTED)
def test_printed_metrics(bundles, name):
    b = bundles[name]
    pts = b.sample_points(np.random.default_rng(2), 50)
    G = b.metric.matrix(pts)
    P = b.printed_metric.matrix(pts)
    assert np.max(np.abs(G - P) / np.maximum(1.0, np.abs(P))) < 1e-12


def test_constant_II_literal_display_has_the_recorded_typo(bundles):
    b = bundles["constant_II"]
    pts = b.sample_points(np.random.default_rng(3), 10)
    lit = b.extras["printed_metric_literal"].matrix(pts)
    assert np.max(np.abs(b.metric.matrix(pts) - lit)) > 1e-2
    # with q = 0 the two readings coincide
    b0 = catalog.build("constant_II", q=0.0)
    assert np.max(np.abs(b0.metric.matrix(pts) - b0.extras["printed_metric_literal"].matrix(pts))) < 1e-12


@pytest.mark.parametrize("name", [n for n in catalog.names() if n not in ("glps_su4",)])
def test_torsion_free_entries_ricci_flat(bundles, name):
    b = bundles[name]
    pts = b.sample_points(np.random.default_rng(4), 20)
    assert np.max(curvature_at(b.metric, pts).ricci_ratio()) < 1e-6


def test_constant_I_matches_glps(bundles):
    g, c = bundles["glps_spin7"], catalog.build("constant_I", A=1, c=0, a=0, b=0, p=0, q=1)
    rng = np.random.default_rng(5)
    pg = g.sample_points(rng, 20)
    pc = c.sample_points(rng, 20)
    pc[:, 5] = pg[:, 5]  # t = s
    A = invariant_gram(g, g.extras["invariant_coframe"], pg)
    B = invariant_gram(c, c.extras["invariant_coframe"], pc)
    assert np.max(np.abs(A - B) / np.maximum(1.0, np.abs(A))) < 1e-12
    # and the gram matrices are genuinely s-dependent
    assert np.ptp(A[:, 0, 0]) > 0.1


def test_params_round_trip(bundles):
    for b in bundles.values():
        d = json.loads(b.to_json())
        assert d["name"] == b.name and d["kind"] == b.kind
        assert len(d["domain_box"]) == b.chart.dim
        assert d["expected_holonomy_rank"] == b.expected_holonomy_rank
    assert bundles["glps_spin7"].to_descriptor()["expected_holonomy_rank"] == 21
    assert bundles["flat_spin7"].expected_holonomy_rank == 0


def test_sample_points_respect_validity(bundles):
    b = bundles["log_example"]
    pts = b.sample_points(np.random.default_rng(6), 200)
    assert np.all(pts[:, 0] ** 2 + pts[:, 1] ** 2 > 1.0)
    b = bundles["perturbed_glps"]
    sstar = b.metadata["s_star"]
    pts = b.sample_points(np.random.default_rng(6), 200)
    assert np.all(pts[:, 5] > sstar)
    assert np.all(b.extras["v"](pts) < 1.0)


# ---------------------------------------------------------------------------
# parameter validation


def test_unknown_entry():
    with pytest.raises(CatalogError, match="known"):
        catalog.build("glps_spin9")


def test_unknown_parameter():
    with pytest.raises(ParameterError, match="unknown parameter"):
        catalog.build("glps_spin7", r=2.0)


def test_constant_I_validity_inequality_named():
    with pytest.raises(ParameterError, match=r"p \+ q s > \|a \+ b s\|"):
        catalog.build("constant_I", a=3.0)
    with pytest.raises(ParameterError, match="A must be nonzero"):
        catalog.build("constant_I", A=0.0)
    with pytest.raises(ParameterError, match=r"\(s \+ c\)/A > 0"):
        catalog.build("constant_I", c=-1.0)


def test_other_parameter_errors():
    with pytest.raises(ParameterError):
        catalog.build("constant_II", c=-1.0)
    with pytest.raises(ParameterError, match="p \\+ q y > 0"):
        catalog.build("constant_II", p=-1.0, q=0.1)
    with pytest.raises(ParameterError):
        catalog.build("tod_spin7", v0=1.0)
    with pytest.raises(ParameterError):
        catalog.build("glps_spin7", t_min=2.0, t_max=1.0)
    with pytest.raises(ParameterError):
        catalog.build("airy_example", y_max=11.0)
    with pytest.raises(ParameterError, match="real number"):
        catalog.build("glps_spin7", t_min="a")


def test_perturbed_glps_is_clipped_to_threshold():
    b = catalog.build("perturbed_glps", s_min=0.1)
    assert b.metadata["clipped_to_s_star"]
    assert b.params["s_min"] > b.metadata["s_star"]


def test_constant_I_other_parameters_closed():
    b = catalog.build("constant_I", A=2.0, c=0.5, a=0.2, b=0.1, p=1.0, q=0.5)
    pts = b.sample_points(np.random.default_rng(7), 50)
    assert exterior_derivative(b.structure.Phi).max_abs(pts) < 1e-8
    assert np.max(curvature_at(b.metric, pts[:10]).ricci_ratio()) < 1e-6


def test_constant_II_curvatures():
    b = catalog.build("constant_II", c=2.0, p=1.0, q=0.5)
    c, q = 2.0, 0.5
    pts = b.sample_points(np.random.default_rng(8), 20)
    ch = b.chart
    pot = b.connection_potentials
    # restrict to fixed (s, y): only the surface and fibre directions
    keep = (0, 1, 2, 3, 4, 5)

    def horizontal(f):
        return restrict(exterior_derivative(f), keep)

    assert (horizontal(pot["alpha"]) - dx(ch, 0, 1) * (c * q)).max_abs(pts) == 0.0
    assert not horizontal(pot["kappa"]).coeffs
    assert (horizontal(pot["xi"]) - dx(ch, 0, 3)).max_abs(pts) == 0.0
    assert (horizontal(pot["eta"]) - dx(ch, 1, 2)).max_abs(pts) == 0.0


# ---------------------------------------------------------------------------
# hyperkaehler data and the Gibbons-Hawking triple


def test_flat_hyperkahler_identities():
    c = Chart(tuple(f"x{i}" for i in range(4)))
    hk = flat_hyperkahler(c, (0, 1, 2, 3))
    res = hk.invariant_residuals(np.zeros((1, 4)))
    assert max(v for k, v in res.items() if k != "min_abs_vol") == 0.0
    assert res["min_abs_vol"] == 1.0
    assert max(hk.closure_residuals(np.zeros((1, 4))).values()) == 0.0


def test_gh_constant_potential_is_flat():
    c = Chart(("x", "y", "z", "w"))
    hk = gibbons_hawking_triple(Constant(c, 1.0), dx(c, 3), check_points=np.zeros((2, 4)))
    res = hk.invariant_residuals(np.zeros((1, 4)))
    assert max(v for k, v in res.items() if k != "min_abs_vol") == 0.0
    np.testing.assert_array_equal(hk.metric.matrix(np.zeros((1, 4)))[0], np.eye(4))


def gh_box_points(rng, n, lo=0.5, hi=1.5):
    pts = rng.uniform(lo, hi, (n, 4))
    pts[:, 2] -= 1.0
    return pts


def test_gh_monopole_base_is_flat():
    c = Chart(("x", "y", "z", "w"))
    x, y, z = c.coord(0), c.coord(1), c.coord(2)
    V = power(x * x + y * y + z * z, -0.5) * 0.5
    pts = gh_box_points(np.random.default_rng(9), 20)
    hk = gibbons_hawking_triple(V, monopole_connection(c, 1.0), check_points=pts)
    res = hk.invariant_residuals(pts)
    assert max(v for k, v in res.items() if k != "min_abs_vol") < 1e-10
    assert max(hk.closure_residuals(pts).values()) < 1e-10
    cert = curvature_operator_rank(hk.metric, pts[:5])
    assert cert.operator_rank == 0


def test_gh_linear_potential_is_ricci_flat():
    c = Chart(("x", "y", "z", "w"))
    x, y = c.coord(0), c.coord(1)
    theta = dx(c, 3) - dx(c, 2) * y
    pts = gh_box_points(np.random.default_rng(10), 20)
    hk = gibbons_hawking_triple(x, theta, check_points=pts)
    res = hk.invariant_residuals(pts)
    assert max(v for k, v in res.items() if k != "min_abs_vol") < 1e-10
    cs = curvature_at(hk.metric, pts)
    assert np.max(cs.ricci_ratio()) < 1e-10
    assert np.max(np.abs(cs.riemann)) > 1e-2


def test_gh_preconditions():
    c = Chart(("x", "y", "z", "w"))
    x, y = c.coord(0), c.coord(1)
    pts = gh_box_points(np.random.default_rng(11), 5)
    with pytest.raises(PreconditionError, match="not harmonic"):
        gibbons_hawking_triple(x * x + 1.0, dx(c, 3), check_points=pts)
    with pytest.raises(PreconditionError, match="positive"):
        gibbons_hawking_triple(x * -1.0, dx(c, 3), check_points=pts)
    with pytest.raises(PreconditionError, match="d theta"):
        gibbons_hawking_triple(x, dx(c, 3), check_points=pts)


def test_gh_entry_base_flat(bundles):
    b = bundles["gh_spin7"]
    hk = b.extras["hk"]
    pts = b.sample_points(np.random.default_rng(12), 5)
    assert curvature_operator_rank(hk.metric, pts).operator_rank == 0


@pytest.mark.parametrize("name", ["constant_I", "gh_spin7", "tod_spin7", "perturbed_glps"])
def test_reduction_I_bases_are_hyperkahler(bundles, name):
    hk = bundles[name].extras["hk"]
    pts = bundles[name].sample_points(np.random.default_rng(13), 20)
    res = hk.invariant_residuals(pts)
    assert max(v for k, v in res.items() if k != "min_abs_vol") < 1e-10
    assert max(hk.closure_residuals(pts).values()) < 1e-10
