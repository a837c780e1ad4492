"""Acceptance suite: one PASS/FAIL line per criterion, collected in the session summary."""
import dataclasses
import math
import time

import mpmath as mp
import numpy as np
import pytest

from spin7kahler import catalog, pde
from spin7kahler.curvature import CERTIFIED_GAP, curvature_at, curvature_operator_rank
from spin7kahler.exterior import dx, exterior_derivative, hodge_star, wedge
from spin7kahler.fields import power
from spin7kahler.specialfns import (
    AIRY_DOMAIN,
    PCF_DOMAIN,
    airy_ai,
    airy_solution,
    domain_threshold_u_less_one,
    oracle_constants,
    pcf_solution,
    pcf_u0,
)
from spin7kahler.structures import (
    ReductionData,
    g2_prescription_check,
    g2_torsion_tau,
    model_g2_form,
    model_spin7_form,
    spin7_prescription_check,
    su3_torsion,
    top_coefficient,
)

SPIN7_ENTRIES = ["glps_spin7", "nil24_spin7", "constant_I", "gh_spin7", "tod_spin7", "perturbed_glps",
                 "constant_II", "log_example", "airy_example"]


class UnattainableCriterion(AssertionError):
    """Raised for a criterion clause that cannot hold for the stated fixture."""


def parity(seq):
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


def coeff_dict(form, p):
    return {I: float(np.asarray(f(p)).ravel()[0]) for I, f in form.coeffs.items()}


def brute_star_euclidean(a, n):
    out = {}
    for I, v in a.items():
        J = tuple(x for x in range(n) if x not in I)
        out[J] = out.get(J, 0.0) + parity(I + J) * v
    return out


def brute_wedge_top(a, b, n):
    total = 0.0
    for I, u in a.items():
        for J, v in b.items():
            if not set(I) & set(J) and len(I) + len(J) == n:
                total += parity(I + J) * u * v
    return total


def max_diff(a, b):
    return max(abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in set(a) | set(b))


def test_criterion_01_model_forms(report_criterion):
    t0 = time.perf_counter()
    sp = model_spin7_form()
    g2 = model_g2_form()
    p = np.zeros(8)
    Phi = coeff_dict(sp.Phi, p)
    lib_star = coeff_dict(hodge_star(sp.Phi, sp.metric), p)
    e_star = max(max_diff(brute_star_euclidean(Phi, 8), Phi), max_diff(lib_star, Phi))
    e_14 = max(abs(brute_wedge_top(Phi, Phi, 8) - 14.0),
               abs(top_coefficient(wedge(sp.Phi, sp.Phi), tuple(range(8)), p[None])[0] - 14.0))
    phi = coeff_dict(g2.phi, np.zeros(7))
    star_phi = brute_star_euclidean(phi, 7)
    e_7 = max(abs(brute_wedge_top(phi, star_phi, 7) - 7.0),
              abs(top_coefficient(wedge(g2.phi, g2.star_phi), tuple(range(7)), np.zeros((1, 7)))[0] - 7.0),
              max_diff(coeff_dict(g2.star_phi, np.zeros(7)), star_phi))
    dt = time.perf_counter() - t0
    ok = max(e_star, e_14, e_7) < 1e-12 and dt < 1.0
    report_criterion(1, ok, f"self-dual {e_star:.1e}, Phi^Phi-14vol {e_14:.1e}, phi^*phi-7vol {e_7:.1e}, {dt:.2f}s")
    assert ok


def test_criterion_02_closure(report_criterion):
    t0 = time.perf_counter()
    worst = {}
    for name in SPIN7_ENTRIES:
        b = catalog.build(name)
        pts = b.sample_points(np.random.default_rng(0), 100)
        worst[name] = exterior_derivative(b.structure.Phi).max_abs(pts)
    dt = time.perf_counter() - t0
    ok = max(worst.values()) < 1e-8 and dt < 30.0
    report_criterion(2, ok, f"max |dPhi| {max(worst.values()):.1e} over {len(worst)} entries, {dt:.1f}s")
    assert ok, worst


def test_criterion_03_printed_metrics(report_criterion):
    worst = {}
    for name in ["nil24_spin7", "perturbed_glps", "constant_II", "gh_spin7", "glps_spin7", "constant_I",
                 "tod_spin7", "log_example", "airy_example"]:
        b = catalog.build(name)
        pts = b.sample_points(np.random.default_rng(1), 50)
        G, P = b.metric.matrix(pts), b.printed_metric.matrix(pts)
        worst[name] = float(np.max(np.abs(G - P) / np.maximum(1.0, np.abs(P))))
    ok = max(worst.values()) < 1e-12
    report_criterion(3, ok, f"max coefficient mismatch {max(worst.values()):.1e} (relative to max(1, |printed|))")
    assert ok, worst


def test_criterion_04_ricci_flat(report_criterion):
    worst = {}
    for name in catalog.names():
        b = catalog.build(name)
        pts = b.sample_points(np.random.default_rng(2), 20)
        worst[name] = float(np.max(curvature_at(b.metric, pts).ricci_ratio()))
    ok = max(worst.values()) < 1e-6
    report_criterion(4, ok, f"max |Ric|/max|g| {max(worst.values()):.1e} over {len(worst)} entries")
    assert ok, worst


def test_criterion_05_holonomy(report_criterion):
    t0 = time.perf_counter()
    certs = {}
    for name in ["glps_spin7", "nil24_spin7", "glps_g2", "flat_spin7", "glps_su4"]:
        b = catalog.build(name)
        certs[name] = curvature_operator_rank(b.metric, b.sample_points(np.random.default_rng(3), 4))
    dt = time.perf_counter() - t0
    ok = (
        all(certs[n].operator_rank == 21 and certs[n].gap_ratio > CERTIFIED_GAP for n in ("glps_spin7", "nil24_spin7"))
        and certs["glps_g2"].operator_rank == 14
        and certs["flat_spin7"].operator_rank == 0
        and certs["glps_su4"].operator_rank <= 15
        and dt < 60.0
    )
    ranks = ", ".join(f"{n} {c.operator_rank}" for n, c in certs.items())
    report_criterion(5, ok, f"ranks {ranks}; glps gap {certs['glps_spin7'].gap_ratio:.1e}, {dt:.1f}s")
    assert ok


def test_criterion_06_torsion(report_criterion):
    glps = catalog.build("glps_spin7")
    pts = glps.sample_points(np.random.default_rng(4), 50)
    d = glps.reduction
    su3 = d.su3
    ch = glps.chart
    t = ch.coord(5)
    e5 = glps.extras["frame"][4]
    s1 = glps.extras["sigma"][0]
    dt5 = dx(ch, 5)
    displays = [
        (exterior_derivative(su3.omega_plus) + wedge(dt5, su3.omega_plus) * power(t, -1.0)).max_abs(pts),
        (exterior_derivative(su3.omega_minus) - wedge(e5, su3.omega_plus) * power(t, -5.0)).max_abs(pts),
    ]
    tau_disp = s1 * (-1.0 / 3.0 * power(t, -4.0 / 3.0)) - wedge(e5, d.xi) * (2.0 / 3.0 * power(t, -19.0 / 3.0))
    for via_star in (True, False):
        tau, _ = g2_torsion_tau(d, pts, via_star=via_star)
        displays.append((tau - tau_disp).max_abs(pts))
    e_display = max(displays)

    presc = [max(spin7_prescription_check(glps.reduction, pts).values())]
    nil = catalog.build("nil24_spin7")
    presc.append(max(spin7_prescription_check(nil.reduction, nil.sample_points(np.random.default_rng(5), 50)).values()))
    g2b = catalog.build("glps_g2")
    presc.append(max(g2_prescription_check(g2b.extras["su3"], g2b.extras["H"], g2b.reduction.xi,
                                           g2b.sample_points(np.random.default_rng(6), 50)).values()))
    e_presc = max(presc)

    # negative controls: a wrong H in the torsion conditions, and u scaled by 1.01
    wrong = ReductionData(d.chart, d.s, t, d.eta, d.xi, d.su3, d.eta_axis, d.xi_axis)
    neg = [su3_torsion(wrong, pts).residuals["condition_1"]]
    pb = catalog.build("perturbed_glps")
    bad = dataclasses.replace(pb.reduction_I, u=pb.reduction_I.u * 1.01)
    neg.append(pde.check_reduction_I(bad, pb.sample_points(np.random.default_rng(7), 50)).residuals["equ1"])
    e_neg = min(neg)
    ok = e_display < 1e-10 and e_presc < 1e-9 and e_neg > 1e-3
    report_criterion(6, ok, f"displays {e_display:.1e}, prescriptions {e_presc:.1e}, negative controls >= {e_neg:.1e}")
    assert ok


def test_criterion_07_ode1(report_criterion):
    hs = np.linspace(0.1, 10.0, 200)
    e_const = max(abs(pde.solve_s_of_H(0.0, -1.0, h) - 1.0) for h in hs)
    rng = np.random.default_rng(8)
    worst, count = 0.0, 0
    while count < 10_000:
        A, c, H = rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(0.1, 10)
        lo = max(0.0, -c / 4.0)
        # admissible: A H lies in the range of s^{1/3}(s + c) on the increasing branch
        if A * H <= np.cbrt(lo) * (lo + c) or A == 0.0:
            continue
        s = pde.solve_s_of_H(A, c, H)
        worst = max(worst, abs(A * H - np.cbrt(s) * (s + c)) / max(1.0, abs(A * H)))
        count += 1
    ok = e_const < 1e-12 and worst < 1e-12
    report_criterion(7, ok, f"A=0,c=-1: |s-1| {e_const:.1e}; {count} random solves, residual {worst:.1e}")
    assert ok


def test_criterion_08_special_functions(report_criterion):
    mp.mp.dps = 30
    c = oracle_constants()
    oracle = {
        "airy_ai_0": mp.airyai(0),
        "airy_ai_prime_0": mp.airyai(0, derivative=1),
        "pcfu_0": mp.pcfu(0, 0),
        "pcfu_prime_0": mp.diff(lambda z: mp.pcfu(0, z), 0),
    }
    e_fix = max(abs(c[k] - float(v)) for k, v in oracle.items())
    ai = airy_ai(0.0)
    v = pcf_u0(0.0)
    e_int = max(abs(ai[0] - float(oracle["airy_ai_0"])), abs(ai[1] - float(oracle["airy_ai_prime_0"])),
                abs(v[0] - float(oracle["pcfu_0"])), abs(v[1] - math.sqrt(2) * float(oracle["pcfu_prime_0"])))
    e_ode = max(np.max(airy_solution().ode_residual(np.linspace(*AIRY_DOMAIN, 2001))),
                np.max(pcf_solution().ode_residual(np.linspace(*PCF_DOMAIN, 2001))))
    sstar = domain_threshold_u_less_one()
    grid = np.arange(0.0, 2.0, 1e-4)
    scan = grid[np.flatnonzero(pcf_u0(grid)[0] >= 1.0)[-1]]
    ref = float(mp.findroot(lambda s: mp.pcfu(0, mp.sqrt(2) * s) - 1, (scan, scan + 1e-4), solver="anderson"))
    e_s = abs(sstar - ref)
    ok = e_fix < 1e-10 and e_int < 1e-10 and e_ode < 1e-11 and e_s < 1e-9 and scan <= sstar < scan + 1e-4
    report_criterion(8, ok, f"fixtures {e_fix:.1e}, integrated {e_int:.1e}, ODE residual {e_ode:.1e}, "
                            f"s*={sstar:.10f} vs scan refinement {e_s:.1e}")
    assert ok


def orders(errors, hs):
    return [r.get("order") for r in pde.convergence_table(errors, hs)][1:]


@pytest.mark.xfail(raises=UnattainableCriterion, strict=True,
                   reason="quadratic initial potential is reproduced exactly by the centred stencil; "
                          "the observed spatial order is undefined (see the decision ledger)")
def test_criterion_09_evolvers(report_criterion):
    t0 = time.perf_counter()
    ns = (8, 16, 32)
    ma_c, ma_p, hs = [], [], []
    for n in ns:
        fx = pde.ma_fixture("constant_I", n, shape=(n, 4, 4, 4))
        _, ep, ew = pde.run_ma_fixture(fx)
        ma_c.append((ep, ew))
        hs.append(fx.F0.spacings[0])
        ma_p.append(pde.run_ma_fixture(pde.ma_fixture("perturbed_glps", n, shape=(n, 4, 4, 4)))[2])
    # the full 16^4 grid
    _, _, ew16 = pde.run_ma_fixture(pde.ma_fixture("constant_I", 16))
    _, _, ep16 = pde.run_ma_fixture(pde.ma_fixture("perturbed_glps", 16))
    aff = max(pde.run_dude4_fixture(pde.dude4_fixture("affine", n))[1] for n in (8, 16, 32))
    airy = [pde.run_dude4_fixture(pde.dude4_fixture("airy", n)) for n in ns]
    airy_err = [e for _, e in airy]
    airy_hs = [r.final.spacings[0] for r, _ in airy]
    dt = time.perf_counter() - t0

    omega_err = max(max(ew for _, ew in ma_c), ew16)
    order_c = orders([ew for _, ew in ma_c], hs)
    order_p = orders(ma_p, hs)
    order_a = orders(airy_err, airy_hs)
    attainable = (
        omega_err < 1e-12
        and all(1.8 <= o <= 2.2 for o in order_p)
        and aff < 1e-12
        and all(1.8 <= o <= 2.2 for o in order_a)
        and dt < 300.0
    )
    constant_order_ok = all(o is not None and 1.8 <= o <= 2.2 for o in order_c)
    ok = attainable and constant_order_ok
    report_criterion(
        9, ok,
        f"constant_I omega error {omega_err:.1e} at n={ns} and 16^4 (order undefined: exact); "
        f"perturbed_glps orders {[round(o, 3) for o in order_p]} (16^4 err {ep16:.2e}); "
        f"dude4 affine {aff:.1e}, Airy orders {[round(o, 3) for o in order_a]}; {dt:.1f}s",
    )
    assert attainable
    if not constant_order_ok:
        raise UnattainableCriterion(f"constant_I omega errors are exactly zero, orders {order_c}")


def test_criterion_10_hitchin(report_criterion):
    worst = {}
    for name, params in [("glps_spin7", {}), ("constant_I", {}),
                         ("constant_I", {"A": 2.0, "c": 0.5, "a": 0.2, "b": 0.1, "p": 1.0, "q": 0.5})]:
        b = catalog.build(name, **params)
        rep = pde.hitchin_check(b, b.sample_points(np.random.default_rng(9), 50))
        worst[f"{name}{params or ''}"] = rep.residuals
    e_flow = max(max(r["hit1"], r["hit2"]) for r in worst.values())
    e_disp = max(r["psi_display"] for r in worst.values() if "psi_display" in r)
    e_rate = worst["glps_spin7"]["geodesic_rate"]
    ok = e_flow < 1e-9 and e_disp < 1e-10 and e_rate < 1e-12
    report_criterion(10, ok, f"hit1/hit2 {e_flow:.1e}, *phi_t display {e_disp:.1e}, 4t = s^4 rate {e_rate:.1e}")
    assert ok


def test_criterion_11_reductions(report_criterion):
    res = {}
    for name in ("constant_I", "perturbed_glps"):
        b = catalog.build(name)
        res[name] = pde.check_reduction_I(b.reduction_I, b.sample_points(np.random.default_rng(10), 50)).residuals
    for name in ("constant_II", "log_example", "airy_example"):
        b = catalog.build(name)
        res[name] = pde.check_reduction_II(b.reduction_II, b.sample_points(np.random.default_rng(11), 50)).residuals
    worst = max(max(r.values()) for r in res.values())
    curv = {"dalpha", "deta", "dkappa", "dxi"}
    curvatures_checked = all(curv <= set(res[n]) for n in ("constant_II", "log_example", "airy_example"))
    ok = worst < 1e-9 and curvatures_checked
    report_criterion(11, ok, f"max residual {worst:.1e}; curvature prescriptions {sorted(curv)} checked")
    assert ok
