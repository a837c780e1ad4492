"""Reduction equations: the relation between s and H, residual checkers, the Hitchin-flow check and two grid evolvers.

Residual checkers evaluate every equation symbolically through the jet
machinery and report max residuals on a batch of points.  The evolvers work
on periodic grids with centred second-order differences and classical RK4 in
the evolution parameter (s for the Monge-Ampere equation, y for the
second-reduction equation).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import Polynomial

from .exterior import (
    DifferentialForm,
    MetricField,
    VectorField,
    dc,
    exterior_derivative,
    hodge_star,
    interior_product,
    partial_form,
    restrict,
    split_along,
    wedge,
)
from .fields import Chart, Constant, ScalarField, as_points, power, sqrt
from .structures import G2Structure, _g2_orientation, g2_metric_residual, top_coefficient

SCHEMA_VERSION = 1
TWO_PI = 2.0 * math.pi


class RootError(ValueError):
    """No admissible positive root of A H = s^{1/3}(s + c)."""


class GridError(ValueError):
    """Inconsistent grid data or evolution configuration."""


class EvolutionAbort(RuntimeError):
    """Evolution stopped: validity lost or step size outside the stability heuristic."""

    def __init__(self, reason: str, step: int, location=None, time=None):
        self.reason = reason
        self.step = step
        self.location = None if location is None else tuple(int(i) for i in location)
        self.time = time
        where = "" if location is None else f" at grid index {self.location}"
        when = "" if time is None else f" (parameter {time:.6g})"
        super().__init__(f"{reason}: step {step}{where}{when}")


# ---------------------------------------------------------------------------
# s as a function of H


def _ode1_residual(A: float, c: float, H: float, s: float) -> float:
    return float(np.cbrt(s) * (s + c) - A * H)


def solve_s_of_H(A: float, c: float, H: float, max_iter: int = 200) -> float:
    """Positive s with A H = s^{1/3}(s + c), on the branch s > max(0, -c/4).

    On that branch the left side is strictly increasing, so the root is unique.
    Newton steps that leave the current bracket are replaced by bisection.
    A = 0 needs c < 0 and gives s = -c for every H.
    """
    A, c, H = float(A), float(c), float(H)
    if not all(math.isfinite(v) for v in (A, c, H)):
        raise RootError(f"non-finite input A={A}, c={c}, H={H}")
    if A == 0.0:
        if c < 0.0:
            return -c
        raise RootError(f"A = 0 needs c < 0 for a positive root (c = {c})")
    T = A * H
    lo = max(0.0, -c / 4.0)

    def f(s):
        return np.cbrt(s) * (s + c) - T

    flo = f(lo)
    if flo >= 0.0:
        if flo == 0.0 and lo > 0.0:
            return lo
        raise RootError(f"no root on the increasing branch s > {lo:g}: A H = {T:g} is too small")
    hi = max(1.0, 2.0 * lo)
    for _ in range(2100):
        if f(hi) > 0.0:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise RootError(f"could not bracket a root for A H = {T:g}")
    s = 0.5 * (lo + hi)
    for _ in range(max_iter):
        fs = f(s)
        if fs == 0.0:
            return float(s)
        if fs < 0.0:
            lo = s
        else:
            hi = s
        fp = (4.0 * s + c) / (3.0 * np.cbrt(s) ** 2)
        new = s - fs / fp if fp > 0 else 0.5 * (lo + hi)
        if not lo < new < hi:
            new = 0.5 * (lo + hi)
        if abs(new - s) <= 2.0 * np.finfo(float).eps * max(1.0, s):
            s = new
            break
        s = new
    # the last iterate and its bracket ends: keep whichever has the smallest residual
    cands = [c_ for c_ in (s, lo, hi) if c_ > max(0.0, -c / 4.0)]
    return float(min(cands, key=lambda z: abs(f(z))))


def solve_s_of_H_array(A, c, H) -> np.ndarray:
    """Elementwise :func:`solve_s_of_H` over broadcast arrays."""
    A, c, H = np.broadcast_arrays(np.asarray(A, float), np.asarray(c, float), np.asarray(H, float))
    out = np.empty(A.shape)
    for idx in np.ndindex(A.shape):
        out[idx] = solve_s_of_H(A[idx], c[idx], H[idx])
    return out


# ---------------------------------------------------------------------------
# residual reports


@dataclass
class ResidualReport:
    name: str
    residuals: Dict[str, float]
    tolerance: float
    info: Dict[str, object] = field(default_factory=dict)
    # residuals reported for information only (not part of pass/fail)
    informational: Tuple[str, ...] = ()

    def failing(self) -> List[str]:
        return [k for k, v in self.residuals.items() if k not in self.informational and not v < self.tolerance]

    @property
    def passed(self) -> bool:
        return not self.failing()

    def worst(self) -> Tuple[str, float]:
        keys = [k for k in self.residuals if k not in self.informational]
        k = max(keys, key=lambda x: self.residuals[x])
        return k, self.residuals[k]

    def as_dict(self) -> Dict[str, object]:
        return {
            "name": self.name,
            "residuals": {k: float(v) for k, v in self.residuals.items()},
            "tolerance": self.tolerance,
            "passed": self.passed,
            "informational": list(self.informational),
            "info": self.info,
        }


def _rel(diff: DifferentialForm, ref: DifferentialForm, pts) -> float:
    return diff.max_abs(pts) / max(1.0, ref.max_abs(pts))


def _top_rel(lhs: DifferentialForm, rhs: DifferentialForm, axes, pts) -> float:
    a = top_coefficient(lhs, axes, pts)
    b = top_coefficient(rhs, axes, pts)
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(a)))))


def _ds(chart: Chart, axis: int) -> DifferentialForm:
    return DifferentialForm(chart, 1, {(chart.index(axis),): Constant(chart, 1.0)})


# ---------------------------------------------------------------------------
# first reduction (hyperkaehler base)


def _general_reduction_residuals(hk, omega1_tilde, u, alpha, H, s, axis: int, rate: ScalarField, pts):
    """The two conditions on M and the alpha curvature for a general s(H).

    Derivatives in H are rate * d/d(coordinate ``axis``); rate = dcoord/dH.
    """
    chart = hk.chart
    J = hk.J1()
    M = hk.axes

    def Dform(a):
        return partial_form(a, axis) * rate

    def Dfield(f):
        return f.diff(axis) * rate

    g = -1.0 + H / s * Dfield(s) * (1.0 / 3.0)
    s23 = power(s, 2.0 / 3.0)
    k = s23 / (g * g)
    w1p = Dform(omega1_tilde)
    w1pp = Dform(w1p)
    ddcu = exterior_derivative(dc(u, J), axes=M)
    second_rhs = w1pp * k + w1p * (Dfield(k) * 0.5)
    lhs = (wedge(hk.omega2, hk.omega2) + wedge(hk.omega3, hk.omega3)) * (u * 0.5)
    first_rhs = wedge(omega1_tilde, omega1_tilde) * (H * s23)
    dH = _ds(chart, axis) * (1.0 / rate)
    dalpha = wedge(dc(u, J), dH) * (power(s, -1.0 / 3.0) * g) - w1p * (power(s, 1.0 / 3.0) / g)
    da = exterior_derivative(alpha)
    return {
        "general_first": _top_rel(lhs, first_rhs, M, pts),
        "general_second": _rel(ddcu - second_rhs, ddcu, pts),
        "general_dalpha": _rel(da - dalpha, da, pts),
    }


def check_reduction_I(data, points, tol: float = 1e-9) -> ResidualReport:
    """Residuals of the two Spin(7) conditions on a hyperkaehler base, plus the curvature prescriptions.

    ``data`` is a :class:`~spin7kahler.catalog.ReductionIData`.  The alpha
    curvature is tested twice: against the specialised A, c prescription and
    against the general s(H) formula with s solving A H = s^{1/3}(s + c).
    """
    pts, _ = as_points(data.chart, points)
    hk = data.hk
    M = hk.axes
    J = hk.J1()
    A, c = float(data.A), float(data.c)
    s = data.s
    sa = data.s_axis
    u = data.u
    w1 = data.omega1_tilde
    chart = data.chart
    ds = _ds(chart, sa)

    def ddc(f):
        return exterior_derivative(dc(f, J), axes=M)

    res: Dict[str, float] = {}
    lhs = (wedge(hk.omega2, hk.omega2) + wedge(hk.omega3, hk.omega3)) * (u * 0.5)
    rhs = wedge(w1, w1) * (s * (s + c) * (1.0 / A))
    res["equ1"] = _top_rel(lhs, rhs, M, pts)
    ddcu = ddc(u)
    res["equ2"] = _rel(ddcu - partial_form(partial_form(w1, sa), sa) * (A * A), ddcu, pts)
    res["omega1_tilde_closed_on_M"] = exterior_derivative(w1, axes=M).max_abs(pts)
    da = exterior_derivative(data.alpha)
    presc = wedge(dc(u, J), ds) * (-1.0 / A) + partial_form(w1, sa) * A
    res["dalpha"] = _rel(da - presc, da, pts)
    res["dxi"] = _rel(exterior_derivative(data.xi) + hk.omega2, hk.omega2, pts)
    res["deta"] = _rel(exterior_derivative(data.eta) + hk.omega3 * A, hk.omega3, pts)
    H = power(s, 1.0 / 3.0) * (s + c) * (1.0 / A)
    rate = 1.0 / H.diff(sa)
    res.update(_general_reduction_residuals(hk, w1, u, data.alpha, H, s, sa, rate, pts))
    info: Dict[str, object] = {"min_u": float(np.min(u(pts))), "A": A, "c": c}
    if data.G is not None:
        G = data.G
        Gdd = G.diff(sa).diff(sa)
        t = ddc(u - Gdd * (A * A))
        res["equ2new"] = _rel(t, ddcu, pts)
        if data.class_coefficients is not None and hk.omega0 is not None:
            a, b, p, q = data.class_coefficients
            la, lq = s * b + a, s * q + p
            K = ddc(G)
            w1 = hk.omega1
            cls = hk.omega0 * la + w1 * lq + K
            res["class"] = _rel(restrict(data.omega1_tilde, M) - cls, cls, pts)
            inner = (
                wedge(w1, w1) * (lq * lq - la * la)
                + wedge(w1, K) * (lq * 2.0)
                + wedge(K, hk.omega0) * (la * 2.0)
                + wedge(K, K)
            )
            res["equ1new"] = _top_rel(wedge(w1, w1) * u, inner * (s * (s + c) * (1.0 / A)), M, pts)
    if not info["min_u"] > 0:
        res["u_positive"] = float("inf")
    return ResidualReport("reduction_I", res, tol, info)


# ---------------------------------------------------------------------------
# the A = 0 truncation: closed G2 structures from the general theorem with s = 1


@dataclass
class TruncatedReduction:
    """General-theorem data with s = 1 on a chart whose coordinate ``H_axis`` is H itself."""

    chart: Chart
    hk: object
    H_axis: int
    omega1_tilde: DifferentialForm
    u: ScalarField
    alpha: DifferentialForm
    xi: DifferentialForm
    g2: G2Structure


def as_truncation_example(p: float = 1.0, q: float = 1.0, u_scale: float = 1.0) -> TruncatedReduction:
    """Flat base, omega1~ = (p + q H) omega1, u = u_scale * H (p + q H)^2.

    With u_scale = 1 both conditions hold and the assembled 3-form is closed
    and coclosed; other values give a negative control.
    """
    from .catalog import flat_hyperkahler

    chart = Chart(("x1", "x2", "x3", "x4", "x5", "H", "x6"), domain_box=[(-math.inf, math.inf)] * 5 + [(0.0, math.inf), (-math.inf, math.inf)])
    hk = flat_hyperkahler(chart, (0, 1, 2, 3))
    H = chart.coord(5)
    x1, x3 = chart.coord(0), chart.coord(2)
    d = [_ds(chart, i) for i in range(7)]
    lq = H * q + p
    w1t = hk.omega1 * lq
    u = H * lq * lq * u_scale
    alpha = d[4] + (d[1] * x1 + d[3] * x3) * q
    xi = d[6] - d[2] * x1 + d[3] * chart.coord(1)
    dH = d[5]
    # s = 1, g = -1
    phi = wedge(xi, w1t - wedge(alpha, dH)) + wedge(hk.omega2, alpha) * H + wedge(hk.omega3, dH) * (u * H)
    metric = MetricField.from_squares(
        chart,
        [(power(H, -2.0), xi), (H / u, alpha), (H * u, dH)] + [(H * lq, d[i]) for i in range(4)],
    )
    ref = np.array([0.1, 0.2, -0.1, 0.3, 0.0, 1.0, 0.0])
    o = _g2_orientation(phi, metric.axes, ref)
    g2 = G2Structure(chart, metric.axes, phi, metric.with_orientation(o))
    return TruncatedReduction(chart, hk, 5, w1t, u, alpha, xi, g2)


def check_as_truncation(data: TruncatedReduction, points, tol: float = 1e-9) -> ResidualReport:
    """The general conditions at s = 1 next to closure and coclosure of the assembled G2 form."""
    pts, _ = as_points(data.chart, points)
    one = Constant(data.chart, 1.0)
    H = data.chart.coord(data.H_axis)
    res = _general_reduction_residuals(data.hk, data.omega1_tilde, data.u, data.alpha, H, one, data.H_axis, one, pts)
    res["dxi"] = _rel(exterior_derivative(data.xi) + data.hk.omega2, data.hk.omega2, pts)
    tr = data.g2.torsion_residuals(pts)
    res["d_phi"] = tr["d_phi"]
    res["d_star_phi"] = tr["d_star_phi"]
    res["induced_metric"] = g2_metric_residual(data.g2.phi, data.g2.metric, pts)
    return ResidualReport("as_truncation", res, tol)


# ---------------------------------------------------------------------------
# second reduction (Riemann surface)


def check_reduction_II(data, points, tol: float = 1e-9) -> ResidualReport:
    """Residuals of the four equations over a surface and of the four curvature prescriptions.

    ``data`` is a :class:`~spin7kahler.catalog.ReductionIIData`.
    """
    pts, _ = as_points(data.chart, points)
    chart = data.chart
    S = data.sigma_axes
    J = data.J_sigma()
    sa, ya = data.s_axis, data.y_axis
    s, y = chart.coord(sa), chart.coord(ya)
    ds, dy = _ds(chart, sa), _ds(chart, ya)
    om, U1, U2, u, w = data.omega_tilde, data.upsilon1, data.upsilon2, data.u, data.w

    def ddc(f):
        return exterior_derivative(dc(f, J), axes=S)

    area = wedge(U1, U2) * (u * w)
    res = {
        "equation1": _rel(om * (s * y * -1.0) - area, area, pts),
        "equation2": _rel(partial_form(partial_form(om, ya), ya) - ddc(u), ddc(u), pts),
        "equation3": _rel(partial_form(partial_form(om, sa), sa) - ddc(w), ddc(w), pts),
        "equation4": partial_form(partial_form(om, ya), sa).max_abs(pts),
    }
    checks = {
        "dalpha": (data.alpha, wedge(dc(u, J), dy) * -1.0 + partial_form(om, ya)),
        "dkappa": (data.kappa, wedge(dc(w, J), ds) - partial_form(om, sa)),
        "dxi": (data.xi, wedge(U1, data.kappa) + wedge(U2, ds * w)),
        "deta": (data.eta, wedge(data.alpha, U2) + wedge(dy * u, U1)),
    }
    for key, (conn, target) in checks.items():
        dconn = exterior_derivative(conn)
        res[key] = _rel(dconn - target, dconn, pts)
    # coordinate form with Upsilon = dx1 + i dx2: s y F = u w
    F = top_coefficient(om, S, pts)
    uw = u(pts) * w(pts)
    sy = s(pts) * y(pts)
    res["dude3"] = float(np.max(np.abs(sy * F - uw)) / max(1.0, float(np.max(np.abs(uw)))))
    info = {"min_u": float(np.min(u(pts))), "min_w": float(np.min(w(pts))), "min_F": float(np.min(F))}
    for key in ("min_u", "min_w", "min_F"):
        if not info[key] > 0:
            res[key.replace("min_", "") + "_positive"] = float("inf")
    return ResidualReport("reduction_II", res, tol, info)


# ---------------------------------------------------------------------------
# hypersurfaces and the Hitchin flow


def reduction_I_psi_display(red) -> DifferentialForm:
    """eta^xi^w1~ + ((s+c)/A) eta^alpha^w2 + s^2 (s+c)^2/(2A^2) w1~^2 + s alpha^xi^w3."""
    A, c = float(red.A), float(red.c)
    s = red.s
    hk = red.hk
    w1 = red.omega1_tilde
    return (
        wedge(red.eta, wedge(red.xi, w1))
        + wedge(red.eta, wedge(red.alpha, hk.omega2)) * ((s + c) * (1.0 / A))
        + wedge(w1, w1) * (s * s * (s + c) * (s + c) * (0.5 / (A * A)))
        + wedge(red.alpha, wedge(red.xi, hk.omega3)) * s
    )


def geodesic_rate(bundle) -> Optional[ScalarField]:
    """Expected dt/ds for the catalog entries whose level sets are declared a geodesic foliation."""
    if bundle.name == "glps_spin7":
        return power(bundle.chart.coord(bundle.normal_axis), 3.0)
    red = bundle.reduction_I
    if red is not None and red.class_coefficients is not None and red.G is None and bundle.name == "constant_I":
        a, b, p, q = red.class_coefficients
        s = red.s
        la, lq = s * b + a, s * q + p
        return s * (s + red.c) * sqrt(lq * lq - la * la) * (1.0 / red.A ** 2)
    return None


def hitchin_check(bundle, points, normal_axis: Optional[int] = None, tol: float = 1e-9) -> ResidualReport:
    """Hypersurface split Phi = dt ^ phi_t + psi_t along the level sets of one coordinate.

    phi_t = n -| Phi restricted to the level set, with n the unit normal;
    psi_t is Phi with the normal differential dropped.  Residuals: closure of
    psi_t on the leaf, the flow equation rho d/ds psi_t = d_L phi_t
    (rho = |ds|, so d/dt = rho d/ds), and psi_t = *phi_t in the leaf metric.
    """
    st = bundle.structure
    chart = bundle.chart
    k = bundle.normal_axis if normal_axis is None else chart.index(normal_axis)
    if k is None:
        raise ValueError(f"{bundle.name}: no normal coordinate declared; pass normal_axis")
    pts, _ = as_points(chart, points)
    g: MetricField = st.metric
    Phi = st.Phi
    axes = g.axes
    kl = axes.index(k)
    leaf = tuple(a for a in axes if a != k)
    rho2 = g.inverse_entry(kl, kl)
    rho = sqrt(rho2)
    comps = [Constant(chart, 0.0) for _ in range(chart.dim)]
    for li, a in enumerate(axes):
        comps[a] = g.inverse_entry(li, kl) / rho
    n = VectorField(chart, comps)
    phi = restrict(interior_product(n, Phi), leaf)
    beta, psi = split_along(Phi, k)
    scale = max(1.0, Phi.max_abs(pts))
    res: Dict[str, float] = {}
    res["hit1"] = exterior_derivative(psi, axes=leaf).max_abs(pts) / scale
    dphi = exterior_derivative(phi, axes=leaf)
    res["hit2"] = (partial_form(psi, k) * rho - dphi).max_abs(pts) / scale
    res["normal_split"] = (phi - restrict(beta, leaf) * rho).max_abs(pts) / scale
    gL = g.restricted(leaf)
    o = _g2_orientation(phi, leaf, pts[0])
    gL = gL.with_orientation(o)
    res["star_phi_vs_psi"] = (hodge_star(phi, gL) - psi).max_abs(pts) / scale
    res["leaf_metric_from_phi"] = g2_metric_residual(phi, gL, pts)
    cross = max((float(np.max(np.abs(g.entry(k, a)(pts)))) for a in leaf), default=0.0)
    grad = max((float(np.max(np.abs(rho.diff(a)(pts)))) for a in leaf), default=0.0)
    res["normal_cross_terms"] = cross
    res["leaf_gradient_of_rho"] = grad
    info: Dict[str, object] = {"normal_axis": chart.coord_names[k], "leaf_orientation": o}
    rate = geodesic_rate(bundle) if normal_axis is None or k == bundle.normal_axis else None
    if rate is not None:
        r = rate(pts)
        res["geodesic_rate"] = float(np.max(np.abs(1.0 / rho(pts) - r) / np.maximum(1.0, np.abs(r))))
    if bundle.printed_metric is not None:
        P = bundle.printed_metric.restricted(leaf).matrix(pts)
        Gm = gL.matrix(pts)
        res["leaf_metric_vs_printed"] = float(np.max(np.abs(P - Gm) / np.maximum(1.0, np.abs(P))))
    if bundle.reduction_I is not None:
        disp = reduction_I_psi_display(bundle.reduction_I)
        res["psi_display"] = (disp - psi).max_abs(pts) / scale
    return ResidualReport("hitchin", res, tol, info)


# ---------------------------------------------------------------------------
# grids


@dataclass
class GridField:
    """Samples of a function on a uniform grid; ``time_label`` is the evolution parameter."""

    grid_shape: Tuple[int, ...]
    spacings: Tuple[float, ...]
    periodic: Tuple[bool, ...]
    values: np.ndarray
    time_label: float = 0.0

    def __post_init__(self):
        self.grid_shape = tuple(int(n) for n in self.grid_shape)
        self.spacings = tuple(float(h) for h in self.spacings)
        self.periodic = tuple(bool(p) for p in self.periodic)
        self.values = np.asarray(self.values, dtype=float)
        nd = len(self.grid_shape)
        if len(self.spacings) != nd or len(self.periodic) != nd:
            raise GridError("grid_shape, spacings and periodic must have one entry per axis")
        if self.values.shape != self.grid_shape:
            raise GridError(f"values have shape {self.values.shape}, grid_shape says {self.grid_shape}")
        if any(n < 3 for n in self.grid_shape):
            raise GridError("every axis needs at least 3 points")
        if any(not (h > 0 and math.isfinite(h)) for h in self.spacings):
            raise GridError("spacings must be positive and finite")
        if not np.all(np.isfinite(self.values)):
            raise GridError("grid values contain NaN or Inf")
        self.time_label = float(self.time_label)

    @property
    def ndim(self) -> int:
        return len(self.grid_shape)

    @classmethod
    def on_torus(cls, fn: Callable, shape: Sequence[int], time_label: float = 0.0, length: float = TWO_PI) -> "GridField":
        """Sample fn(*coordinate arrays) on the periodic grid x_i = k L/n_i, k = 0..n_i-1."""
        shape = tuple(int(n) for n in shape)
        spac = tuple(length / n for n in shape)
        X = np.meshgrid(*[np.arange(n) * h for n, h in zip(shape, spac)], indexing="ij")
        vals = np.broadcast_to(np.asarray(fn(*X), dtype=float), shape).copy()
        return cls(shape, spac, (True,) * len(shape), vals, time_label)

    def coordinates(self) -> List[np.ndarray]:
        return np.meshgrid(*[np.arange(n) * h for n, h in zip(self.grid_shape, self.spacings)], indexing="ij")

    def like(self, values, time_label=None) -> "GridField":
        return GridField(self.grid_shape, self.spacings, self.periodic, values, self.time_label if time_label is None else time_label)

    def to_csv(self, path) -> None:
        header = "\n".join(
            [
                "grid_shape: " + " ".join(str(n) for n in self.grid_shape),
                "spacings: " + " ".join(repr(h) for h in self.spacings),
                "periodic: " + " ".join("1" if p else "0" for p in self.periodic),
                f"time_label: {self.time_label!r}",
                "layout: row-major, last axis along each row",
            ]
        )
        rows = self.values.reshape(-1, self.grid_shape[-1])
        np.savetxt(path, rows, fmt="%.17g", delimiter=",", header=header, comments="# ")

    @classmethod
    def from_csv(cls, path) -> "GridField":
        meta = {}
        with open(path) as fh:
            lines = fh.read().splitlines()
        for line in lines:
            if line.startswith("#") and ":" in line:
                key, val = line[1:].split(":", 1)
                meta[key.strip()] = val.strip()
        try:
            shape = tuple(int(x) for x in meta["grid_shape"].split())
            spac = tuple(float(x) for x in meta["spacings"].split())
            per = tuple(x == "1" for x in meta["periodic"].split())
            t = float(meta.get("time_label", "0"))
        except (KeyError, ValueError) as exc:
            raise GridError(f"{path}: malformed grid header ({exc})") from None
        data = np.loadtxt([ln for ln in lines if ln.strip() and not ln.startswith("#")], delimiter=",", ndmin=2)
        if data.size != int(np.prod(shape)):
            raise GridError(f"{path}: {data.size} values for grid shape {shape}")
        return cls(shape, spac, per, data.reshape(shape), t)


def second_difference(f: np.ndarray, axis: int, h: float) -> np.ndarray:
    return (np.roll(f, -1, axis) - 2.0 * f + np.roll(f, 1, axis)) / (h * h)


def mixed_difference(f: np.ndarray, i: int, j: int, hi: float, hj: float) -> np.ndarray:
    fp = np.roll(f, -1, i)
    fm = np.roll(f, 1, i)
    return (np.roll(fp, -1, j) - np.roll(fp, 1, j) - np.roll(fm, -1, j) + np.roll(fm, 1, j)) / (4.0 * hi * hj)


def real_hessian(f: np.ndarray, spacings: Sequence[float], background: Optional[np.ndarray] = None) -> Dict[Tuple[int, int], np.ndarray]:
    """Centred second derivatives F_ij (i <= j) of a periodic grid function, plus a constant matrix."""
    n = f.ndim
    out = {}
    for i in range(n):
        for j in range(i, n):
            d = second_difference(f, i, spacings[i]) if i == j else mixed_difference(f, i, j, spacings[i], spacings[j])
            if background is not None:
                d = d + background[i, j]
            out[(i, j)] = d
    return out


def ddc_coefficients(F: Dict[Tuple[int, int], np.ndarray]) -> Dict[Tuple[int, int], np.ndarray]:
    """Coefficients w_ij of dd^c F on C^2 with z1 = x1 + i x2, z2 = x3 + i x4 (J dx1 = -dx2)."""
    return {
        (0, 1): -(F[(0, 0)] + F[(1, 1)]),
        (2, 3): -(F[(2, 2)] + F[(3, 3)]),
        (0, 2): F[(0, 3)] - F[(1, 2)],
        (0, 3): -F[(1, 3)] - F[(0, 2)],
        (1, 2): F[(0, 2)] + F[(1, 3)],
        (1, 3): F[(0, 3)] - F[(1, 2)],
    }


def pfaffian(w: Dict[Tuple[int, int], np.ndarray]) -> np.ndarray:
    """w ^ w = 2 Pf(w) dx1234."""
    return w[(0, 1)] * w[(2, 3)] - w[(0, 2)] * w[(1, 3)] + w[(0, 3)] * w[(1, 2)]


def complex_hessian(F: Dict[Tuple[int, int], np.ndarray]):
    """(h11, h22, Re h12, Im h12) with h_jk = d^2 F / dz_j d zbar_k."""
    h11 = 0.25 * (F[(0, 0)] + F[(1, 1)])
    h22 = 0.25 * (F[(2, 2)] + F[(3, 3)])
    re = 0.25 * (F[(0, 2)] + F[(1, 3)])
    im = 0.25 * (F[(0, 3)] - F[(1, 2)])
    return h11, h22, re, im


def complex_hessian_det(F) -> np.ndarray:
    h11, h22, re, im = complex_hessian(F)
    return h11 * h22 - re * re - im * im


@dataclass
class EvolutionReport:
    steps: int
    dt: float
    max_residual_per_step: List[float]
    conserved_diagnostics: Dict[str, float]
    final: GridField
    final_rate: GridField
    config: Dict[str, object] = field(default_factory=dict)

    def as_dict(self) -> Dict[str, object]:
        return {
            "schema_version": SCHEMA_VERSION,
            "steps": self.steps,
            "dt": self.dt,
            "max_residual_per_step": [float(r) for r in self.max_residual_per_step],
            "conserved_diagnostics": {k: float(v) for k, v in self.conserved_diagnostics.items()},
            "final": {
                "grid_shape": list(self.final.grid_shape),
                "spacings": list(self.final.spacings),
                "time_label": self.final.time_label,
                "min": float(np.min(self.final.values)),
                "max": float(np.max(self.final.values)),
            },
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, indent=2)


def _rk4_second_order(phi, vel, s, dt, accel):
    a1 = accel(s, phi)
    p2 = phi + 0.5 * dt * vel
    v2 = vel + 0.5 * dt * a1
    a2 = accel(s + 0.5 * dt, p2)
    p3 = phi + 0.5 * dt * v2
    v3 = vel + 0.5 * dt * a2
    a3 = accel(s + 0.5 * dt, p3)
    p4 = phi + dt * v3
    v4 = vel + dt * a3
    a4 = accel(s + dt, p4)
    new_phi = phi + dt / 6.0 * (vel + 2.0 * v2 + 2.0 * v3 + v4)
    new_vel = vel + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
    return new_phi, new_vel


def _check_pair(F0: GridField, F1: GridField, ndim: int, label: str):
    for F in (F0, F1):
        if F.ndim != ndim:
            raise GridError(f"{label}: expected a {ndim}-dimensional grid, got {F.ndim}")
        if not all(F.periodic):
            raise GridError(f"{label}: all axes must be periodic")
    if F0.grid_shape != F1.grid_shape or not np.allclose(F0.spacings, F1.spacings, rtol=0, atol=0):
        raise GridError(f"{label}: initial value and rate live on different grids")


def _max_abs_quadratic(c: float, lo: float, hi: float) -> float:
    cands = [lo, hi] + ([-c / 2.0] if lo < -c / 2.0 < hi else [])
    return max(abs(x * (x + c)) for x in cands)


# ---------------------------------------------------------------------------
# Monge-Ampere evolution


def evolve_monge_ampere(
    F0: GridField,
    F1: GridField,
    c: float,
    s_range: Tuple[float, float],
    steps: int,
    background: Optional[Tuple[np.ndarray, np.ndarray]] = None,
    A: float = 1.0,
    kappa: float = 16.0,
    check_positivity: bool = True,
    cfl: float = 0.25,
) -> EvolutionReport:
    """Evolve F'' = (s(s + c)/A) kappa det(d^2 F/dz_j dzbar_k) on a periodic 4-grid.

    The potential is F = phi + x^T (H0 + s H1) x / 2 with phi periodic; the
    grids hold phi and d phi/ds.  kappa = 16 is the factor for which the
    equation is equivalent to the volume condition with omega~1 = dd^c F.
    Positivity of omega~1 (h negative definite in this d^c convention) is
    checked at every RK stage.
    """
    _check_pair(F0, F1, 4, "evolve_monge_ampere")
    s0, s1 = map(float, s_range)
    if not s1 > s0 or steps < 1:
        raise GridError("need s_max > s_min and steps >= 1")
    if A == 0:
        raise GridError("A must be nonzero")
    dt = (s1 - s0) / steps
    h = min(F0.spacings)
    limit = cfl * h * h * min(1.0, abs(A) / max(1e-300, _max_abs_quadratic(c, s0, s1)))
    if dt > limit * (1.0 + 1e-12):
        raise EvolutionAbort(f"step size {dt:.4g} exceeds the stability heuristic {limit:.4g}", 0, time=s0)
    if background is None:
        H0 = H1 = np.zeros((4, 4))
    else:
        H0, H1 = (np.asarray(b, dtype=float) for b in background)
        if H0.shape != (4, 4) or H1.shape != (4, 4):
            raise GridError("background Hessian must be a pair of 4x4 matrices")
        H0, H1 = 0.5 * (H0 + H0.T), 0.5 * (H1 + H1.T)
    spac = F0.spacings
    step_box = [0]
    diag = {"min_neg_h11": math.inf, "min_det_h": math.inf, "max_route_gap": 0.0}

    def hess(s, phi):
        return real_hessian(phi, spac, H0 + s * H1)

    def accel(s, phi):
        Hs = hess(s, phi)
        det = complex_hessian_det(Hs)
        h11 = complex_hessian(Hs)[0]
        diag["min_neg_h11"] = min(diag["min_neg_h11"], float(np.min(-h11)))
        diag["min_det_h"] = min(diag["min_det_h"], float(np.min(det)))
        if check_positivity:
            bad = (h11 >= 0) | (det <= 0)
            if np.any(bad):
                loc = np.unravel_index(int(np.argmax(bad)), bad.shape)
                raise EvolutionAbort("Kaehler positivity lost", step_box[0], loc, s)
        return (s * (s + c) / A * kappa) * det

    phi, vel = F0.values.copy(), F1.values.copy()
    residuals = []
    s = s0
    mean0 = float(np.mean(phi))
    for n in range(steps):
        step_box[0] = n
        new_phi, new_vel = _rk4_second_order(phi, vel, s, dt, accel)
        if not (np.all(np.isfinite(new_phi)) and np.all(np.isfinite(new_vel))):
            bad = ~np.isfinite(new_phi)
            raise EvolutionAbort("non-finite values", n, np.unravel_index(int(np.argmax(bad)), bad.shape), s)
        # staggered check at the half step, through the Pfaffian of dd^c F
        sm = s + 0.5 * dt
        Hm = hess(sm, 0.5 * (phi + new_phi))
        pf = (sm * (sm + c) / A) * pfaffian(ddc_coefficients(Hm))
        det_route = (sm * (sm + c) / A * kappa) * complex_hessian_det(Hm)
        diag["max_route_gap"] = max(diag["max_route_gap"], float(np.max(np.abs(pf - det_route))))
        acc = (new_vel - vel) / dt
        residuals.append(float(np.max(np.abs(acc - pf)) / max(1.0, float(np.max(np.abs(pf))))))
        phi, vel = new_phi, new_vel
        s = s0 + (n + 1) * dt
    diag["mean_drift"] = float(np.mean(phi)) - mean0
    cfg = {
        "equation": "monge_ampere",
        "c": float(c),
        "A": float(A),
        "kappa": float(kappa),
        "s_range": [s0, s1],
        "grid_shape": list(F0.grid_shape),
        "background": [H0.tolist(), H1.tolist()],
    }
    return EvolutionReport(steps, dt, residuals, diag, F0.like(phi, s1), F0.like(vel, s1), cfg)


def cfl_steps(spacings: Sequence[float], interval: Tuple[float, float], coeff_max: float, cfl: float = 0.25) -> int:
    """Smallest step count with dt <= cfl h^2 min(1, 1/coeff_max)."""
    h = min(spacings)
    limit = cfl * h * h * min(1.0, 1.0 / max(1e-300, coeff_max))
    return max(1, int(math.ceil((interval[1] - interval[0]) / limit * (1.0 + 1e-9))))


@dataclass
class MAFixture:
    """Initial data, background and closed-form solution for a Monge-Ampere run."""

    name: str
    F0: GridField
    F1: GridField
    background: Tuple[np.ndarray, np.ndarray]
    c: float
    A: float
    s_range: Tuple[float, float]
    exact_phi: Callable[[float], np.ndarray]
    exact_omega: Callable[[float], Dict[Tuple[int, int], np.ndarray]]


def _grid_shape(n: int, shape=None) -> Tuple[int, ...]:
    return tuple(shape) if shape is not None else (n, n, n, n)


def ma_fixture(name: str, n: int, s_range=(1.0, 1.2), params=None, shape=None) -> MAFixture:
    """'constant_I' (quadratic potential, w~1 = (a+bs)w0 + (p+qs)w1) or 'perturbed_glps' (v(s) sin x1)."""
    params = dict(params or {})
    shape = _grid_shape(n, shape)
    s0 = float(s_range[0])
    if name == "constant_I":
        p = {"A": 1.0, "c": 0.0, "a": 0.0, "b": 0.0, "p": 0.0, "q": 1.0}
        unknown = set(params) - set(p)
        if unknown:
            raise GridError(f"unknown parameters {sorted(unknown)}")
        p.update({k: float(v) for k, v in params.items()})
        A, c, a, b, pp, q = (p[k] for k in ("A", "c", "a", "b", "p", "q"))
        H0 = -0.5 * np.diag([a + pp, a + pp, pp - a, pp - a])
        H1 = -0.5 * np.diag([b + q, b + q, q - b, q - b])
        # phi(s) with phi'' = s (s + c)((p + q s)^2 - (a + b s)^2)/A, phi(s0) = phi'(s0) = 0
        S = Polynomial([0.0, 1.0])
        rhs = S * (S + c) * ((pp + q * S) ** 2 - (a + b * S) ** 2) / A
        phi_poly = rhs.integ(2, lbnd=s0)
        F0 = GridField.on_torus(lambda *X: np.zeros_like(X[0]), shape, s0)
        F1 = GridField.on_torus(lambda *X: np.zeros_like(X[0]), shape, s0)

        def exact_phi(s):
            return np.full(shape, float(phi_poly(s)))

        def exact_omega(s):
            la, lq = a + b * s, pp + q * s
            z = np.zeros(shape)
            return {(0, 1): z + la + lq, (2, 3): z + lq - la, (0, 2): z, (0, 3): z, (1, 2): z, (1, 3): z}

        return MAFixture(name, F0, F1, (H0, H1), c, A, tuple(s_range), exact_phi, exact_omega)
    if name == "perturbed_glps":
        from .specialfns import pcf_u0

        if params:
            raise GridError("perturbed_glps takes no parameters")
        v0, vd0, _ = pcf_u0(s0)
        H0 = -0.5 * np.eye(4)
        H1 = np.zeros((4, 4))
        F0 = GridField.on_torus(lambda x1, *r: v0 * np.sin(x1) + s0 ** 4 / 12.0, shape, s0)
        F1 = GridField.on_torus(lambda x1, *r: vd0 * np.sin(x1) + s0 ** 3 / 3.0, shape, s0)
        X1 = F0.coordinates()[0]

        def exact_phi(s):
            v = float(pcf_u0(s)[0])
            return v * np.sin(X1) + s ** 4 / 12.0

        def exact_omega(s):
            v = float(pcf_u0(s)[0])
            z = np.zeros(shape)
            return {(0, 1): 1.0 + v * np.sin(X1), (2, 3): z + 1.0, (0, 2): z, (0, 3): z, (1, 2): z, (1, 3): z}

        return MAFixture(name, F0, F1, (H0, H1), 0.0, 1.0, tuple(s_range), exact_phi, exact_omega)
    raise GridError(f"no Monge-Ampere fixture named {name!r}; known: constant_I, perturbed_glps")


def run_ma_fixture(fx: MAFixture, steps: Optional[int] = None):
    """Evolve a fixture; returns (report, max |phi - exact|, max |w~1 - exact|)."""
    s0, s1 = fx.s_range
    if steps is None:
        steps = cfl_steps(fx.F0.spacings, fx.s_range, _max_abs_quadratic(fx.c, s0, s1) / abs(fx.A))
    rep = evolve_monge_ampere(fx.F0, fx.F1, fx.c, fx.s_range, steps, background=fx.background, A=fx.A)
    H0, H1 = fx.background
    w = ddc_coefficients(real_hessian(rep.final.values, rep.final.spacings, H0 + s1 * H1))
    we = fx.exact_omega(s1)
    err_w = max(float(np.max(np.abs(w[k] - we[k]))) for k in w)
    err_phi = float(np.max(np.abs(rep.final.values - fx.exact_phi(s1))))
    return rep, err_phi, err_w


def convergence_table(errors: Sequence[float], hs: Sequence[float]) -> List[Dict[str, float]]:
    """Rows (h, error, observed order against the previous row)."""
    rows = []
    for i, (h, e) in enumerate(zip(hs, errors)):
        row = {"h": float(h), "error": float(e)}
        if i > 0 and e > 0 and errors[i - 1] > 0:
            row["order"] = math.log(errors[i - 1] / e) / math.log(hs[i - 1] / h)
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# the second-reduction evolution  G d^2u~/dy^2 = y Delta u~


def flat_laplacian(f: np.ndarray, spacings: Sequence[float]) -> np.ndarray:
    """Hodge Laplacian -(d1^2 + d2^2 + ...) of a periodic grid function."""
    return -sum(second_difference(f, i, spacings[i]) for i in range(f.ndim))


def evolve_dude4(
    u0: GridField,
    u1: GridField,
    G,
    y_range: Tuple[float, float],
    steps: int,
    valid_mask: Optional[np.ndarray] = None,
    harmonic_tol: float = 1e-8,
    cfl: float = 0.25,
) -> EvolutionReport:
    """Evolve G u~'' = y Delta u~ in y on a periodic 2-grid (Delta the positive Hodge Laplacian).

    ``G`` is a positive, discretely harmonic GridField or a positive number.
    u = y u~ must stay positive on ``valid_mask`` (default: everywhere).
    """
    _check_pair(u0, u1, 2, "evolve_dude4")
    y0, y1 = map(float, y_range)
    if not (y1 > y0 > 0) or steps < 1:
        raise GridError("need 0 < y_min < y_max and steps >= 1")
    if isinstance(G, GridField):
        if G.grid_shape != u0.grid_shape:
            raise GridError("G lives on a different grid")
        Gv = G.values
    else:
        Gv = np.full(u0.grid_shape, float(G))
    if not np.all(Gv > 0):
        raise GridError("G must be positive")
    harm = float(np.max(np.abs(flat_laplacian(Gv, u0.spacings))) / max(1.0, float(np.max(np.abs(Gv)))))
    if not harm < harmonic_tol:
        raise GridError(f"G is not discretely harmonic: residual {harm:.3e}")
    mask = np.ones(u0.grid_shape, dtype=bool) if valid_mask is None else np.asarray(valid_mask, dtype=bool)
    if mask.shape != u0.grid_shape:
        raise GridError("valid_mask shape differs from the grid")
    dt = (y1 - y0) / steps
    h = min(u0.spacings)
    limit = cfl * h * h * min(1.0, float(np.min(Gv)) / y1)
    if dt > limit * (1.0 + 1e-12):
        raise EvolutionAbort(f"step size {dt:.4g} exceeds the stability heuristic {limit:.4g}", 0, time=y0)
    spac = u0.spacings
    step_box = [0]
    diag = {"min_u": math.inf, "harmonicity_of_G": harm}

    def check(y, ut, n):
        u = y * ut
        m = float(np.min(np.where(mask, u, np.inf)))
        diag["min_u"] = min(diag["min_u"], m)
        if not m > 0:
            bad = mask & ~(u > 0)
            raise EvolutionAbort("u = y u~ is no longer positive", n, np.unravel_index(int(np.argmax(bad)), bad.shape), y)

    def accel(y, ut):
        return y * flat_laplacian(ut, spac) / Gv

    ut, vel = u0.values.copy(), u1.values.copy()
    check(y0, ut, 0)
    residuals = []
    y = y0
    for n in range(steps):
        step_box[0] = n
        new_ut, new_vel = _rk4_second_order(ut, vel, y, dt, accel)
        ym = y + 0.5 * dt
        target = accel(ym, 0.5 * (ut + new_ut))
        acc = (new_vel - vel) / dt
        residuals.append(float(np.max(np.abs(acc - target)) / max(1.0, float(np.max(np.abs(target))))))
        ut, vel = new_ut, new_vel
        y = y0 + (n + 1) * dt
        check(y, ut, n + 1)
    cfg = {"equation": "dude4", "y_range": [y0, y1], "grid_shape": list(u0.grid_shape)}
    return EvolutionReport(steps, dt, residuals, diag, u0.like(ut, y1), u0.like(vel, y1), cfg)


def dude_consistency(u_tilde: np.ndarray, G, y: float, s_values: Sequence[float]) -> float:
    """Max relative |s y (F1 + F2) - u w| for u = y u~, w = s G, F1 = u~ G, F2 = 0."""
    ut = np.asarray(u_tilde, dtype=float)
    Gv = np.broadcast_to(np.asarray(G, dtype=float), ut.shape)
    u = y * ut
    F1 = ut * Gv
    worst = 0.0
    for s in s_values:
        w = s * Gv
        lhs = s * y * F1
        rhs = u * w
        worst = max(worst, float(np.max(np.abs(lhs - rhs)) / max(1.0, float(np.max(np.abs(rhs))))))
    return worst


@dataclass
class Dude4Fixture:
    name: str
    u0: GridField
    u1: GridField
    G: object
    y_range: Tuple[float, float]
    valid_mask: Optional[np.ndarray]
    exact: Callable[[float], np.ndarray]


def dude4_fixture(name: str, n: int, y_range=(1.0, 1.5), params=None) -> Dude4Fixture:
    """'affine' (G = c, u~ = p + q y) or 'airy' (G = 1, u~ = Ai(y) sin x1, positivity on 0 < x1 < pi)."""
    params = dict(params or {})
    y0 = float(y_range[0])
    shape = (n, n)
    if name == "affine":
        p = {"c": 1.0, "p": 1.0, "q": 1.0}
        unknown = set(params) - set(p)
        if unknown:
            raise GridError(f"unknown parameters {sorted(unknown)}")
        p.update({k: float(v) for k, v in params.items()})
        u0 = GridField.on_torus(lambda *X: np.full_like(X[0], p["p"] + p["q"] * y0), shape, y0)
        u1 = GridField.on_torus(lambda *X: np.full_like(X[0], p["q"]), shape, y0)
        return Dude4Fixture(name, u0, u1, p["c"], tuple(y_range), None, lambda y: np.full(shape, p["p"] + p["q"] * y))
    if name == "airy":
        from .specialfns import airy_ai

        if params:
            raise GridError("airy takes no parameters")
        a0, ad0, _ = airy_ai(y0)
        u0 = GridField.on_torus(lambda x1, x2: a0 * np.sin(x1) + 0 * x2, shape, y0)
        u1 = GridField.on_torus(lambda x1, x2: ad0 * np.sin(x1) + 0 * x2, shape, y0)
        X1 = u0.coordinates()[0]
        mask = (X1 > 0) & (X1 < math.pi)

        def exact(y):
            return float(airy_ai(y)[0]) * np.sin(X1)

        return Dude4Fixture(name, u0, u1, 1.0, tuple(y_range), mask, exact)
    raise GridError(f"no dude4 fixture named {name!r}; known: affine, airy")


def run_dude4_fixture(fx: Dude4Fixture, steps: Optional[int] = None):
    """Evolve a fixture; returns (report, max |u~ - exact|)."""
    Gmin = float(np.min(fx.G.values)) if isinstance(fx.G, GridField) else float(fx.G)
    if steps is None:
        steps = cfl_steps(fx.u0.spacings, fx.y_range, fx.y_range[1] / Gmin)
    rep = evolve_dude4(fx.u0, fx.u1, fx.G, fx.y_range, steps, valid_mask=fx.valid_mask)
    err = float(np.max(np.abs(rep.final.values - fx.exact(fx.y_range[1]))))
    return rep, err
