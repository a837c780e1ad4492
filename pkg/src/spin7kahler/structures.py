"""SU(3), G2, Spin(7) and SU(4) structures: model forms, assembly and torsion checks."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .exterior import (
    ComplexForm,
    ComplexStructure,
    DifferentialForm,
    FormError,
    MetricField,
    VectorField,
    as_form,
    dc,
    exterior_derivative,
    hodge_star,
    interior_product,
    metric_from_kahler,
    nijenhuis_tensor_values,
    perm_sign,
    wedge,
    wedge_all,
)
from .fields import Chart, Constant, EvalContext, FieldError, ScalarField, as_points, log, power


class AssemblyError(FieldError, ValueError):
    pass


# ---------------------------------------------------------------------------
# numeric helpers


def full_tensor(form: DifferentialForm, points, axes: Sequence[int], check_domain: bool = True) -> np.ndarray:
    """Antisymmetric component array of ``form`` restricted to ``axes``: shape (N, m, ..., m)."""
    pts, _ = as_points(form.chart, points)
    m, k = len(axes), form.degree
    pos = {a: i for i, a in enumerate(axes)}
    vals = form.values(pts, check_domain)
    out = np.zeros((pts.shape[0],) + (m,) * k)
    for idx, v in vals.items():
        if not set(idx) <= set(pos):
            continue
        loc = tuple(pos[i] for i in idx)
        for perm in itertools.permutations(range(k)):
            out[(slice(None),) + tuple(loc[q] for q in perm)] = perm_sign(perm) * v
    return out


def top_coefficient(form: DifferentialForm, axes: Sequence[int], points, check_domain: bool = True) -> np.ndarray:
    c = form.coeffs.get(tuple(axes))
    if c is None:
        return np.zeros(as_points(form.chart, points)[0].shape[0])
    return _values(c, points, check_domain)


def _values(f: ScalarField, points, check_domain: bool = True):
    from .fields import evaluate

    return np.atleast_1d(evaluate(f, points, order=0, check_domain=check_domain).value)


def form_residual(form: DifferentialForm, points, check_domain: bool = True) -> np.ndarray:
    """Pointwise max |coefficient|."""
    return form.pointwise_max_abs(points, check_domain)


# ---------------------------------------------------------------------------
# structure types


@dataclass
class SU3Structure:
    chart: Chart
    axes: Tuple[int, ...]
    omega: DifferentialForm
    omega_plus: DifferentialForm
    omega_minus: DifferentialForm
    J: ComplexStructure
    metric: MetricField
    coframe: Optional[Sequence[Tuple[DifferentialForm, DifferentialForm]]] = None

    @classmethod
    def from_coframe(
        cls,
        omega: DifferentialForm,
        coframe,
        scale: ScalarField = None,
        axes=None,
        reference_point=None,
        Omega: ComplexForm = None,
    ):
        """SU(3) data from a (1,0) coframe theta_k = a_k + i b_k.

        Omega defaults to scale * theta_1 ^ theta_2 ^ theta_3; an explicit
        ``Omega`` is used as given (its type is then checked by the residuals).
        """
        chart = omega.chart
        J = ComplexStructure.from_coframe(coframe, axes=axes)
        if Omega is None:
            Om = ComplexForm(coframe[0][0], coframe[0][1])
            for a, b in coframe[1:]:
                Om = Om.wedge(ComplexForm(a, b))
            if scale is not None:
                Om = Om * scale
        else:
            Om = Omega
        # the volume form is omega^3 / 6
        ref = chart.reference_point() if reference_point is None else np.asarray(reference_point, dtype=float)
        orient = _orientation_from(wedge_all(omega, omega, omega), J.axes, ref)
        g = metric_from_kahler(omega, J, orientation=orient)
        return cls(chart, J.axes, omega, Om.re, Om.im, J, g, tuple(coframe))

    @property
    def Omega(self) -> ComplexForm:
        return ComplexForm(self.omega_plus, self.omega_minus)

    def compatibility_form(self) -> DifferentialForm:
        w3 = wedge_all(self.omega, self.omega, self.omega)
        return w3 * (2.0 / 3.0) - wedge(self.omega_plus, self.omega_minus)

    def invariant_residuals(self, points, check_domain: bool = True) -> Dict[str, float]:
        pts, _ = as_points(self.chart, points)
        ax = self.axes
        scale = np.maximum(1.0, np.abs(top_coefficient(wedge_all(self.omega, self.omega, self.omega), ax, pts)))
        compat = np.abs(top_coefficient(self.compatibility_form(), ax, pts)) / scale
        W = full_tensor(self.omega, pts, ax, check_domain)
        Jv = self.J.values(pts, check_domain)
        jinv = np.max(np.abs(np.einsum("nca,ncd,ndb->nab", Jv, W, Jv) - W), axis=(1, 2))
        P = full_tensor(self.omega_plus, pts, ax, check_domain)
        M = full_tensor(self.omega_minus, pts, ax, check_domain)
        # contraction with X + iJX must vanish for a (3,0)-form
        r1 = P - np.einsum("nba,nbcd->nacd", Jv, M)
        r2 = M + np.einsum("nba,nbcd->nacd", Jv, P)
        big = np.maximum(1.0, np.max(np.abs(P), axis=(1, 2, 3)))
        t30 = np.maximum(np.max(np.abs(r1), axis=(1, 2, 3)), np.max(np.abs(r2), axis=(1, 2, 3))) / big
        w3 = np.abs(top_coefficient(wedge_all(self.omega, self.omega, self.omega), ax, pts))
        return {
            "compatibility": float(np.max(compat)),
            "j_invariance": float(np.max(jinv)),
            "type_3_0": float(np.max(t30)),
            "min_abs_omega_cubed": float(np.min(w3)),
        }

    def closure_residuals(self, points) -> Dict[str, float]:
        return {
            "d_omega": exterior_derivative(self.omega).max_abs(points),
            "d_omega_plus": exterior_derivative(self.omega_plus).max_abs(points),
            "d_omega_minus": exterior_derivative(self.omega_minus).max_abs(points),
        }


@dataclass
class G2Structure:
    chart: Chart
    axes: Tuple[int, ...]
    phi: DifferentialForm
    metric: MetricField
    star_phi: DifferentialForm = None

    def __post_init__(self):
        if self.star_phi is None:
            self.star_phi = hodge_star(self.phi, self.metric)

    def invariant_residuals(self, points) -> Dict[str, float]:
        pts, _ = as_points(self.chart, points)
        vol = self.metric.volume_form()
        v = top_coefficient(vol, self.axes, pts)
        lhs = top_coefficient(wedge(self.phi, self.star_phi), self.axes, pts)
        induced = g2_metric_residual(self.phi, self.metric, pts)
        return {
            "phi_star_phi_7vol": float(np.max(np.abs(lhs - 7.0 * v) / np.abs(v))),
            "induced_metric": float(induced),
        }

    def torsion_residuals(self, points) -> Dict[str, float]:
        return {
            "d_phi": exterior_derivative(self.phi).max_abs(points),
            "d_star_phi": exterior_derivative(self.star_phi).max_abs(points),
        }


def g2_metric_residual(phi: DifferentialForm, metric: MetricField, points) -> float:
    """Compare g with the metric determined by phi: (X -| phi)^(Y -| phi)^phi = 6 g(X, Y) vol."""
    ax = metric.axes
    T = full_tensor(phi, points, ax)
    n, m = T.shape[0], len(ax)
    B = np.zeros((n, m, m))
    # B_ab = (1/6) * top coefficient of (e_a -| phi) ^ (e_b -| phi) ^ phi
    eps = _levi_civita(m)
    B = np.einsum("naij,nbkl,npqr,ijklpqr->nab", T, T, T, eps, optimize=True) / (6.0 * 4.0 * 6.0)
    g = metric.matrix(points)
    vol = np.sqrt(np.linalg.det(g)) * metric.orientation
    return float(np.max(np.abs(B / vol[:, None, None] - g)) / max(1.0, np.max(np.abs(g))))


_EPS_CACHE: Dict[int, np.ndarray] = {}


def _levi_civita(m: int) -> np.ndarray:
    if m not in _EPS_CACHE:
        eps = np.zeros((m,) * m)
        for perm in itertools.permutations(range(m)):
            eps[perm] = perm_sign(perm)
        _EPS_CACHE[m] = eps
    return _EPS_CACHE[m]


@dataclass
class Spin7Structure:
    chart: Chart
    Phi: DifferentialForm
    metric: MetricField

    def invariant_residuals(self, points) -> Dict[str, float]:
        pts, _ = as_points(self.chart, points)
        ax = self.metric.axes
        big = np.maximum(1e-300, self.Phi.pointwise_max_abs(pts))
        sd = (hodge_star(self.Phi, self.metric) - self.Phi).pointwise_max_abs(pts) / big
        v = top_coefficient(self.metric.volume_form(), ax, pts)
        pp = top_coefficient(wedge(self.Phi, self.Phi), ax, pts)
        return {
            "self_duality": float(np.max(sd)),
            "phi_wedge_phi_14vol": float(np.max(np.abs(pp - 14.0 * v) / np.abs(v))),
        }

    def closure_residual(self, points) -> float:
        """max |dPhi| after normalizing Phi's largest coefficient to 1 at each point."""
        pts, _ = as_points(self.chart, points)
        big = np.maximum(1e-300, self.Phi.pointwise_max_abs(pts))
        return float(np.max(exterior_derivative(self.Phi).pointwise_max_abs(pts) / big))


@dataclass
class SU4Structure:
    chart: Chart
    omega_hat: DifferentialForm
    Omega_hat: ComplexForm
    J: ComplexStructure
    metric: MetricField

    def closure_residuals(self, points) -> Dict[str, float]:
        return {
            "d_omega_hat": exterior_derivative(self.omega_hat).max_abs(points),
            "d_Omega_hat_re": exterior_derivative(self.Omega_hat.re).max_abs(points),
            "d_Omega_hat_im": exterior_derivative(self.Omega_hat.im).max_abs(points),
        }

    def type_residual(self, points) -> float:
        """omega_hat(J., J.) - omega_hat, i.e. failure of type (1,1)."""
        ax = self.J.axes
        W = full_tensor(self.omega_hat, points, ax)
        Jv = self.J.values(points)
        return float(np.max(np.abs(np.einsum("nca,ncd,ndb->nab", Jv, W, Jv) - W)))


@dataclass
class ReductionData:
    """Data on the quotient plus the two circle fibres: Phi is assembled from these."""

    chart: Chart
    s: ScalarField
    H: ScalarField
    eta: DifferentialForm
    xi: DifferentialForm
    su3: SU3Structure
    eta_axis: int
    xi_axis: int

    def fibre_residuals(self, points) -> Dict[str, float]:
        pts, _ = as_points(self.chart, points)
        X = VectorField.coordinate(self.chart, self.eta_axis)
        Y = VectorField.coordinate(self.chart, self.xi_axis)
        ex = interior_product(X, self.eta).coeffs.get((), Constant(self.chart, 0.0))
        xy = interior_product(Y, self.xi).coeffs.get((), Constant(self.chart, 0.0))
        return {
            "eta(X)-1": float(np.max(np.abs(_values(ex, pts) - 1.0))),
            "xi(Y)-1": float(np.max(np.abs(_values(xy, pts) - 1.0))),
            "min_s": float(np.min(_values(self.s, pts))),
            "min_H": float(np.min(_values(self.H, pts))),
        }


@dataclass
class TorsionReport:
    pi1: DifferentialForm
    pi2_norm: np.ndarray
    sigma2_norm: np.ndarray
    alpha_eta: DifferentialForm
    alpha_xi: DifferentialForm
    residuals: Dict[str, float] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# model forms

_PHI0_TERMS = [
    ((0, 1, 2, 3), 1), ((0, 1, 4, 5), 1), ((0, 1, 6, 7), 1), ((0, 2, 4, 6), 1),
    ((0, 2, 5, 7), -1), ((0, 3, 4, 7), -1), ((0, 3, 5, 6), -1),
    ((2, 3, 4, 5), 1), ((2, 3, 6, 7), 1), ((4, 5, 6, 7), 1),
    ((1, 2, 4, 7), -1), ((1, 2, 5, 6), -1), ((1, 3, 4, 6), -1), ((1, 3, 5, 7), 1),
]


def flat_chart(dim: int, first: int = 0, name: str = "") -> Chart:
    return Chart(tuple(f"x{i}" for i in range(first, first + dim)), name=name or f"R{dim}")


def model_spin7_form(chart: Chart = None) -> Spin7Structure:
    chart = chart or flat_chart(8, name="R8")
    Phi = DifferentialForm(chart, 4, {idx: Constant(chart, float(c)) for idx, c in _PHI0_TERMS})
    return Spin7Structure(chart, Phi, MetricField.identity(chart))


def model_g2_form(chart: Chart = None) -> G2Structure:
    """phi0 = d/dx0 -| Phi0 on R^7 with coordinates x1..x7."""
    chart = chart or flat_chart(7, first=1, name="R7")
    terms = {}
    for idx, c in _PHI0_TERMS:
        if idx[0] == 0:
            terms[tuple(i - 1 for i in idx[1:])] = Constant(chart, float(c))
    phi = DifferentialForm(chart, 3, terms)
    return G2Structure(chart, tuple(range(7)), phi, MetricField.identity(chart))


# ---------------------------------------------------------------------------
# assembly


def _reference(chart: Chart, check_points) -> np.ndarray:
    if check_points is None:
        return chart.reference_point()
    return as_points(chart, check_points)[0][0]


def _orientation_from(top: DifferentialForm, axes, point) -> int:
    v = top_coefficient(top, axes, point[None, :])
    if v[0] == 0:
        raise AssemblyError("cannot fix an orientation: top form vanishes at the reference point")
    return 1 if v[0] > 0 else -1


def _raise_if(residuals: Dict[str, float], limits: Dict[str, float], points, label: str, recheck=None):
    """Raise on the first identity over its limit; ``recheck(point_batch)`` locates the worst point."""
    for key, lim in limits.items():
        val = residuals.get(key)
        if val is not None and not val < lim:
            where = ""
            if recheck is not None:
                pts = np.asarray(points)
                per = [recheck(pts[k : k + 1]).get(key, 0.0) for k in range(pts.shape[0])]
                where = f" at point {pts[int(np.argmax(per))].tolist()}"
            raise AssemblyError(f"{label}: identity '{key}' fails with residual {val:.3e} (limit {lim:g}){where}")


def assemble_spin7(
    data: ReductionData,
    check_points=None,
    orientation: Optional[int] = None,
    tol: float = 1e-9,
) -> Spin7Structure:
    su3, s, H, eta, xi = data.su3, data.s, data.H, data.eta, data.xi
    chart = data.chart
    om, Op, Om = su3.omega, su3.omega_plus, su3.omega_minus
    Phi = wedge(eta, wedge(xi, om) + Op * power(H, 1.5)) + (
        wedge(om, om) * (power(H, 2.0) * 0.5) - wedge(xi, Om) * power(H, 0.5)
    ) * power(s, 4.0 / 3.0)
    axes = tuple(sorted(set(su3.axes) | {data.eta_axis, data.xi_axis}))
    fibre = MetricField.from_squares(
        chart,
        [(power(s, -2.0), eta), (power(s, 2.0 / 3.0) * power(H, -2.0), xi)],
        axes=axes,
    )
    base = su3.metric.embed(axes)
    g = fibre + _scaled_raw(base, power(s, 2.0 / 3.0) * H)
    if orientation is None:
        orientation = _orientation_from(wedge(Phi, Phi), axes, _reference(chart, check_points))
    g = g.with_orientation(orientation)
    st = Spin7Structure(chart, Phi, g)
    if check_points is not None:
        pts, _ = as_points(chart, check_points)
        res = st.invariant_residuals(pts)
        _raise_if(res, {"self_duality": tol, "phi_wedge_phi_14vol": tol}, pts, "Spin(7) assembly", st.invariant_residuals)
    return st


def _scaled_raw(metric: MetricField, c: ScalarField) -> MetricField:
    from .exterior import _raw_metric

    m = metric.dim
    return _raw_metric(metric.chart, [[metric.g[i][j] * c for j in range(m)] for i in range(m)], metric.axes, metric.orientation)


def assemble_g2(
    su3: SU3Structure,
    H: ScalarField,
    xi: DifferentialForm,
    xi_axis: int,
    check_points=None,
    orientation: Optional[int] = None,
    tol: float = 1e-9,
) -> G2Structure:
    """phi = xi ^ omega + H^{3/2} Omega^+, g = H^{-2} xi^2 + H g_omega."""
    chart = su3.chart
    phi = wedge(xi, su3.omega) + su3.omega_plus * power(H, 1.5)
    axes = tuple(sorted(set(su3.axes) | {chart.index(xi_axis)}))
    g = MetricField.from_squares(chart, [(power(H, -2.0), xi)], axes=axes) + _scaled_raw(su3.metric.embed(axes), H)
    if orientation is None:
        orientation = _g2_orientation(phi, axes, _reference(chart, check_points))
    g = g.with_orientation(orientation)
    st = G2Structure(chart, axes, phi, g)
    if check_points is not None:
        pts, _ = as_points(chart, check_points)
        res = st.invariant_residuals(pts)
        _raise_if(res, {"phi_star_phi_7vol": tol, "induced_metric": tol}, pts, "G2 assembly", st.invariant_residuals)
    return st


def _g2_orientation(phi: DifferentialForm, axes, point) -> int:
    T = full_tensor(phi, point[None, :], axes)
    eps = _levi_civita(len(axes))
    B00 = np.einsum("ij,kl,pqr,ijklpqr->", T[0, 0], T[0, 0], T[0], eps, optimize=True)
    if B00 == 0:
        raise AssemblyError("cannot fix a G2 orientation at the reference point")
    return 1 if B00 > 0 else -1


def assemble_su4_cy(
    su3: SU3Structure,
    s: ScalarField,
    eta_hat: DifferentialForm,
    eta_hat_axis: int,
    s_axis: int,
    check_points=None,
    tol: float = 1e-9,
) -> SU4Structure:
    """omega^ = s^{2/3} omega + eta^ ^ d(s^{2/3}); Omega^ = Omega ^ (-eta^ - i (2/3) s^{5/3} ds)."""
    chart = su3.chart
    if su3.coframe is None:
        raise FormError("SU(4) assembly needs the (1,0) coframe of the SU(3) structure")
    if check_points is not None:
        pre = (exterior_derivative(eta_hat) + su3.omega).max_abs(check_points)
        if not pre < tol:
            raise AssemblyError(f"precondition d(eta^) = -omega fails with residual {pre:.3e}")
    s23 = power(s, 2.0 / 3.0)
    omega_hat = su3.omega * s23 + wedge(eta_hat, exterior_derivative(s23))
    ds = exterior_derivative(s, axes=[s_axis])
    theta4 = (-eta_hat, ds * (power(s, 5.0 / 3.0) * (-2.0 / 3.0)))
    Omega_hat = su3.Omega.wedge(ComplexForm(*theta4))
    axes = tuple(sorted(set(su3.axes) | {chart.index(eta_hat_axis), chart.index(s_axis)}))
    J = ComplexStructure.from_coframe(list(su3.coframe) + [theta4], axes=axes)
    g = metric_from_kahler(omega_hat, J)
    st = SU4Structure(chart, omega_hat, Omega_hat, J, g)
    if check_points is not None:
        t = st.type_residual(check_points)
        if not t < tol:
            raise AssemblyError(f"SU(4) assembly: omega^ is not of type (1,1), residual {t:.3e}")
        g.matrix(check_points)
    return st


# ---------------------------------------------------------------------------
# torsion


def _log_scale(H: ScalarField, s: ScalarField) -> ScalarField:
    """ln(H^{-1/2} s^{-1/3})"""
    return log(H) * (-0.5) + log(s) * (-1.0 / 3.0)


def su3_torsion(data: ReductionData, points) -> TorsionReport:
    """Torsion pieces of the quotient SU(3) structure and residuals of the closure system."""
    su3 = data.su3
    s, H, eta, xi = data.s, data.H, data.eta, data.xi
    om, Op, Om = su3.omega, su3.omega_plus, su3.omega_minus
    P = su3.axes
    lg = _log_scale(H, s)
    pi1 = exterior_derivative(lg, axes=P)
    dclg = dc(lg, su3.J)
    ds = exterior_derivative(s, axes=P)
    dH = exterior_derivative(H, axes=P)
    alpha_xi = dH * (-1.0 * power(H, 0.5)) + ds * (power(H, 1.5) * power(s, -1.0) * (1.0 / 3.0))
    # J(alpha_eta) = H^{1/2} s^{1/3} ds, so alpha_eta = -J(H^{1/2} s^{1/3} ds)
    alpha_eta = su3.J.apply_to_one_form(ds * (power(H, 0.5) * power(s, 1.0 / 3.0))) * -1.0
    dxi = exterior_derivative(xi)
    deta = exterior_derivative(eta)
    # Lambda^2_8 parts from d eta ^ omega = alpha_eta ^ Omega+ + (d eta)_8 ^ omega
    r1 = exterior_derivative(Op) - wedge(pi1, Op) + wedge(dxi, om) * power(H, -1.5) - wedge(alpha_xi, Op) * power(H, -1.5)
    r2 = (
        exterior_derivative(Om)
        - wedge(dclg, Op)
        + wedge(deta, om) * (power(s, -4.0 / 3.0) * power(H, -0.5))
        - wedge(alpha_eta, Op) * (power(s, -4.0 / 3.0) * power(H, -0.5))
    )
    c3 = (
        wedge(deta, Op) * power(H, 1.5)
        + wedge(exterior_derivative(power(H, 2.0) * power(s, 4.0 / 3.0), axes=P), wedge(om, om)) * 0.5
        - wedge(dxi, Om) * (power(s, 4.0 / 3.0) * power(H, 0.5))
    )
    # the same two equations before the SU(3) decomposition
    dlnH = exterior_derivative(log(H), axes=P)
    q1 = exterior_derivative(Op) + wedge(dlnH, Op) * 1.5 + wedge(dxi, om) * power(H, -1.5)
    q2 = (
        exterior_derivative(Om)
        + wedge(dc(log(s), su3.J) * (4.0 / 3.0) + dc(log(H), su3.J) * 0.5, Op)
        + wedge(deta, om) * (power(s, -4.0 / 3.0) * power(H, -0.5))
    )
    pts, _ = as_points(data.chart, points)
    res = {
        "d_omega": exterior_derivative(om).max_abs(pts),
        "condition_1": q1.max_abs(pts),
        "condition_2": q2.max_abs(pts),
        "d_omega_plus_equation": r1.max_abs(pts),
        "d_omega_minus_equation": r2.max_abs(pts),
        "condition_3": c3.max_abs(pts),
    }
    # norms of the Lambda^2_8 pieces: (d xi)_8 ^ omega = d xi ^ omega - alpha_xi ^ Omega+
    p2 = (wedge(dxi, om) - wedge(alpha_xi, Op)) * power(H, -1.5)
    s2 = (wedge(deta, om) - wedge(alpha_eta, Op)) * (power(s, -4.0 / 3.0) * power(H, -0.5))
    return TorsionReport(
        pi1=pi1,
        pi2_norm=p2.pointwise_max_abs(pts),
        sigma2_norm=s2.pointwise_max_abs(pts),
        alpha_eta=alpha_eta,
        alpha_xi=alpha_xi,
        residuals=res,
    )


def g2_torsion_tau(data: ReductionData, points, g2: G2Structure = None, via_star: bool = True):
    """Torsion 2-form tau of the intermediate G2 structure, with the residual of d *phi = tau ^ phi.

    ``via_star`` builds the horizontal part as *_omega((1/3) H^{1/2} s^{-1} d^c s ^ Omega+);
    otherwise it uses -(1/3) s^{-4/3} d eta, which agrees when the curvature of eta is prescribed.
    """
    su3 = data.su3
    s, H = data.s, data.H
    if g2 is None:
        g2 = assemble_g2(su3, H, data.xi, data.xi_axis, check_points=points)
    dcs = dc(s, su3.J)
    if via_star:
        horizontal = hodge_star(wedge(dcs, su3.omega_plus), su3.metric) * (power(H, 0.5) * power(s, -1.0) * (1.0 / 3.0))
    else:
        horizontal = exterior_derivative(data.eta) * (power(s, -4.0 / 3.0) * (-1.0 / 3.0))
    tau = horizontal - wedge(data.xi, dcs) * (power(H, -1.0) * power(s, -1.0) * (2.0 / 3.0))
    residual = exterior_derivative(g2.star_phi) - wedge(tau, g2.phi)
    return tau, residual.pointwise_max_abs(points)


def spin7_prescription_check(data: ReductionData, points) -> Dict[str, float]:
    """Curvatures of xi, eta against -*(1/2 d H^{3/2} ^ Omega+) and -*(1/2 d^c H^{3/2} ^ Omega+), and d(H^{3/4} Omega+)."""
    su3 = data.su3
    H = data.H
    H32 = power(H, 1.5)
    gw = su3.metric
    dxi_target = hodge_star(wedge(exterior_derivative(H32, axes=su3.axes), su3.omega_plus), gw) * -0.5
    deta_target = hodge_star(wedge(dc(H32, su3.J), su3.omega_plus), gw) * -0.5
    pts, _ = as_points(data.chart, points)
    return {
        "d_xi": (exterior_derivative(data.xi) - dxi_target).max_abs(pts),
        "d_eta": (exterior_derivative(data.eta) - deta_target).max_abs(pts),
        "d_H34_Omega_plus": exterior_derivative(su3.omega_plus * power(H, 0.75)).max_abs(pts),
        "s_minus_H34": float(np.max(np.abs(_values(data.s - power(H, 0.75), pts)))),
    }


def g2_prescription_check(su3: SU3Structure, H: ScalarField, xi: DifferentialForm, points) -> Dict[str, float]:
    """d(H^{1/2} Omega+) = 0 and d xi = -*(2/3 d(H^{3/2}) ^ Omega+)."""
    target = hodge_star(wedge(exterior_derivative(power(H, 1.5), axes=su3.axes), su3.omega_plus), su3.metric) * (-2.0 / 3.0)
    return {
        "d_H12_Omega_plus": exterior_derivative(su3.omega_plus * power(H, 0.5)).max_abs(points),
        "d_xi": (exterior_derivative(xi) - target).max_abs(points),
    }


def nijenhuis_residual(J: ComplexStructure, points=None):
    """Pointwise Frobenius norm of the Nijenhuis tensor.

    With ``points`` the values are returned directly; otherwise a field
    (order 0 only) is returned.
    """
    if points is not None:
        N = nijenhuis_tensor_values(J, points)
        return np.sqrt(np.sum(N * N, axis=(1, 2, 3)))
    return _NijenhuisNorm(J)


class _NijenhuisNorm(ScalarField):
    __slots__ = ("J",)

    def __init__(self, J: ComplexStructure):
        super().__init__(J.chart)
        self.J = J

    def _compute(self, ctx, order):
        from .fields import Jet2, OrderError

        if order > 0:
            raise OrderError("the Nijenhuis norm is available as a value only")
        M = self.J.tjet(ctx, 1)
        Jv = M.value
        dJ = M.grad[..., list(self.J.axes)]
        t1 = np.einsum("nli,nkjl->nkij", Jv, dJ)
        t2 = np.einsum("nlj,nkil->nkij", Jv, dJ)
        t3 = np.einsum("nkl,nlji->nkij", Jv, dJ)
        t4 = np.einsum("nkl,nlij->nkij", Jv, dJ)
        N = t1 - t2 - t3 + t4
        return Jet2(np.sqrt(np.sum(N * N, axis=(1, 2, 3))))
