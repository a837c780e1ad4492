"""Explicit torsion-free examples, each assembled on its own chart.

Every entry returns a :class:`StructureBundle`.  Spin(7) entries are built
through the same route: an SU(3) structure on a 6-dimensional quotient, a
function H, the moment coordinate s and two connection 1-forms are fed to
:func:`assemble_spin7`.  Entries that come from a four-dimensional
hyperkaehler base also carry a :class:`ReductionIData`, and the entries over
a Riemann surface carry a :class:`ReductionIIData`, so the reduction PDEs can
be re-checked independently of the assembly.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .exterior import (
    ComplexForm,
    ComplexStructure,
    DifferentialForm,
    MetricField,
    exterior_derivative,
    hodge_star,
    metric_from_kahler,
    poincare_primitive,
    wedge,
)
from .fields import Chart, Constant, ScalarField, as_points, atan, cos, exp, log, power, sin, sqrt
from .specialfns import (
    PCF_DOMAIN,
    airy_ai_field,
    airy_ai_prime_field,
    domain_threshold_u_less_one,
    pcf_v_dot_field,
    pcf_v_field,
)
from .structures import (
    G2Structure,
    ReductionData,
    SU3Structure,
    SU4Structure,
    Spin7Structure,
    assemble_g2,
    assemble_spin7,
    assemble_su4_cy,
    full_tensor,
    model_spin7_form,
    top_coefficient,
)

INF = math.inf
SCHEMA_VERSION = 1


class CatalogError(KeyError):
    """Unknown entry name."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class ParameterError(ValueError):
    """Parameters outside an entry's validity region."""


class PreconditionError(ValueError):
    """Input data that violates a construction's hypotheses (e.g. non-harmonic V)."""


# ---------------------------------------------------------------------------
# containers


@dataclass(frozen=True)
class HyperkahlerData:
    """A hyperkaehler triple on four axes of a chart, with a (1,0) coframe for J1.

    ``coframe`` is a pair of (a, b) with theta = a + i b and
    omega2 + i omega3 = theta_1 ^ theta_2.
    """

    chart: Chart
    axes: Tuple[int, ...]
    omega1: DifferentialForm
    omega2: DifferentialForm
    omega3: DifferentialForm
    metric: MetricField
    coframe: Tuple[Tuple[DifferentialForm, DifferentialForm], ...]
    omega0: Optional[DifferentialForm] = None

    def volume(self) -> DifferentialForm:
        return wedge(self.omega1, self.omega1) * 0.5

    def invariant_residuals(self, points) -> Dict[str, float]:
        pts, _ = as_points(self.chart, points)
        ax = self.axes
        vol = top_coefficient(self.volume(), ax, pts)
        scale = np.maximum(1.0, np.abs(vol))

        def top(a, b, c=1.0):
            return top_coefficient(wedge(a, b) * c, ax, pts)

        ws = [self.omega1, self.omega2, self.omega3]
        out = {}
        for i in range(3):
            out[f"half_w{i + 1}^2-vol"] = float(np.max(np.abs(top(ws[i], ws[i], 0.5) - vol) / scale))
            for j in range(i + 1, 3):
                out[f"w{i + 1}^w{j + 1}"] = float(np.max(np.abs(top(ws[i], ws[j])) / scale))
        if self.omega0 is not None:
            out["half_w0^2+vol"] = float(np.max(np.abs(top(self.omega0, self.omega0, 0.5) + vol) / scale))
            out["w0^w1"] = float(np.max(np.abs(top(self.omega0, self.omega1)) / scale))
        out["min_abs_vol"] = float(np.min(np.abs(vol)))
        return out

    def closure_residuals(self, points) -> Dict[str, float]:
        out = {f"d_w{i + 1}": exterior_derivative(w).max_abs(points) for i, w in enumerate([self.omega1, self.omega2, self.omega3])}
        if self.omega0 is not None:
            out["d_w0"] = exterior_derivative(self.omega0).max_abs(points)
        return out

    def J1(self) -> ComplexStructure:
        return ComplexStructure.from_coframe(list(self.coframe), axes=self.axes)


@dataclass(frozen=True)
class ReductionIData:
    """Data of the reduction over a hyperkaehler 4-manifold M with moment coordinate s.

    omega1_tilde depends on s; u is a function of s and M; alpha, xi, eta are
    the three connection 1-forms; ``G`` optionally records a potential with
    u = A^2 d^2G/ds^2 up to d_M d^c_M-closed terms.
    """

    chart: Chart
    hk: HyperkahlerData
    s_axis: int
    omega1_tilde: DifferentialForm
    u: ScalarField
    A: float
    c: float
    alpha: DifferentialForm
    xi: DifferentialForm
    eta: DifferentialForm
    G: Optional[ScalarField] = None
    class_coefficients: Optional[Tuple[float, float, float, float]] = None

    @property
    def s(self) -> ScalarField:
        return self.chart.coord(self.s_axis)


@dataclass(frozen=True)
class ReductionIIData:
    """Data of the reduction over a Riemann surface with coordinates (x1, x2) and parameters (s, y)."""

    chart: Chart
    sigma_axes: Tuple[int, int]
    s_axis: int
    y_axis: int
    omega_tilde: DifferentialForm
    upsilon1: DifferentialForm
    upsilon2: DifferentialForm
    u: ScalarField
    w: ScalarField
    alpha: DifferentialForm
    kappa: DifferentialForm
    xi: DifferentialForm
    eta: DifferentialForm

    def J_sigma(self) -> ComplexStructure:
        """The complex structure on the surface, with Upsilon1 - i Upsilon2 of type (1,0)."""
        return ComplexStructure.from_coframe([(self.upsilon1, -self.upsilon2)], axes=self.sigma_axes)


Structure = Union[Spin7Structure, G2Structure, SU3Structure, SU4Structure]


@dataclass(frozen=True)
class StructureBundle:
    name: str
    kind: str
    chart: Chart
    structure: Structure
    params: Dict[str, float]
    connection_potentials: Dict[str, DifferentialForm]
    provenance: str
    expected_holonomy_rank: Union[int, str]
    sample_box: Tuple[Tuple[float, float], ...]
    validity: str = ""
    valid_mask: Optional[Callable[[np.ndarray], np.ndarray]] = None
    reduction: Optional[ReductionData] = None
    reduction_I: Optional[ReductionIData] = None
    reduction_II: Optional[ReductionIIData] = None
    printed_metric: Optional[MetricField] = None
    normal_axis: Optional[int] = None
    extras: Dict[str, object] = field(default_factory=dict)
    metadata: Dict[str, object] = field(default_factory=dict)

    @property
    def metric(self) -> MetricField:
        return self.structure.metric

    def sample_points(self, rng: np.random.Generator, n: int, max_rounds: int = 50) -> np.ndarray:
        """n uniform points of the sample box that satisfy the entry's validity predicate."""
        out = []
        have = 0
        for _ in range(max_rounds):
            pts = self.chart.sample(rng, max(n, 16), box=self.sample_box)
            if self.valid_mask is not None:
                pts = pts[self.valid_mask(pts)]
            out.append(pts)
            have += pts.shape[0]
            if have >= n:
                break
        pts = np.concatenate(out, axis=0)
        if pts.shape[0] < n:
            raise ParameterError(f"{self.name}: sample box contains too few valid points ({self.validity})")
        return pts[:n]

    def to_descriptor(self) -> Dict[str, object]:
        return {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "kind": self.kind,
            "params": {k: float(v) for k, v in self.params.items()},
            "coordinates": list(self.chart.coord_names),
            "domain_box": [[float(a), float(b)] for a, b in self.sample_box],
            "validity": self.validity,
            "expected_holonomy_rank": self.expected_holonomy_rank,
            "provenance": self.provenance,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_descriptor(), sort_keys=True)


# ---------------------------------------------------------------------------
# small helpers


def _forms(chart: Chart):
    def d(i):
        return DifferentialForm(chart, 1, {(chart.index(i),): Constant(chart, 1.0)})

    return d


def _center(box) -> np.ndarray:
    return np.array([0.5 * (a + b) for a, b in box], dtype=float)


def _check_points(chart: Chart, box, valid_mask=None, n: int = 4, seed: int = 12345) -> np.ndarray:
    rng = np.random.default_rng(seed)
    pts = chart.sample(rng, 8 * n, box=box)
    if valid_mask is not None:
        pts = pts[valid_mask(pts)]
    return pts[:n]


def _params(defaults: Mapping[str, float], given: Optional[Mapping[str, float]], name: str) -> Dict[str, float]:
    given = dict(given or {})
    unknown = set(given) - set(defaults)
    if unknown:
        raise ParameterError(f"{name}: unknown parameter(s) {sorted(unknown)}; accepted: {sorted(defaults)}")
    out = dict(defaults)
    for k, v in given.items():
        try:
            out[k] = float(v)
        except (TypeError, ValueError):
            raise ParameterError(f"{name}: parameter {k} must be a real number, got {v!r}") from None
        if not math.isfinite(out[k]):
            raise ParameterError(f"{name}: parameter {k} must be finite")
    return out


def _interval(p: Dict[str, float], lo_key: str, hi_key: str, name: str, floor: float = 0.0) -> Tuple[float, float]:
    lo, hi = p[lo_key], p[hi_key]
    if not floor < lo < hi:
        raise ParameterError(f"{name}: need {floor} < {lo_key} < {hi_key}, got [{lo}, {hi}]")
    return lo, hi


def invariant_gram(bundle: StructureBundle, coframe: Sequence[DifferentialForm], points) -> np.ndarray:
    """Metric coefficients in the basis dual to ``coframe``: C^{-T} g C^{-1}."""
    g = bundle.metric
    pts, _ = as_points(bundle.chart, points)
    G = g.matrix(pts)
    ax = list(g.axes)
    C = np.zeros((pts.shape[0], len(coframe), len(ax)))
    for r, th in enumerate(coframe):
        vals = th.values(pts)
        for (k,), v in vals.items():
            C[:, r, ax.index(k)] = v
    Ci = np.linalg.inv(C)
    return np.einsum("nia,nij,njb->nab", Ci, G, Ci)


# ---------------------------------------------------------------------------
# hyperkaehler bases


def flat_hyperkahler(chart: Chart, axes: Sequence[int], sign2: float = 1.0, sign3: float = 1.0) -> HyperkahlerData:
    """omega1 = dx12 + dx34, omega2 + i omega3 = (sign) (dx1 + i dx2) ^ (dx3 + i dx4), omega0 = dx12 - dx34.

    ``sign2 = sign3 = -1`` flips omega2 and omega3 together, which keeps
    omega2 + i omega3 of type (2,0).
    """
    a1, a2, a3, a4 = (chart.index(a) for a in axes)
    d = _forms(chart)
    e1, e2, e3, e4 = d(a1), d(a2), d(a3), d(a4)
    if sign2 != sign3:
        raise ValueError("omega2 and omega3 must flip together")
    w1 = wedge(e1, e2) + wedge(e3, e4)
    w2 = (wedge(e1, e3) - wedge(e2, e4)) * sign2
    w3 = (wedge(e1, e4) + wedge(e2, e3)) * sign3
    w0 = wedge(e1, e2) - wedge(e3, e4)
    ax = tuple(sorted((a1, a2, a3, a4)))
    first = (e1 * sign2, e2 * sign2)
    return HyperkahlerData(chart, ax, w1, w2, w3, MetricField.identity(chart, axes=ax), (first, (e3, e4)), omega0=w0)


def _star3(V: ScalarField, base: Sequence[int]) -> DifferentialForm:
    """Euclidean *dV on three axes (x, y, z) in that order."""
    chart = V.chart
    x, y, z = base
    d = _forms(chart)
    return (
        wedge(d(y), d(z)) * V.diff(x)
        + wedge(d(z), d(x)) * V.diff(y)
        + wedge(d(x), d(y)) * V.diff(z)
    )


def gibbons_hawking_triple(
    V: ScalarField,
    theta_potential: DifferentialForm,
    base_axes: Sequence[int] = (0, 1, 2),
    fibre_axis: int = 3,
    check_points=None,
    tol: float = 1e-9,
    with_omega0: bool = False,
) -> HyperkahlerData:
    """The hyperkaehler triple of a positive harmonic V and a connection theta with d theta = -*dV.

    ``theta_potential`` is the full connection 1-form (fibre differential
    included).  With ``check_points`` the hypotheses are verified there.
    ``with_omega0`` adds theta ^ dx - V dy ^ dz, meaningful when V does not
    depend on x.
    """
    chart = V.chart
    x, y, z = (chart.index(a) for a in base_axes)
    w = chart.index(fibre_axis)
    d = _forms(chart)
    dxf, dyf, dzf = d(x), d(y), d(z)
    th = theta_potential
    if check_points is not None:
        pts, _ = as_points(chart, check_points)
        vals = V(pts)
        if np.any(vals <= 0):
            raise PreconditionError(f"V must be positive; min V = {float(np.min(vals)):.3e}")
        lap = V.diff(x).diff(x) + V.diff(y).diff(y) + V.diff(z).diff(z)
        r = float(np.max(np.abs(lap(pts))))
        if not r < 1e-10:
            raise PreconditionError(f"V is not harmonic: max |Laplacian V| = {r:.3e}")
        rc = (exterior_derivative(th) + _star3(V, (x, y, z))).max_abs(pts)
        if not rc < tol:
            raise PreconditionError(f"connection fails d theta = -*dV: residual {rc:.3e}")
    w1 = wedge(th, dxf) + wedge(dyf, dzf) * V
    w2 = wedge(th, dyf) + wedge(dzf, dxf) * V
    w3 = wedge(th, dzf) + wedge(dxf, dyf) * V
    w0 = (wedge(th, dxf) - wedge(dyf, dzf) * V) if with_omega0 else None
    ax = tuple(sorted((x, y, z, w)))
    # half omega1^2 = V theta ^ dx ^ dy ^ dz, negative in the (x, y, z, w) coordinate order
    g = MetricField.from_squares(chart, [(1.0 / V, th), (V, dxf), (V, dyf), (V, dzf)], axes=ax, orientation=-1)
    coframe = ((th, dxf * V), (dyf, dzf))
    return HyperkahlerData(chart, ax, w1, w2, w3, g, coframe, omega0=w0)


def monopole_connection(chart: Chart, mass: float, base_axes=(0, 1, 2), fibre_axis: int = 3) -> DifferentialForm:
    """theta = dw - (m z / 2r) (x dy - y dx)/(x^2 + y^2), valid off the z-axis, for V = v0 + m/(2r)."""
    x, y, z = (chart.coord(a) for a in base_axes)
    d = _forms(chart)
    r = sqrt(x * x + y * y + z * z)
    rho2 = x * x + y * y
    k = z / r / rho2 * (-0.5 * mass)
    return d(fibre_axis) + (d(base_axes[1]) * x - d(base_axes[0]) * y) * k


# ---------------------------------------------------------------------------
# generic assembly for the two reductions


def _spin7_from_reduction_I(
    chart: Chart,
    hk: HyperkahlerData,
    omega1_tilde: DifferentialForm,
    u: ScalarField,
    A: float,
    c: float,
    s_axis: int,
    alpha: DifferentialForm,
    alpha_axis: int,
    xi: DifferentialForm,
    xi_axis: int,
    eta: DifferentialForm,
    eta_axis: int,
    check_points: np.ndarray,
    G: Optional[ScalarField] = None,
    class_coefficients=None,
):
    s = chart.coord(s_axis)
    d = _forms(chart)
    ds = d(s_axis)
    H = power(s, 1.0 / 3.0) * (s + c) * (1.0 / A)
    theta = (alpha, ds * (u * (-1.0 / A)))
    omega = omega1_tilde + wedge(ds, alpha) * (1.0 / A)
    Omega = ComplexForm(hk.omega2, hk.omega3).wedge(ComplexForm(*theta)) * (power(H, -0.5) * power(s, -1.0 / 3.0))
    axes = tuple(sorted(set(hk.axes) | {alpha_axis, s_axis}))
    su3 = SU3Structure.from_coframe(omega, list(hk.coframe) + [theta], axes=axes, reference_point=check_points[0], Omega=Omega)
    data = ReductionData(chart, s, H, eta, xi, su3, eta_axis, xi_axis)
    st = assemble_spin7(data, check_points=check_points)
    red = ReductionIData(chart, hk, s_axis, omega1_tilde, u, A, c, alpha, xi, eta, G, class_coefficients)
    return st, data, red


def _spin7_from_reduction_II(
    chart: Chart,
    F: ScalarField,
    u: ScalarField,
    w: ScalarField,
    alpha: DifferentialForm,
    kappa: DifferentialForm,
    xi: DifferentialForm,
    eta: DifferentialForm,
    check_points: np.ndarray,
):
    """Chart layout (x1, x2, x3[alpha], x4[kappa], x5[xi], x6[eta], s, y)."""
    d = _forms(chart)
    s, y = chart.coord(6), chart.coord(7)
    ds, dy = d(6), d(7)
    omega_t = wedge(d(0), d(1)) * F
    omega = omega_t - wedge(alpha, dy) + wedge(kappa, ds)
    coframe = [(alpha, dy * (-1.0 * u)), (kappa, ds * w), (d(0), d(1))]
    su3 = SU3Structure.from_coframe(
        omega, coframe, scale=power(s * y, -0.5), axes=(0, 1, 2, 3, 6, 7), reference_point=check_points[0]
    )
    H = y * power(s, 1.0 / 3.0)
    data = ReductionData(chart, s, H, eta, xi, su3, 5, 4)
    st = assemble_spin7(data, check_points=check_points)
    red = ReductionIIData(chart, (0, 1), 6, 7, omega_t, d(0), -d(1), u, w, alpha, kappa, xi, eta)
    ys = y * s
    printed = MetricField.from_squares(
        chart,
        [
            (power(s, -2.0), eta),
            (power(y, -2.0), xi),
            (ys / u, alpha),
            (ys * u, dy),
            (ys / w, kappa),
            (ys * w, ds),
            (ys * F, d(0)),
            (ys * F, d(1)),
        ],
    )
    return st, data, red, printed


def _reduction_I_printed(chart, s_axis, u, A, c, alpha, xi, eta, g_omega1_tilde: MetricField) -> MetricField:
    """s^{-2} eta^2 + A^2 (s+c)^{-2} xi^2 + s(s+c)/(A u) alpha^2 + s(s+c) u / A^3 ds^2 + s(s+c)/A g_{omega1~}."""
    s = chart.coord(s_axis)
    ds = _forms(chart)(s_axis)
    k = s * (s + c)
    fib = MetricField.from_squares(
        chart,
        [
            (power(s, -2.0), eta),
            (power(s + c, -2.0) * (A * A), xi),
            (k / u * (1.0 / A), alpha),
            (k * u * (A ** -3.0), ds),
        ],
    )
    return fib + g_omega1_tilde.scaled(k * (1.0 / A))


# ---------------------------------------------------------------------------
# GLPS family on (T^4 x S^1) x R_t


def _glps_chart(extra: Sequence[str], t_name: str = "t") -> Chart:
    names = ("x1", "x2", "x3", "x4", "x5", t_name) + tuple(extra)
    box = [(-INF, INF)] * 5 + [(0.0, INF)] + [(-INF, INF)] * len(extra)
    return Chart(names, domain_box=box)


def _glps_frame(chart: Chart, kind: str = "glps"):
    """e1..e5 with de5 = e13 + e42 (glps) or de5 = e24 (nil24); sigma_1, sigma_2, sigma_3."""
    d = _forms(chart)
    x1, x2, x3, x4 = (chart.coord(i) for i in range(4))
    e1, e2, e3, e4 = d(0), d(1), d(2), d(3)
    if kind == "glps":
        e5 = d(4) - e1 * x3 - e4 * x2
    else:
        e5 = d(4) + e4 * x2
    s1 = wedge(e1, e2) + wedge(e3, e4)
    s2 = wedge(e1, e3) + wedge(e4, e2)
    s3 = wedge(e1, e4) + wedge(e2, e3)
    return (e1, e2, e3, e4, e5), (s1, s2, s3)


_GLPS_BOX = [(-1.0, 1.0)] * 5 + [(0.5, 2.0)]


def _glps_su3(chart: Chart, p3_scale: float, p3_exp_e5: float, p3_exp_dt: float, ref):
    """GLPS Kaehler form d(t e5) with Omega = t (sigma3 + i sigma1) ^ (-t^a e5 + i t^b dt)."""
    (e1, e2, e3, e4, e5), _ = _glps_frame(chart)
    t = chart.coord(5)
    dt = _forms(chart)(5)
    omega = exterior_derivative(e5 * t)
    cof = [(e1, e3), (e4, e2), (e5 * power(t, p3_exp_e5) * -1.0, dt * power(t, p3_exp_dt))]
    return SU3Structure.from_coframe(omega, cof, scale=t, axes=(0, 1, 2, 3, 4, 5), reference_point=ref)


def build_glps_spin7(params=None) -> StructureBundle:
    p = _params({"t_min": 0.5, "t_max": 2.0}, params, "glps_spin7")
    lo, hi = _interval(p, "t_min", "t_max", "glps_spin7")
    chart = _glps_chart(("x6", "x7"))
    box = tuple(_GLPS_BOX[:5] + [(lo, hi), (-1.0, 1.0), (-1.0, 1.0)])
    pts = _check_points(chart, box)
    su3 = _glps_su3(chart, 1.0, -2.0, 2.0, pts[0])
    d = _forms(chart)
    x1, x2, x3 = chart.coord(0), chart.coord(1), chart.coord(2)
    xi = d(6) + d(3) * x1 + d(2) * x2
    eta = d(7) + d(1) * x1 + d(3) * x3
    t = chart.coord(5)
    H = power(t, 4.0 / 3.0)
    data = ReductionData(chart, t, H, eta, xi, su3, 7, 6)
    st = assemble_spin7(data, check_points=pts)
    (e1, e2, e3, e4, e5), (s1, s2, s3) = _glps_frame(chart)
    # orthonormal coframe of the level sets together with the geodesic coordinate (4 tau = t^4)
    printed = MetricField.from_squares(
        chart,
        [(power(t, 3.0), e) for e in (e1, e2, e3, e4)]
        + [(power(t, -2.0), eta), (power(t, -2.0), xi), (power(t, -2.0), e5), (power(t, 6.0), d(5))],
    )
    return StructureBundle(
        "glps_spin7",
        "spin7",
        chart,
        st,
        p,
        {"e5": e5, "xi": xi, "eta": eta},
        "§6",
        21,
        box,
        validity="t > 0",
        reduction=data,
        printed_metric=printed,
        normal_axis=5,
        extras={
            "sigma": (s1, s2, s3),
            "frame": (e1, e2, e3, e4, e5),
            "invariant_coframe": (e1, e3, e4, e2, e5, d(5), xi, eta),
        },
        metadata={
            "curvatures": "d xi = sigma3, d eta = sigma1",
            "identification_with_constant_I": "t = s, e5 = alpha, (e1, e3, e4, e2) = (dx1, dx2, dx3, dx4)",
            "printed_metric_source": "orthonormal coframe of the t-slices plus (t^3 dt)^2",
        },
    )


def build_glps_g2(params=None) -> StructureBundle:
    p = _params({"t_min": 0.5, "t_max": 2.0}, params, "glps_g2")
    lo, hi = _interval(p, "t_min", "t_max", "glps_g2")
    chart = _glps_chart(("x6",))
    box = tuple(_GLPS_BOX[:5] + [(lo, hi), (-1.0, 1.0)])
    pts = _check_points(chart, box)
    su3 = _glps_su3(chart, 1.0, -1.5, 1.5, pts[0])
    d = _forms(chart)
    x1, x2 = chart.coord(0), chart.coord(1)
    xi = d(6) + d(3) * x1 + d(2) * x2
    H = chart.coord(5)
    st = assemble_g2(su3, H, xi, 6, check_points=pts)
    data = ReductionData(chart, Constant(chart, 1.0), H, None, xi, su3, None, 6)
    return StructureBundle(
        "glps_g2", "g2", chart, st, p, {"xi": xi}, "§6", 14, box, validity="t > 0",
        reduction=data, extras={"su3": su3, "H": H}, metadata={"curvatures": "d xi = sigma3"},
    )


def build_glps_cy(params=None) -> StructureBundle:
    p = _params({"t_min": 0.5, "t_max": 2.0}, params, "glps_cy")
    lo, hi = _interval(p, "t_min", "t_max", "glps_cy")
    chart = _glps_chart(())
    box = tuple(_GLPS_BOX[:5] + [(lo, hi)])
    pts = _check_points(chart, box)
    su3 = _glps_su3(chart, 1.0, -1.0, 1.0, pts[0])
    (e1, e2, e3, e4, e5), _ = _glps_frame(chart)
    return StructureBundle(
        "glps_cy", "su3", chart, su3, p, {"e5": e5}, "§6", "unknown", box, validity="t > 0",
        metadata={"note": "closed omega and Omega; holonomy in SU(3)"},
    )


def build_glps_su4(params=None) -> StructureBundle:
    p = _params({"t_min": 0.5, "t_max": 2.0, "s_min": 0.5, "s_max": 2.0}, params, "glps_su4")
    tlo, thi = _interval(p, "t_min", "t_max", "glps_su4")
    slo, shi = _interval(p, "s_min", "s_max", "glps_su4")
    names = ("x1", "x2", "x3", "x4", "x5", "t", "xh", "s")
    chart = Chart(names, domain_box=[(-INF, INF)] * 5 + [(0.0, INF), (-INF, INF), (0.0, INF)])
    box = tuple(_GLPS_BOX[:5] + [(tlo, thi), (-1.0, 1.0), (slo, shi)])
    pts = _check_points(chart, box)
    su3 = _glps_su3(chart, 1.0, -1.0, 1.0, pts[0])
    (e1, e2, e3, e4, e5), _ = _glps_frame(chart)
    d = _forms(chart)
    t, s = chart.coord(5), chart.coord(7)
    eta_hat = d(6) - e5 * t
    st = assemble_su4_cy(su3, s, eta_hat, 6, 7, check_points=pts)
    s23 = power(s, 2.0 / 3.0)
    printed = MetricField.from_squares(
        chart,
        [(s23 * t * t, d(5)), (s23 * power(t, -2.0), e5)]
        + [(s23 * t, e) for e in (e1, e2, e3, e4)]
        + [(power(s, -2.0), eta_hat), (power(s, 4.0 / 3.0) * (4.0 / 9.0), d(7))],
    )
    return StructureBundle(
        "glps_su4", "su4", chart, st, p, {"e5": e5, "eta_hat": eta_hat}, "§6", "<=15", box,
        validity="t > 0, s > 0", printed_metric=printed, extras={"su3": su3},
        metadata={"printed_metric_note": "the (2/3 s^{2/3} ds)^2 term is compared as printed"},
    )


# ---------------------------------------------------------------------------
# nilmanifold (0,0,0,0,24)


def _nil24_su3(chart: Chart, a: float, b: float, ref):
    """omega = e13 - d(t^2 e5); Omega = t(-sigma1 + i sigma3) ^ (-2 t^a dt + i t^b e5)."""
    (e1, e2, e3, e4, e5), sig = _glps_frame(chart, "nil24")
    t = chart.coord(5)
    dt = _forms(chart)(5)
    omega = wedge(e1, e3) - exterior_derivative(e5 * (t * t))
    cof = [(e1, e3), (-e2, e4), (dt * power(t, a) * -2.0, e5 * power(t, b))]
    return SU3Structure.from_coframe(omega, cof, scale=t, axes=(0, 1, 2, 3, 4, 5), reference_point=ref), sig


def build_nil24_spin7(params=None) -> StructureBundle:
    p = _params({"t_min": 0.5, "t_max": 2.0}, params, "nil24_spin7")
    lo, hi = _interval(p, "t_min", "t_max", "nil24_spin7")
    chart = _glps_chart(("x6", "x7"))
    box = tuple(_GLPS_BOX[:5] + [(lo, hi), (-1.0, 1.0), (-1.0, 1.0)])
    pts = _check_points(chart, box)
    su3, sig = _nil24_su3(chart, 4.0, -3.0, pts[0])
    d = _forms(chart)
    x1, x2, x3 = chart.coord(0), chart.coord(1), chart.coord(2)
    xi = d(6) - d(3) * x1 - d(2) * x2
    eta = d(7) - d(1) * x1 - d(3) * x3
    t = chart.coord(5)
    data = ReductionData(chart, t * t, power(t, 8.0 / 3.0), eta, xi, su3, 7, 6)
    st = assemble_spin7(data, check_points=pts)
    (e1, e2, e3, e4, e5), _ = _glps_frame(chart, "nil24")
    printed = MetricField.from_squares(
        chart,
        [
            (power(t, 4.0), e1),
            (power(t, 6.0), e2),
            (power(t, 4.0), e3),
            (power(t, 6.0), e4),
            (power(t, -2.0), e5),
            (power(t, -4.0), eta),
            (power(t, -4.0), xi),
            (power(t, 12.0) * 4.0, d(5)),
        ],
    )
    return StructureBundle(
        "nil24_spin7", "spin7", chart, st, p, {"e5": e5, "xi": xi, "eta": eta}, "§7", 21, box,
        validity="t > 0", reduction=data, printed_metric=printed,
        extras={"sigma": sig}, metadata={"curvatures": "d xi = -sigma3, d eta = -sigma1", "s": "t^2"},
    )


def build_nil24_g2(params=None) -> StructureBundle:
    p = _params({"t_min": 0.5, "t_max": 2.0}, params, "nil24_g2")
    lo, hi = _interval(p, "t_min", "t_max", "nil24_g2")
    chart = _glps_chart(("x6",))
    box = tuple(_GLPS_BOX[:5] + [(lo, hi), (-1.0, 1.0)])
    pts = _check_points(chart, box)
    su3, sig = _nil24_su3(chart, 3.0, -2.0, pts[0])
    d = _forms(chart)
    x1, x2 = chart.coord(0), chart.coord(1)
    xi = d(6) - d(3) * x1 - d(2) * x2
    t = chart.coord(5)
    H = t * t
    st = assemble_g2(su3, H, xi, 6, check_points=pts)
    data = ReductionData(chart, Constant(chart, 1.0), H, None, xi, su3, None, 6)
    return StructureBundle(
        "nil24_g2", "g2", chart, st, p, {"xi": xi}, "§7", 14, box, validity="t > 0",
        reduction=data, extras={"su3": su3, "H": H, "sigma": sig}, metadata={"curvatures": "d xi = -sigma3"},
    )


# ---------------------------------------------------------------------------
# constant solutions over flat T^4


def _flat_reduction_chart() -> Chart:
    names = ("x1", "x2", "x3", "x4", "x5", "s", "x6", "x7")
    return Chart(names, domain_box=[(-INF, INF)] * 5 + [(0.0, INF)] + [(-INF, INF)] * 2)


def build_constant_I(params=None) -> StructureBundle:
    p = _params(
        {"A": 1.0, "c": 0.0, "a": 0.0, "b": 0.0, "p": 0.0, "q": 1.0, "s_min": 0.5, "s_max": 2.0},
        params,
        "constant_I",
    )
    lo, hi = _interval(p, "s_min", "s_max", "constant_I")
    A, c, a, b, pp, q = (p[k] for k in ("A", "c", "a", "b", "p", "q"))
    if A == 0:
        raise ParameterError("constant_I: A must be nonzero (A = 0 is the G2 truncation)")
    for s0 in (lo, hi):
        # p + q s - |a + b s| is concave, so the endpoints decide
        if not pp + q * s0 > abs(a + b * s0):
            raise ParameterError(f"constant_I: p + q s > |a + b s| fails at s = {s0} on [{lo}, {hi}]")
        if not (s0 + c) / A > 0:
            raise ParameterError(f"constant_I: (s + c)/A > 0 fails at s = {s0}")
    chart = _flat_reduction_chart()
    box = tuple([(-1.0, 1.0)] * 5 + [(lo, hi), (-1.0, 1.0), (-1.0, 1.0)])
    pts = _check_points(chart, box)
    hk = flat_hyperkahler(chart, (0, 1, 2, 3))
    s = chart.coord(5)
    la, lq = s * b + a, s * q + pp
    om1t = hk.omega0 * la + hk.omega1 * lq
    u = s * (s + c) * (lq * lq - la * la) * (1.0 / A)
    d = _forms(chart)
    x1, x2, x3 = chart.coord(0), chart.coord(1), chart.coord(2)
    alpha = d(4) + d(1) * x1 * (A * (b + q)) + d(3) * x3 * (A * (q - b))
    xi = d(6) - d(2) * x1 + d(3) * x2
    eta = d(7) - (d(3) * x1 + d(2) * x2) * A
    st, data, red = _spin7_from_reduction_I(
        chart, hk, om1t, u, A, c, 5, alpha, 4, xi, 6, eta, 7, pts, class_coefficients=(a, b, pp, q)
    )
    g_om1t = MetricField.from_squares(chart, [(la + lq, d(0)), (la + lq, d(1)), (lq - la, d(2)), (lq - la, d(3))], axes=(0, 1, 2, 3))
    printed = _reduction_I_printed(chart, 5, u, A, c, alpha, xi, eta, g_om1t)
    return StructureBundle(
        "constant_I", "spin7", chart, st, p, {"alpha": alpha, "xi": xi, "eta": eta}, "§5", "unknown", box,
        validity="p + q s > |a + b s| and (s + c)/A > 0 on the s-range",
        reduction=data, reduction_I=red, printed_metric=printed, normal_axis=5,
        extras={"invariant_coframe": (d(0), d(1), d(2), d(3), alpha, d(5), xi, eta), "hk": hk},
        metadata={
            "potentials": "linear primitives: d alpha = A(b omega0 + q omega1), d xi = -omega2, d eta = -A omega3",
            "base": "flat T^4 with omega1 = dx12 + dx34, omega0 = dx12 - dx34, omega2 + i omega3 = dz1 ^ dz2",
        },
    )


def build_perturbed_glps(params=None) -> StructureBundle:
    p = _params({"s_min": 0.5, "s_max": 2.0}, params, "perturbed_glps")
    sstar = domain_threshold_u_less_one()
    lo, hi = p["s_min"], p["s_max"]
    clipped = False
    if lo <= sstar:
        lo = sstar + 1e-3
        clipped = True
    if not lo < hi <= PCF_DOMAIN[1]:
        raise ParameterError(f"perturbed_glps: need s* = {sstar:.6f} < s_min < s_max <= {PCF_DOMAIN[1]}")
    p = dict(p, s_min=lo)
    chart = Chart(
        ("x1", "x2", "x3", "x4", "x5", "s", "x6", "x7"),
        domain_box=[(-INF, INF)] * 5 + [(sstar, PCF_DOMAIN[1])] + [(-INF, INF)] * 2,
    )
    box = tuple([(-math.pi, math.pi)] + [(-1.0, 1.0)] * 4 + [(lo, hi), (-1.0, 1.0), (-1.0, 1.0)])
    pts = _check_points(chart, box)
    hk = flat_hyperkahler(chart, (0, 1, 2, 3), sign2=-1.0, sign3=-1.0)
    x1, x2, x3, x4 = (chart.coord(i) for i in range(4))
    s = chart.coord(5)
    v, vdot = pcf_v_field(s), pcf_v_dot_field(s)
    f = v * sin(x1) + 1.0
    d = _forms(chart)
    om1t = wedge(d(0), d(1)) * f + wedge(d(2), d(3))
    u = s * s * f
    G = v * sin(x1) + power(s, 4.0) * (1.0 / 12.0)
    alpha = d(4) - d(1) * (vdot * cos(x1))
    xi = d(6) - d(0) * x3 - d(3) * x2
    eta = d(7) - d(0) * x4 - d(1) * x3
    st, data, red = _spin7_from_reduction_I(
        chart, hk, om1t, u, 1.0, 0.0, 5, alpha, 4, xi, 6, eta, 7, pts, G=G, class_coefficients=(0.0, 0.0, 1.0, 0.0)
    )
    printed = MetricField.from_squares(
        chart,
        [
            (s * s * f, d(0)),
            (s * s * f, d(1)),
            (s * s, d(2)),
            (s * s, d(3)),
            (1.0 / f, alpha),
            (power(s, -2.0), xi),
            (power(s, -2.0), eta),
            (power(s, 4.0) * f, d(5)),
        ],
    )
    return StructureBundle(
        "perturbed_glps", "spin7", chart, st, p, {"alpha": alpha, "xi": xi, "eta": eta}, "§9", "unknown", box,
        validity=f"v(s) < 1, i.e. s > s* = {sstar:.10f}",
        reduction=data, reduction_I=red, printed_metric=printed,
        extras={"f": f, "v": v, "hk": hk},
        metadata={
            "s_star": sstar,
            "clipped_to_s_star": clipped,
            "omega1_tilde": "omega1 + d d^c G, i.e. (a, b, p, q) = (0, 0, 1, 0)",
            "curvatures": "d xi = dx13 - dx24 = -omega2, d eta = dx14 + dx23 = -omega3",
        },
    )


# ---------------------------------------------------------------------------
# Gibbons-Hawking and Tod bases


def _gh_chart() -> Chart:
    return Chart(("x", "y", "z", "w", "x5", "s", "x6", "x7"), domain_box=[(-INF, INF)] * 5 + [(0.0, INF)] + [(-INF, INF)] * 2)


def build_gh_spin7(params=None) -> StructureBundle:
    """V = v0 + m/(2r) over a box off the z-axis; alpha, xi, eta from radial primitives on that box."""
    p = _params({"c": 0.0, "p": 0.0, "v0": 0.0, "m": 1.0, "s_min": 0.5, "s_max": 2.0}, params, "gh_spin7")
    lo, hi = _interval(p, "s_min", "s_max", "gh_spin7")
    c, pp, v0, m = p["c"], p["p"], p["v0"], p["m"]
    if c < 0 or pp < 0:
        raise ParameterError("gh_spin7: need c >= 0 and p >= 0")
    base_box = [(0.5, 1.5), (0.5, 1.5), (-0.5, 0.5)]
    rmin = math.sqrt(0.5)
    rmax = math.sqrt(1.5 ** 2 * 2 + 0.25)
    if not min(v0 + m / (2 * rmin), v0 + m / (2 * rmax)) > 0:
        raise ParameterError("gh_spin7: V = v0 + m/(2r) > 0 fails on the base box")
    chart = _gh_chart()
    box = tuple(base_box + [(-1.0, 1.0), (-1.0, 1.0), (lo, hi), (-1.0, 1.0), (-1.0, 1.0)])
    pts = _check_points(chart, box)
    x, y, z, w = (chart.coord(i) for i in range(4))
    V = power(x * x + y * y + z * z, -0.5) * (0.5 * m) + v0
    theta = monopole_connection(chart, m)
    hk = gibbons_hawking_triple(V, theta, check_points=pts)
    d = _forms(chart)
    center = _center(base_box)
    th_base = theta - d(3)
    beta1 = wedge(th_base, d(0)) + wedge(d(1), d(2)) * V
    beta2 = wedge(th_base, d(1)) + wedge(d(2), d(0)) * V
    beta3 = wedge(th_base, d(2)) + wedge(d(0), d(1)) * V
    prim = [poincare_primitive(bta, center, axes=(0, 1, 2)) for bta in (beta1, beta2, beta3)]
    alpha = d(4) + d(0) * w + prim[0]
    xi = d(6) - d(1) * w - prim[1]
    eta = d(7) - d(2) * w - prim[2]
    s = chart.coord(5)
    om1t = hk.omega1 * (s + pp)
    u = s * (s + c) * (s + pp) * (s + pp)
    st, data, red = _spin7_from_reduction_I(chart, hk, om1t, u, 1.0, c, 5, alpha, 4, xi, 6, eta, 7, pts, class_coefficients=(0.0, 0.0, pp, 1.0))
    printed = MetricField.from_squares(
        chart,
        [
            (power(s, -2.0), eta),
            (power(s + c, -2.0), xi),
            (power(s + pp, -2.0), alpha),
            (power(s * (s + c) * (s + pp), 2.0), d(5)),
        ],
    ) + MetricField.from_squares(
        chart, [(1.0 / V, theta), (V, d(0)), (V, d(1)), (V, d(2))], axes=(0, 1, 2, 3)
    ).scaled(s * (s + c) * (s + pp))
    return StructureBundle(
        "gh_spin7", "spin7", chart, st, p, {"theta": theta, "alpha": alpha, "xi": xi, "eta": eta}, "§6", "unknown", box,
        validity="V > 0 on the base box; s > 0", reduction=data, reduction_I=red, printed_metric=printed,
        normal_axis=5, extras={"hk": hk, "V": V},
        metadata={
            "constant_solution": "A = 1, (a, b, q) = (0, 0, 1)",
            "potentials": "alpha, xi, eta: w dx-type terms plus radial primitives about the base-box centre",
        },
    )


def build_tod_spin7(params=None) -> StructureBundle:
    """V(y, z) = v0 + e^y cos z with theta = dw - e^y sin z dx."""
    p = _params({"c": 1.0, "p": 1.0, "v0": 2.0, "s_min": 0.5, "s_max": 2.0}, params, "tod_spin7")
    lo, hi = _interval(p, "s_min", "s_max", "tod_spin7")
    c, pp, v0 = p["c"], p["p"], p["v0"]
    if not (c > 0 and pp > 0):
        raise ParameterError("tod_spin7: need c > 0 and p > 0")
    ybox = (-0.5, 0.5)
    if not v0 - math.exp(ybox[1]) > 0:
        raise ParameterError("tod_spin7: V = v0 + e^y cos z > 0 fails on the base box (need v0 > e^0.5)")
    chart = _gh_chart()
    box = tuple([(-1.0, 1.0), ybox, (-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0), (lo, hi), (-1.0, 1.0), (-1.0, 1.0)])
    pts = _check_points(chart, box)
    x, y, z, w = (chart.coord(i) for i in range(4))
    ey = exp(y)
    V = ey * cos(z) + v0
    d = _forms(chart)
    theta = d(3) - d(0) * (ey * sin(z))
    hk = gibbons_hawking_triple(V, theta, check_points=pts, with_omega0=True)
    s = chart.coord(5)
    om1t = hk.omega0 * s + hk.omega1 * (s + pp)
    u = s * (s + c) * (s * 2.0 + pp) * pp
    alpha = d(4) + d(0) * (w * 2.0)
    xi = d(6) - d(1) * w - d(0) * (ey * sin(z) + z * v0)
    eta = d(7) - d(2) * w + d(0) * (ey * cos(z) + y * v0)
    st, data, red = _spin7_from_reduction_I(chart, hk, om1t, u, 1.0, c, 5, alpha, 4, xi, 6, eta, 7, pts, class_coefficients=(0.0, 1.0, pp, 1.0))
    g_om1t = metric_from_kahler(om1t, hk.J1())
    printed = MetricField.from_squares(
        chart,
        [
            (power(s, -2.0), eta),
            (power(s + c, -2.0), xi),
            (1.0 / ((s * 2.0 + pp) * pp), alpha),
            (s * s * (s + c) * (s + c) * (s * 2.0 + pp) * pp, d(5)),
        ],
    ) + g_om1t.scaled(s * (s + c))
    return StructureBundle(
        "tod_spin7", "spin7", chart, st, p, {"theta": theta, "alpha": alpha, "xi": xi, "eta": eta}, "§7", "unknown", box,
        validity="V > 0 on the base box; c, p > 0", reduction=data, reduction_I=red, printed_metric=printed,
        normal_axis=5, extras={"hk": hk, "V": V},
        metadata={"constant_solution": "A = 1, (a, b, q) = (0, 1, 1)", "curvatures": "d alpha = omega0 + omega1 = 2 dw ^ dx"},
    )


# ---------------------------------------------------------------------------
# reduction over a Riemann surface


def _surface_chart(x_box=((-INF, INF), (-INF, INF))) -> Chart:
    names = ("x1", "x2", "x3", "x4", "x5", "x6", "s", "y")
    return Chart(names, domain_box=list(x_box) + [(-INF, INF)] * 4 + [(0.0, INF), (0.0, INF)])


def build_constant_II(params=None) -> StructureBundle:
    p = _params({"c": 1.0, "p": 1.0, "q": 1.0, "s_min": 0.5, "s_max": 2.0, "y_min": 0.5, "y_max": 2.0}, params, "constant_II")
    slo, shi = _interval(p, "s_min", "s_max", "constant_II")
    ylo, yhi = _interval(p, "y_min", "y_max", "constant_II")
    c, pp, q = p["c"], p["p"], p["q"]
    if not c > 0:
        raise ParameterError("constant_II: c > 0 fails")
    for y0 in (ylo, yhi):
        if not pp + q * y0 > 0:
            raise ParameterError(f"constant_II: p + q y > 0 fails at y = {y0}")
    chart = _surface_chart()
    box = tuple([(-1.0, 1.0)] * 6 + [(slo, shi), (ylo, yhi)])
    pts = _check_points(chart, box)
    x1, x2 = chart.coord(0), chart.coord(1)
    s, y = chart.coord(6), chart.coord(7)
    d = _forms(chart)
    F = (y * q + pp) * c
    u = y * (y * q + pp)
    w = s * c
    alpha = d(1) * (x1 * (c * q)) + d(2)
    kappa = d(3)
    xi = d(4) + d(3) * x1 - d(6) * (s * x2 * c)
    eta = d(5) + d(2) * x2 - d(7) * (y * x1 * (y * q + pp))
    st, data, red, printed = _spin7_from_reduction_II(chart, F, u, w, alpha, kappa, xi, eta, pts)
    literal = MetricField.from_squares(
        chart,
        [
            (power(s, -2.0), eta),
            (power(y, -2.0), xi),
            (s / (s * q + pp), alpha),
            (y * (1.0 / c), kappa),
            (y * y * s * (s * q + pp), d(7)),
            (y * s * s * c, d(6)),
            (s * y * (y * q + pp) * c, d(0)),
            (s * y * (y * q + pp) * c, d(1)),
        ],
    )
    return StructureBundle(
        "constant_II", "spin7", chart, st, p, {"alpha": alpha, "kappa": kappa, "xi": xi, "eta": eta}, "§11", 21, box,
        validity="c > 0 and p + q y > 0", reduction=data, reduction_II=red, printed_metric=printed,
        extras={"printed_metric_literal": literal},
        metadata={"printed_metric_note": "compared against the general metric formula; the section's own display reads p + q s where p + q y is meant"},
    )


def build_log_example(params=None) -> StructureBundle:
    p = _params({"s_min": 0.5, "s_max": 2.0, "y_min": 0.5, "y_max": 2.0}, params, "log_example")
    slo, shi = _interval(p, "s_min", "s_max", "log_example")
    ylo, yhi = _interval(p, "y_min", "y_max", "log_example")
    chart = _surface_chart(((-INF, INF), (0.0, INF)))
    box = tuple([(0.0, 1.5), (1.05, 2.0)] + [(-1.0, 1.0)] * 4 + [(slo, shi), (ylo, yhi)])

    def valid(pts):
        return pts[:, 0] ** 2 + pts[:, 1] ** 2 > 1.0

    pts = _check_points(chart, box, valid)
    x1, x2 = chart.coord(0), chart.coord(1)
    s, y = chart.coord(6), chart.coord(7)
    d = _forms(chart)
    r = x1 * x1 + x2 * x2
    lr = log(r)
    F = y * lr
    u = y * y
    w = s * lr
    # d^c ln r with J dx1 = -dx2, J dx2 = dx1
    dc_lr = d(0) * (x2 * 2.0 / r) - d(1) * (x1 * 2.0 / r)
    alpha = d(2) + d(1) * (x1 * lr - x1 * 2.0 + x2 * atan(x1 / x2) * 2.0)
    kappa = d(3) - dc_lr * (s * s * 0.5)
    xi = d(4) + d(3) * x1 + d(1) * (s * s * lr * 0.5)
    eta = d(5) + d(2) * x2 - d(7) * (x1 * y * y)
    st, data, red, printed = _spin7_from_reduction_II(chart, F, u, w, alpha, kappa, xi, eta, pts)
    return StructureBundle(
        "log_example", "spin7", chart, st, p, {"alpha": alpha, "kappa": kappa, "xi": xi, "eta": eta}, "§12", 21, box,
        validity="r = x1^2 + x2^2 > 1 and x2 > 0", valid_mask=valid, reduction=data, reduction_II=red,
        printed_metric=printed,
    )


def build_airy_example(params=None) -> StructureBundle:
    p = _params({"s_min": 0.5, "s_max": 2.0, "y_min": 0.5, "y_max": 2.0}, params, "airy_example")
    slo, shi = _interval(p, "s_min", "s_max", "airy_example")
    ylo, yhi = _interval(p, "y_min", "y_max", "airy_example")
    if yhi > 10.0:
        raise ParameterError("airy_example: y_max <= 10 (range of the Airy solution)")
    chart = _surface_chart(((0.0, math.pi), (-INF, INF)))
    box = tuple([(0.2, math.pi - 0.2)] + [(-1.0, 1.0)] * 5 + [(slo, shi), (ylo, yhi)])
    pts = _check_points(chart, box)
    x1, x2 = chart.coord(0), chart.coord(1)
    s, y = chart.coord(6), chart.coord(7)
    d = _forms(chart)
    ai, aip = airy_ai_field(y), airy_ai_prime_field(y)
    F = ai * sin(x1)
    u = y * ai * sin(x1)
    w = s
    alpha = d(2) - d(1) * (aip * cos(x1))
    kappa = d(3)
    xi = d(4) + d(3) * x1 - d(6) * (s * x2)
    eta = d(5) + d(2) * x2 + d(7) * (y * ai * cos(x1))
    st, data, red, printed = _spin7_from_reduction_II(chart, F, u, w, alpha, kappa, xi, eta, pts)
    return StructureBundle(
        "airy_example", "spin7", chart, st, p, {"alpha": alpha, "kappa": kappa, "xi": xi, "eta": eta}, "§12", "unknown", box,
        validity="u = y Ai(y) sin(x1) > 0: 0 < x1 < pi", reduction=data, reduction_II=red, printed_metric=printed,
    )


def build_flat_spin7(params=None) -> StructureBundle:
    p = _params({}, params, "flat_spin7")
    st = model_spin7_form()
    box = tuple([(-1.0, 1.0)] * 8)
    return StructureBundle("flat_spin7", "spin7", st.chart, st, p, {}, "fixture", 0, box, validity="all of R^8")


# ---------------------------------------------------------------------------
# registry

REGISTRY: Dict[str, Tuple[Callable[..., StructureBundle], str, str]] = {
    "glps_spin7": (build_glps_spin7, "spin7", "§6"),
    "glps_g2": (build_glps_g2, "g2", "§6"),
    "glps_cy": (build_glps_cy, "su3", "§6"),
    "glps_su4": (build_glps_su4, "su4", "§6"),
    "nil24_spin7": (build_nil24_spin7, "spin7", "§7"),
    "nil24_g2": (build_nil24_g2, "g2", "§7"),
    "constant_I": (build_constant_I, "spin7", "§5"),
    "gh_spin7": (build_gh_spin7, "spin7", "§6"),
    "tod_spin7": (build_tod_spin7, "spin7", "§7"),
    "perturbed_glps": (build_perturbed_glps, "spin7", "§9"),
    "constant_II": (build_constant_II, "spin7", "§11"),
    "log_example": (build_log_example, "spin7", "§12"),
    "airy_example": (build_airy_example, "spin7", "§12"),
    "flat_spin7": (build_flat_spin7, "spin7", "fixture"),
}


def names() -> List[str]:
    return list(REGISTRY)


def build(name: str, params: Optional[Mapping[str, float]] = None, **kwargs) -> StructureBundle:
    """Assemble the named entry; ``params`` and keyword arguments are merged."""
    if name not in REGISTRY:
        raise CatalogError(f"unknown catalog entry {name!r}; known: {', '.join(REGISTRY)}")
    merged = dict(params or {})
    merged.update(kwargs)
    return REGISTRY[name][0](merged)
