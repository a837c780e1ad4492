"""Levi-Civita curvature from metric jets, curvature-operator rank and Ricci forms."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .exterior import (
    ComplexStructure,
    DifferentialForm,
    MetricDegeneracyError,
    MetricField,
    dc,
    exterior_derivative,
)
from .fields import EvalContext, ScalarField, as_points, log

# singular values below this multiple of the largest are treated as zero
RANK_RELATIVE_THRESHOLD = 1e-8
# if the whole operator is below this (absolute) the metric is called flat there
FLAT_THRESHOLD = 1e-9
CERTIFIED_GAP = 1e6
INCONCLUSIVE_GAP = 1e3


@dataclass
class CurvatureSample:
    """Curvature data at a batch of points (leading axis N), indices local to ``metric.axes``.

    riemann[n, i, j, k, l] = R_ijkl = g(R(e_k, e_l) e_j, e_i), so that the
    sectional curvature of the plane (e_i, e_j) is R_ijij / |e_i ^ e_j|^2.
    """

    points: np.ndarray
    metric: np.ndarray
    christoffel: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray
    scalar: np.ndarray

    def symmetry_residual(self) -> float:
        R = self.riemann
        big = max(1.0, float(np.max(np.abs(R))))
        r1 = np.max(np.abs(R + np.swapaxes(R, 1, 2)))
        r2 = np.max(np.abs(R + np.swapaxes(R, 3, 4)))
        r3 = np.max(np.abs(R - R.transpose(0, 3, 4, 1, 2)))
        return float(max(r1, r2, r3) / big)

    def bianchi_residual(self) -> float:
        R = self.riemann
        cyc = R + R.transpose(0, 1, 3, 4, 2) + R.transpose(0, 1, 4, 2, 3)
        return float(np.max(np.abs(cyc)) / max(1.0, float(np.max(np.abs(R)))))

    def ricci_ratio(self) -> np.ndarray:
        """max |Ric_ij| / max |g_ij| at each point."""
        return np.max(np.abs(self.ricci), axis=(1, 2)) / np.max(np.abs(self.metric), axis=(1, 2))


def curvature_at(g: MetricField, points, check_domain: bool = True) -> CurvatureSample:
    """Christoffel symbols, Riemann, Ricci and scalar curvature of ``g``.

    Derivatives are taken along the metric's own axes only, i.e. this is the
    curvature of the slice through each point spanned by those coordinates.
    """
    pts, _ = as_points(g.chart, points)
    if check_domain:
        g.chart.check_points(pts)
    ctx = EvalContext(g.chart, pts)
    G = g.tjet(ctx, 2)
    ax = list(g.axes)
    gv = G.value
    dg = G.grad[..., ax]  # (N, i, j, k): d_k g_ij
    ddg = G.hess[..., ax, :][..., ax]  # (N, i, j, k, l): d_k d_l g_ij
    try:
        ginv = np.linalg.inv(gv)
    except np.linalg.LinAlgError as exc:
        raise MetricDegeneracyError(f"singular metric: {exc}", pts) from None
    # first kind: Gamma_kij = 1/2 (d_i g_jk + d_j g_ik - d_k g_ij)
    gam1 = 0.5 * (
        np.einsum("njki->nkij", dg) + np.einsum("nikj->nkij", dg) - np.einsum("nijk->nkij", dg)
    )
    gam = np.einsum("nlk,nkij->nlij", ginv, gam1)
    # R_ijkl = 1/2 (d_j d_k g_il + d_i d_l g_jk - d_i d_k g_jl - d_j d_l g_ik)
    #          + g_pq (Gamma^p_jk Gamma^q_il - Gamma^p_jl Gamma^q_ik)
    second = 0.5 * (
        np.einsum("niljk->nijkl", ddg)
        + np.einsum("njkil->nijkl", ddg)
        - np.einsum("njlik->nijkl", ddg)
        - np.einsum("nikjl->nijkl", ddg)
    )
    quad = np.einsum("nqjk,nqil->nijkl", gam1, gam) - np.einsum("nqjl,nqik->nijkl", gam1, gam)
    R = second + quad
    ric = np.einsum("nik,nijkl->njl", ginv, R)
    scal = np.einsum("njl,njl->n", ginv, ric)
    return CurvatureSample(pts, gv, gam, R, ric, scal)


def orthonormal_frames(metric_values: np.ndarray) -> np.ndarray:
    """E with E^T g E = I (columns are orthonormal vectors), from Cholesky of g."""
    try:
        L = np.linalg.cholesky(metric_values)
    except np.linalg.LinAlgError as exc:
        raise MetricDegeneracyError(f"metric is not positive definite: {exc}") from None
    return np.linalg.inv(np.swapaxes(L, -1, -2))


def curvature_operator(sample: CurvatureSample, frames: Optional[np.ndarray] = None) -> np.ndarray:
    """Matrix of R on Lambda^2 in an orthonormal frame: shape (N, m(m-1)/2, m(m-1)/2)."""
    E = orthonormal_frames(sample.metric) if frames is None else frames
    Rf = np.einsum("nijkl,nia,njb,nkc,nld->nabcd", sample.riemann, E, E, E, E, optimize=True)
    m = Rf.shape[1]
    pairs = [(a, b) for a in range(m) for b in range(a + 1, m)]
    ia = np.array([p[0] for p in pairs])
    ib = np.array([p[1] for p in pairs])
    return Rf[:, ia[:, None], ib[:, None], ia[None, :], ib[None, :]]


@dataclass
class HolonomyCertificate:
    points: np.ndarray
    operator_rank: int
    singular_values: List[float]
    gap_ratio: float
    status: str
    per_point_ranks: List[int] = field(default_factory=list)

    @property
    def certified(self) -> bool:
        return self.status == "certified"

    def as_dict(self) -> Dict:
        return {
            "operator_rank": self.operator_rank,
            "gap_ratio": self.gap_ratio,
            "status": self.status,
            "per_point_ranks": self.per_point_ranks,
            "singular_values": self.singular_values,
        }


def _rank_and_gap(sv: np.ndarray):
    smax = float(sv[0]) if sv.size else 0.0
    if smax < FLAT_THRESHOLD:
        return 0, float("inf")
    keep = sv > RANK_RELATIVE_THRESHOLD * smax
    r = int(np.sum(keep))
    if r == sv.size:
        return r, float("inf")
    dropped = float(sv[r])
    return r, float("inf") if dropped == 0.0 else float(sv[r - 1]) / dropped


def curvature_operator_rank(g: MetricField, points, frames_rotation: Optional[np.ndarray] = None) -> HolonomyCertificate:
    """Rank of the curvature operator, maximised over the sample points.

    Each point is ranked on its own (frames at different points are not
    identified); the reported singular values and gap belong to the point
    attaining the maximum, taking the smallest gap among ties.
    """
    sample = curvature_at(g, points)
    E = orthonormal_frames(sample.metric)
    if frames_rotation is not None:
        E = E @ frames_rotation
    ops = curvature_operator(sample, E)
    best = None
    ranks = []
    for n in range(ops.shape[0]):
        sv = np.linalg.svd(ops[n], compute_uv=False)
        r, gap = _rank_and_gap(sv)
        ranks.append(r)
        if best is None or r > best[0] or (r == best[0] and gap < best[1]):
            best = (r, gap, sv)
    r, gap, sv = best
    if gap > CERTIFIED_GAP:
        status = "certified"
    elif gap < INCONCLUSIVE_GAP:
        status = "inconclusive"
    else:
        status = "uncertified"
    return HolonomyCertificate(sample.points, r, [float(x) for x in sv], gap, status, ranks)


def ricci_form_values(g: MetricField, J: ComplexStructure, points) -> np.ndarray:
    """rho(X, Y) = Ric(JX, Y) as an antisymmetric (N, m, m) array on the axes of J."""
    if tuple(g.axes) != tuple(J.axes):
        raise ValueError("metric and complex structure must live on the same axes")
    sample = curvature_at(g, points)
    Jv = J.values(points)
    return np.einsum("nca,ncb->nab", Jv, sample.ricci)


def _two_form_array(form: DifferentialForm, points, axes) -> np.ndarray:
    from .structures import full_tensor

    return full_tensor(form, points, axes)


def kahler_ricci_form_check(g: MetricField, J: ComplexStructure, log_density: ScalarField, points, factor: float = -0.5):
    """Compare Ric(J., .) with ``factor`` * d d^c(log_density).

    With this package's d^c, i d d-bar f = -(1/2) d d^c f, so the default
    factor tests rho = i d d-bar(log_density); pass +0.5 for rho = (1/2) d d^c.
    Returns (pointwise max residual, pointwise max |rho|).
    """
    rho = ricci_form_values(g, J, points)
    target = exterior_derivative(dc(log_density, J)) * factor
    T = _two_form_array(target, points, J.axes)
    res = np.max(np.abs(rho - T), axis=(1, 2))
    return res, np.max(np.abs(rho), axis=(1, 2))


def second_bianchi_residual(g: MetricField, point, step: float = 1e-4) -> float:
    """Relative residual of nabla_e R_abcd + cyclic(c, d, e) using central differences of R."""
    p = np.asarray(point, dtype=float)
    ax = list(g.axes)
    m = len(ax)
    base = curvature_at(g, p[None, :])
    gam = base.christoffel[0]
    R = base.riemann[0]
    dR = np.zeros((m,) * 5)  # last index: derivative direction
    for e, a in enumerate(ax):
        hi, lo = p.copy(), p.copy()
        hi[a] += step
        lo[a] -= step
        Rp = curvature_at(g, hi[None, :]).riemann[0]
        Rm = curvature_at(g, lo[None, :]).riemann[0]
        dR[..., e] = (Rp - Rm) / (2 * step)
    # nabla_e R_abcd = d_e R_abcd - Gamma^p_ea R_pbcd - ... (four lowered slots)
    nab = (
        dR
        - np.einsum("pea,pbcd->abcde", gam, R)
        - np.einsum("peb,apcd->abcde", gam, R)
        - np.einsum("pec,abpd->abcde", gam, R)
        - np.einsum("ped,abcp->abcde", gam, R)
    )
    cyc = nab + nab.transpose(0, 1, 3, 4, 2) + nab.transpose(0, 1, 4, 2, 3)
    scale = max(1.0, float(np.max(np.abs(nab))))
    return float(np.max(np.abs(cyc)) / scale)


def ricci_density_check(g: MetricField, J: ComplexStructure, H: ScalarField, s: ScalarField, points):
    """rho against i d d-bar ln(H s^{2/3}) on a Kaehler quotient."""
    return kahler_ricci_form_check(g, J, log(H) + log(s) * (2.0 / 3.0), points)
