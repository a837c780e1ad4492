"""Differential forms with field coefficients and the metric operations on them.

Forms are stored as a map from strictly increasing index tuples to
``ScalarField`` coefficients.  Everything is lazy: building ``d(a ^ b)`` only
builds a new expression, and the arithmetic happens when coefficients are
evaluated at a batch of points.

Operations that need a matrix inverse or determinant (Hodge star, complex
structures from a coframe, metric inverses, Poincare primitives) evaluate all
of their components in one go through a shared node, so a star of an 8-form
is computed once per batch however many coefficients are requested.
"""
from __future__ import annotations

import itertools
import math
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .fields import (
    Chart,
    ChartMismatchError,
    Constant,
    EvalContext,
    EvaluationError,
    FieldError,
    Jet2,
    OrderError,
    ScalarField,
    as_points,
    product_of,
    sum_of,
)

Index = Tuple[int, ...]


class FormError(FieldError, ValueError):
    pass


class MetricDegeneracyError(EvaluationError):
    pass


class ConsistencyError(EvaluationError):
    pass


def perm_sign(seq: Sequence[int]) -> int:
    """Sign of the permutation sorting ``seq`` (0 if an entry repeats)."""
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return 0
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


# ---------------------------------------------------------------------------
# tensor jets


class TJet:
    """Jet of an array-valued quantity: value (N, *T), grad (N, *T, D), hess (N, *T, D, D)."""

    __slots__ = ("value", "grad", "hess")

    def __init__(self, value, grad=None, hess=None):
        self.value = value
        self.grad = grad
        self.hess = hess

    @property
    def order(self):
        return 2 if self.hess is not None else 1 if self.grad is not None else 0

    def entry(self, idx) -> Jet2:
        sl = (slice(None),) + tuple(idx)
        return Jet2(
            self.value[sl],
            None if self.grad is None else self.grad[sl],
            None if self.hess is None else self.hess[sl],
        )

    def __add__(self, other: "TJet") -> "TJet":
        return TJet(
            self.value + other.value,
            None if self.grad is None else self.grad + other.grad,
            None if self.hess is None else self.hess + other.hess,
        )

    def __neg__(self):
        return TJet(-self.value, None if self.grad is None else -self.grad, None if self.hess is None else -self.hess)

    def __sub__(self, other):
        return self + (-other)


def tjet_stack(jets: Sequence[Jet2], shape: Tuple[int, ...]) -> TJet:
    """Pack scalar jets (row-major order) into a TJet of the given shape."""
    n = jets[0].value.shape[0]
    value = np.stack([j.value for j in jets], axis=1).reshape((n,) + shape)
    grad = hess = None
    if jets[0].gradient is not None:
        d = jets[0].gradient.shape[1]
        grad = np.stack([j.gradient for j in jets], axis=1).reshape((n,) + shape + (d,))
    if jets[0].hessian is not None:
        d = jets[0].hessian.shape[1]
        hess = np.stack([j.hessian for j in jets], axis=1).reshape((n,) + shape + (d, d))
    return TJet(value, grad, hess)


def tjet_einsum(spec: str, a: TJet, b: TJet) -> TJet:
    """Bilinear contraction with the product rule; ``spec`` omits the batch axis."""
    ins, out = spec.split("->")
    sa, sb = ins.split(",")
    value = np.einsum(f"n{sa},n{sb}->n{out}", a.value, b.value, optimize=True)
    grad = hess = None
    if a.grad is not None:
        grad = np.einsum(f"n{sa}x,n{sb}->n{out}x", a.grad, b.value, optimize=True) + np.einsum(
            f"n{sa},n{sb}x->n{out}x", a.value, b.grad, optimize=True
        )
    if a.hess is not None:
        cross = np.einsum(f"n{sa}x,n{sb}y->n{out}xy", a.grad, b.grad, optimize=True)
        hess = (
            np.einsum(f"n{sa}xy,n{sb}->n{out}xy", a.hess, b.value, optimize=True)
            + np.einsum(f"n{sa},n{sb}xy->n{out}xy", a.value, b.hess, optimize=True)
            + cross
            + np.swapaxes(cross, -1, -2)
        )
    return TJet(value, grad, hess)


def tjet_scalar_mul(s: Jet2, a: TJet) -> TJet:
    """Scalar jet times tensor jet."""
    extra = a.value.ndim - 1
    sv = s.value.reshape((-1,) + (1,) * extra)
    value = sv * a.value
    grad = hess = None
    if a.grad is not None:
        sg = s.gradient.reshape((s.gradient.shape[0],) + (1,) * extra + (s.gradient.shape[1],))
        grad = sv[..., None] * a.grad + sg * a.value[..., None]
    if a.hess is not None:
        d = s.gradient.shape[1]
        sh = s.hessian.reshape((s.hessian.shape[0],) + (1,) * extra + (d, d))
        cross = sg[..., :, None] * a.grad[..., None, :]
        hess = sv[..., None, None] * a.hess + sh * a.value[..., None, None] + cross + np.swapaxes(cross, -1, -2)
    return TJet(value, grad, hess)


def tjet_inverse(a: TJet) -> TJet:
    """Inverse of a batch of square matrices with first and second derivatives."""
    inv = np.linalg.inv(a.value)
    grad = hess = None
    if a.grad is not None:
        # d(A^-1) = -A^-1 dA A^-1
        grad = -np.einsum("nij,njkx,nkl->nilx", inv, a.grad, inv, optimize=True)
    if a.hess is not None:
        # second derivative: A^-1 (dA_x A^-1 dA_y + dA_y A^-1 dA_x - ddA_xy) A^-1
        t = np.einsum("nijx,njk,nkly->nilxy", a.grad, inv, a.grad, optimize=True)
        t = t + np.swapaxes(t, -1, -2) - a.hess
        hess = np.einsum("nij,njkxy,nkl->nilxy", inv, t, inv, optimize=True)
    return TJet(inv, grad, hess)


def tjet_logdet(a: TJet, inv: TJet = None) -> Jet2:
    sign, ld = np.linalg.slogdet(a.value)
    if inv is None:
        inv = tjet_inverse(TJet(a.value, a.grad))
    grad = hess = None
    if a.grad is not None:
        grad = np.einsum("nij,njix->nx", inv.value, a.grad, optimize=True)
    if a.hess is not None:
        hess = np.einsum("nij,njixy->nxy", inv.value, a.hess, optimize=True) - np.einsum(
            "nij,njkx,nkl,nliy->nxy", inv.value, a.grad, inv.value, a.grad, optimize=True
        )
    return Jet2(ld, grad, hess)


def jet_exp_scale(a: Jet2, c: float) -> Jet2:
    """exp(c * a) as a jet."""
    v = np.exp(c * a.value)
    if a.gradient is None:
        return Jet2(v)
    g = c * v[:, None] * a.gradient
    if a.hessian is None:
        return Jet2(v, g)
    h = c * v[:, None, None] * (a.hessian + c * a.gradient[:, :, None] * a.gradient[:, None, :])
    return Jet2(v, g, h)


# ---------------------------------------------------------------------------
# shared nodes: one computation, many scalar components


class SharedNode:
    """Computes a dict of component jets in one pass.  Subclasses implement ``_evaluate``."""

    max_order = 2

    def __init__(self, chart: Chart):
        self.chart = chart

    def _evaluate(self, ctx: EvalContext, order: int) -> Dict[object, Jet2]:
        raise NotImplementedError

    def _compute(self, ctx, order):
        if order > self.max_order:
            raise OrderError(f"{type(self).__name__} supports jets up to order {self.max_order}")
        return (self._evaluate(ctx, order), order)

    def component(self, key) -> "SharedComponent":
        return SharedComponent(self, key)

    def components(self, ctx: EvalContext, order: int) -> Dict[object, Jet2]:
        return ctx.get(self, order)[0]


class SharedComponent(ScalarField):
    __slots__ = ("node", "key")

    def __init__(self, node: SharedNode, key):
        super().__init__(node.chart)
        self.node = node
        self.key = key

    def _compute(self, ctx, order):
        jets = ctx.get(self.node, order)[0]
        j = jets.get(self.key)
        if j is None:
            return Jet2(
                np.zeros(ctx.n),
                np.zeros((ctx.n, self.chart.dim)) if order >= 1 else None,
                np.zeros((ctx.n, self.chart.dim, self.chart.dim)) if order >= 2 else None,
            )
        return j.truncate(order)

    def __repr__(self):
        return f"{type(self.node).__name__}[{self.key}]"


def _fields_tjet(ctx: EvalContext, fields: Sequence[ScalarField], shape, order) -> TJet:
    return tjet_stack([ctx.get(f, order) for f in fields], shape)


# ---------------------------------------------------------------------------
# differential forms


class DifferentialForm:
    """Degree-k form: sorted multi-index -> ScalarField coefficient."""

    __slots__ = ("chart", "degree", "coeffs")

    def __init__(self, chart: Chart, degree: int, coeffs: Dict[Index, ScalarField] = None):
        self.chart = chart
        self.degree = int(degree)
        if not 0 <= self.degree <= chart.dim:
            raise FormError(f"degree {degree} outside 0..{chart.dim}")
        clean: Dict[Index, ScalarField] = {}
        for idx, f in (coeffs or {}).items():
            idx = tuple(int(i) for i in idx)
            if len(idx) != self.degree:
                raise FormError(f"multi-index {idx} has wrong length for degree {self.degree}")
            if any(idx[i] >= idx[i + 1] for i in range(len(idx) - 1)):
                raise FormError(f"multi-index {idx} is not strictly increasing")
            if idx and (idx[0] < 0 or idx[-1] >= chart.dim):
                raise FormError(f"multi-index {idx} outside 0..{chart.dim - 1}")
            if not isinstance(f, ScalarField):
                f = Constant(chart, float(f))
            elif f.chart != chart:
                raise ChartMismatchError("coefficient on a different chart")
            if f.is_zero:
                continue
            clean[idx] = f
        self.coeffs = clean

    # constructors -------------------------------------------------------------
    @classmethod
    def from_terms(cls, chart: Chart, degree: int, terms: Iterable[Tuple[Sequence[int], ScalarField]]):
        """Accumulate (index, coefficient) pairs with arbitrary index order."""
        acc: Dict[Index, List[ScalarField]] = {}
        for idx, f in terms:
            idx = tuple(chart.index(i) for i in idx)
            sgn = perm_sign(idx)
            if sgn == 0:
                continue
            if not isinstance(f, ScalarField):
                f = Constant(chart, float(f))
            key = tuple(sorted(idx))
            acc.setdefault(key, []).append(f if sgn > 0 else -f)
        return cls(chart, degree, {k: sum_of(v, chart) for k, v in acc.items()})

    @classmethod
    def zero(cls, chart: Chart, degree: int):
        return cls(chart, degree, {})

    @classmethod
    def scalar(cls, f: ScalarField):
        return cls(f.chart, 0, {(): f})

    # algebra ------------------------------------------------------------------
    def _check(self, other: "DifferentialForm"):
        if not isinstance(other, DifferentialForm):
            raise TypeError(f"expected a DifferentialForm, got {type(other).__name__}")
        if other.chart != self.chart:
            raise ChartMismatchError("forms live on different charts")

    def __add__(self, other):
        if isinstance(other, (int, float)) and other == 0:
            return self
        self._check(other)
        if other.degree != self.degree:
            raise FormError(f"cannot add forms of degree {self.degree} and {other.degree}")
        keys = set(self.coeffs) | set(other.coeffs)
        out = {}
        for k in keys:
            parts = [c[k] for c in (self.coeffs, other.coeffs) if k in c]
            out[k] = sum_of(parts, self.chart)
        return DifferentialForm(self.chart, self.degree, out)

    __radd__ = __add__

    def __neg__(self):
        return DifferentialForm(self.chart, self.degree, {k: -f for k, f in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, c):
        """Multiplication by a number or a ScalarField."""
        if isinstance(c, DifferentialForm):
            raise TypeError("use wedge() for the product of two forms")
        if isinstance(c, ScalarField):
            if c.chart != self.chart:
                raise ChartMismatchError("scalar field on a different chart")
            return DifferentialForm(self.chart, self.degree, {k: product_of([c, f], self.chart) for k, f in self.coeffs.items()})
        c = float(c)
        if c == 1.0:
            return self
        return DifferentialForm(self.chart, self.degree, {k: f * c for k, f in self.coeffs.items()})

    __rmul__ = __mul__

    def __truediv__(self, c):
        if isinstance(c, ScalarField):
            return self * (1.0 / c)
        return self * (1.0 / float(c))

    def __xor__(self, other):
        return wedge(self, other)

    def __getitem__(self, idx) -> ScalarField:
        idx = tuple(self.chart.index(i) for i in idx) if isinstance(idx, tuple) else (self.chart.index(idx),)
        sgn = perm_sign(idx)
        key = tuple(sorted(idx))
        f = self.coeffs.get(key)
        if f is None or sgn == 0:
            return Constant(self.chart, 0.0)
        return f if sgn > 0 else -f

    def support(self) -> set:
        return set(i for k in self.coeffs for i in k)

    def __repr__(self):
        names = self.chart.coord_names
        if not self.coeffs:
            return f"0 (degree {self.degree})"
        parts = []
        for k in sorted(self.coeffs):
            basis = "^".join("d" + names[i] for i in k) or "1"
            parts.append(f"{self.coeffs[k]!r}*{basis}")
        return " + ".join(parts)

    # evaluation ---------------------------------------------------------------
    def evaluate(self, points, order: int = 0, check_domain: bool = True) -> Dict[Index, Jet2]:
        pts, _ = as_points(self.chart, points)
        if check_domain:
            self.chart.check_points(pts)
        ctx = EvalContext(self.chart, pts)
        return {k: ctx.get(f, order) for k, f in self.coeffs.items()}

    def values(self, points, check_domain: bool = True) -> Dict[Index, np.ndarray]:
        return {k: j.value for k, j in self.evaluate(points, 0, check_domain).items()}

    def max_abs(self, points, check_domain: bool = True) -> float:
        vals = self.values(points, check_domain)
        if not vals:
            return 0.0
        return float(max(np.max(np.abs(v)) for v in vals.values()))

    def pointwise_max_abs(self, points, check_domain: bool = True) -> np.ndarray:
        pts, _ = as_points(self.chart, points)
        vals = self.values(pts, check_domain)
        out = np.zeros(pts.shape[0])
        for v in vals.values():
            out = np.maximum(out, np.abs(v))
        return out

    def dense(self, points, check_domain: bool = True) -> Tuple[List[Index], np.ndarray]:
        """Values of all strictly increasing components as an (N, C) array."""
        pts, _ = as_points(self.chart, points)
        keys = list(itertools.combinations(range(self.chart.dim), self.degree))
        vals = self.values(pts, check_domain)
        arr = np.zeros((pts.shape[0], len(keys)))
        for c, k in enumerate(keys):
            if k in vals:
                arr[:, c] = vals[k]
        return keys, arr


Form = DifferentialForm


def as_form(a) -> DifferentialForm:
    if isinstance(a, DifferentialForm):
        return a
    if isinstance(a, ScalarField):
        return DifferentialForm.scalar(a)
    raise TypeError(f"cannot interpret {type(a).__name__} as a form")


def dx(chart: Chart, *indices) -> DifferentialForm:
    """Basis form dx_{i1} ^ ... ^ dx_{ik}; indices may be names or integers in any order."""
    idx = tuple(chart.index(i) for i in indices)
    return DifferentialForm.from_terms(chart, len(idx), [(idx, Constant(chart, 1.0))])


def one_form(chart: Chart, components: Dict[object, object]) -> DifferentialForm:
    return DifferentialForm.from_terms(chart, 1, [((k,), v) for k, v in components.items()])


def form_sum(forms: Sequence[DifferentialForm]) -> DifferentialForm:
    forms = list(forms)
    out = forms[0]
    for f in forms[1:]:
        out = out + f
    return out


def wedge(a, b) -> DifferentialForm:
    a = as_form(a)
    b = as_form(b)
    a._check(b)
    chart = a.chart
    k = a.degree + b.degree
    if k > chart.dim:
        raise FormError(f"wedge degree {k} exceeds dimension {chart.dim}")
    acc: Dict[Index, List[ScalarField]] = {}
    for ia, fa in a.coeffs.items():
        sa = set(ia)
        for ib, fb in b.coeffs.items():
            if sa.intersection(ib):
                continue
            idx = ia + ib
            sgn = perm_sign(idx)
            term = product_of([fa, fb], chart)
            acc.setdefault(tuple(sorted(idx)), []).append(term if sgn > 0 else -term)
    return DifferentialForm(chart, k, {kk: sum_of(v, chart) for kk, v in acc.items()})


def wedge_all(*forms) -> DifferentialForm:
    out = as_form(forms[0])
    for f in forms[1:]:
        out = wedge(out, f)
    return out


def exterior_derivative(a, axes: Optional[Sequence[int]] = None) -> DifferentialForm:
    """d of a form; with ``axes`` only derivatives along those coordinates are taken."""
    a = as_form(a)
    chart = a.chart
    if a.degree >= chart.dim:
        raise FormError("exterior derivative of a top-degree form")
    axes = range(chart.dim) if axes is None else [chart.index(i) for i in axes]
    acc: Dict[Index, List[ScalarField]] = {}
    for idx, f in a.coeffs.items():
        for i in axes:
            if i in idx:
                continue
            df = f.diff(i)
            if df.is_zero:
                continue
            full = (i,) + idx
            sgn = perm_sign(full)
            acc.setdefault(tuple(sorted(full)), []).append(df if sgn > 0 else -df)
    return DifferentialForm(chart, a.degree + 1, {k: sum_of(v, chart) for k, v in acc.items()})


d = exterior_derivative


def partial_form(a: DifferentialForm, i) -> DifferentialForm:
    """Coefficient-wise partial derivative along coordinate ``i``."""
    i = a.chart.index(i)
    return DifferentialForm(a.chart, a.degree, {k: f.diff(i) for k, f in a.coeffs.items()})


def restrict(a: DifferentialForm, axes: Sequence[int]) -> DifferentialForm:
    """Keep only components whose indices all lie in ``axes``."""
    ax = set(a.chart.index(i) for i in axes)
    return DifferentialForm(a.chart, a.degree, {k: f for k, f in a.coeffs.items() if set(k) <= ax})


def split_along(a: DifferentialForm, i) -> Tuple[DifferentialForm, DifferentialForm]:
    """Write a = dx_i ^ beta + psi with beta, psi free of dx_i."""
    i = a.chart.index(i)
    beta = {}
    psi = {}
    for k, f in a.coeffs.items():
        if i in k:
            pos = k.index(i)
            rest = k[:pos] + k[pos + 1:]
            beta[rest] = f if pos % 2 == 0 else -f
        else:
            psi[k] = f
    return DifferentialForm(a.chart, a.degree - 1, beta), DifferentialForm(a.chart, a.degree, psi)


class VectorField:
    __slots__ = ("chart", "components")

    def __init__(self, chart: Chart, components: Sequence):
        comps = []
        for c in components:
            if not isinstance(c, ScalarField):
                c = Constant(chart, float(c))
            elif c.chart != chart:
                raise ChartMismatchError("vector component on a different chart")
            comps.append(c)
        if len(comps) != chart.dim:
            raise FormError(f"vector field needs {chart.dim} components, got {len(comps)}")
        self.chart = chart
        self.components = tuple(comps)

    @classmethod
    def coordinate(cls, chart: Chart, i) -> "VectorField":
        i = chart.index(i)
        return cls(chart, [1.0 if k == i else 0.0 for k in range(chart.dim)])


def interior_product(X: VectorField, a: DifferentialForm) -> DifferentialForm:
    a = as_form(a)
    if X.chart != a.chart:
        raise ChartMismatchError("vector field and form on different charts")
    if a.degree < 1:
        raise FormError("interior product of a 0-form")
    chart = a.chart
    acc: Dict[Index, List[ScalarField]] = {}
    for idx, f in a.coeffs.items():
        for p, i in enumerate(idx):
            xi = X.components[i]
            if xi.is_zero:
                continue
            term = product_of([xi, f], chart)
            rest = idx[:p] + idx[p + 1:]
            acc.setdefault(rest, []).append(term if p % 2 == 0 else -term)
    return DifferentialForm(chart, a.degree - 1, {k: sum_of(v, chart) for k, v in acc.items()})


# ---------------------------------------------------------------------------
# metrics


class _MetricNode(SharedNode):
    """Evaluates g, checks positivity, and exposes inverse and log-determinant."""

    def __init__(self, metric: "MetricField"):
        super().__init__(metric.chart)
        self.metric = metric

    def _evaluate(self, ctx, order):
        m = len(self.metric.axes)
        flat = [self.metric.g[i][j] for i in range(m) for j in range(m)]
        G = _fields_tjet(ctx, flat, (m, m), order)
        eig = np.linalg.eigvalsh(G.value)
        bad = eig[:, 0] <= 0
        if np.any(bad):
            k = int(np.argmax(bad))
            raise MetricDegeneracyError(
                f"metric not positive definite (smallest eigenvalue {float(eig[k, 0])!r})", ctx.points[k]
            )
        inv = tjet_inverse(G)
        logdet = tjet_logdet(G, inv)
        out = {("g", i, j): G.entry((i, j)) for i in range(m) for j in range(m)}
        out.update({("inv", i, j): inv.entry((i, j)) for i in range(m) for j in range(m)})
        out["logdet"] = logdet
        out["_G"] = G
        out["_inv"] = inv
        return out


class MetricField:
    """Symmetric positive definite matrix of fields on a subset ``axes`` of the chart."""

    def __init__(self, chart: Chart, g, axes: Optional[Sequence[int]] = None, orientation: int = 1):
        self.chart = chart
        self.axes = tuple(range(chart.dim)) if axes is None else tuple(chart.index(a) for a in axes)
        if list(self.axes) != sorted(set(self.axes)):
            raise FormError("metric axes must be strictly increasing")
        m = len(self.axes)
        rows = []
        for i in range(m):
            row = []
            for j in range(m):
                f = g[i][j]
                if not isinstance(f, ScalarField):
                    f = Constant(chart, float(f))
                elif f.chart != chart:
                    raise ChartMismatchError("metric entry on a different chart")
                row.append(f)
            rows.append(row)
        for i in range(m):
            for j in range(i + 1, m):
                if rows[i][j] is not rows[j][i]:
                    if isinstance(rows[i][j], Constant) and isinstance(rows[j][i], Constant) and rows[i][j].c == rows[j][i].c:
                        continue
                    # store the symmetric part so symmetry is exact
                    sym = (rows[i][j] + rows[j][i]) * 0.5
                    rows[i][j] = rows[j][i] = sym
        self.g = tuple(tuple(r) for r in rows)
        if orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")
        self.orientation = orientation
        self._node = _MetricNode(self)

    @property
    def dim(self):
        return len(self.axes)

    @classmethod
    def identity(cls, chart: Chart, axes=None, orientation: int = 1):
        axes = tuple(range(chart.dim)) if axes is None else axes
        m = len(axes)
        return cls(chart, [[1.0 if i == j else 0.0 for j in range(m)] for i in range(m)], axes, orientation)

    @classmethod
    def from_squares(cls, chart: Chart, terms, axes=None, orientation: int = 1):
        """g = sum of weight * theta (x) theta for 1-forms theta."""
        axes = tuple(range(chart.dim)) if axes is None else tuple(chart.index(a) for a in axes)
        pos = {a: i for i, a in enumerate(axes)}
        m = len(axes)
        acc = [[[] for _ in range(m)] for _ in range(m)]
        for weight, theta in terms:
            if not isinstance(weight, ScalarField):
                weight = Constant(chart, float(weight))
            comps = {}
            for k, f in theta.coeffs.items():
                if k[0] not in pos:
                    raise FormError(f"1-form has a component along {chart.coord_names[k[0]]} outside the metric axes")
                comps[pos[k[0]]] = f
            for i, fi in comps.items():
                for j, fj in comps.items():
                    if j < i:
                        continue
                    acc[i][j].append(product_of([weight, fi, fj], chart))
        g = [[None] * m for _ in range(m)]
        for i in range(m):
            for j in range(i, m):
                g[i][j] = g[j][i] = sum_of(acc[i][j], chart)
        return cls(chart, g, axes, orientation)

    def embed(self, axes: Sequence[int]) -> "MetricField":
        """Same tensor viewed on a larger axis set (zero entries elsewhere).  Not positive on its own."""
        return _raw_metric(self.chart, self._full_matrix(axes), axes, self.orientation)

    def _full_matrix(self, axes):
        axes = tuple(self.chart.index(a) for a in axes)
        pos = {a: i for i, a in enumerate(self.axes)}
        zero = Constant(self.chart, 0.0)
        out = []
        for a in axes:
            row = []
            for b in axes:
                row.append(self.g[pos[a]][pos[b]] if a in pos and b in pos else zero)
            out.append(row)
        return out

    def __add__(self, other: "MetricField") -> "MetricField":
        axes = tuple(sorted(set(self.axes) | set(other.axes)))
        A = self._full_matrix(axes)
        B = other._full_matrix(axes)
        m = len(axes)
        return MetricField(self.chart, [[A[i][j] + B[i][j] for j in range(m)] for i in range(m)], axes, self.orientation)

    def scaled(self, c) -> "MetricField":
        m = self.dim
        return MetricField(self.chart, [[self.g[i][j] * c for j in range(m)] for i in range(m)], self.axes, self.orientation)

    def with_orientation(self, orientation: int) -> "MetricField":
        return MetricField(self.chart, self.g, self.axes, orientation)

    def restricted(self, axes: Sequence[int], orientation: int = None) -> "MetricField":
        axes = tuple(self.chart.index(a) for a in axes)
        return MetricField(self.chart, self._full_matrix(axes), axes, self.orientation if orientation is None else orientation)

    def entry(self, a, b) -> ScalarField:
        """g(d/dx_a, d/dx_b) with a, b global coordinate indices."""
        pos = {x: i for i, x in enumerate(self.axes)}
        a, b = self.chart.index(a), self.chart.index(b)
        if a in pos and b in pos:
            return self.g[pos[a]][pos[b]]
        return Constant(self.chart, 0.0)

    def inverse_entry(self, i: int, j: int) -> ScalarField:
        """Entry (i, j) of g^{-1} in local axis numbering."""
        return SharedComponent(self._node, ("inv", i, j))

    def inverse_matrix(self):
        m = self.dim
        return [[self.inverse_entry(i, j) for j in range(m)] for i in range(m)]

    def log_det(self) -> ScalarField:
        return SharedComponent(self._node, "logdet")

    def sqrt_det(self) -> ScalarField:
        from .fields import exp

        return exp(self.log_det() * 0.5)

    def volume_form(self) -> DifferentialForm:
        vol = self.sqrt_det() * float(self.orientation)
        return DifferentialForm(self.chart, self.dim, {self.axes: vol})

    def tjet(self, ctx: EvalContext, order: int) -> TJet:
        return ctx.get(self._node, order)[0]["_G"]

    def inverse_tjet(self, ctx: EvalContext, order: int) -> TJet:
        return ctx.get(self._node, order)[0]["_inv"]

    def matrix(self, points, check_domain: bool = True) -> np.ndarray:
        pts, _ = as_points(self.chart, points)
        if check_domain:
            self.chart.check_points(pts)
        ctx = EvalContext(self.chart, pts)
        return self.tjet(ctx, 0).value

    def norm_of_one_form(self, theta: DifferentialForm) -> ScalarField:
        """|theta|_g as a field."""
        pos = {a: i for i, a in enumerate(self.axes)}
        terms = []
        items = [(pos[k[0]], f) for k, f in theta.coeffs.items()]
        for i, fi in items:
            for j, fj in items:
                terms.append(product_of([self.inverse_entry(i, j), fi, fj], self.chart))
        from .fields import sqrt

        return sqrt(sum_of(terms, self.chart))

    def raise_one_form(self, theta: DifferentialForm) -> VectorField:
        pos = {a: i for i, a in enumerate(self.axes)}
        comps = [Constant(self.chart, 0.0) for _ in range(self.chart.dim)]
        for a in self.axes:
            terms = []
            for k, f in theta.coeffs.items():
                if k[0] not in pos:
                    raise FormError("1-form component outside the metric axes")
                terms.append(product_of([self.inverse_entry(pos[a], pos[k[0]]), f], self.chart))
            comps[a] = sum_of(terms, self.chart)
        return VectorField(self.chart, comps)


def _raw_metric(chart, g, axes, orientation):
    """Metric container without symmetrization checks (for embeddings that are only semi-definite)."""
    mf = MetricField.__new__(MetricField)
    mf.chart = chart
    mf.axes = tuple(axes)
    mf.g = tuple(tuple(r) for r in g)
    mf.orientation = orientation
    mf._node = _MetricNode(mf)
    return mf


class _StarNode(SharedNode):
    """All coefficients of *a in one pass via the raised full tensor."""

    def __init__(self, a: DifferentialForm, g: MetricField):
        super().__init__(a.chart)
        self.a = a
        self.g = g

    def _evaluate(self, ctx, order):
        a, g = self.a, self.g
        m, k = g.dim, a.degree
        pos = {x: i for i, x in enumerate(g.axes)}
        n, D = ctx.n, self.chart.dim
        shape = (m,) * k
        value = np.zeros((n,) + shape)
        grad = np.zeros((n,) + shape + (D,)) if order >= 1 else None
        hess = np.zeros((n,) + shape + (D, D)) if order >= 2 else None
        for idx, f in a.coeffs.items():
            j = ctx.get(f, order)
            loc = tuple(pos[i] for i in idx)
            for perm in itertools.permutations(range(k)):
                p = tuple(loc[q] for q in perm)
                sgn = perm_sign(perm)
                value[(slice(None),) + p] = sgn * j.value
                if grad is not None:
                    grad[(slice(None),) + p] = sgn * j.gradient
                if hess is not None:
                    hess[(slice(None),) + p] = sgn * j.hessian
        T = TJet(value, grad, hess)
        inv = g.inverse_tjet(ctx, order)
        letters = "abcdefgh"[:k]
        for axis in range(k):
            src = letters
            dst = letters[:axis] + "z" + letters[axis + 1:]
            T = tjet_einsum(f"{src},{letters[axis]}z->{dst}", T, inv)
        logdet = ctx.get(g.log_det(), order)
        vol = jet_exp_scale(logdet, 0.5)
        out = {}
        for I in itertools.combinations(range(m), k):
            J = tuple(x for x in range(m) if x not in I)
            sgn = perm_sign(I + J) * g.orientation
            comp = T.entry(I)
            j = Jet2(comp.value, comp.gradient, comp.hessian)
            from .fields import jet_mul, jet_scale

            out[tuple(g.axes[x] for x in J)] = jet_scale(jet_mul(vol, j), float(sgn))
        return out


def hodge_star(a, g: MetricField) -> DifferentialForm:
    a = as_form(a)
    if a.chart != g.chart:
        raise ChartMismatchError("form and metric on different charts")
    if not a.support() <= set(g.axes):
        raise FormError("form has components outside the metric's axes")
    node = _StarNode(a, g)
    m, k = g.dim, a.degree
    coeffs = {}
    for I in itertools.combinations(range(m), m - k):
        key = tuple(g.axes[x] for x in I)
        coeffs[key] = SharedComponent(node, key)
    if not a.coeffs:
        coeffs = {}
    return DifferentialForm(a.chart, m - k, coeffs)


def inner_product(a: DifferentialForm, b: DifferentialForm, g: MetricField) -> ScalarField:
    """Pointwise metric pairing, via a ^ *b = <a, b> vol."""
    top = wedge(a, hodge_star(b, g))
    c = top.coeffs.get(g.axes)
    if c is None:
        return Constant(a.chart, 0.0)
    return c / g.volume_form().coeffs[g.axes]


# ---------------------------------------------------------------------------
# complex structures


J_TOLERANCE = 1e-8


class _MatrixNode(SharedNode):
    """Endomorphism J^i_j on ``axes`` given entry fields, checked for J^2 = -1."""

    def __init__(self, chart, axes, entries=None, coframe=None, check=True):
        super().__init__(chart)
        self.axes = axes
        self.entries = entries
        self.coframe = coframe
        self.check = check

    def _evaluate(self, ctx, order):
        m = len(self.axes)
        if self.entries is not None:
            M = _fields_tjet(ctx, [self.entries[i][j] for i in range(m) for j in range(m)], (m, m), order)
        else:
            B_rows, C_rows = self.coframe
            B = _fields_tjet(ctx, [f for row in B_rows for f in row], (m, m), order)
            C = _fields_tjet(ctx, [f for row in C_rows for f in row], (m, m), order)
            if np.any(np.abs(np.linalg.det(B.value)) < 1e-300):
                k = int(np.argmax(np.abs(np.linalg.det(B.value)) < 1e-300))
                raise EvaluationError("complex coframe is degenerate", ctx.points[k])
            M = tjet_einsum("ij,jk->ik", tjet_inverse(B), C)
        if self.check:
            res = np.einsum("nij,njk->nik", M.value, M.value) + np.eye(m)
            err = np.max(np.abs(res), axis=(1, 2))
            if np.any(err > J_TOLERANCE):
                k = int(np.argmax(err))
                raise ConsistencyError(f"J^2 + I residual {err[k]:.3e} exceeds {J_TOLERANCE}", ctx.points[k])
        out = {(i, j): M.entry((i, j)) for i in range(m) for j in range(m)}
        out["_M"] = M
        return out


class _CheckedEntry(ScalarField):
    """Entry of an explicitly given J; evaluation first runs the J^2 = -1 check."""

    __slots__ = ("node", "raw")

    def __init__(self, node: _MatrixNode, raw: ScalarField):
        super().__init__(raw.chart)
        self.node = node
        self.raw = raw

    @property
    def is_zero(self):
        return self.raw.is_zero

    def _compute(self, ctx, order):
        ctx.get(self.node, 0)
        return ctx.get(self.raw, order)

    def _diff(self, i):
        return self.raw.diff(i)

    def __repr__(self):
        return repr(self.raw)


class ComplexStructure:
    """Almost complex structure J on coordinate ``axes``.

    ``matrix[i][j]`` is J^i_j, so (JX)^i = J^i_j X^j and on 1-forms
    (J beta)_j = beta_i J^i_j, i.e. J beta = beta(J .).
    """

    def __init__(self, chart: Chart, node: _MatrixNode):
        self.chart = chart
        self.axes = node.axes
        self._node = node
        m = len(self.axes)
        if node.entries is not None:
            self.matrix = tuple(tuple(_CheckedEntry(node, node.entries[i][j]) for j in range(m)) for i in range(m))
        else:
            self.matrix = tuple(tuple(SharedComponent(node, (i, j)) for j in range(m)) for i in range(m))

    @classmethod
    def from_matrix(cls, chart: Chart, entries, axes=None, check: bool = True):
        axes = tuple(range(chart.dim)) if axes is None else tuple(chart.index(a) for a in axes)
        m = len(axes)
        ent = [[e if isinstance(e, ScalarField) else Constant(chart, float(e)) for e in row] for row in entries]
        if len(ent) != m or any(len(r) != m for r in ent):
            raise FormError("J matrix shape does not match its axes")
        return cls(chart, _MatrixNode(chart, axes, entries=ent, check=check))

    @classmethod
    def from_coframe(cls, pairs: Sequence[Tuple[DifferentialForm, DifferentialForm]], axes=None, check: bool = True):
        """J from a complex (1,0) coframe theta_k = a_k + i b_k, so that J a_k = -b_k and J b_k = a_k."""
        chart = pairs[0][0].chart
        axes = tuple(range(chart.dim)) if axes is None else tuple(chart.index(a) for a in axes)
        m = len(axes)
        if 2 * len(pairs) != m:
            raise FormError(f"{len(pairs)} complex 1-forms cannot span {m} real directions")
        pos = {x: i for i, x in enumerate(axes)}
        zero = Constant(chart, 0.0)

        def row(theta, sign=1.0):
            r = [zero] * m
            for k, f in theta.coeffs.items():
                if k[0] not in pos:
                    raise FormError("coframe component outside the axes of J")
                r[pos[k[0]]] = f if sign > 0 else -f
            return r

        B_rows, C_rows = [], []
        for a, b in pairs:
            B_rows += [row(a), row(b)]
            C_rows += [row(b, -1.0), row(a)]
        return cls(chart, _MatrixNode(chart, axes, coframe=(B_rows, C_rows), check=check))

    def values(self, points, check_domain: bool = True) -> np.ndarray:
        pts, _ = as_points(self.chart, points)
        if check_domain:
            self.chart.check_points(pts)
        ctx = EvalContext(self.chart, pts)
        return ctx.get(self._node, 0)[0]["_M"].value

    def tjet(self, ctx, order) -> TJet:
        return ctx.get(self._node, order)[0]["_M"]

    def apply_to_one_form(self, beta: DifferentialForm) -> DifferentialForm:
        pos = {x: i for i, x in enumerate(self.axes)}
        terms = []
        for k, f in beta.coeffs.items():
            if k[0] not in pos:
                raise FormError("1-form has components outside the axes of J")
            i = pos[k[0]]
            for j, a in enumerate(self.axes):
                if not self.matrix[i][j].is_zero:
                    terms.append(((a,), product_of([f, self.matrix[i][j]], self.chart)))
        return DifferentialForm.from_terms(self.chart, 1, terms)

    def apply_to_vector(self, X: VectorField) -> VectorField:
        comps = [Constant(self.chart, 0.0)] * self.chart.dim
        comps = list(comps)
        for i, a in enumerate(self.axes):
            comps[a] = sum_of([product_of([self.matrix[i][j], X.components[b]], self.chart) for j, b in enumerate(self.axes)], self.chart)
        return VectorField(self.chart, comps)


def dc(a, J: ComplexStructure, axes: Optional[Sequence[int]] = None) -> DifferentialForm:
    """d^c f = J(df), i.e. (d^c f)(X) = df(JX).

    Only derivatives along the axes of J (or the given ``axes``, a subset of
    them) enter, which is the fibrewise operator when f also depends on
    parameters such as s.
    """
    a = as_form(a)
    if a.degree != 0:
        raise FormError("d^c is provided for functions (0-forms) only")
    f = a.coeffs.get((), Constant(a.chart, 0.0))
    if isinstance(f, Constant):
        return DifferentialForm.zero(a.chart, 1)
    df = exterior_derivative(a, axes=J.axes if axes is None else axes)
    return J.apply_to_one_form(df)


def metric_from_kahler(omega: DifferentialForm, J: ComplexStructure, orientation: int = 1) -> MetricField:
    """g(X, Y) = omega(X, JY); g_ac = sum_b omega_ab J^b_c."""
    chart = omega.chart
    axes = J.axes
    m = len(axes)
    W = [[omega[(axes[a], axes[b])] if a != b else Constant(chart, 0.0) for b in range(m)] for a in range(m)]
    g = [[None] * m for _ in range(m)]
    for a in range(m):
        for c in range(m):
            g[a][c] = sum_of([product_of([W[a][b], J.matrix[b][c]], chart) for b in range(m) if not W[a][b].is_zero], chart)
    return MetricField(chart, g, axes, orientation)


def nijenhuis_tensor_values(J: ComplexStructure, points, check_domain: bool = True) -> np.ndarray:
    """N^k_ij at points, shape (N, m, m, m) in the local numbering of J's axes."""
    pts, _ = as_points(J.chart, points)
    if check_domain:
        J.chart.check_points(pts)
    ctx = EvalContext(J.chart, pts)
    M = J.tjet(ctx, 1)
    Jv = M.value
    dJ = M.grad[..., list(J.axes)]  # (N, k, j, l): d_l J^k_j
    # N^k_ij = J^l_i d_l J^k_j - J^l_j d_l J^k_i - J^k_l (d_i J^l_j - d_j J^l_i)
    t1 = np.einsum("nli,nkjl->nkij", Jv, dJ)
    t2 = np.einsum("nlj,nkil->nkij", Jv, dJ)
    t3 = np.einsum("nkl,nlji->nkij", Jv, dJ)
    t4 = np.einsum("nkl,nlij->nkij", Jv, dJ)
    return t1 - t2 - t3 + t4


class ComplexForm:
    """re + i im for real forms of equal degree."""

    __slots__ = ("re", "im")

    def __init__(self, re: DifferentialForm, im: DifferentialForm = None):
        self.re = re
        self.im = im if im is not None else DifferentialForm.zero(re.chart, re.degree)

    @classmethod
    def from_parts(cls, re, im):
        return cls(as_form(re), as_form(im))

    def wedge(self, other: "ComplexForm") -> "ComplexForm":
        return ComplexForm(
            wedge(self.re, other.re) - wedge(self.im, other.im),
            wedge(self.re, other.im) + wedge(self.im, other.re),
        )

    def __mul__(self, c):
        return ComplexForm(self.re * c, self.im * c)

    __rmul__ = __mul__

    def __add__(self, other):
        return ComplexForm(self.re + other.re, self.im + other.im)

    def __neg__(self):
        return ComplexForm(-self.re, -self.im)

    def __sub__(self, other):
        return self + (-other)

    def conj(self):
        return ComplexForm(self.re, -self.im)

    def d(self):
        return ComplexForm(exterior_derivative(self.re), exterior_derivative(self.im))


def complex_wedge(*forms: ComplexForm) -> ComplexForm:
    out = forms[0]
    for f in forms[1:]:
        out = out.wedge(f)
    return out


# ---------------------------------------------------------------------------
# Poincare primitive


class _PrimitiveNode(SharedNode):
    """Homotopy operator P on a star-shaped region of the coordinates ``axes``.

    (P w)(x) = int_0^1 t^(k-1) (X -| w)(c + t (x - c)) dt with X = x - c along
    ``axes``; other coordinates are held fixed.  For a closed w the result
    satisfies d(P w) = w on the region.
    """

    def __init__(self, w: DifferentialForm, center, axes, nodes):
        super().__init__(w.chart)
        self.w = w
        self.center = np.asarray(center, dtype=float)
        self.axes = tuple(axes)
        t, wts = np.polynomial.legendre.leggauss(nodes)
        self.t = 0.5 * (t + 1.0)
        self.wts = 0.5 * wts

    def _evaluate(self, ctx, order):
        w, chart = self.w, self.chart
        n, D = ctx.n, chart.dim
        k = w.degree
        axmask = np.zeros(D, dtype=bool)
        axmask[list(self.axes)] = True
        c_full = ctx.points.copy()
        c_full[:, axmask] = self.center
        X = ctx.points - c_full  # zero off the axes
        q = len(self.t)
        # all quadrature points in one batch: shape (q*n, D)
        Q = (c_full[None, :, :] + self.t[:, None, None] * X[None, :, :]).reshape(q * n, D)
        sub = EvalContext(chart, Q)
        scale = np.where(axmask[None, :], self.t[:, None], 1.0)  # (q, D)
        coeffs = {}
        for idx, f in w.coeffs.items():
            j = sub.get(f, order)
            val = j.value.reshape(q, n)
            g = h = None
            if order >= 1:
                g = j.gradient.reshape(q, n, D) * scale[:, None, :]
            if order >= 2:
                h = j.hessian.reshape(q, n, D, D) * scale[:, None, :, None] * scale[:, None, None, :]
            coeffs[idx] = (val, g, h)
        weights = self.wts * self.t ** (k - 1)  # (q,)
        out_v: Dict[Index, np.ndarray] = {}
        out_g: Dict[Index, np.ndarray] = {}
        out_h: Dict[Index, np.ndarray] = {}
        for idx, (val, g, h) in coeffs.items():
            # integrated jets of the coefficient itself
            iv = np.einsum("q,qn->n", weights, val)
            ig = np.einsum("q,qnd->nd", weights, g) if g is not None else None
            ih = np.einsum("q,qnde->nde", weights, h) if h is not None else None
            for p, i in enumerate(idx):
                if not axmask[i]:
                    continue
                rest = idx[:p] + idx[p + 1:]
                sgn = 1.0 if p % 2 == 0 else -1.0
                xi = X[:, i]
                v = sgn * xi * iv
                out_v[rest] = out_v.get(rest, 0.0) + v
                if order >= 1:
                    gg = sgn * xi[:, None] * ig
                    gg[:, i] += sgn * iv
                    out_g[rest] = out_g.get(rest, 0.0) + gg
                if order >= 2:
                    hh = sgn * xi[:, None, None] * ih
                    hh[:, i, :] += sgn * ig
                    hh[:, :, i] += sgn * ig
                    out_h[rest] = out_h.get(rest, 0.0) + hh
        return {
            r: Jet2(out_v[r], out_g.get(r) if order >= 1 else None, out_h.get(r) if order >= 2 else None)
            for r in out_v
        }


def poincare_primitive(w: DifferentialForm, center, axes: Optional[Sequence[int]] = None, nodes: int = 40) -> DifferentialForm:
    """A primitive of the closed form ``w`` along ``axes`` (radial homotopy about ``center``)."""
    chart = w.chart
    axes = tuple(range(chart.dim)) if axes is None else tuple(chart.index(a) for a in axes)
    if w.degree < 1:
        raise FormError("primitive of a 0-form")
    center = np.asarray(center, dtype=float)
    if center.shape != (len(axes),):
        raise FormError("center needs one coordinate per axis")
    order = np.argsort(axes)
    axes = tuple(axes[i] for i in order)
    center = center[order]
    node = _PrimitiveNode(w, center, axes, nodes)
    keys = set()
    for idx in w.coeffs:
        for p, i in enumerate(idx):
            if i in axes:
                keys.add(idx[:p] + idx[p + 1:])
    return DifferentialForm(chart, w.degree - 1, {k: SharedComponent(node, k) for k in keys})
