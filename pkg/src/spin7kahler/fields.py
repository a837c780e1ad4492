"""Charts, points and order-2 automatic differentiation of scalar fields.

A ``ScalarField`` is an immutable expression tree over the coordinates of a
``Chart``.  Evaluating it at a batch of points returns a ``Jet2`` holding the
value, gradient and Hessian at every point.  Symbolic differentiation is
available for every node built from coordinates, constants, arithmetic and
registered univariate functions, so a field can be differentiated once
symbolically and still carry a full jet.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np

DEFAULT_PERIOD = 2.0 * math.pi
TINY_DENOMINATOR = 1e-300


class FieldError(Exception):
    """Base class for errors raised by field construction or evaluation."""


class ChartMismatchError(FieldError, ValueError):
    pass


class DomainError(FieldError, ValueError):
    pass


class EvaluationError(FieldError, ArithmeticError):
    def __init__(self, message, point=None):
        super().__init__(message if point is None else f"{message} at point {np.asarray(point).tolist()}")
        self.point = None if point is None else np.asarray(point)


class OrderError(FieldError, ValueError):
    pass


# ---------------------------------------------------------------------------
# charts and points


@dataclass(frozen=True)
class Chart:
    """A coordinate box.  Intervals are open; use +-inf for unbounded sides."""

    coord_names: Tuple[str, ...]
    domain_box: Tuple[Tuple[float, float], ...] = None
    periodic_mask: Tuple[bool, ...] = None
    periods: Tuple[Optional[float], ...] = None
    name: str = ""

    def __post_init__(self):
        names = tuple(self.coord_names)
        n = len(names)
        if n == 0:
            raise ValueError("a chart needs at least one coordinate")
        if len(set(names)) != n:
            raise ValueError(f"duplicate coordinate names in {names}")
        box = self.domain_box
        if box is None:
            box = tuple((-math.inf, math.inf) for _ in names)
        box = tuple((float(lo), float(hi)) for lo, hi in box)
        mask = self.periodic_mask
        if mask is None:
            mask = tuple(False for _ in names)
        mask = tuple(bool(m) for m in mask)
        periods = self.periods
        if periods is None:
            periods = tuple(DEFAULT_PERIOD if m else None for m in mask)
        periods = tuple(None if p is None else float(p) for p in periods)
        if not (len(box) == len(mask) == len(periods) == n):
            raise ValueError("coord_names, domain_box, periodic_mask and periods must have equal length")
        for nm, (lo, hi) in zip(names, box):
            if not lo < hi:
                raise ValueError(f"empty domain interval ({lo}, {hi}) for coordinate {nm}")
        for nm, m, p in zip(names, mask, periods):
            if m and (p is None or p <= 0):
                raise ValueError(f"periodic coordinate {nm} needs a positive period")
        object.__setattr__(self, "coord_names", names)
        object.__setattr__(self, "domain_box", box)
        object.__setattr__(self, "periodic_mask", mask)
        object.__setattr__(self, "periods", periods)

    @property
    def dim(self) -> int:
        return len(self.coord_names)

    def index(self, name_or_index) -> int:
        if isinstance(name_or_index, (int, np.integer)):
            i = int(name_or_index)
            if not 0 <= i < self.dim:
                raise IndexError(f"coordinate index {i} out of range for dim {self.dim}")
            return i
        try:
            return self.coord_names.index(name_or_index)
        except ValueError:
            raise KeyError(f"chart has no coordinate named {name_or_index!r}") from None

    def coord(self, name_or_index) -> "ScalarField":
        return Coordinate(self, self.index(name_or_index))

    def coords(self):
        return tuple(Coordinate(self, i) for i in range(self.dim))

    def const(self, value: float) -> "ScalarField":
        return Constant(self, float(value))

    def reduce(self, points: np.ndarray) -> np.ndarray:
        """Reduce periodic coordinates into [lo, lo + period) when lo is finite."""
        pts = np.array(points, dtype=float, copy=True)
        for i, (m, p) in enumerate(zip(self.periodic_mask, self.periods)):
            if m:
                lo = self.domain_box[i][0]
                base = lo if math.isfinite(lo) else 0.0
                pts[..., i] = base + np.mod(pts[..., i] - base, p)
        return pts

    def check_points(self, points: np.ndarray) -> None:
        pts = np.atleast_2d(points)
        if pts.shape[-1] != self.dim:
            raise DomainError(f"points have {pts.shape[-1]} coordinates, chart {self.name or self.coord_names} has {self.dim}")
        if not np.all(np.isfinite(pts)):
            raise DomainError("points contain non-finite coordinates")
        for i, (lo, hi) in enumerate(self.domain_box):
            if self.periodic_mask[i]:
                continue
            bad = (pts[:, i] <= lo) | (pts[:, i] >= hi)
            if np.any(bad):
                k = int(np.argmax(bad))
                raise DomainError(
                    f"coordinate {self.coord_names[i]}={float(pts[k, i])!r} violates its domain interval ({lo}, {hi})"
                )

    def sample(self, rng: np.random.Generator, n: int, box=None) -> np.ndarray:
        """Uniform samples in ``box`` (defaults to the domain box, which must then be finite)."""
        box = self.domain_box if box is None else box
        lo = np.array([b[0] for b in box], dtype=float)
        hi = np.array([b[1] for b in box], dtype=float)
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("sampling needs a finite box")
        u = rng.random((n, self.dim))
        # keep clear of the boundary so open intervals are respected
        u = 1e-9 + (1.0 - 2e-9) * u
        return lo + (hi - lo) * u

    def reference_point(self) -> np.ndarray:
        """A fixed interior point: midpoints of finite intervals, one unit inside half-lines, 0 otherwise."""
        out = []
        for lo, hi in self.domain_box:
            if math.isfinite(lo) and math.isfinite(hi):
                out.append(0.5 * (lo + hi))
            elif math.isfinite(lo):
                out.append(lo + 1.0)
            elif math.isfinite(hi):
                out.append(hi - 1.0)
            else:
                out.append(0.0)
        return np.array(out)

    def subchart(self, axes: Sequence[int], name: str = "") -> "Chart":
        axes = [self.index(a) for a in axes]
        return Chart(
            tuple(self.coord_names[a] for a in axes),
            tuple(self.domain_box[a] for a in axes),
            tuple(self.periodic_mask[a] for a in axes),
            tuple(self.periods[a] for a in axes),
            name=name,
        )


@dataclass(frozen=True)
class Point:
    chart: Chart
    coords: np.ndarray = field(repr=True)

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float).reshape(-1)
        if c.shape[0] != self.chart.dim:
            raise DomainError(f"point has {c.shape[0]} coordinates, chart has {self.chart.dim}")
        c = self.chart.reduce(c)
        self.chart.check_points(c[None, :])
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)


# ---------------------------------------------------------------------------
# jets


class Jet2:
    """Value, gradient and Hessian of a batch of scalars.

    ``value`` has shape (N,), ``gradient`` (N, D) and ``hessian`` (N, D, D).
    Lower-order jets leave the higher entries as ``None``.
    """

    __slots__ = ("value", "gradient", "hessian")

    def __init__(self, value, gradient=None, hessian=None):
        self.value = value
        self.gradient = gradient
        self.hessian = hessian

    @property
    def order(self) -> int:
        if self.hessian is not None:
            return 2
        if self.gradient is not None:
            return 1
        return 0

    def truncate(self, order: int) -> "Jet2":
        if order >= self.order:
            return self
        return Jet2(self.value, self.gradient if order >= 1 else None, None)

    def squeeze(self) -> "Jet2":
        """Drop the batch axis of a single-point jet."""
        return Jet2(
            float(self.value[0]),
            None if self.gradient is None else self.gradient[0],
            None if self.hessian is None else self.hessian[0],
        )

    def __repr__(self):
        return f"Jet2(value={self.value!r}, gradient={self.gradient!r}, hessian={self.hessian!r})"


def jet_zero(n: int, dim: int, order: int) -> Jet2:
    return Jet2(
        np.zeros(n),
        np.zeros((n, dim)) if order >= 1 else None,
        np.zeros((n, dim, dim)) if order >= 2 else None,
    )


def jet_add(a: Jet2, b: Jet2) -> Jet2:
    return Jet2(
        a.value + b.value,
        None if a.gradient is None else a.gradient + b.gradient,
        None if a.hessian is None else a.hessian + b.hessian,
    )


def jet_scale(a: Jet2, c) -> Jet2:
    c = np.asarray(c)
    cg = c[..., None] if c.ndim else c
    ch = c[..., None, None] if c.ndim else c
    return Jet2(
        a.value * c,
        None if a.gradient is None else a.gradient * cg,
        None if a.hessian is None else a.hessian * ch,
    )


def jet_mul(a: Jet2, b: Jet2) -> Jet2:
    v = a.value * b.value
    if a.gradient is None:
        return Jet2(v)
    av = a.value[:, None]
    bv = b.value[:, None]
    g = av * b.gradient + bv * a.gradient
    if a.hessian is None:
        return Jet2(v, g)
    cross = a.gradient[:, :, None] * b.gradient[:, None, :]
    h = av[:, :, None] * b.hessian + bv[:, :, None] * a.hessian + cross + np.swapaxes(cross, 1, 2)
    return Jet2(v, g, h)


def jet_compose(a: Jet2, f0, f1, f2) -> Jet2:
    """Chain rule for y = f(a) given f, f', f'' evaluated at a.value."""
    if a.gradient is None:
        return Jet2(f0)
    g = f1[:, None] * a.gradient
    if a.hessian is None:
        return Jet2(f0, g)
    # form the outer product first so the result is exactly symmetric
    outer = a.gradient[:, :, None] * a.gradient[:, None, :]
    h = f1[:, None, None] * a.hessian + f2[:, None, None] * outer
    return Jet2(f0, g, h)


# ---------------------------------------------------------------------------
# evaluation context


class EvalContext:
    """Batch of points plus a memo so shared subtrees are evaluated once."""

    def __init__(self, chart: Chart, points: np.ndarray):
        self.chart = chart
        self.points = points
        self.n = points.shape[0]
        self.memo: Dict[int, Tuple[object, object]] = {}

    def get(self, node, order):
        hit = self.memo.get(id(node))
        if hit is not None and hit[1] is node:
            result = hit[0]
            if _result_order(result) >= order:
                return _truncate_result(result, order)
        result = node._compute(self, order)
        self.memo[id(node)] = (result, node)
        return result


def _result_order(result):
    if isinstance(result, Jet2):
        return result.order
    return result[1]


def _truncate_result(result, order):
    if isinstance(result, Jet2):
        return result.truncate(order)
    return result


def as_points(chart: Chart, p) -> Tuple[np.ndarray, bool]:
    """Normalize a Point, (D,) array or (N, D) array; returns (points, single)."""
    if isinstance(p, Point):
        if p.chart != chart:
            raise ChartMismatchError("point belongs to a different chart")
        return p.coords[None, :].copy(), True
    arr = np.asarray(p, dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    return chart.reduce(arr), single


# ---------------------------------------------------------------------------
# scalar fields


Number = Union[int, float, np.floating, np.integer]


class ScalarField:
    """Base class of all field expression nodes."""

    __slots__ = ("chart",)

    def __init__(self, chart: Chart):
        self.chart = chart

    # evaluation -------------------------------------------------------------
    def _compute(self, ctx: EvalContext, order: int) -> Jet2:
        raise NotImplementedError

    def jet(self, ctx: EvalContext, order: int) -> Jet2:
        return ctx.get(self, order)

    def __call__(self, p, order: int = 0):
        """Convenience: values at points (order 0) or full jets."""
        j = evaluate(self, p, order=order)
        return j.value if order == 0 else j

    # symbolic derivative ----------------------------------------------------
    def diff(self, i) -> "ScalarField":
        i = self.chart.index(i)
        d = self._diff(i)
        if d is None:
            d = PartialDerivative(self, i)
        return d

    def _diff(self, i: int) -> Optional["ScalarField"]:
        return None

    @property
    def is_zero(self) -> bool:
        return False

    # arithmetic ---------------------------------------------------------------
    def _wrap(self, other) -> "ScalarField":
        if isinstance(other, ScalarField):
            if other.chart != self.chart:
                raise ChartMismatchError(
                    f"fields live on different charts: {self.chart.coord_names} vs {other.chart.coord_names}"
                )
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Constant(self.chart, float(other))
        return NotImplemented

    def __add__(self, other):
        o = self._wrap(other)
        if o is NotImplemented:
            return o
        return add(self, o)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._wrap(other)
        if o is NotImplemented:
            return o
        return add(self, negate(o))

    def __rsub__(self, other):
        o = self._wrap(other)
        if o is NotImplemented:
            return o
        return add(o, negate(self))

    def __mul__(self, other):
        o = self._wrap(other)
        if o is NotImplemented:
            return o
        return mul(self, o)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._wrap(other)
        if o is NotImplemented:
            return o
        return divide(self, o)

    def __rtruediv__(self, other):
        o = self._wrap(other)
        if o is NotImplemented:
            return o
        return divide(o, self)

    def __neg__(self):
        return negate(self)

    def __pow__(self, exponent):
        if isinstance(exponent, ScalarField):
            return exp(mul(exponent, log(self)))
        return power(self, float(exponent))

    def __rpow__(self, base):
        return exp(mul(self, Constant(self.chart, math.log(float(base)))))


class Constant(ScalarField):
    __slots__ = ("c",)

    def __init__(self, chart: Chart, c: float):
        super().__init__(chart)
        self.c = float(c)

    @property
    def is_zero(self):
        return self.c == 0.0

    def _compute(self, ctx, order):
        j = jet_zero(ctx.n, self.chart.dim, order)
        j.value[:] = self.c
        return j

    def _diff(self, i):
        return Constant(self.chart, 0.0)

    def __repr__(self):
        return f"{self.c!r}"


class Coordinate(ScalarField):
    __slots__ = ("i",)

    def __init__(self, chart: Chart, i: int):
        super().__init__(chart)
        self.i = int(i)

    def _compute(self, ctx, order):
        j = jet_zero(ctx.n, self.chart.dim, order)
        j.value[:] = ctx.points[:, self.i]
        if order >= 1:
            j.gradient[:, self.i] = 1.0
        return j

    def _diff(self, i):
        return Constant(self.chart, 1.0 if i == self.i else 0.0)

    def __repr__(self):
        return self.chart.coord_names[self.i]


class Sum(ScalarField):
    __slots__ = ("terms",)

    def __init__(self, terms: Sequence[ScalarField]):
        super().__init__(terms[0].chart)
        self.terms = tuple(terms)

    def _compute(self, ctx, order):
        acc = ctx.get(self.terms[0], order)
        for t in self.terms[1:]:
            acc = jet_add(acc, ctx.get(t, order))
        return acc

    def _diff(self, i):
        return sum_of([t.diff(i) for t in self.terms], self.chart)

    def __repr__(self):
        return "(" + " + ".join(map(repr, self.terms)) + ")"


class Product(ScalarField):
    __slots__ = ("factors",)

    def __init__(self, factors: Sequence[ScalarField]):
        super().__init__(factors[0].chart)
        self.factors = tuple(factors)

    def _compute(self, ctx, order):
        acc = ctx.get(self.factors[0], order)
        for f in self.factors[1:]:
            acc = jet_mul(acc, ctx.get(f, order))
        return acc

    def _diff(self, i):
        terms = []
        for k, f in enumerate(self.factors):
            df = f.diff(i)
            if df.is_zero:
                continue
            others = [g for m, g in enumerate(self.factors) if m != k]
            terms.append(product_of(others + [df], self.chart))
        return sum_of(terms, self.chart)

    def __repr__(self):
        return "*".join(map(repr, self.factors))


class Power(ScalarField):
    """base ** exponent with a real constant exponent."""

    __slots__ = ("base", "exponent")

    def __init__(self, base: ScalarField, exponent: float):
        super().__init__(base.chart)
        self.base = base
        self.exponent = float(exponent)

    def _compute(self, ctx, order):
        b = ctx.get(self.base, order)
        x = b.value
        p = self.exponent
        integral = p == round(p)
        if p < 0 and np.any(np.abs(x) < TINY_DENOMINATOR):
            k = int(np.argmax(np.abs(x) < TINY_DENOMINATOR))
            raise EvaluationError(f"division by |{float(x[k])!r}| < {TINY_DENOMINATOR}", ctx.points[k])
        if not integral and np.any(x < 0):
            k = int(np.argmax(x < 0))
            raise EvaluationError(f"non-integer power {p} of negative value {float(x[k])!r}", ctx.points[k])
        f0 = x ** p
        if order == 0:
            return Jet2(f0)
        f1 = p * x ** (p - 1) if p != 0 else np.zeros_like(x)
        f2 = p * (p - 1) * x ** (p - 2) if p not in (0.0, 1.0) else np.zeros_like(x)
        return jet_compose(b, f0, f1, f2)

    def _diff(self, i):
        db = self.base.diff(i)
        if db.is_zero:
            return Constant(self.chart, 0.0)
        p = self.exponent
        return product_of([Constant(self.chart, p), power(self.base, p - 1.0), db], self.chart)

    def __repr__(self):
        return f"({self.base!r})**{self.exponent!r}"


@dataclass(frozen=True, eq=False)
class UnivariateFunction:
    """A smooth real function with value and two derivatives.

    ``evaluate`` maps an array x to (f, f', f'').  ``derivative`` builds the
    field f'(a) from the argument field a, which is what symbolic
    differentiation uses; it may itself apply another registered function.
    """

    name: str
    evaluate: Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray, np.ndarray]]
    derivative: Optional[Callable[[ScalarField], ScalarField]] = None
    domain: Tuple[float, float] = (-math.inf, math.inf)

    def __call__(self, a: ScalarField) -> ScalarField:
        return Apply(self, a)


class Apply(ScalarField):
    __slots__ = ("fn", "arg")

    def __init__(self, fn: UnivariateFunction, arg: ScalarField):
        super().__init__(arg.chart)
        self.fn = fn
        self.arg = arg

    def _compute(self, ctx, order):
        a = ctx.get(self.arg, order)
        lo, hi = self.fn.domain
        x = a.value
        bad = ~((x > lo) & (x < hi)) if (math.isfinite(lo) or math.isfinite(hi)) else None
        if bad is not None and np.any(bad):
            k = int(np.argmax(bad))
            raise DomainError(
                f"argument {float(x[k])!r} of {self.fn.name} violates its domain interval ({lo}, {hi}) "
                f"at point {ctx.points[k].tolist()}"
            )
        f0, f1, f2 = self.fn.evaluate(x)
        return jet_compose(a, f0, f1, f2)

    def _diff(self, i):
        da = self.arg.diff(i)
        if da.is_zero:
            return Constant(self.chart, 0.0)
        if self.fn.derivative is None:
            return None
        return mul(self.fn.derivative(self.arg), da)

    def __repr__(self):
        return f"{self.fn.name}({self.arg!r})"


class PartialDerivative(ScalarField):
    """Fallback derivative that shifts a jet of the child down by one order."""

    __slots__ = ("child", "i")

    def __init__(self, child: ScalarField, i: int):
        super().__init__(child.chart)
        self.child = child
        self.i = i

    def _compute(self, ctx, order):
        if order >= 2:
            raise OrderError(
                f"partial derivative of {type(self.child).__name__} along {self.chart.coord_names[self.i]} "
                "has no symbolic rule and only supports order <= 1"
            )
        c = ctx.get(self.child, order + 1)
        v = c.gradient[:, self.i]
        if order == 0:
            return Jet2(v.copy())
        return Jet2(v.copy(), c.hessian[:, self.i, :].copy())

    def __repr__(self):
        return f"d{self.chart.coord_names[self.i]}({self.child!r})"


# ---------------------------------------------------------------------------
# smart constructors (identity folding only)


def _check_same_chart(fields):
    c = fields[0].chart
    for f in fields[1:]:
        if f.chart != c:
            raise ChartMismatchError(f"fields live on different charts: {c.coord_names} vs {f.chart.coord_names}")
    return c


def sum_of(terms: Sequence[ScalarField], chart: Chart) -> ScalarField:
    flat = []
    const = 0.0
    for t in terms:
        if t.chart != chart:
            raise ChartMismatchError("term on a different chart")
        if isinstance(t, Constant):
            const += t.c
        elif isinstance(t, Sum):
            flat.extend(t.terms)
        else:
            flat.append(t)
    if const != 0.0:
        flat.append(Constant(chart, const))
    if not flat:
        return Constant(chart, 0.0)
    if len(flat) == 1:
        return flat[0]
    return Sum(flat)


def product_of(factors: Sequence[ScalarField], chart: Chart) -> ScalarField:
    flat = []
    const = 1.0
    for f in factors:
        if f.chart != chart:
            raise ChartMismatchError("factor on a different chart")
        if isinstance(f, Constant):
            const *= f.c
        elif isinstance(f, Product):
            flat.extend(f.factors)
        else:
            flat.append(f)
    if const == 0.0:
        return Constant(chart, 0.0)
    if const != 1.0:
        flat.insert(0, Constant(chart, const))
    if not flat:
        return Constant(chart, 1.0)
    if len(flat) == 1:
        return flat[0]
    return Product(flat)


def add(a: ScalarField, b: ScalarField) -> ScalarField:
    chart = _check_same_chart([a, b])
    return sum_of([a, b], chart)


def mul(a: ScalarField, b: ScalarField) -> ScalarField:
    chart = _check_same_chart([a, b])
    return product_of([a, b], chart)


def negate(a: ScalarField) -> ScalarField:
    if isinstance(a, Constant):
        return Constant(a.chart, -a.c)
    return product_of([Constant(a.chart, -1.0), a], a.chart)


def power(a: ScalarField, p: float) -> ScalarField:
    p = float(p)
    if p == 0.0:
        return Constant(a.chart, 1.0)
    if p == 1.0:
        return a
    if isinstance(a, Constant):
        if a.c < 0 and p != round(p):
            raise EvaluationError(f"non-integer power {p} of negative constant {a.c}")
        if a.c == 0.0 and p < 0:
            raise EvaluationError("negative power of zero constant")
        return Constant(a.chart, a.c ** p)
    if isinstance(a, Power):
        # (b**q)**p = b**(pq) is only safe when the inner power keeps the sign
        q = a.exponent
        if q == round(q) and int(q) % 2 == 1 or p == round(p):
            return Power(a.base, q * p)
    return Power(a, p)


def divide(a: ScalarField, b: ScalarField) -> ScalarField:
    chart = _check_same_chart([a, b])
    if isinstance(b, Constant):
        if abs(b.c) < TINY_DENOMINATOR:
            raise EvaluationError(f"division by constant {b.c}")
        return product_of([a, Constant(chart, 1.0 / b.c)], chart)
    return product_of([a, power(b, -1.0)], chart)


def field_arith(op: str, a: ScalarField, b=None) -> ScalarField:
    """Dispatch form of the field arithmetic: add, mul, div, pow, compose_univariate."""
    if op == "add":
        return a + b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    if op == "pow":
        return a ** b
    if op == "compose_univariate":
        if isinstance(b, str):
            b = univariate(b)
        return Apply(b, a)
    raise ValueError(f"unknown field operation {op!r}")


# ---------------------------------------------------------------------------
# univariate registry

_REGISTRY: Dict[str, UnivariateFunction] = {}


def register_univariate(fn: UnivariateFunction, replace: bool = False) -> UnivariateFunction:
    if fn.name in _REGISTRY and not replace and _REGISTRY[fn.name] is not fn:
        raise ValueError(f"univariate function {fn.name!r} already registered")
    _REGISTRY[fn.name] = fn
    return fn


def univariate(name: str) -> UnivariateFunction:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise KeyError(f"no univariate function registered as {name!r}; known: {sorted(_REGISTRY)}") from None


def registered_names():
    return sorted(_REGISTRY)


def _sin_eval(x):
    s = np.sin(x)
    return s, np.cos(x), -s


def _cos_eval(x):
    c = np.cos(x)
    return c, -np.sin(x), -c


def _exp_eval(x):
    e = np.exp(x)
    return e, e, e


def _log_eval(x):
    return np.log(x), 1.0 / x, -1.0 / (x * x)


def _atan_eval(x):
    q = 1.0 / (1.0 + x * x)
    return np.arctan(x), q, -2.0 * x * q * q


SIN = register_univariate(UnivariateFunction("sin", _sin_eval, lambda a: cos(a)))
COS = register_univariate(UnivariateFunction("cos", _cos_eval, lambda a: negate(sin(a))))
EXP = register_univariate(UnivariateFunction("exp", _exp_eval, lambda a: exp(a)))
LOG = register_univariate(UnivariateFunction("log", _log_eval, lambda a: power(a, -1.0), domain=(0.0, math.inf)))
ATAN = register_univariate(
    UnivariateFunction("atan", _atan_eval, lambda a: power(add(Constant(a.chart, 1.0), mul(a, a)), -1.0))
)


def sin(a: ScalarField) -> ScalarField:
    return Apply(SIN, a)


def cos(a: ScalarField) -> ScalarField:
    return Apply(COS, a)


def exp(a: ScalarField) -> ScalarField:
    if isinstance(a, Constant):
        return Constant(a.chart, math.exp(a.c))
    return Apply(EXP, a)


def log(a: ScalarField) -> ScalarField:
    if isinstance(a, Constant):
        if a.c <= 0:
            raise EvaluationError(f"log of non-positive constant {a.c}")
        return Constant(a.chart, math.log(a.c))
    return Apply(LOG, a)


def atan(a: ScalarField) -> ScalarField:
    return Apply(ATAN, a)


def sqrt(a: ScalarField) -> ScalarField:
    return power(a, 0.5)


# ---------------------------------------------------------------------------
# evaluation entry points


def evaluate(f: ScalarField, p, order: int = 2, check_domain: bool = True) -> Jet2:
    """Jet of ``f`` at a Point, a (D,) array or an (N, D) batch.

    A single point gives an unbatched jet (float value, (D,) gradient,
    (D, D) Hessian); a batch gives arrays with a leading N axis.
    """
    if order not in (0, 1, 2):
        raise OrderError(f"jet order must be 0, 1 or 2, got {order}")
    pts, single = as_points(f.chart, p)
    if check_domain:
        f.chart.check_points(pts)
    ctx = EvalContext(f.chart, pts)
    j = ctx.get(f, order)
    j = Jet2(
        np.array(j.value, dtype=float),
        None if j.gradient is None else np.array(j.gradient, dtype=float),
        None if j.hessian is None else np.array(j.hessian, dtype=float),
    )
    return j.squeeze() if single else j


def evaluate_many(fields: Sequence[ScalarField], points, order: int = 0, check_domain: bool = True):
    """Evaluate several fields sharing one memo; returns a list of jets."""
    if not fields:
        return []
    chart = _check_same_chart(list(fields))
    pts, _ = as_points(chart, points)
    if check_domain:
        chart.check_points(pts)
    ctx = EvalContext(chart, pts)
    return [ctx.get(f, order) for f in fields]


def values(f: ScalarField, points) -> np.ndarray:
    return evaluate(f, points, order=0).value
