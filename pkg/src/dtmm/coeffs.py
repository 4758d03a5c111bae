"""Coefficient functions, problem definitions and the problem-file format."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from . import expr as ex
from .errors import CoeffDomainError, ParseError

METHODS = ("ode", "exp")


@dataclass(frozen=True)
class CoeffFn:
    """One coefficient a_m(x) as a parsed expression tree."""

    expr: ex.Node
    source_text: str

    @classmethod
    def parse(cls, text):
        return cls(ex.parse(text), text.strip())

    @classmethod
    def from_node(cls, node):
        return cls(node, ex.to_text(node))

    @classmethod
    def constant(cls, value):
        return cls.from_node(ex.Num(complex(value)))

    def __call__(self, x):
        """Evaluate at scalar or array x (complex result, same shape)."""
        return ex.evaluate(self.expr, x)

    @cached_property
    def derivative(self):
        return CoeffFn.from_node(ex.diff(self.expr))

    def to_text(self):
        return ex.to_text(self.expr)

    @property
    def is_zero(self):
        return isinstance(self.expr, ex.Num) and self.expr.value == 0


@dataclass(frozen=True)
class SolverOptions:
    """Numerical knobs.

    ``step`` of ``None`` means 1e-3 of the domain length. ``degeneracy_eps``
    is relative: two roots are degenerate when closer than
    ``degeneracy_eps * (1 + max |k_i|)``. ``jump_half_width`` of ``None``
    means 1e-3 (absolute).
    """

    step: float | None = None
    degeneracy_eps: float = 1e-6
    jump_half_width: float | None = None
    method: str = "ode"
    quadrature_points: int = 64

    def __post_init__(self):
        if self.step is not None and not self.step > 0:
            raise ValueError("step must be positive")
        if not self.degeneracy_eps > 0:
            raise ValueError("degeneracy_eps must be positive")
        if self.jump_half_width is not None and not self.jump_half_width > 0:
            raise ValueError("jump_half_width must be positive")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.quadrature_points < 2:
            raise ValueError("quadrature_points must be at least 2")


@dataclass(frozen=True)
class Problem:
    """f^(n) + a_{n-1} f^(n-1) + ... + a_0 f = 0 on a real interval."""

    order: int
    coeffs: tuple
    domain: tuple
    options: SolverOptions = field(default_factory=SolverOptions)
    ic: tuple | None = None
    grid: int | None = None

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("order must be >= 1")
        if len(self.coeffs) != self.order:
            raise ValueError(
                f"order {self.order} needs {self.order} coefficients, got {len(self.coeffs)}"
            )
        lo, hi = self.domain
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise ValueError(f"empty or invalid domain [{lo}, {hi}]")
        if self.ic is not None and len(self.ic) != self.order:
            raise ValueError(f"ic needs {self.order} values, got {len(self.ic)}")

    @classmethod
    def from_strings(cls, coeffs, domain, options=None, **kw):
        """``Problem.from_strings(["x"], (-2, 2))`` for f' + x f = 0."""
        fns = tuple(c if isinstance(c, CoeffFn) else CoeffFn.parse(str(c)) for c in coeffs)
        return cls(len(fns), fns, (float(domain[0]), float(domain[1])),
                   options or SolverOptions(), **kw)

    @property
    def n(self):
        return self.order

    @property
    def step(self):
        if self.options.step is not None:
            return self.options.step
        return 1e-3 * (self.domain[1] - self.domain[0])

    @property
    def jump_half_width(self):
        if self.options.jump_half_width is not None:
            return self.options.jump_half_width
        return 1e-3

    def with_options(self, **kw):
        return replace(self, options=replace(self.options, **kw))


def eval_coeffs(p, x):
    """(a_0(x), ..., a_{n-1}(x)); for array x the result has shape (n, *x.shape)."""
    return _eval_all(p.coeffs, x)


def eval_coeff_derivs(p, x):
    """(a_0'(x), ..., a_{n-1}'(x)) via symbolic differentiation."""
    return _eval_all([c.derivative for c in p.coeffs], x)


def _eval_all(fns, x):
    x = np.asarray(x, dtype=complex)
    out = np.empty((len(fns),) + x.shape, dtype=complex)
    for m, fn in enumerate(fns):
        v = fn(x)
        bad = ~np.isfinite(v)
        if bad.any():
            where = x[bad][0] if x.ndim else complex(x)
            raise CoeffDomainError(m, _pretty_x(where))
        out[m] = v
    return out


def _pretty_x(x):
    x = complex(x)
    return x.real if x.imag == 0 else x


# -- a_{n-1} elimination ---------------------------------------------------------

class WeightFunction:
    """w(x) = exp(-(1/n) * integral_{anchor}^{x} a_{n-1}(t) dt), by Gauss-Legendre."""

    def __init__(self, coeff, order, anchor, nodes=64):
        self.coeff = coeff
        self.order = order
        self.anchor = float(anchor)
        self._t, self._w = np.polynomial.legendre.leggauss(nodes)

    def log(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        half = 0.5 * (x - self.anchor)
        mid = 0.5 * (x + self.anchor)
        pts = mid[:, None] + half[:, None] * self._t[None, :]
        vals = self.coeff(pts)
        integral = half * (vals @ self._w)
        return -integral / self.order

    def __call__(self, x):
        scalar = np.ndim(x) == 0
        out = np.exp(self.log(x))
        return complex(out[0]) if scalar else out

    def log_derivative(self):
        """w'/w as a CoeffFn."""
        return CoeffFn.from_node(ex.div(ex.neg(self.coeff.expr), ex.Num(complex(self.order))))


def _ratio_derivs(phi, count, sign=1):
    # P_0 = 1, P_{q+1} = P_q' + sign*phi*P_q  gives w^(q)/w (sign=+1) or w*(1/w)^(q) (sign=-1)
    out = [ex.Num(1 + 0j)]
    for _ in range(count):
        prev = out[-1]
        term = ex.mul(phi, prev)
        out.append(ex.add(ex.diff(prev), term) if sign > 0 else ex.sub(ex.diff(prev), term))
    return out


def normalize_form(p):
    """Substitute f = w h so that h's equation has no h^(n-1) term.

    Returns ``(problem_for_h, w)`` where ``w`` is a :class:`WeightFunction`
    anchored at the left end of the domain.
    """
    n = p.order
    if n < 2:
        raise ValueError("normalize_form needs order >= 2")
    top = p.coeffs[n - 1]
    w = WeightFunction(top, n, p.domain[0], nodes=max(p.options.quadrature_points, 16))
    if top.is_zero:
        return p, w
    phi = w.log_derivative().expr
    ratios = _ratio_derivs(phi, n)
    a = [c.expr for c in p.coeffs] + [ex.Num(1 + 0j)]
    new = []
    for r in range(n):
        total = ex.Num(0j)
        for m in range(r, n + 1):
            total = ex.add(total, ex.mul(ex.mul(ex.Num(complex(math.comb(m, r))), a[m]), ratios[m - r]))
        new.append(total)
    new[n - 1] = ex.Num(0j)
    coeffs = tuple(CoeffFn.from_node(node) for node in new)
    return replace(p, coeffs=coeffs, ic=None), w


def transform_ic(p, w, x0, derivs):
    """Map (f, f', ...) at x0 to (h, h', ...) for f = w h."""
    n = p.order
    phi = w.log_derivative().expr
    inv = _ratio_derivs(phi, n - 1, sign=-1)  # w * (1/w)^(q)
    inv_vals = [complex(ex.evaluate(node, x0)) for node in inv]
    w0 = w(x0)
    out = []
    for m in range(n):
        s = 0j
        for r in range(m + 1):
            s += math.comb(m, r) * inv_vals[m - r] * derivs[r]
        out.append(s / w0)
    return np.array(out)


# -- problem files -------------------------------------------------------------

def parse_complex(text):
    """Complex literal such as ``2``, ``-0.5j``, ``1+2j`` or ``-j``."""
    t = text.strip().replace(" ", "")
    try:
        c = complex(t)
    except ValueError:
        raise ValueError(f"bad complex literal {text!r}") from None
    if not (math.isfinite(c.real) and math.isfinite(c.imag)):
        raise ValueError(f"non-finite literal {text!r}")
    return c


def _parse_list(value, line, col):
    v = value.strip()
    if not (v.startswith("[") and v.endswith("]")):
        raise ParseError("expected a bracketed list", line, col)
    body = v[1:-1].strip()
    return [s for s in (part.strip() for part in body.split(",")) if s] if body else []


def _split_statements(text):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        col = 1
        for chunk in line.split(";"):
            if chunk.strip():
                lead = len(chunk) - len(chunk.lstrip())
                yield lineno, col + lead, chunk.strip()
            col += len(chunk) + 1


def parse_problem(text):
    """Parse the line-oriented ``key = value`` problem format.

    >>> p = parse_problem("order=2; a0=1; domain=[0,6.283185]")
    >>> p.order, p.coeffs[0].source_text
    (2, '1')
    """
    raw = {}
    where = {}
    keyat = {}
    for lineno, col, stmt in _split_statements(text):
        if "=" not in stmt:
            raise ParseError(f"expected 'key = value', got {stmt!r}", lineno, col)
        key, value = stmt.split("=", 1)
        key = key.strip()
        if not re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", key):
            raise ParseError(f"bad key {key!r}", lineno, col)
        if key in raw:
            raise ParseError(f"duplicate key {key!r}", lineno, col)
        vcol = col + stmt.index("=") + 1 + (len(value) - len(value.lstrip()))
        raw[key] = value.strip()
        where[key] = (lineno, vcol)
        keyat[key] = (lineno, col)

    def loc(k):
        return where.get(k, (None, None))

    if "order" not in raw:
        raise ParseError("missing 'order'")
    try:
        order = int(raw["order"])
    except ValueError:
        raise ParseError(f"order must be an integer, got {raw['order']!r}", *loc("order")) from None
    if order < 1:
        raise ParseError("order must be >= 1", *loc("order"))

    coeff_keys = sorted((k for k in raw if re.fullmatch(r"a\d+", k)), key=lambda k: int(k[1:]))
    extra = [k for k in coeff_keys if int(k[1:]) >= order]
    if extra or not coeff_keys:
        raise ParseError(
            f"order mismatch: order={order} takes coefficients a0..a{order - 1}, got "
            f"{', '.join(coeff_keys) or 'none'}",
            *(keyat[extra[0]] if extra else loc("order")),
        )
    # omitted coefficients are identically zero
    coeffs = [CoeffFn.constant(0) for _ in range(order)]
    for k in coeff_keys:
        try:
            coeffs[int(k[1:])] = CoeffFn.parse(raw[k])
        except ParseError as err:
            line, col = loc(k)
            raise ParseError(str(err).split(": ", 1)[-1], line, col + (err.col or 1) - 1) from None

    if "domain" not in raw:
        raise ParseError("missing 'domain'")
    items = _parse_list(raw["domain"], *loc("domain"))
    try:
        lo, hi = (float(ex.evaluate(ex.parse(s), 0.0).real) for s in items)
    except (ValueError, ParseError):
        raise ParseError("domain must be [lo, hi]", *loc("domain")) from None
    if not lo < hi:
        raise ParseError(f"empty domain [{lo}, {hi}]", *loc("domain"))

    opts = {}
    for key, conv in (("step", float), ("degeneracy_eps", float), ("jump_half_width", float),
                      ("quadrature_points", int)):
        if key in raw:
            try:
                opts[key] = conv(raw[key])
            except ValueError:
                raise ParseError(f"bad value for {key}: {raw[key]!r}", *loc(key)) from None
    if "method" in raw:
        if raw["method"] not in METHODS:
            raise ParseError(f"method must be 'ode' or 'exp', got {raw['method']!r}", *loc("method"))
        opts["method"] = raw["method"]
    try:
        options = SolverOptions(**opts)
    except ValueError as err:
        raise ParseError(str(err)) from None

    ic = None
    if "ic" in raw:
        try:
            ic = tuple(parse_complex(s) for s in _parse_list(raw["ic"], *loc("ic")))
        except ValueError as err:
            raise ParseError(str(err), *loc("ic")) from None
        if len(ic) != order:
            raise ParseError(f"ic needs {order} values, got {len(ic)}", *loc("ic"))
    grid = None
    if "grid" in raw:
        try:
            grid = int(raw["grid"])
        except ValueError:
            raise ParseError(f"grid must be an integer, got {raw['grid']!r}", *loc("grid")) from None
        if grid < 2:
            raise ParseError("grid needs at least 2 samples", *loc("grid"))

    known = {"order", "domain", "ic", "grid", "step", "method", "degeneracy_eps",
             "jump_half_width", "quadrature_points", *coeff_keys}
    for k in raw:
        if k not in known:
            raise ParseError(f"unknown key {k!r}", *keyat[k])

    return Problem(order, tuple(coeffs), (lo, hi), options, ic=ic, grid=grid)


def problem_to_text(p):
    """Inverse of parse_problem (coefficients use their canonical text)."""
    lines = [f"order = {p.order}"]
    lines += [f"a{m} = {c.source_text}" for m, c in enumerate(p.coeffs)]
    lines.append(f"domain = [{p.domain[0]!r}, {p.domain[1]!r}]")
    o = p.options
    if o.step is not None:
        lines.append(f"step = {o.step!r}")
    if o.jump_half_width is not None:
        lines.append(f"jump_half_width = {o.jump_half_width!r}")
    lines.append(f"degeneracy_eps = {o.degeneracy_eps!r}")
    lines.append(f"method = {o.method}")
    if p.ic is not None:
        lines.append("ic = [" + ", ".join(_complex_text(c) for c in p.ic) + "]")
    if p.grid is not None:
        lines.append(f"grid = {p.grid}")
    return "\n".join(lines) + "\n"


def _complex_text(c):
    c = complex(c)
    if c.imag == 0:
        return repr(c.real)
    sign = "+" if c.imag >= 0 else "-"
    return f"{c.real!r}{sign}{abs(c.imag)!r}j"
