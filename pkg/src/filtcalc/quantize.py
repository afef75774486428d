"""Quantization of symbols into operators on a chart.

Differential symbols sum_alpha c_alpha <X>^alpha act by
f -> sum c_alpha (L^alpha (f o exp_x))(0), where the L_j are the
left-invariant fields of the osculating group at x.  Smoothing symbols are
kernels kappa_x(v) acting by f -> int kappa_x(v) (chi_x f)(exp_x(-v)) dv.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import expr as E
from .chart import block_diagonal, eval_point, transition
from .expmap import FlowConfig, exp_flow, osculating_law
from .graded import quasinorm
from .group import apply_left_monomial, left_derivative_fd, word_of
from .poly import Poly
from .uea import UEAElement


class QuadratureError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Symbols


@dataclass(frozen=True)
class SmoothingSymbol:
    """A kernel expression in x and v, considered supported in ``box`` (v-space)."""

    expr: E.Expr
    box: tuple

    @classmethod
    def parse(cls, text, box):
        return cls(E.parse(text), tuple(tuple(float(a) for a in b) for b in box))

    def evaluate(self, x, vs):
        """Kernel values at fixed x for an array of v of shape (B, n)."""
        xs = [float(a) for a in x]
        cols = [vs[:, i] for i in range(vs.shape[1])]
        out = E.compile_expr(self.expr)(xs, cols)
        return np.broadcast_to(np.asarray(out, dtype=float), (vs.shape[0],))


def _coeff_at(c, x):
    if isinstance(c, E.Expr):
        return eval_point(c, tuple(x))
    return c


def symbol_terms(symbol, x=None):
    """Normalize a differential symbol to {alpha: numeric coefficient at x}."""
    if isinstance(symbol, UEAElement):
        return dict(symbol.coeffs)
    return {tuple(a): _coeff_at(c, x) for a, c in symbol.items()}


# ---------------------------------------------------------------------------
# Cut-offs


def smooth_step(s):
    """C-infinity transition: 1 for s <= 0, 0 for s >= 1, built from exp(-1/t)."""
    s = np.asarray(s, dtype=float)

    def f(t):
        out = np.zeros_like(t)
        pos = t > 0
        out[pos] = np.exp(-1.0 / t[pos])
        return out

    a, b = f(1.0 - s), f(s)
    return a / (a + b)


@dataclass(frozen=True)
class Cutoff:
    """chi(x, y) = profile(|ln_x y|): equal to 1 on the plateau, 0 beyond ``radius``."""

    plateau: float
    radius: float

    def __post_init__(self):
        if not 0 < self.plateau < self.radius:
            raise ValueError("need 0 < plateau < radius")

    def profile(self, t):
        return smooth_step((np.asarray(t, dtype=float) - self.plateau) / (self.radius - self.plateau))

    def on_tangent(self, graded, vs):
        """chi_x(exp_x(v)) = profile(|v|), valid where ln_x inverts exp_x."""
        return self.profile(quasinorm(graded, vs))


# ---------------------------------------------------------------------------
# Quadrature


def gauss_legendre_box(box, order):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    axes, wts = [], []
    for lo, hi in box:
        half = (hi - lo) / 2
        axes.append(lo + half * (nodes + 1))
        wts.append(half * weights)
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(box))
    w = np.ones(1)
    for wt in wts:
        w = np.multiply.outer(w, wt).ravel()
    return grid, w


def integrate_box(fn, box, orders=(8, 12, 16, 24, 32, 48), tol=1e-8, max_nodes=2_000_000, chunk=65536):
    """Tensor Gauss-Legendre with order escalation until successive results agree.

    Orders whose tensor grid exceeds ``max_nodes`` are not attempted; ``fn``
    is called on slices of at most ``chunk`` points.
    """
    prev = val = None
    for order in orders:
        if order ** len(box) > max_nodes:
            break
        pts, w = gauss_legendre_box(box, order)
        val = sum(float(np.dot(w[k:k + chunk], fn(pts[k:k + chunk]))) for k in range(0, len(w), chunk))
        if prev is not None and abs(val - prev) <= tol * max(1.0, abs(val)):
            return val
        prev = val
    if val is None:
        raise QuadratureError(f"order {orders[0]} already exceeds the budget of {max_nodes} nodes")
    if len(orders) == 1:
        return val
    raise QuadratureError(f"quadrature did not settle within orders {orders} and {max_nodes} nodes")


# ---------------------------------------------------------------------------
# Operators


def _function_values(f, pts):
    if isinstance(f, E.Expr):
        cols = [pts[:, i] for i in range(pts.shape[1])]
        out = E.compile_expr(f)(cols, ())
        return np.broadcast_to(np.asarray(out, dtype=float), (pts.shape[0],))
    return np.asarray(f(pts), dtype=float)


def op_smoothing(frame, symbol, cutoff, f, x, cfg=FlowConfig(), orders=(8, 12, 16, 24, 32, 48), tol=1e-8):
    """int kappa_x(v) chi_x(exp_x(-v)) f(exp_x(-v)) dv over the kernel box."""
    x = np.asarray(x, dtype=float)
    g = frame.graded

    def integrand(vs):
        vals = symbol.evaluate(x, vs)
        chi = np.ones(len(vs)) if cutoff is None else cutoff.on_tangent(g, -vs)
        keep = (vals != 0) & (chi != 0)
        out = np.zeros(len(vs))
        if np.any(keep):
            ys = exp_flow(frame, np.broadcast_to(x, vs[keep].shape).copy(), -vs[keep], cfg)
            out[keep] = vals[keep] * chi[keep] * _function_values(f, ys)
        return out

    return integrate_box(integrand, symbol.box, orders, tol)


def taylor_of_pullback(frame, f, x, order):
    """Taylor polynomial in v of f(exp_x(v)) up to total degree ``order``.

    The degree-k part is (1/k!) (sum_i v_i X_i)^k f evaluated at x, i.e.
    (1/k!) sum over words I of length k of (X_I f)(x) v^content(I).
    """
    n = frame.dim
    xt = tuple(x)
    poly = Poly(n)
    layer = {(): f}
    for k in range(order + 1):
        if k:
            nxt = {}
            for word, expr in layer.items():
                for i in range(n):
                    nxt[(i,) + word] = frame.apply(i, expr)
            layer = nxt
        fact = math.factorial(k)
        for word, expr in layer.items():
            if E.is_zero(expr):
                continue
            val = eval_point(expr, xt)
            if val == 0:
                continue
            alpha = [0] * n
            for i in word:
                alpha[i] += 1
            coeff = val / fact if isinstance(val, Fraction) else float(val) / fact
            poly = poly + Poly.monomial(tuple(alpha), coeff)
    return poly


def op_diff(frame, symbol, f, x, method="auto", cfg=FlowConfig(), h=1e-3):
    """(Op(T) f)(x) = sum_alpha c_alpha (L^alpha (f o exp_x))(0).

    Expressions are handled symbolically through the Taylor expansion of
    f o exp_x; callables go through finite differences along group
    translations of the osculating group.
    """
    terms = symbol_terms(symbol, x)
    if not terms:
        return 0.0
    law = osculating_law(frame, x)
    if method == "auto":
        method = "symbolic" if isinstance(f, E.Expr) else "fd"
    if method == "symbolic":
        if not isinstance(f, E.Expr):
            raise TypeError("symbolic quantization needs an expression")
        order = max(sum(a) for a in terms)
        taylor = taylor_of_pullback(frame, f, np.asarray(x, dtype=float) if not _exact_point(x) else x, order)
        zero = (0,) * frame.dim
        total = 0.0
        for alpha, c in terms.items():
            total += float(c) * float(apply_left_monomial(law, alpha, taylor).terms.get(zero, 0))
        return total
    xb = np.asarray(x, dtype=float)

    def pulled(vs):
        vs = np.asarray(vs, dtype=float)
        ys = exp_flow(frame, np.broadcast_to(xb, vs.shape).copy(), vs, cfg)
        return _function_values(f, ys)

    return sum(float(c) * left_derivative_fd(law, pulled, alpha, None, h) for alpha, c in terms.items())


def _exact_point(x):
    return isinstance(x, tuple) and all(isinstance(a, (int, Fraction)) for a in x)


def mollified_delta(law, alpha, width):
    """Kernel L^alpha phi with phi a centred Gaussian of the given width.

    As the width shrinks, quantizing this kernel approaches the
    differential symbol <X>^alpha, with error of order width^2.
    """
    n = law.dim
    s2 = Fraction(str(width)) ** 2
    norm = (2 * math.pi * float(s2)) ** (-n / 2)
    quad = E.ZERO
    for i in range(n):
        quad = E.add(quad, E.power(E.v(i), 2))
    phi = E.mul(E.Num(norm), E.func("exp", E.div(E.neg(quad), E.Num(2 * s2))))
    fields = law.left_fields
    expr = phi
    for letter in reversed(word_of(alpha)):
        expr = fields[letter].apply_expr(expr)
    half = 7 * float(width)
    return SmoothingSymbol(expr, tuple((-half, half) for _ in range(n)))


def difference_op(symbol, alpha):
    """Multiply the kernel by v^alpha."""
    mono = E.ONE
    for i, a in enumerate(alpha):
        if a:
            mono = E.mul(mono, E.power(E.v(i), a))
    return SmoothingSymbol(E.mul(mono, symbol.expr), symbol.box)


def kernel_change_frame(frame_x, frame_y, symbol_y, x):
    """Kernel in frame X equivalent to ``symbol_y`` in frame Y at x:
    kappa^X(v) = det(theta) kappa^Y(theta v), theta the block diagonal of T_x."""
    t = transition(frame_x, frame_y, tuple(x))
    theta = block_diagonal(t, frame_x.graded.weights)
    n = frame_x.dim
    th = np.array([[float(a) for a in row] for row in theta])
    det = float(np.linalg.det(th))
    mapping = {}
    for k in range(n):
        s = E.ZERO
        for i in range(n):
            if theta[k][i] != 0:
                s = E.add(s, E.mul(E.Num(theta[k][i]), E.v(i)))
        mapping[E.v(k)] = s
    expr = E.mul(E.Num(abs(det)), E.substitute(symbol_y.expr, mapping))
    # bounding box of {v : theta v in box_Y}
    inv = np.linalg.inv(th)
    centre = np.array([(a + b) / 2 for a, b in symbol_y.box])
    half = np.array([(b - a) / 2 for a, b in symbol_y.box])
    c = inv @ centre
    r = np.abs(inv) @ half
    return SmoothingSymbol(expr, tuple((float(c[i] - r[i]), float(c[i] + r[i])) for i in range(n)))


# ---------------------------------------------------------------------------
# Formal adjoints


def box_bump(box):
    """Product bump prod_k psi((x_k - c_k)/h_k), psi(t) = exp(-1/(1 - t^2)) on |t| < 1.

    Returns value(pts) and gradient(pts) functions.
    """
    centre = np.array([(a + b) / 2 for a, b in box])
    half = np.array([(b - a) / 2 for a, b in box])

    def parts(pts):
        t = (pts - centre) / half
        inside = np.abs(t) < 1
        denom = np.where(inside, 1 - t ** 2, 1.0)
        psi = np.where(inside, np.exp(-1 / denom), 0.0)
        dlog = np.where(inside, -2 * t / denom ** 2, 0.0) / half
        return psi, dlog

    def value(pts):
        psi, _ = parts(pts)
        return np.prod(psi, axis=1)

    def gradient(pts):
        psi, dlog = parts(pts)
        val = np.prod(psi, axis=1)
        return val[:, None] * dlog

    return value, gradient


@dataclass
class AdjointReport:
    defect: float
    divergence_term: float
    leakage: float


def adjoint_defect(frame, j, box, f, g, orders=(12, 16, 24, 32, 48), tol=1e-9):
    """(Op<X_j> F, G) + (F, Op<X_j> G) with F = bump*f, G = bump*g over ``box``.

    For |alpha| = 1 the quantization reduces to the vector field itself,
    Op(<X_j>)F(x) = X_j F(x), which is what is integrated here.  With
    Lebesgue measure on the chart the defect equals -int div(X_j) F G;
    that value is returned as ``divergence_term``.
    """
    n = frame.dim
    bump, grad = box_bump(box)
    fx = [E.compile_expr(f), E.compile_expr(frame.apply(j, f))]
    gx = [E.compile_expr(g), E.compile_expr(frame.apply(j, g))]
    coef = E.compile_exprs(list(frame.coeffs[j]))
    div = E.compile_expr(frame.divergence(j))

    def ev(fn, cols, m):
        return np.broadcast_to(np.asarray(fn(cols, ()), dtype=float), (m,))

    def integrand(pts, which):
        m = len(pts)
        cols = [pts[:, i] for i in range(n)]
        b = bump(pts)
        db = grad(pts)
        a = np.stack([np.broadcast_to(np.asarray(c, dtype=float), (m,)) for c in coef(cols, ())], axis=1)
        xb = np.sum(a * db, axis=1)
        fv, xf = ev(fx[0], cols, m), ev(fx[1], cols, m)
        gv, xg = ev(gx[0], cols, m), ev(gx[1], cols, m)
        big_f, big_g = b * fv, b * gv
        if which == "defect":
            return (xb * fv + b * xf) * big_g + big_f * (xb * gv + b * xg)
        return -ev(div, cols, m) * big_f * big_g

    defect = integrate_box(lambda p: integrand(p, "defect"), box, orders, tol)
    divterm = integrate_box(lambda p: integrand(p, "div"), box, orders, tol)
    # the bump vanishes identically on the boundary, so nothing leaks out of the box
    face = []
    for k in range(n):
        for end in (0, 1):
            pts = np.array([[box[i][end] if i == k else (box[i][0] + box[i][1]) / 2 for i in range(n)]])
            face.append(float(abs(bump(pts)[0] * _function_values(f, pts)[0])))
    return AdjointReport(defect, divterm, max(face))


def first_order_symbol(n, j):
    alpha = [0] * n
    alpha[j] = 1
    return {tuple(alpha): 1}

