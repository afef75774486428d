"""Group law in exponential coordinates and the calculus built on it.

Covers left/right invariant vector fields, the basis of polynomials dual to
left-invariant derivatives, Taylor polynomials adapted to the dilations,
Leibniz coefficients of (v*w)^alpha and tests for higher-order remainders.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import product

import numpy as np

from . import expr as E
from .graded import dilate, multi_indices_of_degree
from .lie import LieAlgebra, bch_truncated
from .poly import Poly, is_exact


@dataclass(frozen=True, eq=False)
class GroupLaw:
    """Polynomial group law z(v, w) on R^n, stored as n polynomials in 2n variables
    (v_1..v_n, w_1..w_n)."""

    algebra: LieAlgebra
    components: tuple

    @property
    def dim(self):
        return self.algebra.dim

    @property
    def graded(self):
        return self.algebra.graded

    @property
    def weights(self):
        return self.algebra.weights

    def multiply(self, v, w):
        """Group product; accepts tuples or arrays with the coordinate axis last."""
        if isinstance(v, np.ndarray) or isinstance(w, np.ndarray):
            v = np.asarray(v, dtype=float)
            w = np.asarray(w, dtype=float)
            v, w = np.broadcast_arrays(v, w)
            point = [v[..., i] for i in range(self.dim)] + [w[..., i] for i in range(self.dim)]
            cols = [np.broadcast_to(np.asarray(p.evaluate(point), dtype=float), v.shape[:-1])
                    for p in self.components]
            return np.stack(cols, axis=-1)
        point = tuple(v) + tuple(w)
        return tuple(p.evaluate(point) for p in self.components)

    def inverse(self, v):
        if isinstance(v, np.ndarray):
            return -v
        return tuple(-a for a in v)

    def identity(self):
        return (0,) * self.dim

    @cached_property
    def _fields(self):
        return invariant_fields(self)

    @property
    def left_fields(self):
        return self._fields[0]

    @property
    def right_fields(self):
        return self._fields[1]

    def translate_left(self, x):
        """Polynomials y -> x*y for fixed x, in n variables."""
        n = self.dim
        images = [Poly.const(n, c) for c in x] + [Poly.var(n, i) for i in range(n)]
        return [p.substitute(images) for p in self.components]


def group_law(alg, order=None):
    """z(v, w) = BCH(v, w) truncated at the Lie step (exact by nilpotency)."""
    n = alg.dim
    nv = 2 * n
    a = [Poly.var(nv, i) for i in range(n)]
    b = [Poly.var(nv, n + i) for i in range(n)]
    z = bch_truncated(alg, a, b, order)
    comps = tuple(c if isinstance(c, Poly) else Poly.const(nv, c) for c in z)
    return GroupLaw(alg, comps)


# ---------------------------------------------------------------------------
# Vector fields with polynomial coefficients


@dataclass(frozen=True)
class PolyVectorField:
    """sum_i coeffs[i] * d/dv_i with polynomial coefficients."""

    coeffs: tuple

    @property
    def dim(self):
        return len(self.coeffs)

    def apply(self, p):
        out = Poly(p.nvars)
        for i, a in enumerate(self.coeffs):
            if a.terms:
                d = p.diff(i)
                if d.terms:
                    out = out + a * d
        return out

    def bracket(self, other):
        return PolyVectorField(tuple(self.apply(b) - other.apply(a)
                                     for a, b in zip(self.coeffs, other.coeffs)))

    def __add__(self, other):
        return PolyVectorField(tuple(a + b for a, b in zip(self.coeffs, other.coeffs)))

    def scale(self, c):
        return PolyVectorField(tuple(a * c for a in self.coeffs))

    def apply_expr(self, f, kind="v"):
        """Apply to an expression in the variables of the given kind."""
        out = E.ZERO
        for i, a in enumerate(self.coeffs):
            if a.terms:
                d = E.diff(f, E.Var(kind, i))
                if not E.is_zero(d):
                    out = E.add(out, E.mul(poly_to_expr(a, kind), d))
        return out

    def evaluate(self, point):
        return tuple(a.evaluate(point) for a in self.coeffs)


def poly_to_expr(p, kind="v"):
    out = E.ZERO
    for m, c in sorted(p.terms.items()):
        term = E.Num(c if is_exact(c) else float(c))
        for i, e in enumerate(m):
            if e:
                term = E.mul(term, E.power(E.Var(kind, i), e))
        out = E.add(out, term)
    return out


def invariant_fields(law):
    """Left- and right-invariant fields matching e_j at the identity.

    L_j f(v) = d/dt f(v * t e_j) and R_j f(v) = d/dt f(t e_j * v) at t = 0.
    """
    n = law.dim
    left, right = [], []
    # variables of the law are (v, w); restrict to w = 0 or v = 0 after differentiating
    to_v = [Poly.var(n, i) for i in range(n)] + [Poly(n)] * n
    to_w = [Poly(n)] * n + [Poly.var(n, i) for i in range(n)]
    for j in range(n):
        lc = tuple(z.diff(n + j).substitute(to_v) for z in law.components)
        rc = tuple(z.diff(j).substitute(to_w) for z in law.components)
        left.append(PolyVectorField(lc))
        right.append(PolyVectorField(rc))
    return left, right


def word_of(alpha):
    """Letters of the ordered product X_1^a1 ... X_n^an (leftmost applied last)."""
    out = []
    for i, a in enumerate(alpha):
        out.extend([i] * a)
    return tuple(out)


def apply_left_monomial(law, alpha, p):
    """L^alpha p = L_1^a1 (L_2^a2 (... L_n^an p))."""
    fields = law.left_fields
    for letter in reversed(word_of(alpha)):
        p = fields[letter].apply(p)
    return p


def apply_left_monomial_expr(law, alpha, f):
    fields = law.left_fields
    for letter in reversed(word_of(alpha)):
        f = fields[letter].apply_expr(f)
    return f


# ---------------------------------------------------------------------------
# Dual basis and Taylor polynomials


def _solve_exact(matrix):
    """Inverse of a square Fraction matrix by Gauss-Jordan elimination."""
    n = len(matrix)
    a = [[Fraction(x) for x in row] + [Fraction(int(i == j)) for j in range(n)]
         for i, row in enumerate(matrix)]
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col] != 0), None)
        if piv is None:
            raise ZeroDivisionError("singular matrix")
        a[col], a[piv] = a[piv], a[col]
        p = a[col][col]
        a[col] = [x / p for x in a[col]]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return [row[n:] for row in a]


def dual_monomial_basis(law, max_degree):
    """Polynomials q_alpha, [alpha] <= max_degree, with (L^beta q_alpha)(0) = delta.

    Each q_alpha is homogeneous of degree [alpha]; solved degree by degree
    in exact arithmetic.
    """
    g = law.graded
    n = law.dim
    zero = (0,) * n
    out = {}
    for m in range(max_degree + 1):
        idx = multi_indices_of_degree(g, m)
        # M[b][c] = (L^beta v^gamma)(0)
        mat = []
        for beta in idx:
            row = []
            for gamma in idx:
                val = apply_left_monomial(law, beta, Poly.monomial(gamma)).terms.get(zero, 0)
                row.append(val)
            mat.append(row)
        mt = [list(col) for col in zip(*mat)]
        q = _solve_exact(mt)
        for a, alpha in enumerate(idx):
            out[alpha] = Poly(n, {gamma: q[a][c] for c, gamma in enumerate(idx)})
    return out


_STENCIL = ((-2, Fraction(1, 12)), (-1, Fraction(-8, 12)), (1, Fraction(8, 12)), (2, Fraction(-1, 12)))


def left_derivative_fd(law, f, alpha, base=None, h=1e-3):
    """(L^alpha f)(base) by nested fourth-order central differences along
    group translations; the step for a letter of weight w is h**(1/w)."""
    n = law.dim
    word = word_of(alpha)
    base = np.zeros(n) if base is None else np.asarray(base, dtype=float)
    if not word:
        return float(np.asarray(f(base[None, :]))[0])
    steps = [h ** (1.0 / law.weights[i]) for i in word]
    combos = list(product(_STENCIL, repeat=len(word)))
    pts = np.repeat(base[None, :], len(combos), axis=0)
    weights = np.ones(len(combos))
    for pos, letter in enumerate(word):
        t = np.array([c[pos][0] * steps[pos] for c in combos])
        e = np.zeros((len(combos), n))
        e[:, letter] = t
        pts = law.multiply(pts, e)
        weights *= np.array([float(c[pos][1]) / steps[pos] for c in combos])
    vals = np.asarray(f(pts), dtype=float)
    return float(np.dot(weights, vals))


def _expr_left_translate(law, f, x):
    """The expression y -> f(x * y) in the v variables."""
    if x is None or all(c == 0 for c in x):
        return f
    images = law.translate_left(tuple(x))
    mapping = {E.v(i): poly_to_expr(p, "v") for i, p in enumerate(images)}
    return E.substitute(f, mapping)


def left_derivatives_at(law, f, alphas, x=None):
    """(L^alpha f)(x) for each alpha; f is an expression in v1..vn."""
    g = _expr_left_translate(law, f, x)
    zero = [Fraction(0)] * law.dim
    out = {}
    for alpha in alphas:
        d = apply_left_monomial_expr(law, alpha, g)
        out[alpha] = E.evaluate(d, v=zero)
    return out


def fs_taylor(law, f, max_degree, x=None, h=1e-3):
    """Taylor polynomial of y -> f(x*y) of homogeneous degree <= max_degree.

    ``f`` is an expression in v1..vn (derivatives taken symbolically) or
    a callable on arrays of shape (..., n) (structured finite differences).
    Returns a Poly in y.
    """
    q = dual_monomial_basis(law, max_degree)
    alphas = list(q)
    if isinstance(f, E.Expr):
        derivs = left_derivatives_at(law, f, alphas, x)
    else:
        base = np.zeros(law.dim) if x is None else np.asarray(x, dtype=float)
        derivs = {a: left_derivative_fd(law, f, a, base, h) for a in alphas}
    out = Poly(law.dim)
    for alpha in alphas:
        c = derivs[alpha]
        if c != 0:
            out = out + q[alpha] * c
    return out


# ---------------------------------------------------------------------------
# Leibniz coefficients and higher-order remainders


def leibniz_coefficients(law, alpha):
    """c with (v*w)^alpha = sum c[(a1, a2)] v^a1 w^a2."""
    n = law.dim
    p = Poly.const(2 * n, 1)
    for z, a in zip(law.components, alpha):
        if a:
            p = p * z ** a
    return {(m[:n], m[n:]): c for m, c in p.terms.items()}


@dataclass
class HigherOrderVerdict:
    is_higher_order: bool
    violations: list = field(default_factory=list)
    slopes: object = None
    trivial: object = None

    def __bool__(self):
        return self.is_higher_order


def higher_order_test(r, in_weights, out_weights, tol=0.0):
    """Is each component r_j a sum of monomials of homogeneous degree > out_weights[j]?

    ``r`` is a sequence of Polys whose variables carry ``in_weights``.
    Coefficients with absolute value <= tol count as zero.
    """
    violations = []
    for j, p in enumerate(r):
        for m, c in p.terms.items():
            if not is_exact(c) and abs(c) <= tol:
                continue
            deg = sum(a * w for a, w in zip(m, in_weights))
            if deg <= out_weights[j]:
                violations.append((j, m, c))
    return HigherOrderVerdict(not violations, violations)


@dataclass
class ScalingProbe:
    eps: np.ndarray
    values: np.ndarray      # shape (len(eps), m)
    slopes: np.ndarray      # +inf marks an identically vanishing component
    trivial: np.ndarray


def fit_slope(eps, vals, zero_tol=0.0, window=None):
    """Least-squares log-log slope over the points with |val| > zero_tol.

    With ``window`` only that many smallest-eps surviving points are used.
    Returns (slope, trivial); trivial means fewer than two points survive.
    """
    eps = np.asarray(eps, dtype=float)
    vals = np.abs(np.asarray(vals, dtype=float))
    mask = vals > zero_tol
    if mask.sum() < 2:
        return np.inf, True
    keep = np.flatnonzero(mask)
    if window is not None:
        keep = keep[np.argsort(eps[keep])[:max(window, 2)]]
    x = np.log(eps[keep])
    y = np.log(vals[keep])
    slope = np.polyfit(x, y, 1)[0]
    return float(slope), False


def scaling_exponent_probe(fn, graded, v, eps_grid, zero_tol=0.0):
    """Log-log slope of |fn(dilate(eps, v))| against eps, per output component.

    ``v`` may be a tuple of vectors (each dilated), e.g. (v, w) pairs.
    """
    eps = np.asarray(eps_grid, dtype=float)
    rows = []
    for e in eps:
        if isinstance(v, tuple) and v and isinstance(v[0], (tuple, list, np.ndarray)):
            args = [dilate(graded, e, np.asarray(a, dtype=float)) for a in v]
            rows.append(np.atleast_1d(np.asarray(fn(*args), dtype=float)))
        else:
            rows.append(np.atleast_1d(np.asarray(fn(dilate(graded, e, np.asarray(v, dtype=float))),
                                              dtype=float)))
    values = np.array(rows)
    slopes, trivial = [], []
    for j in range(values.shape[1]):
        s, t = fit_slope(eps, values[:, j], zero_tol)
        slopes.append(s)
        trivial.append(t)
    return ScalingProbe(eps, values, np.array(slopes), np.array(trivial))


def higher_order_probe(fn, graded, out_weights, v, eps_grid, zero_tol=0.0, slack=0.15):
    """Numeric counterpart of higher_order_test: slope_j >= w_j + 1 - slack."""
    probe = scaling_exponent_probe(fn, graded, v, eps_grid, zero_tol)
    ok = all(t or s >= w + 1 - slack for s, t, w in zip(probe.slopes, probe.trivial, out_weights))
    return HigherOrderVerdict(ok, [], probe.slopes, probe.trivial)

