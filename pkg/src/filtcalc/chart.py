"""Adapted frames on a coordinate chart of a filtered manifold.

A frame is n vector fields X_i = sum_k a_ik(x) d/dx_k given by expressions.
From it we get bracket structure functions, the osculating graded Lie
algebra at each point, transition matrices between frames, and a normal
ordering of differential operators written as words in the frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, permutations

import numpy as np

from . import expr as E
from .graded import GradedStructure, multi_indices_of_degree
from .group import poly_to_expr
from .lie import lie_validate
from .poly import Poly, is_exact
from .uea import UEAElement, alpha_to_word, uea_multiply


class FrameError(ValueError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class NotAdaptedError(FrameError):
    pass


class NotBlockTriangularError(FrameError):
    pass


class OrderError(ValueError):
    """A differential operator has a term above the requested order."""


def _perm_sign(p):
    sign = 1
    p = list(p)
    for i in range(len(p)):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            sign = -sign
    return sign


def det_expr(m):
    """Determinant of a square matrix of expressions (Leibniz expansion, zero terms skipped)."""
    n = len(m)
    total = E.ZERO
    for p in permutations(range(n)):
        factors = [m[i][p[i]] for i in range(n)]
        if any(E.is_zero(f) for f in factors):
            continue
        term = E.ONE
        for f in factors:
            term = E.mul(term, f)
        total = E.add(total, term) if _perm_sign(p) > 0 else E.sub(total, term)
    return total


def inverse_expr(m):
    """Symbolic inverse by the adjugate formula."""
    n = len(m)
    d = det_expr(m)
    if E.is_zero(d):
        raise FrameError("frame matrix is singular")
    inv = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [[m[r][c] for c in range(n) if c != j] for r in range(n) if r != i]
            cof = det_expr(minor) if n > 1 else E.ONE
            if (i + j) % 2:
                cof = E.neg(cof)
            inv[j][i] = E.div(cof, d)
    return inv


def eval_point(e, x):
    """Evaluate an expression of x exactly when possible, else as a float."""
    val = E.evaluate(e, x=x)
    if isinstance(val, (int, Fraction)):
        return Fraction(val)
    return float(val)


def _solve_linear(a, b):
    """Solve a^T c = b for a small dense system, exact if all entries are Fractions."""
    n = len(a)
    if all(is_exact(v) for row in a for v in row) and all(is_exact(v) for v in b):
        # c A = b  <=>  A^T c^T = b^T
        aug = [[Fraction(a[r][i]) for r in range(n)] + [Fraction(b[i])] for i in range(n)]
        for col in range(n):
            piv = next((r for r in range(col, n) if aug[r][col] != 0), None)
            if piv is None:
                raise FrameError("frame matrix is singular")
            aug[col], aug[piv] = aug[piv], aug[col]
            pv = aug[col][col]
            aug[col] = [q / pv for q in aug[col]]
            for r in range(n):
                if r != col and aug[r][col] != 0:
                    f = aug[r][col]
                    aug[r] = [q - f * s for q, s in zip(aug[r], aug[col])]
        return [aug[i][n] for i in range(n)]
    mat = np.array([[float(v) for v in row] for row in a])
    return list(np.linalg.solve(mat.T, np.array([float(v) for v in b])))


class Frame:
    """Vector fields X_i = sum_k coeffs[i][k] d/dx_k on a chart."""

    def __init__(self, name, graded, coeffs):
        n = graded.dim
        if len(coeffs) != n or any(len(row) != n for row in coeffs):
            raise FrameError(f"frame '{name}' must be an {n} x {n} array of coefficients")
        self.name = name
        self.graded = graded
        self.coeffs = tuple(tuple(E.parse(c) if isinstance(c, str) else E.lift(c) for c in row)
                            for row in coeffs)
        for row in self.coeffs:
            for c in row:
                if any(var.name == "v" for var in E.free_vars(c)):
                    raise FrameError("frame coefficients may only depend on x")
        self._compiled = None
        self._jac_compiled = None
        self._apply_cache = {}
        self._struct = None
        self._nf_cache = {}

    @property
    def dim(self):
        return self.graded.dim

    def __repr__(self):
        return f"Frame({self.name!r})"

    # -- numerics -----------------------------------------------------
    def matrix_at(self, x):
        """Coefficient matrix A(x) with rows X_i (exact for rational x when possible)."""
        return [[eval_point(c, x) for c in row] for row in self.coeffs]

    def coefficient_function(self):
        """Vectorized A: takes x as a list of arrays, returns an (n, n, ...) array."""
        if self._compiled is None:
            flat = [c for row in self.coeffs for c in row]
            self._compiled = E.compile_exprs(flat)
        n = self.dim
        f = self._compiled

        def call(xs):
            vals = f(xs, ())
            shape = np.shape(xs[0])
            arr = np.empty((n, n) + shape)
            for idx, val in enumerate(vals):
                arr[idx // n, idx % n] = val
            return arr

        return call

    def jacobian_function(self):
        """Vectorized dA/dx: returns an (n, n, n, ...) array [i, k, l] = d a_ik / d x_l."""
        if self._jac_compiled is None:
            flat = [E.diff(c, E.x(l)) for row in self.coeffs for c in row for l in range(self.dim)]
            self._jac_compiled = E.compile_exprs(flat)
        n = self.dim
        f = self._jac_compiled

        def call(xs):
            vals = f(xs, ())
            shape = np.shape(xs[0])
            arr = np.empty((n, n, n) + shape)
            for idx, val in enumerate(vals):
                i, rem = divmod(idx, n * n)
                k, l = divmod(rem, n)
                arr[i, k, l] = val
            return arr

        return call

    # -- symbolic action -----------------------------------------------
    def apply(self, i, f):
        """X_i f as an expression in x."""
        key = (i, f)
        if key in self._apply_cache:
            return self._apply_cache[key]
        out = E.ZERO
        for k, a in enumerate(self.coeffs[i]):
            if not E.is_zero(a):
                d = E.diff(f, E.x(k))
                if not E.is_zero(d):
                    out = E.add(out, E.mul(a, d))
        self._apply_cache[key] = out
        return out

    def apply_word(self, word, f):
        """X_{w1}(X_{w2}(... X_{wm} f))."""
        for letter in reversed(word):
            f = self.apply(letter, f)
        return f

    def divergence(self, i):
        out = E.ZERO
        for k, a in enumerate(self.coeffs[i]):
            out = E.add(out, E.diff(a, E.x(k)))
        return out

    def bracket_coordinates(self, i, j):
        """Coordinates of [X_i, X_j] in the basis d/dx_k."""
        return [E.sub(self.apply(i, self.coeffs[j][k]), self.apply(j, self.coeffs[i][k]))
                for k in range(self.dim)]

    def structure_functions(self):
        """c[i][j][k] as expressions with [X_i, X_j] = sum_k c_ijk X_k."""
        if self._struct is None:
            n = self.dim
            inv = inverse_expr([list(r) for r in self.coeffs])
            c = [[[E.ZERO] * n for _ in range(n)] for _ in range(n)]
            for i in range(n):
                for j in range(i + 1, n):
                    b = self.bracket_coordinates(i, j)
                    for m in range(n):
                        s = E.ZERO
                        for k in range(n):
                            if not (E.is_zero(b[k]) or E.is_zero(inv[k][m])):
                                s = E.add(s, E.mul(b[k], inv[k][m]))
                        c[i][j][m] = s
                        c[j][i][m] = E.neg(s)
            self._struct = c
        return self._struct

    def structure_constants_at(self, x):
        """Numeric c_ijk(x) (exact Fractions when the data allow it)."""
        n = self.dim
        a = self.matrix_at(x)
        c = [[[0] * n for _ in range(n)] for _ in range(n)]
        for i in range(n):
            for j in range(i + 1, n):
                b = [eval_point(e, x) for e in self.bracket_coordinates(i, j)]
                sol = _solve_linear(a, b)
                for k in range(n):
                    c[i][j][k] = sol[k]
                    c[j][i][k] = -sol[k]
        return c

    # -- differential operators ----------------------------------------
    def derivative_word(self, word, f):
        return self.apply_word(word, f)

    def push_through(self, word, coeff):
        """Leibniz: X_word (coeff * .) = sum over subsequences S of (X_S coeff) X_{word minus S}."""
        out = []
        m = len(word)
        for r in range(m + 1):
            for subset in combinations(range(m), r):
                der = self.apply_word(tuple(word[p] for p in subset), coeff)
                if E.is_zero(der):
                    continue
                rest = tuple(word[p] for p in range(m) if p not in subset)
                out.append((der, rest))
        return out

    def normal_form_of_word(self, word):
        """X_word rewritten as sum_alpha c_alpha(x) X^alpha (ordered monomials)."""
        word = tuple(word)
        if word in self._nf_cache:
            return self._nf_cache[word]
        n = self.dim
        inv = next((i for i in range(len(word) - 1) if word[i] > word[i + 1]), None)
        if inv is None:
            alpha = [0] * n
            for letter in word:
                alpha[letter] += 1
            out = {tuple(alpha): E.ONE}
        else:
            c = self.structure_functions()
            a, b = word[inv], word[inv + 1]
            prefix, suffix = word[:inv], word[inv + 2:]
            out = dict(self.normal_form_of_word(prefix + (b, a) + suffix))
            for k in range(n):
                cabk = c[a][b][k]
                if E.is_zero(cabk):
                    continue
                for der, rest in self.push_through(prefix, cabk):
                    for alpha, coef in self.normal_form_of_word(rest + (k,) + suffix).items():
                        out[alpha] = E.add(out.get(alpha, E.ZERO), E.mul(der, coef))
            out = {al: co for al, co in out.items() if not E.is_zero(co)}
        self._nf_cache[word] = out
        return out


@dataclass
class DiffOp:
    """sum_w coeff_w(x) X_w with coefficients on the left of words in a frame."""

    frame: Frame
    terms: dict = field(default_factory=dict)

    @classmethod
    def from_words(cls, frame, words):
        return cls(frame, {tuple(w): E.parse(c) if isinstance(c, str) else E.lift(c)
                           for w, c in words.items()})

    @classmethod
    def generator(cls, frame, i):
        return cls(frame, {(i,): E.ONE})

    @classmethod
    def function(cls, frame, f):
        return cls(frame, {(): E.lift(f)})

    def __add__(self, other):
        out = dict(self.terms)
        for w, c in other.terms.items():
            out[w] = E.add(out.get(w, E.ZERO), c)
        return DiffOp(self.frame, {w: c for w, c in out.items() if not E.is_zero(c)})

    def scale(self, s):
        s = E.lift(s)
        return DiffOp(self.frame, {w: E.mul(s, c) for w, c in self.terms.items()})

    def __matmul__(self, other):
        """Composition self o other."""
        fr = self.frame
        out = {}
        for w1, c1 in self.terms.items():
            for w2, c2 in other.terms.items():
                for der, rest in fr.push_through(w1, c2):
                    w = rest + w2
                    out[w] = E.add(out.get(w, E.ZERO), E.mul(c1, der))
        return DiffOp(fr, {w: c for w, c in out.items() if not E.is_zero(c)})

    def apply(self, f):
        out = E.ZERO
        for w, c in self.terms.items():
            out = E.add(out, E.mul(c, self.frame.apply_word(w, f)))
        return out

    def normal_order(self):
        """Return {alpha: coefficient expression} in the ordered basis X^alpha."""
        out = {}
        for w, c in self.terms.items():
            for alpha, d in self.frame.normal_form_of_word(w).items():
                out[alpha] = E.add(out.get(alpha, E.ZERO), E.mul(c, d))
        return {a: c for a, c in out.items() if not E.is_zero(c)}

    def normal_ordered_op(self):
        return DiffOp(self.frame, {alpha_to_word(a): c for a, c in self.normal_order().items()})


def apply_ordered(frame, coeffs, f):
    """Apply sum_alpha c_alpha X^alpha to f symbolically."""
    out = E.ZERO
    for alpha, c in coeffs.items():
        out = E.add(out, E.mul(c, frame.apply_word(alpha_to_word(alpha), f)))
    return out


# ---------------------------------------------------------------------------
# Charts


@dataclass
class Chart:
    graded: GradedStructure
    box: tuple
    frames: dict

    @property
    def dim(self):
        return self.graded.dim

    def frame(self, name):
        try:
            return self.frames[name]
        except KeyError:
            raise FrameError(f"unknown frame '{name}'; available: {sorted(self.frames)}") from None

    def contains(self, x, tol=0.0):
        x = np.asarray(x, dtype=float)
        lo = np.array([b[0] for b in self.box]) - tol
        hi = np.array([b[1] for b in self.box]) + tol
        return np.all((x >= lo) & (x <= hi), axis=-1)

    def sample_points(self, count, seed=0, shrink=0.9, exact=False):
        """Random points inside the (shrunk) box; rationals with denominator 64 if exact."""
        rng = np.random.default_rng(seed)
        pts = []
        for _ in range(count):
            p = []
            for lo, hi in self.box:
                c, r = (lo + hi) / 2, (hi - lo) / 2 * shrink
                t = rng.uniform(-1, 1)
                if exact:
                    p.append(Fraction(round((c + r * t) * 64), 64))
                else:
                    p.append(c + r * t)
            pts.append(tuple(p))
        return pts


def _numeric_zero(val, tol):
    return val == 0 if is_exact(val) else abs(val) <= tol


def validate_adapted(frame, points, tol=1e-10):
    """Check invertibility and the filtration condition c_ijk = 0 whenever w_k > w_i + w_j.

    Structure functions that simplify to literal 0 pass symbolically; the
    rest are checked at every sample point.
    """
    w = frame.graded.weights
    n = frame.dim
    c = frame.structure_functions()
    for x in points:
        a = frame.matrix_at(x)
        det = np.linalg.det(np.array([[float(q) for q in row] for row in a]))
        if abs(det) < 1e-12:
            raise FrameError(f"frame '{frame.name}' is degenerate at {x}", x)
    for i in range(n):
        for j in range(n):
            for k in range(n):
                if w[k] > w[i] + w[j] and not E.is_zero(c[i][j][k]):
                    for x in points:
                        val = eval_point(c[i][j][k], x)
                        if not _numeric_zero(val, tol):
                            raise NotAdaptedError(
                                f"[X{i + 1}, X{j + 1}] has a component {val} on X{k + 1} of weight "
                                f"{w[k]} > {w[i]} + {w[j]} at {x}", (i, j, k, x))
    return True


def osculating_algebra(frame, x, tol=1e-10):
    """Graded Lie algebra at x: keep c_ijk(x) with w_k = w_i + w_j."""
    w = frame.graded.weights
    n = frame.dim
    c = frame.structure_constants_at(x)
    entries = {}
    for i in range(n):
        for j in range(n):
            for k in range(n):
                if w[k] == w[i] + w[j] and not _numeric_zero(c[i][j][k], 0.0):
                    entries[(i, j, k)] = c[i][j][k]
    exact = all(is_exact(v) for v in entries.values())
    return lie_validate(frame.graded, entries, 0.0 if exact else tol)


def higher_order_split(frame, x):
    """Split [sum v_i X_i, sum w_j X_j](x) into its graded part q and remainder r.

    Both are lists of Polys in the 2n variables (v, w): q keeps the terms with
    w_k = w_i + w_j, r the terms with w_k < w_i + w_j.
    """
    return split_bracket(frame.structure_constants_at(x), frame.graded.weights)


def split_bracket(c, weights):
    n = len(weights)
    nv = 2 * n
    q = [Poly(nv) for _ in range(n)]
    r = [Poly(nv) for _ in range(n)]
    for i in range(n):
        for j in range(n):
            mono = Poly.var(nv, i) * Poly.var(nv, n + j)
            for k in range(n):
                val = c[i][j][k]
                if _numeric_zero(val, 0.0):
                    continue
                if weights[k] == weights[i] + weights[j]:
                    q[k] = q[k] + mono * val
                elif weights[k] < weights[i] + weights[j]:
                    r[k] = r[k] + mono * val
                else:
                    raise NotAdaptedError(f"component on X{k + 1} above the filtration", (i, j, k))
    return q, r


# ---------------------------------------------------------------------------
# Changes of frame


def transition_exprs(frame_x, frame_y):
    """T with X_i = sum_k T[k][i] Y_k, as expressions (T^t = A_X A_Y^{-1})."""
    n = frame_x.dim
    inv_y = inverse_expr([list(r) for r in frame_y.coeffs])
    t = [[E.ZERO] * n for _ in range(n)]
    for i in range(n):
        for k in range(n):
            s = E.ZERO
            for m in range(n):
                if not (E.is_zero(frame_x.coeffs[i][m]) or E.is_zero(inv_y[m][k])):
                    s = E.add(s, E.mul(frame_x.coeffs[i][m], inv_y[m][k]))
            t[k][i] = s
    return t


def transition(frame_x, frame_y, x, tol=1e-10):
    """Numeric T_x with X_i = sum_k T_ki Y_k; checks block upper triangularity."""
    n = frame_x.dim
    ax = frame_x.matrix_at(x)
    ay = frame_y.matrix_at(x)
    t = [[0] * n for _ in range(n)]
    for i in range(n):
        sol = _solve_linear(ay, ax[i])
        for k in range(n):
            t[k][i] = sol[k]
    w = frame_x.graded.weights
    for k in range(n):
        for i in range(n):
            if w[k] > w[i] and not _numeric_zero(t[k][i], tol):
                raise NotBlockTriangularError(
                    f"X{i + 1} has a component {t[k][i]} on Y{k + 1} of higher weight", (k, i))
    return t


def block_diagonal(t, weights):
    n = len(weights)
    return [[t[k][i] if weights[k] == weights[i] else 0 for i in range(n)] for k in range(n)]


def tilde_matrix(theta, graded, degree):
    """Coefficients T~_{alpha beta} with (theta v)^alpha = sum_beta T~ v^beta, [alpha] = [beta] = degree."""
    n = graded.dim
    rows = [sum((Poly.var(n, k) * theta[i][k] for k in range(n) if not _numeric_zero(theta[i][k], 0.0)),
                Poly(n)) for i in range(n)]
    out = {}
    for alpha in multi_indices_of_degree(graded, degree):
        p = Poly.const(n, 1)
        for i, a in enumerate(alpha):
            if a:
                p = p * rows[i] ** a
        for beta, c in p.terms.items():
            out[(alpha, beta)] = c
    return out


def principal_symbol(frame, op, order, x, tol=1e-10):
    """Top homogeneous part of op at x as an element of U(g_x)."""
    g = frame.graded
    coeffs = op.normal_order() if isinstance(op, DiffOp) else op
    alg = osculating_algebra(frame, x)
    top = {}
    for alpha, c in coeffs.items():
        deg = g.degree(alpha)
        if deg > order:
            val = eval_point(c, x)
            if not _numeric_zero(val, tol):
                raise OrderError(f"term X^{alpha} of degree {deg} > {order} has coefficient {val}")
        elif deg == order:
            val = eval_point(c, x)
            if not _numeric_zero(val, 0.0):
                top[alpha] = val
    return UEAElement(alg, top).scale(1) if top else UEAElement(alg, {})


def rewrite_in_frame(op, frame_y, t_exprs=None):
    """Express an operator written in frame X as words in frame Y."""
    fx = op.frame
    t = transition_exprs(fx, frame_y) if t_exprs is None else t_exprs
    n = fx.dim
    gens = []
    for i in range(n):
        gens.append(DiffOp(frame_y, {(k,): t[k][i] for k in range(n) if not E.is_zero(t[k][i])}))
    out = DiffOp(frame_y, {})
    for word, c in op.terms.items():
        term = DiffOp.function(frame_y, c)
        for letter in word:
            term = term @ gens[letter]
        out = out + term
    return out


@dataclass
class InvarianceReport:
    residual: float
    mapped: UEAElement
    direct: UEAElement


def map_symbol(princ_x, t_at_x, alg_y):
    """Substitute <X_i> = sum_{w_k = w_i} T_ki <Y_k> into an element of U(g^X_x)."""
    w = princ_x.algebra.weights
    n = len(w)
    images = []
    for i in range(n):
        images.append(UEAElement(alg_y, {
            tuple(int(m == k) for m in range(n)): t_at_x[k][i]
            for k in range(n) if w[k] == w[i] and not _numeric_zero(t_at_x[k][i], 0.0)}))
    out = UEAElement(alg_y, {})
    for alpha, c in princ_x.coeffs.items():
        term = UEAElement.scalar(alg_y, c)
        for i, a in enumerate(alpha):
            for _ in range(a):
                term = uea_multiply(term, images[i])
        out = out + term
    return out


def frame_invariance_check(frame_x, frame_y, op, order, x):
    """Compare Princ computed in X (then mapped to Y) with Princ computed in Y."""
    px = principal_symbol(frame_x, op, order, x)
    t_x = transition(frame_x, frame_y, x)
    alg_y = osculating_algebra(frame_y, x)
    mapped = map_symbol(px, t_x, alg_y)
    op_y = rewrite_in_frame(op, frame_y)
    py = principal_symbol(frame_y, op_y, order, x)
    keys = set(mapped.coeffs) | set(py.coeffs)
    res = max((abs(float(mapped.coeffs.get(k, 0)) - float(py.coeffs.get(k, 0))) for k in keys), default=0.0)
    return InvarianceReport(res, mapped, py)


def recombine(frame, name, matrix):
    """The frame Y_k = sum_i matrix[k][i] X_i (entries are expressions in x)."""
    n = frame.dim
    rows = []
    for k in range(n):
        row = []
        for col in range(n):
            s = E.ZERO
            for i in range(n):
                coef = E.parse(matrix[k][i]) if isinstance(matrix[k][i], str) else E.lift(matrix[k][i])
                if not (E.is_zero(coef) or E.is_zero(frame.coeffs[i][col])):
                    s = E.add(s, E.mul(coef, frame.coeffs[i][col]))
            row.append(s)
        rows.append(row)
    return Frame(name, frame.graded, rows)


def random_bu_frame(frame, seed, name=None, denom=None):
    """A seeded frame Y_k = sum_i M_ki(x) X_i with M block upper triangular.

    Y_k may only involve X_i of weight <= w_k.  Entries are identity plus
    affine functions of x with small rational coefficients, small enough that
    M stays invertible on the unit box.
    """
    rng = np.random.default_rng(seed)
    n = frame.dim
    w = frame.graded.weights
    denom = denom or 4 * n * (n + 1)
    matrix = []
    for k in range(n):
        row = []
        for i in range(n):
            if w[i] > w[k]:
                row.append(E.ZERO)
                continue
            entry = E.Num(int(k == i) + Fraction(int(rng.integers(-1, 2)), denom))
            for j in range(n):
                a = int(rng.integers(-1, 2))
                if a:
                    entry = E.add(entry, E.mul(E.Num(Fraction(a, denom)), E.x(j)))
            row.append(entry)
        matrix.append(row)
    return recombine(frame, name or f"{frame.name}-bu{seed}", matrix)


def left_invariant_frame(law, name="left"):
    """The frame of left-invariant fields of a group law, as a chart frame in x."""
    rows = [[poly_to_expr(a, "x") for a in fld.coeffs] for fld in law.left_fields]
    return Frame(name, law.graded, rows)
