"""Graded nilpotent Lie algebras and the truncated Baker-Campbell-Hausdorff series."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

from .graded import GradedStructure, validate_gradation
from .poly import is_exact


class LieAlgebraError(ValueError):
    """Base class for invalid structure-constant data; carries a witness."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class AntisymmetryError(LieAlgebraError):
    pass


class JacobiError(LieAlgebraError):
    pass


class GradingError(LieAlgebraError):
    pass


def _zero(c, tol):
    if is_exact(c):
        return c == 0
    return abs(c) <= tol


@dataclass(frozen=True)
class LieAlgebra:
    """A Lie algebra on R^n with basis e_1..e_n and structure constants.

    ``constants[(i, j)]`` maps k to c_ijk so that [e_i, e_j] = sum_k c_ijk e_k.
    Only nonzero entries are kept; indices are zero-based.
    """

    graded: GradedStructure
    constants: dict = field(hash=False, compare=False)
    tol: float = 0.0

    @property
    def dim(self):
        return self.graded.dim

    @property
    def weights(self):
        return self.graded.weights

    def c(self, i, j, k):
        return self.constants.get((i, j), {}).get(k, 0)

    def bracket_basis(self, i, j):
        """[e_i, e_j] as a dict k -> coefficient."""
        return self.constants.get((i, j), {})

    def bracket(self, a, b):
        """Bracket of two coefficient vectors (entries may be polynomials)."""
        n = self.dim
        out = [0] * n
        for (i, j), row in self.constants.items():
            ai = a[i]
            if _is_null(ai):
                continue
            bj = b[j]
            if _is_null(bj):
                continue
            prod = ai * bj
            for k, c in row.items():
                out[k] = out[k] + prod * c
        return out

    def tensor(self):
        n = self.dim
        return [[[self.c(i, j, k) for k in range(n)] for j in range(n)] for i in range(n)]

    def is_exact(self):
        return all(is_exact(c) for row in self.constants.values() for c in row.values())

    @property
    def lie_step(self):
        return lie_step(self)

    def with_tolerance(self, tol):
        return LieAlgebra(self.graded, self.constants, tol)

    def key(self):
        """Hashable summary of the structure constants (for caches)."""
        return (self.graded.weights,
                tuple(sorted((ij, tuple(sorted(row.items()))) for ij, row in self.constants.items())))


def _is_null(x):
    if hasattr(x, "is_zero"):
        return x.is_zero()
    return x == 0


def lie_validate(graded, tensor, tol=0.0):
    """Check antisymmetry, Jacobi and grading compatibility, returning a LieAlgebra.

    ``tensor`` is either a nested n x n x n list or a dict {(i, j, k): c}
    with zero-based indices.  Exact inputs are checked exactly; float
    inputs within ``tol``.
    """
    if not isinstance(graded, GradedStructure):
        graded = validate_gradation(graded)
    n = graded.dim
    entries = {}
    if isinstance(tensor, dict):
        for (i, j, k), c in tensor.items():
            if not (0 <= i < n and 0 <= j < n and 0 <= k < n):
                raise LieAlgebraError(f"index out of range in {(i, j, k)}", (i, j, k))
            entries[(i, j, k)] = c
    else:
        if len(tensor) != n:
            raise LieAlgebraError("tensor has wrong shape")
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    entries[(i, j, k)] = tensor[i][j][k]

    def get(i, j, k):
        return entries.get((i, j, k), 0)

    for i in range(n):
        for j in range(n):
            for k in range(n):
                s = get(i, j, k) + get(j, i, k)
                if not _zero(s, tol):
                    raise AntisymmetryError(
                        f"c[{i + 1},{j + 1},{k + 1}] + c[{j + 1},{i + 1},{k + 1}] = {s} != 0", (i, j, k))
    w = graded.weights
    for (i, j, k), c in entries.items():
        if not _zero(c, tol) and w[k] != w[i] + w[j]:
            raise GradingError(
                f"[e{i + 1}, e{j + 1}] has a component on e{k + 1} of weight {w[k]} != {w[i]} + {w[j]}",
                (i, j, k))
    constants = {}
    for (i, j, k), c in entries.items():
        if not _zero(c, tol):
            constants.setdefault((i, j), {})[k] = c
    alg = LieAlgebra(graded, constants, tol)
    e = [[1 if a == b else 0 for b in range(n)] for a in range(n)]
    for i, j, k in itertools.combinations(range(n), 3):
        a, b, c = e[i], e[j], e[k]
        t1 = alg.bracket(a, alg.bracket(b, c))
        t2 = alg.bracket(b, alg.bracket(c, a))
        t3 = alg.bracket(c, alg.bracket(a, b))
        for m in range(n):
            s = t1[m] + t2[m] + t3[m]
            if not _zero(s, tol):
                raise JacobiError(
                    f"Jacobi identity fails for (e{i + 1}, e{j + 1}, e{k + 1}) in component {m + 1}: {s}",
                    (i, j, k))
    return alg


def _rank(rows, exact, tol):
    rows = [list(r) for r in rows if any(not _zero(x, tol) for x in r)]
    if not rows:
        return 0, []
    if not exact:
        import numpy as np
        mat = np.array(rows, dtype=float)
        r = int(np.linalg.matrix_rank(mat, tol=max(tol, 1e-12)))
        # span basis: use orthonormal rows from SVD
        _, s, vt = np.linalg.svd(mat)
        return r, [list(v) for v in vt[:r]]
    basis = []
    for r in rows:
        v = [Fraction(x) for x in r]
        for b in basis:
            p = next(i for i, x in enumerate(b) if x != 0)
            if v[p] != 0:
                f = v[p] / b[p]
                v = [x - f * y for x, y in zip(v, b)]
        if any(x != 0 for x in v):
            basis.append(v)
    return len(basis), basis


def lie_step(alg):
    """Nilpotency step: the smallest s with g^(s+1) = 0 in the lower central series."""
    n = alg.dim
    exact = alg.is_exact()
    tol = alg.tol
    current = [[1 if a == b else 0 for b in range(n)] for a in range(n)]
    step = 1
    for _ in range(n + 1):
        nxt = []
        for i in range(n):
            e = [1 if a == i else 0 for a in range(n)]
            for y in current:
                nxt.append(alg.bracket(e, y))
        r, basis = _rank(nxt, exact, tol)
        if r == 0:
            return step
        current = basis
        step += 1
    raise LieAlgebraError("algebra is not nilpotent")


@lru_cache(maxsize=None)
def dynkin_word_coefficients(order):
    """Coefficients of nested brackets in the Dynkin form of BCH up to total length ``order``.

    Returns a dict mapping a word over {0, 1} (0 for the first argument,
    1 for the second) to the rational coefficient of
    [x_1, [x_2, ..., [x_{m-1}, x_m]]].  Words whose value is forced to
    vanish (last two letters equal) are dropped.
    """
    out = {}

    def pairs_with_budget(budget):
        for a in range(budget + 1):
            for b in range(budget + 1 - a):
                if a + b >= 1:
                    yield a, b

    def rec(k_left, budget, seq):
        if seq:
            k = len(seq)
            m = sum(a + b for a, b in seq)
            denom = m
            for a, b in seq:
                denom *= math.factorial(a) * math.factorial(b)
            coeff = Fraction((-1) ** (k + 1), k * denom)
            word = []
            for a, b in seq:
                word.extend([0] * a)
                word.extend([1] * b)
            word = tuple(word)
            if len(word) == 1 or word[-1] != word[-2]:
                out[word] = out.get(word, 0) + coeff
        if budget == 0:
            return
        for a, b in pairs_with_budget(budget):
            seq.append((a, b))
            rec(k_left, budget - a - b, seq)
            seq.pop()

    rec(order, order, [])
    return {w: c for w, c in out.items() if c != 0}


def nested_bracket(alg, word, a, b):
    """Evaluate [x_1, [x_2, ..., x_m]] with x = a for letter 0 and b for letter 1."""
    args = (a, b)
    val = list(args[word[-1]])
    for letter in reversed(word[:-1]):
        val = alg.bracket(args[letter], val)
    return val


def bch_truncated(alg, a, b, order=None):
    """The BCH series log(exp a exp b) truncated at total bracket length ``order``.

    Entries of ``a`` and ``b`` may be numbers or polynomials.  By default
    the order is the Lie step, which makes the result exact.
    """
    if order is None:
        order = alg.lie_step
    step = alg.lie_step
    n = alg.dim
    out = [0] * n
    for word, coeff in dynkin_word_coefficients(order).items():
        if len(word) > step:
            continue
        val = nested_bracket(alg, word, a, b)
        for k in range(n):
            if not _is_null(val[k]):
                out[k] = out[k] + val[k] * coeff
    return out
