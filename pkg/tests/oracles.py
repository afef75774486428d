"""Independent reference computations used by the tests.

Matrix models of the nilpotent groups, built on sympy: exponentials and
logarithms of strictly upper triangular matrices are finite series, so
everything is exact, and symbolic entries give whole polynomial laws.
Nothing here touches the package's BCH code.
"""

from fractions import Fraction

import sympy as sp


def to_sympy(x):
    if isinstance(x, Fraction):
        return sp.Rational(x.numerator, x.denominator)
    return sp.sympify(x)


def nil_exp(a):
    m = a.shape[0]
    out, term = sp.eye(m), sp.eye(m)
    for k in range(1, m):
        term = (term * a) / k
        out = out + term
    return out.applyfunc(sp.expand)


def nil_log(g):
    m = g.shape[0]
    n = g - sp.eye(m)
    out, power = sp.zeros(m), sp.eye(m)
    for k in range(1, m):
        power = power * n
        out = out + power * sp.Rational((-1) ** (k + 1), k)
    return out.applyfunc(sp.expand)


def unit(m, i, j):
    out = sp.zeros(m)
    out[i - 1, j - 1] = 1
    return out


class MatrixModel:
    """Basis e_k -> matrix; coordinates are read off designated entries."""

    def __init__(self, size, basis, readout):
        self.size = size
        self.basis = basis
        self.readout = readout

    def embed(self, v):
        out = sp.zeros(self.size)
        for c, b in zip(v, self.basis):
            out = out + to_sympy(c) * b
        return out

    def coords(self, a):
        v = tuple(sp.expand(a[i - 1, j - 1]) for i, j in self.readout)
        assert (self.embed(v) - a).applyfunc(sp.expand) == sp.zeros(self.size), "left the span of the basis"
        return v

    def bracket(self, i, j):
        a, b = self.basis[i], self.basis[j]
        return self.coords(a * b - b * a)

    def product(self, v, w):
        return self.coords(nil_log(nil_exp(self.embed(v)) * nil_exp(self.embed(w))))


HEISENBERG = MatrixModel(3, [unit(3, 1, 2), unit(3, 2, 3), unit(3, 1, 3)], [(1, 2), (2, 3), (1, 3)])

ENGEL = MatrixModel(
    4,
    [unit(4, 1, 2) + unit(4, 2, 3), unit(4, 3, 4), unit(4, 2, 4), unit(4, 1, 4)],
    [(1, 2), (3, 4), (2, 4), (1, 4)],
)


def poly_to_sympy(p, symbols):
    """A filtcalc Poly as a sympy expression in the given symbols."""
    out = sp.Integer(0)
    for mono, c in p.terms.items():
        term = to_sympy(c)
        for s, e in zip(symbols, mono):
            term = term * s ** e
        out = out + term
    return sp.expand(out)
