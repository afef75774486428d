"""Sparse multivariate polynomials over exact rationals (or floats).

A polynomial is a mapping from exponent tuples to coefficients.  Zero
coefficients are never stored, so structural equality is mathematical
equality.
"""

from __future__ import annotations

from fractions import Fraction
from numbers import Number

import numpy as np


def _clean(terms):
    return {m: c for m, c in terms.items() if c != 0}


class Poly:
    __slots__ = ("nvars", "terms")

    def __init__(self, nvars, terms=None):
        self.nvars = nvars
        self.terms = _clean(terms or {})

    # -- constructors -------------------------------------------------
    @classmethod
    def const(cls, nvars, c):
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def var(cls, nvars, i, coeff=1):
        e = [0] * nvars
        e[i] = 1
        return cls(nvars, {tuple(e): coeff})

    @classmethod
    def monomial(cls, exponent, coeff=1):
        return cls(len(exponent), {tuple(exponent): coeff})

    # -- arithmetic ---------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Poly):
            if other.nvars != self.nvars:
                raise ValueError("polynomials live in different variable counts")
            return other
        if isinstance(other, Number):
            return Poly.const(self.nvars, other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, 0) + c
        return Poly(self.nvars, out)

    __radd__ = __add__

    def __neg__(self):
        return Poly(self.nvars, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Number):
            return Poly(self.nvars, {m: c * other for m, c in self.terms.items()})
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = tuple(a + b for a, b in zip(m1, m2))
                out[m] = out.get(m, 0) + c1 * c2
        return Poly(self.nvars, out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Number):
            return NotImplemented
        if isinstance(other, int):
            other = Fraction(other)
        return Poly(self.nvars, {m: c / other for m, c in self.terms.items()})

    def __pow__(self, k):
        if not isinstance(k, int) or k < 0:
            raise ValueError("only nonnegative integer powers are supported")
        result = Poly.const(self.nvars, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __eq__(self, other):
        if isinstance(other, Number):
            other = Poly.const(self.nvars, other)
        if not isinstance(other, Poly):
            return NotImplemented
        return self.nvars == other.nvars and self.terms == other.terms

    def __hash__(self):
        return hash((self.nvars, frozenset(self.terms.items())))

    def __bool__(self):
        return bool(self.terms)

    def is_zero(self):
        return not self.terms

    # -- calculus -----------------------------------------------------
    def diff(self, i):
        out = {}
        for m, c in self.terms.items():
            if m[i]:
                e = list(m)
                e[i] -= 1
                out[tuple(e)] = out.get(tuple(e), 0) + c * m[i]
        return Poly(self.nvars, out)

    def __call__(self, *point):
        if len(point) == 1 and not isinstance(point[0], Number):
            point = tuple(point[0])
        return self.evaluate(point)

    def evaluate(self, point):
        """Evaluate at a point; entries may be numbers or numpy arrays."""
        if len(point) != self.nvars:
            raise ValueError("point has the wrong dimension")
        total = 0
        powers = {}
        for m, c in self.terms.items():
            term = c
            for i, e in enumerate(m):
                if e:
                    key = (i, e)
                    if key not in powers:
                        powers[key] = point[i] ** e
                    term = term * powers[key]
            total = total + term
        return total

    def substitute(self, images):
        """Compose with a list of polynomials, one per variable."""
        if len(images) != self.nvars:
            raise ValueError("need one image per variable")
        target = images[0].nvars if images else 0
        result = Poly(target)
        cache = {}
        for m, c in self.terms.items():
            term = Poly.const(target, c)
            for i, e in enumerate(m):
                if e:
                    if (i, e) not in cache:
                        cache[(i, e)] = images[i] ** e
                    term = term * cache[(i, e)]
            result = result + term
        return result

    def map_coefficients(self, fn):
        return Poly(self.nvars, {m: fn(c) for m, c in self.terms.items()})

    # -- gradings -----------------------------------------------------
    def degrees(self, weights):
        return {sum(w * e for w, e in zip(weights, m)) for m in self.terms}

    def homogeneous_part(self, weights, degree):
        return Poly(self.nvars, {m: c for m, c in self.terms.items()
                                 if sum(w * e for w, e in zip(weights, m)) == degree})

    def truncate(self, weights, max_degree):
        return Poly(self.nvars, {m: c for m, c in self.terms.items()
                                 if sum(w * e for w, e in zip(weights, m)) <= max_degree})

    def total_degree(self):
        return max((sum(m) for m in self.terms), default=-1)

    def to_string(self, names=None):
        if names is None:
            names = [f"t{i + 1}" for i in range(self.nvars)]
        if not self.terms:
            return "0"
        parts = []
        for m in sorted(self.terms, key=lambda e: (sum(e), tuple(-a for a in e))):
            c = self.terms[m]
            factors = []
            for i, e in enumerate(m):
                if e == 1:
                    factors.append(names[i])
                elif e > 1:
                    factors.append(f"{names[i]}^{e}")
            mono = "*".join(factors)
            if not mono:
                parts.append(str(c))
            elif c == 1:
                parts.append(mono)
            elif c == -1:
                parts.append("-" + mono)
            else:
                parts.append(f"{c}*{mono}")
        return " + ".join(parts).replace("+ -", "- ")

    def __repr__(self):
        return f"Poly({self.to_string()})"


def as_exact(value):
    """Turn ints/strings/Fractions into Fractions; leave floats alone."""
    if isinstance(value, (Fraction, int)) and not isinstance(value, bool):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    raise TypeError(f"not a scalar: {value!r}")


def is_exact(value):
    return isinstance(value, (Fraction, int))
