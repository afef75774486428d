"""Universal enveloping algebra in the ordered (PBW) basis <X>^alpha = <X_1>^a1 ... <X_n>^an."""

from __future__ import annotations

from dataclasses import dataclass

from .graded import multi_indices_of_degree
from .lie import LieAlgebra
from .poly import is_exact


def _word_to_alpha(word, n):
    alpha = [0] * n
    for i in word:
        alpha[i] += 1
    return tuple(alpha)


def alpha_to_word(alpha):
    out = []
    for i, a in enumerate(alpha):
        out.extend([i] * a)
    return tuple(out)


_CACHES = {}


def _cache_for(alg, strategy):
    key = (id(alg), strategy)
    entry = _CACHES.get(key)
    if entry is None or entry[0] is not alg:
        entry = (alg, {})
        _CACHES[key] = entry
    return entry[1]


def pbw_normalize(alg, word, strategy="left"):
    """Normal form of the word X_{i1}...X_{im} as a dict alpha -> coefficient.

    Rewrites by transposing adjacent out-of-order letters, X_a X_b =
    X_b X_a + [X_a, X_b], picking the leftmost (or rightmost) inversion.
    """
    if strategy not in ("left", "right"):
        raise ValueError("strategy must be 'left' or 'right'")
    cache = _cache_for(alg, strategy)
    n = alg.dim

    def nf(w):
        if w in cache:
            return cache[w]
        inversions = [i for i in range(len(w) - 1) if w[i] > w[i + 1]]
        if not inversions:
            out = {_word_to_alpha(w, n): 1}
        else:
            i = inversions[0] if strategy == "left" else inversions[-1]
            a, b = w[i], w[i + 1]
            out = dict(nf(w[:i] + (b, a) + w[i + 2:]))
            for k, c in alg.bracket_basis(a, b).items():
                for alpha, d in nf(w[:i] + (k,) + w[i + 2:]).items():
                    out[alpha] = out.get(alpha, 0) + c * d
            out = {al: c for al, c in out.items() if not _negligible(c, alg.tol)}
        cache[w] = out
        return out

    return dict(nf(tuple(word)))


def _negligible(c, tol):
    if is_exact(c):
        return c == 0
    return abs(c) <= tol


@dataclass(frozen=True, eq=False)
class UEAElement:
    algebra: LieAlgebra
    coeffs: dict

    def __post_init__(self):
        clean = {tuple(a): c for a, c in self.coeffs.items() if not _negligible(c, self.algebra.tol)}
        object.__setattr__(self, "coeffs", clean)

    @classmethod
    def basis(cls, alg, alpha, coeff=1):
        return cls(alg, {tuple(alpha): coeff})

    @classmethod
    def generator(cls, alg, i, coeff=1):
        alpha = [0] * alg.dim
        alpha[i] = 1
        return cls(alg, {tuple(alpha): coeff})

    @classmethod
    def scalar(cls, alg, c):
        return cls(alg, {(0,) * alg.dim: c})

    def _clean(self, d):
        return UEAElement(self.algebra, {a: c for a, c in d.items() if not _negligible(c, self.algebra.tol)})

    def __add__(self, other):
        out = dict(self.coeffs)
        for a, c in other.coeffs.items():
            out[a] = out.get(a, 0) + c
        return self._clean(out)

    def __sub__(self, other):
        return self + other.scale(-1)

    def __neg__(self):
        return self.scale(-1)

    def scale(self, s):
        return self._clean({a: c * s for a, c in self.coeffs.items()})

    def __mul__(self, other):
        if not isinstance(other, UEAElement):
            return self.scale(other)
        return uea_multiply(self, other)

    def __rmul__(self, s):
        return self.scale(s)

    def __eq__(self, other):
        return isinstance(other, UEAElement) and self.coeffs == other.coeffs

    def degree(self):
        g = self.algebra.graded
        return max((g.degree(a) for a in self.coeffs), default=-1)

    def is_zero(self):
        return not self.coeffs

    def close_to(self, other, tol):
        keys = set(self.coeffs) | set(other.coeffs)
        return all(abs(self.coeffs.get(k, 0) - other.coeffs.get(k, 0)) <= tol for k in keys)

    def __repr__(self):
        parts = []
        for a in sorted(self.coeffs, key=lambda al: (self.algebra.graded.degree(al), tuple(reversed(al)))):
            mono = "*".join(f"X{i + 1}^{e}" if e > 1 else f"X{i + 1}" for i, e in enumerate(a) if e) or "1"
            parts.append(f"{self.coeffs[a]}*{mono}")
        return "UEA(" + (" + ".join(parts) or "0") + ")"


def uea_multiply(a, b, strategy="left"):
    alg = a.algebra
    if b.algebra is not alg and b.algebra.key() != alg.key():
        raise ValueError("cannot multiply elements of different enveloping algebras")
    out = {}
    for al, ca in a.coeffs.items():
        wa = alpha_to_word(al)
        for be, cb in b.coeffs.items():
            for gamma, c in pbw_normalize(alg, wa + alpha_to_word(be), strategy).items():
                out[gamma] = out.get(gamma, 0) + ca * cb * c
    return UEAElement(alg, {g: c for g, c in out.items() if not _negligible(c, alg.tol)})


def from_word_sum(alg, words, strategy="left"):
    """Normal form of sum_w coeff_w X_w given as {word: coeff}."""
    out = UEAElement(alg, {})
    for w, c in words.items():
        out = out + UEAElement(alg, pbw_normalize(alg, w, strategy)).scale(c)
    return out


def hom_component(a, degree):
    g = a.algebra.graded
    return UEAElement(a.algebra, {al: c for al, c in a.coeffs.items() if g.degree(al) == degree})


def rockland_candidate(alg, m0=None):
    """sum_j (-1)^(M0/w_j) <X_j>^(2 M0 / w_j), homogeneous of degree 2 M0."""
    g = alg.graded
    m0 = g.lcm if m0 is None else m0
    out = {}
    for j, w in enumerate(g.weights):
        if m0 % w:
            raise ValueError("M0 must be a common multiple of the weights")
        alpha = [0] * g.dim
        alpha[j] = 2 * m0 // w
        out[tuple(alpha)] = (-1) ** (m0 // w)
    return UEAElement(alg, out)


def basis_of_degree(alg, degree):
    return [UEAElement.basis(alg, a) for a in multi_indices_of_degree(alg.graded, degree)]
