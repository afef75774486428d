"""Powers of Z = sum_j z_j X_j with function coefficients in a free setting.

Each z_j is a generic function on which the X_i act as derivations.  An
*atom* ``(J, m)`` stands for X_J z_m = X_{j1}(X_{j2}(... z_m)) with a word
J of letters; coefficient polynomials are dicts mapping a sorted tuple of
atoms to an integer.  An expansion of Z^k maps operator words I to their
coefficient polynomial a_I, so that Z^k = sum_I a_I X_I.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product


def _poly_add(p, q, scale=1):
    out = dict(p)
    for m, c in q.items():
        out[m] = out.get(m, 0) + scale * c
        if out[m] == 0:
            del out[m]
    return out


def _poly_mul(p, q):
    out = {}
    for m1, c1 in p.items():
        for m2, c2 in q.items():
            m = tuple(sorted(m1 + m2))
            out[m] = out.get(m, 0) + c1 * c2
    return {m: c for m, c in out.items() if c != 0}


def atom_poly(word, m):
    return {(((tuple(word)), m),): 1}


def derive(letter, p):
    """X_letter applied to a coefficient polynomial (Leibniz over atoms)."""
    out = {}
    for mono, c in p.items():
        for pos, (word, m) in enumerate(mono):
            new = mono[:pos] + (((letter,) + word, m),) + mono[pos + 1:]
            new = tuple(sorted(new))
            out[new] = out.get(new, 0) + c
    return {m: c for m, c in out.items() if c != 0}


@dataclass(frozen=True)
class DerivationExpansion:
    n: int
    k: int
    terms: dict   # word -> coefficient polynomial

    def coefficient(self, word):
        return self.terms.get(tuple(word), {})

    def words_of_length(self, length):
        return {w: p for w, p in self.terms.items() if len(w) == length}


def z_power_bruteforce(n, k):
    """Z^k by repeated left multiplication: Z (c X_W) = sum_j z_j (X_j c) X_W + z_j c X_{jW}."""
    terms = {(): {(): 1}}
    for _ in range(k):
        nxt = {}
        for word, c in terms.items():
            for j in range(n):
                zj = atom_poly((), j)
                d = derive(j, c)
                if d:
                    nxt[word] = _poly_add(nxt.get(word, {}), _poly_mul(zj, d))
                w2 = (j,) + word
                nxt[w2] = _poly_add(nxt.get(w2, {}), _poly_mul(zj, c))
        terms = {w: p for w, p in nxt.items() if p}
    return DerivationExpansion(n, k, terms)


def z_power_expand(n, k):
    """Z^k from the closed indexed-sum formula.

    Positions 1..k carry letters j_p.  Every position either feeds the
    operator word or differentiates the coefficient z_{j_q} of a later
    position q > p.  Letters reaching the same target keep their positional
    order.  The term is prod_q X_{I_q} z_{j_q} times X_I, where I collects
    the letters sent to the word; the last position always goes to the word.
    """
    terms = {}
    targets_per_pos = [[None] + list(range(p + 1, k)) for p in range(k)]
    for letters in product(range(n), repeat=k):
        for targets in product(*targets_per_pos):
            word = tuple(letters[p] for p in range(k) if targets[p] is None)
            mono = []
            for q in range(k):
                applied = tuple(letters[p] for p in range(k) if targets[p] == q)
                mono.append((applied, letters[q]))
            mono = tuple(sorted(mono))
            bucket = terms.setdefault(word, {})
            bucket[mono] = bucket.get(mono, 0) + 1
    return DerivationExpansion(n, k, {w: p for w, p in terms.items() if p})


class ProductFormError(AssertionError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


def _apply_z(p, n):
    """Z acting on a scalar coefficient: sum_m z_m X_m p."""
    out = {}
    for m in range(n):
        d = derive(m, p)
        if d:
            out = _poly_add(out, _poly_mul(atom_poly((), m), d))
    return out


def product_form_families(n, k):
    """Families of coefficient vectors whose products give the word coefficients.

    Returns a dict length -> list of families; a family of length l is a
    tuple of l vectors (each a list of n coefficient polynomials).  For
    every word I of length l, a_I = sum over families of prod_p v^(p)_{i_p}.
    Built recursively: applying Z either prepends the vector (z_1..z_n) or
    lets Z differentiate one vector of an existing family.
    """
    zvec = tuple(atom_poly((), j) for j in range(n))
    fams = {1: [(zvec,)]}
    for _ in range(k - 1):
        nxt = {}
        for length, flist in fams.items():
            for fam in flist:
                nxt.setdefault(length + 1, []).append((zvec,) + fam)
                for p in range(length):
                    vec = tuple(_apply_z(c, n) for c in fam[p])
                    if any(vec):
                        nxt.setdefault(length, []).append(fam[:p] + (vec,) + fam[p + 1:])
        fams = nxt
    return fams


@dataclass
class ProductFormVerdict:
    ok: bool
    families: dict
    checked_words: int


def product_form_check(expansion):
    """Verify every a_I equals the sum over families of products of entries."""
    n, k = expansion.n, expansion.k
    fams = product_form_families(n, k)
    checked = 0
    for length in range(1, k + 1):
        flist = fams.get(length, [])
        for word in product(range(n), repeat=length):
            total = {}
            for fam in flist:
                term = {(): 1}
                for p, letter in enumerate(word):
                    term = _poly_mul(term, fam[p][letter])
                    if not term:
                        break
                if term:
                    total = _poly_add(total, term)
            got = expansion.coefficient(word)
            if total != got:
                raise ProductFormError(f"product form mismatch for word {word}", word)
            checked += 1
    extra = [w for w in expansion.terms if len(w) == 0 or len(w) > k]
    if extra:
        raise ProductFormError("expansion has words outside 1..k", extra[0])
    return ProductFormVerdict(True, fams, checked)


def expansions_equal(a, b):
    return a.n == b.n and a.k == b.k and a.terms == b.terms
