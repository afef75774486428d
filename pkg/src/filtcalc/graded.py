"""Gradations, dilations, homogeneous quasi-norms and multi-index bookkeeping."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache

import numpy as np


class GradationError(ValueError):
    """Raised for empty, non-positive or unsorted weight vectors."""


def validate_gradation(weights):
    weights = tuple(weights)
    if not weights:
        raise GradationError("a gradation needs at least one weight")
    for w in weights:
        if isinstance(w, bool) or not isinstance(w, (int, np.integer)) or w < 1:
            raise GradationError(f"weights must be positive integers, got {w!r}")
    for a, b in zip(weights, weights[1:]):
        if a > b:
            raise GradationError(f"weights must be nondecreasing, got {list(weights)}")
    return GradedStructure(tuple(int(w) for w in weights))


@dataclass(frozen=True)
class GradedStructure:
    weights: tuple

    def __post_init__(self):
        if not self.weights or any(w < 1 for w in self.weights) or list(self.weights) != sorted(self.weights):
            raise GradationError(f"invalid weights {self.weights}")

    @property
    def dim(self):
        return len(self.weights)

    @property
    def homogeneous_dimension(self):
        return sum(self.weights)

    @property
    def distinct_weights(self):
        return tuple(sorted(set(self.weights)))

    @property
    def multiplicities(self):
        return tuple(self.weights.count(w) for w in self.distinct_weights)

    @property
    def step(self):
        return self.weights[-1]

    @cached_property
    def lcm(self):
        return math.lcm(*self.weights)

    def degree(self, alpha):
        """Homogeneous degree [alpha] = sum of alpha_i times weight_i."""
        return sum(a * w for a, w in zip(alpha, self.weights))

    def blocks(self):
        """Index ranges sharing one weight, in increasing weight order."""
        out = []
        for w in self.distinct_weights:
            idx = [i for i, wi in enumerate(self.weights) if wi == w]
            out.append((w, idx))
        return out


def dilate(g, r, v):
    """Apply the dilation by r: component i is multiplied by r**weight_i.

    Works on a single vector or on an array whose last axis is the
    coordinate axis; exact when r and v are rationals.
    """
    if isinstance(v, np.ndarray):
        scale = np.array([float(r) ** w for w in g.weights])
        return v * scale
    return tuple(x * r ** w for x, w in zip(v, g.weights))


def quasinorm(g, v):
    """(sum |v_i|^(2 M0 / w_i))^(1/(2 M0)) with M0 the lcm of the weights."""
    m0 = g.lcm
    arr = np.asarray(v, dtype=float)
    # Factor out the largest term to avoid underflow for tiny vectors.
    comps = np.abs(arr) ** (1.0 / np.array(g.weights, dtype=float))
    scale = np.max(comps, axis=-1, keepdims=True)
    safe = np.where(scale == 0, 1.0, scale)
    total = np.sum((comps / safe) ** (2 * m0), axis=-1)
    out = np.squeeze(safe, -1) * total ** (1.0 / (2 * m0))
    return float(out) if out.ndim == 0 else out


@lru_cache(maxsize=None)
def _min_count(weights, m):
    # Fewest parts, each drawn from `weights`, summing to m; None if impossible.
    best = [None] * (m + 1)
    best[0] = 0
    for total in range(1, m + 1):
        for w in set(weights):
            if w <= total and best[total - w] is not None:
                cand = best[total - w] + 1
                if best[total] is None or cand < best[total]:
                    best[total] = cand
    return best[m]


def min_index(g, m):
    """Smallest |alpha| over multi-indices with [alpha] = m (0 when there is none)."""
    if m < 0:
        raise ValueError("degree must be nonnegative")
    found = _min_count(g.weights, int(m))
    return 0 if found is None else found


def multi_indices_of_degree(g, m):
    """All alpha in N^n with [alpha] = m, in reverse-lexicographic order."""
    n = g.dim
    out = []

    def rec(i, remaining, prefix):
        if i == n:
            if remaining == 0:
                out.append(tuple(prefix))
            return
        w = g.weights[i]
        for a in range(remaining // w + 1):
            prefix.append(a)
            rec(i + 1, remaining - a * w, prefix)
            prefix.pop()

    rec(0, m, [])
    out.sort(key=lambda a: tuple(reversed(a)))
    return out


def multi_indices(g, max_degree, min_degree=0):
    """Multi-indices with min_degree <= [alpha] <= max_degree, ordered by degree."""
    out = []
    for m in range(min_degree, max_degree + 1):
        out.extend(multi_indices_of_degree(g, m))
    return out


def factorial(alpha):
    out = 1
    for a in alpha:
        out *= math.factorial(a)
    return out


def as_fraction_vector(v):
    return tuple(Fraction(x) for x in v)
