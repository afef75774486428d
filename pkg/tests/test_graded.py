from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from filtcalc.graded import (GradationError, dilate, min_index, multi_indices, multi_indices_of_degree,
                             quasinorm, validate_gradation)
from filtcalc.group import higher_order_test, scaling_exponent_probe

H = validate_gradation((1, 1, 2))
E4 = validate_gradation((1, 1, 2, 3))
G235 = validate_gradation((2, 3, 5))


@pytest.mark.parametrize("weights,q,s,d,m0", [
    ((1, 1, 2), 4, 2, (2, 1), 2),
    ((1, 1, 2, 3), 7, 3, (2, 1, 1), 6),
    ((2, 3, 5), 10, 3, (1, 1, 1), 30),
])
def test_gradation_summary(weights, q, s, d, m0):
    g = validate_gradation(weights)
    assert g.homogeneous_dimension == q
    assert len(g.distinct_weights) == s
    assert g.multiplicities == d
    assert g.lcm == m0
    assert sum(g.multiplicities) == g.dim


@pytest.mark.parametrize("bad", [(), (0, 1), (1, -2), (2, 1), (1, 1.5)])
def test_gradation_rejects(bad):
    with pytest.raises(GradationError):
        validate_gradation(bad)


def test_dilate_examples():
    assert dilate(H, 2, (1, 1, 1)) == (2, 2, 4)
    assert dilate(G235, Fraction(1, 2), (4, 8, 32)) == (1, 1, 1)
    assert dilate(E4, 1, (3, -1, 5, 7)) == (3, -1, 5, 7)
    np.testing.assert_allclose(dilate(H, 2.0, np.array([1.0, 1.0, 1.0])), [2, 2, 4])


rationals = st.fractions(min_value=Fraction(1, 10), max_value=10, max_denominator=20)
vectors = st.lists(st.fractions(min_value=-5, max_value=5, max_denominator=12), min_size=4, max_size=4)


@given(rationals, rationals, vectors)
def test_dilation_composition_exact(r, s, v):
    assert dilate(E4, r, dilate(E4, s, v)) == dilate(E4, r * s, v)


def test_quasinorm_examples():
    assert quasinorm(H, (0, 0, 0)) == 0
    assert quasinorm(H, (1, 0, 0)) == pytest.approx(1)
    for t in (0.25, 4.0, -9.0):
        assert quasinorm(H, (0, 0, t)) == pytest.approx(abs(t) ** 0.5)


@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4), st.floats(0.01, 50))
def test_quasinorm_homogeneous_and_symmetric(v, r):
    v = np.array(v)
    assert quasinorm(E4, dilate(E4, r, v)) == pytest.approx(r * quasinorm(E4, v), rel=1e-9, abs=1e-300)
    assert quasinorm(E4, -v) == pytest.approx(quasinorm(E4, v))


def test_quasinorm_tiny_vectors_do_not_underflow():
    v = dilate(E4, 1e-80, np.array([0.3, -0.2, 0.5, 0.1]))
    assert quasinorm(E4, v) == pytest.approx(1e-80 * quasinorm(E4, np.array([0.3, -0.2, 0.5, 0.1])))


def test_quasinorm_batched():
    vs = np.array([[1.0, 0, 0], [0, 0, 4.0]])
    np.testing.assert_allclose(quasinorm(H, vs), [1.0, 2.0])


def test_min_index_gaps():
    assert [min_index(G235, m) for m in range(1, 6)] == [0, 1, 1, 2, 1]
    assert min_index(G235, 0) == 0


def test_min_index_stratified_low_degrees():
    for weights in ((1, 1, 2), (1, 1, 2, 3), (1, 1, 1, 2, 2, 2)):
        g = validate_gradation(weights)
        for j in range(1, g.step + 1):
            assert min_index(g, j) == 1


def test_min_index_stratified_is_ceiling():
    # with every weight 1..s available, the fewest parts summing to j is ceil(j/s)
    for weights in ((1, 1, 2), (1, 1, 2, 3)):
        g = validate_gradation(weights)
        for j in range(1, 30):
            assert min_index(g, j) == -(-j // g.step)


def test_min_index_bounded_by_length():
    for g in (H, E4, G235):
        for alpha in multi_indices(g, 12):
            assert min_index(g, g.degree(alpha)) <= sum(alpha)


def test_min_index_matches_exhaustive_search():
    for g in (G235, E4):
        for m in range(0, 16):
            lengths = [sum(a) for a in multi_indices_of_degree(g, m)]
            assert min_index(g, m) == (min(lengths) if lengths else 0)


def test_multi_index_order_and_additivity():
    idx = multi_indices(E4, 6)
    degs = [E4.degree(a) for a in idx]
    assert degs == sorted(degs)
    assert len(set(idx)) == len(idx)
    for a in idx[:15]:
        for b in idx[:15]:
            s = tuple(x + y for x, y in zip(a, b))
            assert E4.degree(s) == E4.degree(a) + E4.degree(b)
    # within one degree the order is lexicographic on the reversed entries
    same = multi_indices_of_degree(H, 2)
    assert same == sorted(same, key=lambda a: a[::-1])


def test_scaling_probe_monomials():
    eps = np.logspace(-3, -1, 8)
    p = scaling_exponent_probe(lambda v: v[2], H, (0.0, 0.0, 1.0), eps)
    assert p.slopes[0] == pytest.approx(2, abs=1e-9)
    p = scaling_exponent_probe(lambda v: v[0] * v[1], H, (0.7, 0.3, 0.0), eps)
    assert p.slopes[0] == pytest.approx(2, abs=1e-9)


def test_scaling_probe_zero_on_ray():
    p = scaling_exponent_probe(lambda v: 0 * v[0], H, (1.0, 0.0, 0.0), np.logspace(-3, -1, 5))
    assert p.trivial[0] and p.slopes[0] == np.inf


def test_higher_order_exact_path():
    from filtcalc.poly import Poly
    x1, x2 = Poly.var(3, 0), Poly.var(3, 1)
    zero = Poly(3)
    assert higher_order_test([zero, zero, x1 ** 3], H.weights, H.weights)
    verdict = higher_order_test([zero, zero, x1 * x2], H.weights, H.weights)
    assert not verdict
    assert verdict.violations[0][:2] == (2, (1, 1, 0))
