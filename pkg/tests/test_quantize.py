from fractions import Fraction

import numpy as np
import pytest

from filtcalc import expr as E
from filtcalc.expmap import osculating_law
from filtcalc.group import leibniz_coefficients
from filtcalc.quantize import (Cutoff, SmoothingSymbol, adjoint_defect, difference_op, integrate_box,
                               kernel_change_frame, mollified_delta, op_diff, op_smoothing, smooth_step)
from filtcalc.uea import UEAElement

F = E.parse("sin(x1 + 2*x2) * exp(x3/2) + x1^2 - x2*x3")
G = E.parse("cos(x1 - x3) + x2")


@pytest.fixture(scope="module")
def chart():
    from filtcalc.definitions import load_definition
    return load_definition("heisenberg").chart


def test_identity_symbol_is_exact(chart):
    fr = chart.frame("perturbed")
    x = (Fraction(1, 4), Fraction(-1, 3), Fraction(1, 5))
    f = E.parse("x1^3 - 2*x2*x3 + 1/7")
    assert op_diff(fr, {(0, 0, 0): 1}, f, x) == float(E.evaluate(f, x=x))


@pytest.mark.parametrize("name", ["left", "perturbed", "twisted", "bu"])
def test_first_order_symbols_are_frame_derivatives(chart, name):
    fr = chart.frame(name)
    for x in chart.sample_points(20, seed=8, shrink=0.4):
        for j in range(3):
            alpha = tuple(int(i == j) for i in range(3))
            want = float(E.evaluate(fr.apply(j, F), x=x))
            assert op_diff(fr, {alpha: 1}, F, x) == pytest.approx(want, abs=1e-10)
    x = chart.sample_points(1, seed=9, shrink=0.4)[0]
    for j in range(3):
        alpha = tuple(int(i == j) for i in range(3))
        want = float(E.evaluate(fr.apply(j, F), x=x))
        assert op_diff(fr, {alpha: 1}, F, x, method="fd") == pytest.approx(want, abs=1e-6)


def test_second_order_on_left_frame_matches_closed_form(chart):
    # on the left-invariant frame exp_x(v) = x * v, so L1 L2 (f o exp_x)(0) = (X1 X2 f)(x)
    fr = chart.frame("left")
    f = E.parse("x1^3*x2 - x3^2 + x1*x2*x3")
    x = (Fraction(1, 3), Fraction(1, 2), Fraction(-1, 4))
    want = E.evaluate(fr.apply(0, fr.apply(1, f)), x=x)
    assert op_diff(fr, {(1, 1, 0): 1}, f, x) == pytest.approx(float(want), abs=1e-12)
    sym = UEAElement(osculating_law(fr, x).algebra, {(1, 1, 0): 2, (0, 0, 1): -1})
    want2 = 2 * want - E.evaluate(fr.apply(2, f), x=x)
    assert op_diff(fr, sym, f, x) == pytest.approx(float(want2), abs=1e-12)


def test_symbolic_and_fd_quantization_agree(chart):
    fr = chart.frame("perturbed")
    x = (0.2, -0.1, 0.15)
    for alpha in ((1, 1, 0), (0, 1, 1), (2, 0, 0)):
        a = op_diff(fr, {alpha: 1}, F, x)
        b = op_diff(fr, {alpha: 1}, F, x, method="fd")
        assert a == pytest.approx(b, abs=1e-5)


def test_smooth_step_and_cutoff():
    s = np.linspace(-0.5, 1.5, 41)
    out = smooth_step(s)
    assert np.all(out[s <= 0] == 1) and np.all(out[s >= 1] == 0)
    assert np.all(np.diff(out) <= 0) and np.all((out >= 0) & (out <= 1))
    c = Cutoff(0.3, 0.6)
    assert c.profile(0.29) == 1 and c.profile(0.61) == 0 and 0 < c.profile(0.45) < 1
    with pytest.raises(ValueError):
        Cutoff(0.5, 0.4)


def test_quadrature_box_and_budget():
    from filtcalc.quantize import QuadratureError
    val = integrate_box(lambda p: np.exp(-np.sum(p ** 2, axis=1)), ((-5, 5),) * 3)
    assert val == pytest.approx(np.pi ** 1.5, rel=1e-9)
    with pytest.raises(QuadratureError):
        integrate_box(lambda p: np.ones(len(p)), ((0, 1),) * 6, orders=(12,), max_nodes=1000)


def test_zero_function_gives_zero(chart):
    fr = chart.frame("perturbed")
    sym = SmoothingSymbol.parse("exp(-50*(v1^2+v2^2+v3^2))", [[-0.6, 0.6]] * 3)
    assert op_smoothing(fr, sym, Cutoff(0.7, 0.9), E.ZERO, (0.1, 0.1, 0.1)) == 0


@pytest.mark.parametrize("alpha", [(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 0, 1)])
def test_mollified_delta_converges_at_second_order(chart, alpha):
    fr = chart.frame("perturbed")
    x = (0.15, -0.1, 0.2)
    law = osculating_law(fr, x)
    exact = op_diff(fr, {alpha: 1}, F, x)
    widths = np.array([0.08, 0.04, 0.02, 0.01])
    errs = [abs(op_smoothing(fr, mollified_delta(law, alpha, w), None, F, x) - exact) for w in widths]
    rate = np.polyfit(np.log(widths), np.log(errs), 1)[0]
    assert rate >= 1.8


def test_cutoff_independence_inside_plateau(chart):
    fr = chart.frame("perturbed")
    x = (0.1, 0.2, -0.1)
    sym = SmoothingSymbol.parse("exp(-50*(v1^2+v2^2+v3^2))", [[-0.3, 0.3]] * 3)
    a = op_smoothing(fr, sym, Cutoff(0.6, 0.7), F, x)
    b = op_smoothing(fr, sym, Cutoff(0.6, 1.5), F, x)
    assert a == b
    c = op_smoothing(fr, sym, Cutoff(0.1, 0.2), F, x)
    assert abs(c - a) > 1e-4


def test_difference_op(chart):
    sym = SmoothingSymbol.parse("exp(-(v1^2+v2^2+v3^2))", [[-4, 4]] * 3)
    assert difference_op(sym, (0, 0, 0)).expr == sym.expr
    odd = difference_op(sym, (1, 0, 0))
    vs = np.array([[0.3, -0.2, 0.5], [-0.7, 0.1, 0.2]])
    np.testing.assert_allclose(odd.evaluate((0, 0, 0), vs), -odd.evaluate((0, 0, 0), -vs))
    np.testing.assert_allclose(sym.evaluate((0, 0, 0), vs), sym.evaluate((0, 0, 0), -vs))


def convolve(law, k1, k2, v, order=28, half=4.0):
    """(k1 * k2)(v) = int k1(w) k2(w^-1 v) dw by tensor Gauss-Legendre, with numpy only."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes, weights = half * nodes, half * weights
    grid = np.stack(np.meshgrid(nodes, nodes, nodes, indexing="ij"), -1).reshape(-1, 3)
    wts = np.einsum("i,j,k->ijk", weights, weights, weights).ravel()
    inner = law.multiply(-grid, np.broadcast_to(v, grid.shape))
    return float(np.dot(wts, k1(grid) * k2(inner)))


def test_leibniz_rule_for_group_convolution(chart):
    fr = chart.frame("left")
    law = osculating_law(fr, (0.0, 0.0, 0.0))
    s1 = SmoothingSymbol.parse("exp(-(v1^2 + 2*v2^2 + v3^2) + v1/2)", [[-4, 4]] * 3)
    s2 = SmoothingSymbol.parse("exp(-(2*v1^2 + v2^2 + v3^2) - v3/3)", [[-4, 4]] * 3)

    def kernel(sym):
        return lambda vs: sym.evaluate((0, 0, 0), vs)

    v = np.array([0.3, -0.2, 0.25])
    for alpha in ((1, 0, 0), (0, 1, 0), (2, 0, 0), (1, 1, 0), (0, 0, 1)):
        lhs = float(np.prod(v ** np.array(alpha))) * convolve(law, kernel(s1), kernel(s2), v)
        rhs = sum(float(c) * convolve(law, kernel(difference_op(s1, a1)), kernel(difference_op(s2, a2)), v)
                  for (a1, a2), c in leibniz_coefficients(law, alpha).items())
        assert lhs == pytest.approx(rhs, abs=1e-9)


def test_adjoint_defect_coordinate_and_left_frames(chart):
    box = ((-0.5, 0.5),) * 3
    for name in ("flat", "left", "perturbed"):
        fr = chart.frame(name)
        for j in range(3):
            rep = adjoint_defect(fr, j, box, F, G)
            assert abs(rep.defect) <= (1e-8 if name == "flat" else 1e-6)
            assert rep.leakage == 0
    rep = adjoint_defect(chart.frame("left"), 0, box, F, E.ZERO)
    assert rep.defect == 0


def test_adjoint_defect_equals_divergence_term(chart):
    fr = chart.frame("twisted")
    box = ((-0.5, 0.5),) * 3
    rep = adjoint_defect(fr, 2, box, F, G)
    assert abs(rep.defect) > 1e-5
    assert rep.defect == pytest.approx(rep.divergence_term, abs=1e-9)


def test_kernel_change_examples(chart):
    left, doubled, dilated = chart.frame("left"), chart.frame("scaled"), chart.frame("dilated")
    sym = SmoothingSymbol.parse("exp(-40*(v1^2+v2^2+v3^2))*(1+v1-v3)", [[-0.6, 0.6]] * 3)
    x = (0.1, -0.2, 0.05)
    same = kernel_change_frame(left, left, sym, x)
    vs = np.random.default_rng(0).uniform(-0.5, 0.5, (50, 3))
    np.testing.assert_allclose(same.evaluate(x, vs), sym.evaluate(x, vs), atol=1e-15)
    # dilated frame (2X1, 2X2, 4X3): theta = diag(1/2, 1/2, 1/4), det 1/16
    kx = kernel_change_frame(left, dilated, sym, x)
    theta = np.diag([0.5, 0.5, 0.25])
    np.testing.assert_allclose(kx.evaluate(x, vs), sym.evaluate(x, vs @ theta.T) / 16, rtol=1e-12)
    # Y = 2X: theta = I/2, det 1/8
    kx = kernel_change_frame(left, doubled, sym, x)
    np.testing.assert_allclose(kx.evaluate(x, vs), sym.evaluate(x, vs / 2) / 8, rtol=1e-12)


@pytest.mark.parametrize("other", ["scaled", "dilated", "bu"])
def test_kernel_change_round_trip(chart, other):
    left, fy = chart.frame("left"), chart.frame(other)
    sym = SmoothingSymbol.parse("exp(-40*(v1^2+v2^2+v3^2))*(1+v2)", [[-0.6, 0.6]] * 3)
    for x in chart.sample_points(5, seed=6, shrink=0.5):
        back = kernel_change_frame(fy, left, kernel_change_frame(left, fy, sym, x), x)
        vs = np.random.default_rng(1).uniform(-0.6, 0.6, (40, 3))
        np.testing.assert_allclose(back.evaluate(x, vs), sym.evaluate(x, vs), atol=1e-10)


@pytest.mark.parametrize("other", ["scaled", "dilated"])
def test_quantization_agrees_across_frames(chart, other):
    left, fy = chart.frame("left"), chart.frame(other)
    sym_y = SmoothingSymbol.parse("exp(-60*(v1^2+v2^2+v3^2))*(1+v1)", [[-0.5, 0.5]] * 3)
    x = (0.1, -0.15, 0.2)
    sym_x = kernel_change_frame(left, fy, sym_y, x)
    a = op_smoothing(fy, sym_y, None, F, x)
    b = op_smoothing(left, sym_x, None, F, x)
    assert a == pytest.approx(b, abs=1e-6)
