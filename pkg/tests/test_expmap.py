import numpy as np
import pytest

from filtcalc import expr as E
from filtcalc.chart import random_bu_frame
from filtcalc.expmap import (PRECISE, FlowConfig, FlowDomainError, composition_remainder, exp_flow,
                             frame_change_check, frame_change_u, jacobian_log, log_map, remainder_scaling_probe,
                             tilde_remainders)
from filtcalc.group import fit_slope


def heis_closed_form(x, v):
    x, v = np.asarray(x), np.asarray(v)
    return np.array([x[0] + v[0], x[1] + v[1], x[2] + v[2] + 0.5 * (x[0] * v[1] - x[1] * v[0])])


@pytest.fixture(scope="module")
def frames(request):
    from filtcalc.definitions import load_definition
    return load_definition("heisenberg").chart.frames


def test_exp_coordinate_frame(frames):
    x, v = np.array([0.1, -0.2, 0.3]), np.array([0.2, 0.1, -0.3])
    np.testing.assert_allclose(exp_flow(frames["flat"], x, v), x + v, atol=1e-14)


def test_exp_zero_is_exact(frames):
    x = np.array([0.123, -0.456, 0.789])
    assert np.array_equal(exp_flow(frames["perturbed"], x, np.zeros(3)), x)


def test_exp_heisenberg_closed_form(frames):
    rng = np.random.default_rng(0)
    for _ in range(10):
        x, v = rng.uniform(-0.4, 0.4, 3), rng.uniform(-0.3, 0.3, 3)
        np.testing.assert_allclose(exp_flow(frames["left"], x, v), heis_closed_form(x, v), atol=1e-10)


def test_exp_batched_matches_single(frames):
    rng = np.random.default_rng(1)
    xs, vs = rng.uniform(-0.3, 0.3, (6, 3)), rng.uniform(-0.3, 0.3, (6, 3))
    batch = exp_flow(frames["perturbed"], xs, vs)
    for i in range(6):
        np.testing.assert_allclose(batch[i], exp_flow(frames["perturbed"], xs[i], vs[i]), atol=1e-11)


def test_flow_semigroup(frames):
    fr = frames["twisted"]
    x, v = np.array([0.1, 0.2, -0.1]), np.array([0.3, -0.2, 0.25])
    mid = exp_flow(fr, x, 0.4 * v)
    np.testing.assert_allclose(exp_flow(fr, mid, 0.6 * v), exp_flow(fr, x, v), atol=1e-10)


def test_flow_leaving_box_raises(frames):
    cfg = FlowConfig(box=((-1, 1),) * 3)
    with pytest.raises(FlowDomainError) as err:
        exp_flow(frames["left"], np.zeros(3), np.array([3.0, 0, 0]), cfg)
    assert 0 < err.value.time < 1


def test_log_examples(frames):
    x = np.array([0.2, -0.1, 0.3])
    assert np.array_equal(log_map(frames["perturbed"], x, x), np.zeros(3))
    rng = np.random.default_rng(2)
    for _ in range(10):
        v = rng.uniform(-0.3, 0.3, 3)
        np.testing.assert_allclose(log_map(frames["left"], x, heis_closed_form(x, v)), v, atol=1e-8)


@pytest.mark.parametrize("name", ["perturbed", "twisted", "bu"])
def test_log_round_trip_and_antisymmetry(frames, name):
    fr = frames[name]
    rng = np.random.default_rng(3)
    xs = rng.uniform(-0.3, 0.3, (100, 3))
    vs = rng.uniform(-0.25, 0.25, (100, 3))
    ys = exp_flow(fr, xs, vs)
    np.testing.assert_allclose(log_map(fr, xs, ys), vs, atol=1e-8)
    anti = log_map(fr, xs, ys) + log_map(fr, ys, xs)
    assert np.max(np.abs(anti)) <= 1e-8


def test_jacobian_log(frames):
    x = np.array([0.1, 0.2, -0.3])
    assert jacobian_log(frames["perturbed"], x, x) == pytest.approx(1, abs=1e-8)
    y = np.array([0.3, -0.1, 0.2])
    assert jacobian_log(frames["flat"], x, y) == pytest.approx(1, abs=1e-8)
    assert jacobian_log(frames["left"], x, y) == pytest.approx(1, abs=1e-8)
    # divergence-free frames preserve volume; the twisted frame does not
    assert jacobian_log(frames["perturbed"], x, y) == pytest.approx(1, abs=1e-8)
    fr = frames["twisted"]
    h = 1e-5
    cols = [(log_map(fr, x, y + h * e) - log_map(fr, x, y - h * e)) / (2 * h) for e in np.eye(3)]
    fd = np.linalg.det(np.array(cols).T)
    got = jacobian_log(fr, x, y)
    assert abs(got - 1) > 1e-3
    assert got == pytest.approx(fd, rel=1e-7)


def test_composition_remainder_vanishes_for_group_frames(frames):
    rng = np.random.default_rng(4)
    for name in ("left", "flat"):
        for _ in range(5):
            x, v, w = rng.uniform(-0.3, 0.3, (3, 3))
            assert np.max(np.abs(composition_remainder(frames[name], x, v, w))) <= 1e-8


def test_perturbed_remainder_is_nonzero_and_higher_order(frames):
    x, v, w = np.array([0.2, -0.1, 0.1]), np.array([0.3, 0.2, -0.1]), np.array([-0.2, 0.25, 0.15])
    assert np.max(np.abs(composition_remainder(frames["perturbed"], x, v, w))) > 1e-6
    eps = 2.0 ** -np.arange(3, 13)
    probe = remainder_scaling_probe(frames["perturbed"], x, v, w, eps)
    assert probe.passed
    assert not probe.trivial[2] and probe.slopes[2] >= 2.85


def test_probe_reports_trivial_components(frames):
    eps = 2.0 ** -np.arange(3, 9)
    probe = remainder_scaling_probe(frames["left"], np.zeros(3), np.array([0.3, 0.1, 0.2]),
                                    np.array([0.1, -0.2, 0.1]), eps, cfg=FlowConfig())
    assert probe.passed and probe.trivial.all()


@pytest.mark.parametrize("name", ["perturbed", "twisted"])
def test_tilde_remainders_vanish_on_axes(frames, name):
    fr = frames[name]
    x, v = np.array([0.1, 0.2, -0.15]), np.array([0.25, -0.15, 0.2])
    for a, b in ((v, np.zeros(3)), (np.zeros(3), v)):
        first, second = tilde_remainders(fr, x, a, b)
        assert np.max(np.abs(first)) <= 1e-8 and np.max(np.abs(second)) <= 1e-8


def test_tilde_remainder_quasinorm_slope(frames):
    x, v, w = np.array([0.2, -0.1, 0.1]), np.array([0.3, 0.2, -0.1]), np.array([-0.2, 0.25, 0.15])
    eps = 2.0 ** -np.arange(3, 13)
    for kind in ("first", "second"):
        probe = remainder_scaling_probe(frames["perturbed"], x, v, w, eps, kind)
        assert probe.quasinorm_pass and probe.quasinorm_slope >= 1.4


def test_frame_change_examples(frames):
    x, v = np.array([0.1, -0.2, 0.15]), np.array([0.2, 0.1, -0.2])
    left = frames["left"]
    np.testing.assert_allclose(frame_change_u(left, left, x, v), v, atol=1e-10)
    u, res = frame_change_check(left, frames["scaled"], x, v)
    np.testing.assert_allclose(u, v / 2, atol=1e-10)
    assert res <= 1e-6
    _, res = frame_change_check(left, random_bu_frame(left, 9), x, v)
    assert res <= 1e-6
    _, res = frame_change_check(left, frames["bu"], x, v)
    assert res <= 1e-6


@pytest.mark.parametrize("order", [1, 2, 3])
def test_euclidean_taylor_along_flow(frames, order):
    # f(exp_x(t v)) - sum_{k <= N} t^k/k! (sum v_i X_i)^k f (x) = O(t^(N+1))
    fr = frames["perturbed"]
    f = E.parse("sin(x1 + x3) + x2^2 * exp(x1)")
    x, v = (0.1, -0.2, 0.3), np.array([0.4, -0.3, 0.5])
    field_terms = []
    g = f
    for _ in range(order):
        nxt = E.ZERO
        for i in range(3):
            nxt = E.add(nxt, E.mul(E.Num(float(v[i])), fr.apply(i, g)))
        g = nxt
        field_terms.append(float(E.evaluate(g, x=x)))
    ts = np.logspace(-2.5, -1, 8)
    pts = exp_flow(fr, np.broadcast_to(x, (8, 3)).copy(), ts[:, None] * v, PRECISE)
    fc = E.compile_expr(f)
    vals = fc(list(pts.T), ())
    approx = float(E.evaluate(f, x=x)) + sum(c * ts ** (k + 1) / np.prod(range(1, k + 2))
                                             for k, c in enumerate(field_terms))
    slope, _ = fit_slope(ts, vals - approx)
    assert slope == pytest.approx(order + 1, abs=0.15)
