"""Exponential maps of a frame, their inverses, and the composition remainders.

exp_x(v) is the time-one flow from x of the field sum_i v_i X_i.  All
routines accept a single point/vector or batches (coordinate axis last).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import ode
from .chart import osculating_algebra, transition
from .graded import dilate, quasinorm
from .group import fit_slope, group_law


class FlowDomainError(RuntimeError):
    def __init__(self, message, time=None, index=None):
        super().__init__(message)
        self.time = time
        self.index = index


class LogConvergenceError(RuntimeError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


@dataclass(frozen=True)
class FlowConfig:
    atol: float = 1e-12
    rtol: float = 1e-12
    max_steps: int = 20000
    newton_tol: float = 1e-11
    newton_max_iter: int = 40
    homotopy_steps: int = 8
    box: tuple = None

    def with_box(self, box):
        return replace(self, box=box)


PRECISE = FlowConfig(atol=1e-15, rtol=1e-14, newton_tol=1e-14, max_steps=200000)


def _batch(x, v):
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    single = x.ndim == 1 and v.ndim == 1
    x2 = np.atleast_2d(x)
    v2 = np.atleast_2d(v)
    x2, v2 = np.broadcast_arrays(x2, v2)
    return np.array(x2), np.array(v2), single


def _inside_fn(box):
    if box is None:
        return None
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])

    def inside(y):
        n = len(lo)
        pts = y[:, :n]
        return np.all((pts >= lo) & (pts <= hi), axis=1)

    return inside


def _integrate(rhs, y0, cfg):
    try:
        return ode.integrate(rhs, y0, 1.0, cfg.atol, cfg.rtol, cfg.max_steps, _inside_fn(cfg.box))
    except ode.LeftDomain as err:
        raise FlowDomainError(str(err), err.time, err.index) from None


def exp_flow(frame, x, v, cfg=FlowConfig()):
    """exp_x(v): time-one flow of sum v_i X_i started at x."""
    xb, vb, single = _batch(x, v)
    n = frame.dim
    coef = frame.coefficient_function()
    moving = np.any(vb != 0, axis=1)
    out = xb.copy()
    if np.any(moving):
        vm = vb[moving]

        def rhs(t, y):
            a = coef([y[:, k] for k in range(n)])          # (n, n, B)
            return np.einsum("bi,ikb->bk", vm, a)

        out[moving] = _integrate(rhs, xb[moving], cfg)
    return out[0] if single else out


def exp_with_jacobian(frame, x, v, cfg=FlowConfig()):
    """exp_x(v) together with its derivative in v (variational equations)."""
    xb, vb, single = _batch(x, v)
    n = frame.dim
    b = xb.shape[0]
    coef = frame.coefficient_function()
    jac = frame.jacobian_function()

    def rhs(t, y):
        g = y[:, :n]
        jm = y[:, n:].reshape(b, n, n)
        cols = [g[:, k] for k in range(n)]
        a = coef(cols)                                   # (n, n, B)  a[i, k]
        da = jac(cols)                                   # (n, n, n, B)  d a_ik / d x_l
        dg = np.einsum("bi,ikb->bk", vb, a)
        m = np.einsum("bi,iklb->bkl", vb, da)
        dj = np.einsum("bkl,blj->bkj", m, jm) + np.transpose(a, (2, 1, 0))
        return np.concatenate([dg, dj.reshape(b, n * n)], axis=1)

    y0 = np.concatenate([xb, np.zeros((b, n * n))], axis=1)
    y = _integrate(rhs, y0, cfg)
    pts = y[:, :n]
    jm = y[:, n:].reshape(b, n, n)
    if single:
        return pts[0], jm[0]
    return pts, jm


def log_map(frame, x, y, cfg=FlowConfig()):
    """ln_x(y): the u with exp_x(u) = y, by damped Newton with homotopy fallback."""
    xb, yb, single = _batch(x, y)
    free = replace(cfg, box=None)
    u = _newton(frame, xb, yb, None, free)
    failed = np.isnan(u).any(axis=1)
    if np.any(failed):
        idx = np.flatnonzero(failed)
        u[idx] = _homotopy(frame, xb[idx], yb[idx], free)
    if cfg.box is not None:
        exp_flow(frame, xb, u, cfg)   # re-check that the trajectories stay in the chart
    return u[0] if single else u


def _first_guess(frame, xb, yb):
    n = frame.dim
    a = frame.coefficient_function()([xb[:, k] for k in range(n)])   # (n, n, B)
    at = np.transpose(a, (2, 1, 0))                                   # (B, k, i): A^T
    return np.linalg.solve(at, (yb - xb)[..., None])[..., 0]


def _newton(frame, xb, yb, u0, cfg):
    u = _first_guess(frame, xb, yb) if u0 is None else u0.copy()
    pts, jm = exp_with_jacobian(frame, xb, u, cfg)
    res = pts - yb
    norm = np.max(np.abs(res), axis=1)
    done = norm <= cfg.newton_tol
    for _ in range(cfg.newton_max_iter):
        active = np.flatnonzero(~done)
        if active.size == 0:
            break
        try:
            du = np.linalg.solve(jm[active], res[active][..., None])[..., 0]
        except np.linalg.LinAlgError:
            break
        step = np.ones(active.size)
        improved = np.zeros(active.size, dtype=bool)
        for _ in range(8):
            trial = u[active] - step[:, None] * du
            p2, j2 = exp_with_jacobian(frame, xb[active], trial, cfg)
            r2 = p2 - yb[active]
            n2 = np.max(np.abs(r2), axis=1)
            better = (n2 < norm[active]) | (n2 <= cfg.newton_tol)
            upd = better & ~improved
            sel = active[upd]
            u[sel] = trial[upd]
            jm[sel] = j2[upd]
            res[sel] = r2[upd]
            norm[sel] = n2[upd]
            improved |= better
            if np.all(improved):
                break
            step = np.where(improved, step, step / 2)
        stalled = active[~improved]
        done[active[norm[active] <= cfg.newton_tol]] = True
        if stalled.size:
            # no decrease possible: accept if already at round-off level, else fail
            ok = norm[stalled] <= max(1e3 * cfg.newton_tol, 1e-12)
            done[stalled[ok]] = True
            u[stalled[~ok]] = np.nan
            done[stalled[~ok]] = True
    unconverged = ~(norm <= max(1e3 * cfg.newton_tol, 1e-12))
    polish = np.flatnonzero(~unconverged & (norm > 0))
    if polish.size:
        # one more full step takes a tolerance-level iterate down to round-off
        du = np.linalg.solve(jm[polish], res[polish][..., None])[..., 0]
        trial = u[polish] - du
        p2, _ = exp_with_jacobian(frame, xb[polish], trial, cfg)
        better = np.max(np.abs(p2 - yb[polish]), axis=1) < norm[polish]
        u[polish[better]] = trial[better]
    u[unconverged] = np.nan
    return u


def _homotopy(frame, xb, yb, cfg):
    u = None
    m = cfg.homotopy_steps
    for k in range(1, m + 1):
        target = xb + (k / m) * (yb - xb)
        u = _newton(frame, xb, target, u, cfg)
        bad = np.isnan(u).any(axis=1)
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise LogConvergenceError(
                f"Newton/homotopy did not converge for x={xb[i]}, y={yb[i]}", (xb[i], yb[i]))
    return u


def jacobian_log(frame, x, y, cfg=FlowConfig()):
    """det of the derivative of y -> ln_x(y)."""
    u = log_map(frame, x, y, cfg)
    _, jm = exp_with_jacobian(frame, x, u, replace(cfg, box=None))
    return 1.0 / np.linalg.det(jm)


# ---------------------------------------------------------------------------
# Osculating group laws and remainders

_LAW_CACHE = {}


def osculating_law(frame, x):
    """Group law of the osculating algebra at x."""
    key = (id(frame), tuple(float(a) for a in np.asarray(x, dtype=float)))
    hit = _LAW_CACHE.get(key)
    if hit is not None and hit[0] is frame:
        return hit[1]
    alg = osculating_algebra(frame, tuple(float(a) for a in np.asarray(x, dtype=float)))
    law = group_law(alg)
    _LAW_CACHE[key] = (frame, law)
    return law


def _law_mul(frame, x, a, b):
    return osculating_law(frame, x).multiply(np.asarray(a, dtype=float), np.asarray(b, dtype=float))


def composition_remainder(frame, x, v, w, cfg=FlowConfig()):
    """r = ln_x(exp_{exp_x w}(v)) - w *_x v."""
    x = np.asarray(x, dtype=float)
    _, vb, single = _batch(x, v)
    _, wb, _ = _batch(x, w)
    xb = np.broadcast_to(x, vb.shape).copy()
    y1 = exp_flow(frame, xb, wb, cfg)
    y2 = exp_flow(frame, y1, vb, cfg)
    u = log_map(frame, xb, y2, cfg)
    r = u - _law_mul(frame, x, wb, vb)
    return r[0] if single else r


def tilde_remainders(frame, x, v, w, cfg=FlowConfig()):
    """The two remainders that swap the roles of exp and ln in the composition.

    first  = (-w) *_x (-ln_{exp_x v}(exp_x(v *_x (-w))))
    second = (-w) *_x (-ln_x exp_{exp_x(-v)}(v *_x (-w)))
    Both vanish when v = 0 or w = 0.
    """
    x = np.asarray(x, dtype=float)
    _, vb, single = _batch(x, v)
    _, wb, _ = _batch(x, w)
    xb = np.broadcast_to(x, vb.shape).copy()
    vw = _law_mul(frame, x, vb, -wb)
    p = exp_flow(frame, xb, vb, cfg)
    q = exp_flow(frame, xb, vw, cfg)
    u1 = log_map(frame, p, q, cfg)
    first = _law_mul(frame, x, -wb, -u1)
    p2 = exp_flow(frame, xb, -vb, cfg)
    q2 = exp_flow(frame, p2, vw, cfg)
    u2 = log_map(frame, xb, q2, cfg)
    second = _law_mul(frame, x, -wb, -u2)
    if single:
        return first[0], second[0]
    return first, second


@dataclass
class RemainderProbe:
    eps: np.ndarray
    values: np.ndarray
    slopes: np.ndarray
    trivial: np.ndarray
    thresholds: np.ndarray
    component_pass: np.ndarray
    quasinorm_slope: float
    quasinorm_threshold: float
    quasinorm_pass: bool
    details: dict = field(default_factory=dict)

    @property
    def passed(self):
        return bool(np.all(self.component_pass))


def _resolved_slope(eps, vals, floor, window):
    """Slope over the last ``window`` points of the leading run above ``floor``.

    The run starts at the largest eps; once a value drops to the floor every
    smaller eps is treated as round-off, even if noise climbs back above it.
    """
    order = np.argsort(-eps)
    e, a = eps[order], np.abs(vals[order])
    below = np.flatnonzero(a <= floor)
    stop = below[0] if below.size else len(a)
    return fit_slope(e[:stop], a[:stop], 0.0, window)


def remainder_scaling_probe(frame, x, v, w, eps_grid, kind="composition", cfg=PRECISE,
                            zero_tol=1e-13, slack=0.15, quasinorm_slack=0.1, noise_floor=2e-15, window=3):
    """Dilate (v, w) by each eps, evaluate a remainder and fit log-log slopes.

    kind is 'composition', 'first' or 'second'.  Component j passes when its
    slope is at least w_j + 1 - slack or when it stays below ``zero_tol`` on
    the whole grid.  The quasinorm of the remainder is expected to scale at
    least like eps^(1 + 1/w_max).  Slopes are fitted on the ``window``
    smallest eps still above ``noise_floor``, which leaves out both round-off
    at tiny eps and the pre-asymptotic regime at large eps.
    """
    g = frame.graded
    eps = np.asarray(eps_grid, dtype=float)
    vs = np.array([dilate(g, e, np.asarray(v, dtype=float)) for e in eps])
    ws = np.array([dilate(g, e, np.asarray(w, dtype=float)) for e in eps])
    if kind == "composition":
        vals = composition_remainder(frame, x, vs, ws, cfg)
    elif kind in ("first", "second"):
        a, b = tilde_remainders(frame, x, vs, ws, cfg)
        vals = a if kind == "first" else b
    else:
        raise ValueError(f"unknown remainder kind {kind!r}")
    slopes, trivial = [], []
    for j in range(g.dim):
        t = bool(np.all(np.abs(vals[:, j]) <= zero_tol))
        s, short = _resolved_slope(eps, vals[:, j], noise_floor, window)
        slopes.append(s)
        trivial.append(t or short)
    slopes = np.array(slopes)
    trivial = np.array(trivial)
    thresholds = np.array([wj + 1 - slack for wj in g.weights], dtype=float)
    comp_pass = trivial | (slopes >= thresholds)
    qn = quasinorm(g, np.where(np.abs(vals) <= noise_floor, 0.0, vals))
    qs, qtriv = _resolved_slope(eps, qn, 0.0, window)
    qthr = 1 + 1 / g.weights[-1] - quasinorm_slack
    return RemainderProbe(eps, vals, slopes, trivial, thresholds, comp_pass,
                          qs, qthr, bool(qtriv or qs >= qthr))


def frame_change_u(frame_x, frame_y, x, v, cfg=FlowConfig()):
    """u_x(v) = ln^Y_x(exp^X_x(v))."""
    y = exp_flow(frame_x, x, v, cfg)
    xb = np.broadcast_to(np.asarray(x, dtype=float), np.shape(y)).copy()
    return log_map(frame_y, xb, y, cfg)


def frame_change_check(frame_x, frame_y, x, v, cfg=FlowConfig(), h=1e-4):
    """u_x(v) together with |D_0 u_x(v) - T_x v|, the derivative by central differences."""
    v = np.asarray(v, dtype=float)
    u = frame_change_u(frame_x, frame_y, x, v, cfg)
    ends = frame_change_u(frame_x, frame_y, np.asarray(x, dtype=float), np.array([h * v, -h * v]), cfg)
    slope = (ends[0] - ends[1]) / (2 * h)
    t = np.array([[float(a) for a in row] for row in transition(frame_x, frame_y, tuple(x))])
    return u, float(np.max(np.abs(slope - t @ v)))
