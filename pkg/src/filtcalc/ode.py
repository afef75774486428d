"""Batched adaptive Dormand-Prince 5(4) integration with max-norm error control.

All trajectories in a batch share one step size, and the error norm is
the maximum over every component of every trajectory, so each trajectory
individually meets the tolerance.
"""

from __future__ import annotations

import numpy as np

_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_E = np.array([71 / 57600, 0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])


class IntegrationError(RuntimeError):
    pass


class StepBudgetExceeded(IntegrationError):
    pass


class LeftDomain(IntegrationError):
    def __init__(self, message, time, index):
        super().__init__(message)
        self.time = time
        self.index = index


def integrate(rhs, y0, t1=1.0, atol=1e-12, rtol=1e-12, max_steps=20000, inside=None, h0=None):
    """Integrate y' = rhs(t, y) from 0 to t1 and return y(t1).

    ``y0`` has shape (batch, dim).  ``inside(y)`` (optional) returns a boolean
    per trajectory; leaving the domain after an accepted step raises
    ``LeftDomain`` with the time reached.
    """
    y = np.array(y0, dtype=float)
    t = 0.0
    if t1 == 0:
        return y
    k1 = rhs(t, y)
    if h0 is None:
        scale = atol + rtol * np.abs(y)
        d0 = np.max(np.abs(y) / scale)
        d1 = np.max(np.abs(k1) / scale)
        h0 = 0.01 * d0 / d1 if d0 > 1e-5 and d1 > 1e-5 else 1e-3
        h0 = min(h0, abs(t1))
        if d1 <= 1e-5:
            h0 = abs(t1)
    h = min(max(h0, 1e-12), t1)
    steps = 0
    while t < t1:
        if steps >= max_steps:
            raise StepBudgetExceeded(f"step budget of {max_steps} exhausted at t = {t:.6g}")
        if t + h > t1:
            h = t1 - t
        ks = [k1]
        for s in range(1, 7):
            acc = y.copy()
            for j, a in enumerate(_A[s]):
                if a:
                    acc += h * a * ks[j]
            ks.append(rhs(t + _C[s] * h, acc))
            if s == 6:
                y_new = acc
        err = h * sum(e * k for e, k in zip(_E, ks) if e)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        ratio = np.max(np.abs(err) / scale) if err.size else 0.0
        steps += 1
        if ratio <= 1.0:
            t += h
            y = y_new
            k1 = ks[6]
            if inside is not None:
                ok = inside(y)
                if not np.all(ok):
                    bad = int(np.flatnonzero(~ok)[0])
                    raise LeftDomain(f"trajectory {bad} left the chart at t = {t:.6g}", t, bad)
            factor = 5.0 if ratio == 0 else min(5.0, 0.9 * ratio ** -0.2)
        else:
            factor = max(0.2, 0.9 * ratio ** -0.2)
        h = h * factor
        if h < 1e-14 * max(1.0, abs(t1)):
            raise IntegrationError(f"step size underflow at t = {t:.6g}")
    return y
