"""Self-verification suites used by the command line ``verify`` command."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import expr as E
from .chart import DiffOp, NotBlockTriangularError, frame_invariance_check, transition
from .expmap import PRECISE, composition_remainder, remainder_scaling_probe
from .graded import dilate, quasinorm
from .group import (apply_left_monomial, dual_monomial_basis, fit_slope, fs_taylor, group_law)
from .lie import bch_truncated
from .ncalg import expansions_equal, product_form_check, z_power_bruteforce, z_power_expand
from .quantize import adjoint_defect, mollified_delta, op_diff, op_smoothing


@dataclass
class Case:
    name: str
    passed: bool
    residual: float = 0.0
    witness: object = None

    def as_dict(self):
        out = {"name": self.name, "status": "pass" if self.passed else "fail",
               "residual": float(self.residual)}
        if self.witness is not None:
            out["witness"] = self.witness
        return out


@dataclass
class SuiteOptions:
    seed: int = 42
    samples: int = 10
    tol: float = 1e-9
    frame: str = None
    max_n: int = 3
    max_k: int = 4
    extra: dict = field(default_factory=dict)


def _rational_vector(rng, n, denom=16, span=2):
    return tuple(Fraction(int(rng.integers(-span * denom, span * denom + 1)), denom) for _ in range(n))


def _fmt(v):
    return [str(a) for a in v]


QUADRATURE_MAX_DIM = 4


def suite_group_axioms(defn, opts):
    alg = defn.require_algebra()
    law = group_law(alg)
    n = alg.dim
    rng = np.random.default_rng(opts.seed)
    cases = []
    zero = law.identity()
    for s in range(opts.samples):
        u, v, w = (_rational_vector(rng, n) for _ in range(3))
        lhs = law.multiply(law.multiply(u, v), w)
        rhs = law.multiply(u, law.multiply(v, w))
        res = max(abs(a - b) for a, b in zip(lhs, rhs))
        cases.append(Case(f"associativity[{s}]", res == 0, res, None if res == 0 else [_fmt(u), _fmt(v), _fmt(w)]))
        ok = law.multiply(u, zero) == u and law.multiply(zero, u) == u
        cases.append(Case(f"identity[{s}]", ok, 0.0 if ok else 1.0, None if ok else _fmt(u)))
        inv = law.multiply(u, law.inverse(u))
        ok = all(a == 0 for a in inv)
        cases.append(Case(f"inverse[{s}]", ok, float(max(abs(a) for a in inv)), None if ok else _fmt(u)))
        r = Fraction(int(rng.integers(1, 8)), int(rng.integers(1, 8)))
        lhs = dilate(alg.graded, r, law.multiply(u, v))
        rhs = law.multiply(dilate(alg.graded, r, u), dilate(alg.graded, r, v))
        res = max(abs(a - b) for a, b in zip(lhs, rhs))
        cases.append(Case(f"dilation-homomorphism[{s}]", res == 0, res, None if res == 0 else [str(r), _fmt(u), _fmt(v)]))
        bch = bch_truncated(alg, list(u), list(v))
        res = max(abs(a - b) for a, b in zip(bch, law.multiply(u, v)))
        cases.append(Case(f"bch-matches-law[{s}]", res == 0, res))
    return cases


def suite_duality(defn, opts):
    law = group_law(defn.require_algebra())
    depth = int(opts.extra.get("degree", 2 * law.graded.step))
    q = dual_monomial_basis(law, depth)
    zero = (0,) * law.dim
    worst, witness = Fraction(0), None
    for alpha, qa in q.items():
        for beta in q:
            if law.graded.degree(beta) != law.graded.degree(alpha):
                continue
            val = apply_left_monomial(law, beta, qa).terms.get(zero, 0)
            want = 1 if alpha == beta else 0
            if abs(val - want) > worst:
                worst, witness = abs(val - want), [list(alpha), list(beta)]
    cases = [Case(f"dual-basis-degree<={depth}", worst == 0, worst, witness)]
    for alpha, qa in q.items():
        degs = qa.degrees(law.weights)
        ok = degs <= {law.graded.degree(alpha)}
        if not ok:
            cases.append(Case(f"homogeneous{list(alpha)}", False, 1.0, list(alpha)))
    return cases


def suite_power_expansion(defn, opts):
    cases = []
    for n in range(1, opts.max_n + 1):
        for k in range(1, opts.max_k + 1):
            brute = z_power_bruteforce(n, k)
            closed = z_power_expand(n, k)
            eq = expansions_equal(brute, closed)
            cases.append(Case(f"indexed-sum n={n} k={k}", eq, 0.0 if eq else 1.0))
            try:
                product_form_check(closed)
                cases.append(Case(f"product-form n={n} k={k}", True))
            except AssertionError as err:
                cases.append(Case(f"product-form n={n} k={k}", False, 1.0, str(err)))
    return cases


def suite_taylor(defn, opts):
    law = group_law(defn.require_algebra())
    n = law.dim
    f = E.parse(opts.extra.get("f", f"sin(v{n})+v1^2"))
    g = law.graded
    rng = np.random.default_rng(opts.seed)
    x = tuple(Fraction(int(rng.integers(-6, 7)), 16) for _ in range(n))
    while all(a == 0 for a in x):
        x = tuple(Fraction(int(rng.integers(-6, 7)), 16) for _ in range(n))
    direction = np.array([0.6, -0.8] + [0.5] * (n - 2))[:n]
    direction = direction / quasinorm(g, direction)
    ts = np.logspace(-3, -1, 9)
    fc = E.compile_expr(f)
    cases = []
    for order in (1, 2, 3):
        p = fs_taylor(law, f, order, x)
        ys = np.array([dilate(g, t, direction) for t in ts])
        xys = law.multiply(np.broadcast_to(np.array([float(a) for a in x]), ys.shape), ys)
        vals = np.broadcast_to(np.asarray(fc((), [xys[:, i] for i in range(n)]), dtype=float), (len(ts),))
        approx = p.evaluate([ys[:, i] for i in range(n)])
        slope, _ = fit_slope(ts, vals - approx)
        ok = abs(slope - (order + 1)) <= 0.15
        cases.append(Case(f"remainder-slope N={order}", ok, abs(slope - (order + 1)),
                          None if ok else {"slope": slope, "x": _fmt(x)}))
    return cases


def _frame(defn, opts):
    chart = defn.require_chart()
    name = opts.frame or next(iter(chart.frames))
    return chart, chart.frame(name)


def suite_invariance(defn, opts):
    chart, fx = _frame(defn, opts)
    n = chart.dim
    low = [i for i, w in enumerate(chart.graded.weights) if w == chart.graded.weights[0]]
    words = {(i, i): E.Num(-1) for i in low}
    top = n - 1
    words[(top,)] = E.parse("x1")
    order = max(2 * chart.graded.weights[0], chart.graded.weights[top])
    op = DiffOp(fx, words)
    pts = chart.sample_points(opts.samples, seed=opts.seed, shrink=0.5, exact=True)
    cases = []
    for name, fy in chart.frames.items():
        try:
            transition(fx, fy, pts[0])
        except NotBlockTriangularError:
            continue
        worst, witness = 0.0, None
        for p in pts:
            rep = frame_invariance_check(fx, fy, op, order, p)
            if rep.residual > worst:
                worst, witness = rep.residual, _fmt(p)
        cases.append(Case(f"princ {fx.name}->{name}", worst <= opts.tol, worst, witness))
    return cases


def suite_remainder(defn, opts):
    chart, fr = _frame(defn, opts)
    n = chart.dim
    rng = np.random.default_rng(opts.seed)
    eps = 2.0 ** -np.arange(3, 13)
    cases = []
    for s in range(max(1, opts.samples // 5)):
        x = rng.uniform(-0.4, 0.4, n)
        v = rng.uniform(-0.5, 0.5, n)
        w = rng.uniform(-0.5, 0.5, n)
        r0 = composition_remainder(fr, x, np.zeros(n), w, PRECISE)
        r1 = composition_remainder(fr, x, v, np.zeros(n), PRECISE)
        res = float(max(np.max(np.abs(r0)), np.max(np.abs(r1))))
        cases.append(Case(f"boundary[{s}]", res <= 1e-10, res))
        for kind in ("composition", "first", "second"):
            pr = remainder_scaling_probe(fr, x, v, w, eps, kind)
            ok = pr.passed and (kind == "composition" or pr.quasinorm_pass)
            margin = float(np.min(np.where(pr.trivial, np.inf, pr.slopes - pr.thresholds)))
            wit = None if ok else {"slopes": [None if t else float(a) for a, t in zip(pr.slopes, pr.trivial)],
                                   "quasinorm_slope": pr.quasinorm_slope, "x": list(map(float, x))}
            cases.append(Case(f"{kind}-slopes[{s}]", ok, 0.0 if ok else -margin, wit))
    return cases


def suite_quantize(defn, opts):
    chart, fr = _frame(defn, opts)
    n = chart.dim
    f = E.parse(opts.extra.get("f", "sin(x1+2*x2)*exp(x3/2)+x1^2"))
    pts = chart.sample_points(opts.samples, seed=opts.seed, shrink=0.3)
    cases = []
    worst = 0.0
    for p in pts:
        for j in range(n):
            alpha = tuple(int(i == j) for i in range(n))
            got = op_diff(fr, {alpha: 1}, f, p)
            want = float(E.evaluate(fr.apply(j, f), x=p))
            worst = max(worst, abs(got - want))
        ident = op_diff(fr, {(0,) * n: 1}, f, p)
        worst = max(worst, abs(ident - float(E.evaluate(f, x=p))))
    cases.append(Case("first-order-and-identity", worst <= 1e-6, worst))
    if n > QUADRATURE_MAX_DIM:
        # tensor quadrature over the tangent space is out of reach here
        return cases
    from .expmap import osculating_law
    x0 = pts[0]
    law = osculating_law(fr, x0)
    alpha = tuple(int(i == 0) for i in range(n))
    exact = op_diff(fr, {alpha: 1}, f, x0)
    widths = [0.1, 0.05, 0.025, 0.0125]
    errs = [abs(op_smoothing(fr, mollified_delta(law, alpha, wd), None, f, x0, tol=1e-7) - exact) for wd in widths]
    order, _ = fit_slope(widths, errs)
    cases.append(Case("mollified-delta-order", order >= 1.8, order, {"errors": errs}))
    g = E.parse(opts.extra.get("g", "cos(x1-x3)+x2"))
    box = tuple((lo * 0.5, hi * 0.5) for lo, hi in chart.box)
    for j in range(n):
        rep = adjoint_defect(fr, j, box, f, g)
        res = abs(rep.defect - rep.divergence_term)
        cases.append(Case(f"adjoint-defect X{j + 1}", res <= 1e-6, res,
                          {"defect": rep.defect, "divergence_term": rep.divergence_term}))
    return cases


SUITES = {
    "group-axioms": suite_group_axioms,
    "duality": suite_duality,
    "appendix-a": suite_power_expansion,
    "taylor": suite_taylor,
    "invariance": suite_invariance,
    "remainder": suite_remainder,
    "quantize": suite_quantize,
}


def run_suite(name, defn, opts):
    start = time.perf_counter()
    cases = SUITES[name](defn, opts)
    elapsed = (time.perf_counter() - start) * 1000
    return {"suite": name, "cases": [c.as_dict() for c in cases], "wall_time_ms": round(elapsed, 3)}
