"""Command line entry point: ``filtcalc <command> [options]``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from fractions import Fraction

import numpy as np

from . import expr as E
from .chart import DiffOp, principal_symbol
from .definitions import DefinitionError, builtin_names, load_definition
from .expmap import FlowConfig, FlowDomainError, LogConvergenceError, exp_flow, log_map, remainder_scaling_probe
from .group import group_law
from .lie import LieAlgebraError, bch_truncated
from .quantize import QuadratureError
from .suites import SUITES, SuiteOptions, run_suite

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _vector(text, exact=True):
    parts = [p for p in text.replace(" ", "").split(",") if p]
    if exact:
        return [Fraction(p) for p in parts]
    return np.array([float(Fraction(p)) for p in parts])


def _num(x):
    if isinstance(x, Fraction):
        return str(x) if x.denominator != 1 else x.numerator
    return float(x)


def _emit(payload, fmt, out):
    if fmt == "json":
        out.write(json.dumps(payload, indent=2, default=str) + "\n")
        return
    rows = payload if isinstance(payload, list) else payload.get("rows") or payload.get("cases") or [payload]
    buf = io.StringIO()
    keys = []
    for r in rows:
        for k in r:
            if k not in keys:
                keys.append(k)
    writer = csv.DictWriter(buf, fieldnames=keys)
    writer.writeheader()
    for r in rows:
        writer.writerow({k: json.dumps(v) if isinstance(v, (list, dict)) else v for k, v in r.items()})
    out.write(buf.getvalue())


def _check_dim(vec, n, what):
    if len(vec) != n:
        raise DefinitionError(f"{what} has {len(vec)} entries, expected {n}")


def cmd_bch(args, out):
    defn = load_definition(args.file)
    alg = defn.require_algebra()
    a, b = _vector(args.a), _vector(args.b)
    _check_dim(a, alg.dim, "--a")
    _check_dim(b, alg.dim, "--b")
    z = bch_truncated(alg, a, b, args.order)
    _emit({"a": [_num(t) for t in a], "b": [_num(t) for t in b], "order": args.order or alg.lie_step,
           "bch": [_num(t) for t in z]}, args.out, out)
    return EXIT_OK


def cmd_grouplaw(args, out):
    defn = load_definition(args.file)
    law = group_law(defn.require_algebra())
    n = law.dim
    names = [f"v{i + 1}" for i in range(n)] + [f"w{i + 1}" for i in range(n)]
    rows = [{"component": i + 1, "z": p.to_string(names)} for i, p in enumerate(law.components)]
    _emit({"rows": rows} if args.out == "csv" else {"law": rows}, args.out, out)
    return EXIT_OK


def _parse_terms(terms, n):
    words = {}
    for t in terms:
        if "@" not in t:
            raise DefinitionError(f"term {t!r} must look like COEFF@i,j,... (one-based letters)")
        coeff, word = t.rsplit("@", 1)
        letters = tuple(int(c) - 1 for c in word.split(",") if c.strip())
        if any(not 0 <= c < n for c in letters):
            raise DefinitionError(f"term {t!r}: letters must be in 1..{n}")
        words[letters] = E.add(words.get(letters, E.ZERO), E.parse(coeff))
    return words


def cmd_princ(args, out):
    defn = load_definition(args.file)
    chart = defn.require_chart()
    frame = chart.frame(args.frame or next(iter(chart.frames)))
    op = DiffOp(frame, _parse_terms(args.term, chart.dim))
    x = tuple(_vector(args.x))
    _check_dim(x, chart.dim, "--x")
    sym = principal_symbol(frame, op, args.order, x)
    rows = [{"alpha": list(a), "coefficient": _num(c)} for a, c in sorted(sym.coeffs.items())]
    _emit({"rows": rows} if args.out == "csv" else {"frame": frame.name, "order": args.order,
                                                     "x": [_num(t) for t in x], "symbol": rows}, args.out, out)
    return EXIT_OK


def _flow_cfg(args, chart):
    return FlowConfig(atol=args.atol, rtol=args.rtol, box=chart.box)


def cmd_exp(args, out):
    defn = load_definition(args.file)
    chart = defn.require_chart()
    frame = chart.frame(args.frame or next(iter(chart.frames)))
    x, v = _vector(args.x, False), _vector(args.v, False)
    _check_dim(x, chart.dim, "--x")
    _check_dim(v, chart.dim, "--v")
    y = exp_flow(frame, x, v, _flow_cfg(args, chart))
    _emit({"frame": frame.name, "x": x.tolist(), "v": v.tolist(), "exp": y.tolist()}, args.out, out)
    return EXIT_OK


def cmd_log(args, out):
    defn = load_definition(args.file)
    chart = defn.require_chart()
    frame = chart.frame(args.frame or next(iter(chart.frames)))
    x, y = _vector(args.x, False), _vector(args.y, False)
    _check_dim(x, chart.dim, "--x")
    _check_dim(y, chart.dim, "--y")
    u = log_map(frame, x, y, _flow_cfg(args, chart))
    _emit({"frame": frame.name, "x": x.tolist(), "y": y.tolist(), "log": u.tolist()}, args.out, out)
    return EXIT_OK


def cmd_sweep(args, out):
    defn = load_definition(args.file)
    chart = defn.require_chart()
    frame = chart.frame(args.frame or next(iter(chart.frames)))
    x, v, w = (_vector(t, False) for t in (args.x, args.v, args.w))
    for vec, what in ((x, "--x"), (v, "--v"), (w, "--w")):
        _check_dim(vec, chart.dim, what)
    eps = 2.0 ** -np.arange(args.kmin, args.kmax + 1)
    pr = remainder_scaling_probe(frame, x, v, w, eps, args.kind)
    rows = [{"eps": float(e), **{f"r{j + 1}": float(val) for j, val in enumerate(row)}}
            for e, row in zip(pr.eps, pr.values)]
    payload = {
        "frame": frame.name, "kind": args.kind, "rows": rows,
        "slopes": [None if t else float(s) for s, t in zip(pr.slopes, pr.trivial)],
        "thresholds": pr.thresholds.tolist(),
        "components": ["pass-trivial" if t else ("pass" if ok else "fail")
                       for t, ok in zip(pr.trivial, pr.component_pass)],
        "quasinorm_slope": pr.quasinorm_slope, "quasinorm_threshold": pr.quasinorm_threshold,
    }
    if args.out == "csv":
        long_rows = [{"eps": float(e), "component": j + 1, "abs_r": float(abs(val)),
                      "slope": "" if pr.trivial[j] else float(pr.slopes[j])}
                     for e, row in zip(pr.eps, pr.values) for j, val in enumerate(row)]
        payload = {"rows": long_rows}
    _emit(payload, args.out, out)
    ok = pr.passed and (args.kind == "composition" or pr.quasinorm_pass)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_verify(args, out):
    defn = load_definition(args.file) if args.file else None
    if defn is None and args.suite != "appendix-a":
        raise DefinitionError(f"suite {args.suite!r} needs --file")
    extra = {}
    if args.f:
        extra["f"] = args.f
    opts = SuiteOptions(seed=args.seed, samples=args.samples, tol=args.tol, frame=args.frame,
                        max_n=args.max_n, max_k=args.max_k, extra=extra)
    report = run_suite(args.suite, defn, opts)
    _emit(report, args.out, out)
    return EXIT_OK if all(c["status"] == "pass" for c in report["cases"]) else EXIT_FAIL


def build_parser():
    p = argparse.ArgumentParser(prog="filtcalc", description="Calculus on filtered manifolds in coordinates.",
                                epilog="Vectors are comma separated; write --v=-1,2,3 when the first entry is negative.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, needs_file=True):
        sp.add_argument("--file", required=needs_file,
                        help=f"definition YAML or a builtin name ({', '.join(builtin_names())})")
        sp.add_argument("--out", choices=("json", "csv"), default="json")

    sp = sub.add_parser("bch", help="truncated BCH series of two vectors")
    common(sp)
    sp.add_argument("--a", required=True)
    sp.add_argument("--b", required=True)
    sp.add_argument("--order", type=int, default=None)
    sp.set_defaults(fn=cmd_bch)

    sp = sub.add_parser("grouplaw", help="print the polynomial group law")
    common(sp)
    sp.set_defaults(fn=cmd_grouplaw)

    sp = sub.add_parser("princ", help="principal symbol of a differential operator")
    common(sp)
    sp.add_argument("--frame")
    sp.add_argument("--term", action="append", required=True,
                    help="COEFF@i,j,...: coefficient expression times X_i X_j ... (repeatable)")
    sp.add_argument("--order", type=int, required=True)
    sp.add_argument("--x", required=True)
    sp.set_defaults(fn=cmd_princ)

    for name, fn, second in (("exp", cmd_exp, "--v"), ("log", cmd_log, "--y")):
        sp = sub.add_parser(name, help=f"{'exponential' if name == 'exp' else 'logarithm'} map of a frame")
        common(sp)
        sp.add_argument("--frame")
        sp.add_argument("--x", required=True)
        sp.add_argument(second, required=True)
        sp.add_argument("--atol", type=float, default=1e-12)
        sp.add_argument("--rtol", type=float, default=1e-12)
        sp.set_defaults(fn=fn)

    sp = sub.add_parser("sweep-remainder", help="scaling of composition remainders under dilation")
    common(sp)
    sp.add_argument("--frame")
    sp.add_argument("--x", required=True)
    sp.add_argument("--v", required=True)
    sp.add_argument("--w", required=True)
    sp.add_argument("--kind", choices=("composition", "first", "second"), default="composition")
    sp.add_argument("--kmin", type=int, default=3)
    sp.add_argument("--kmax", type=int, default=12)
    sp.set_defaults(fn=cmd_sweep)

    sp = sub.add_parser("verify", help="run a self-verification suite")
    sp.add_argument("suite", choices=sorted(SUITES))
    common(sp, needs_file=False)
    sp.add_argument("--frame")
    sp.add_argument("--seed", type=int, default=42)
    sp.add_argument("--samples", type=int, default=10)
    sp.add_argument("--tol", type=float, default=1e-9)
    sp.add_argument("--f", help="test function expression for taylor/quantize suites")
    sp.add_argument("--max-n", "--n", dest="max_n", type=int, default=3)
    sp.add_argument("--max-k", "--k", dest="max_k", type=int, default=4)
    sp.set_defaults(fn=cmd_verify)
    return p


def main(argv=None, out=None):
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.fn(args, out)
    except (DefinitionError, LieAlgebraError, E.ExprSyntaxError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (FlowDomainError, LogConvergenceError, QuadratureError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
