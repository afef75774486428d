"""Loading algebra, chart, kernel and cutoff definitions from YAML files.

Bracket entries are ``[i, j, k, p, q]`` (one-based) meaning c_ijk = p/q; the
antisymmetric partner is filled in unless given explicitly.  Frames are
either explicit coefficient rows, combinations of another frame
(``relative_to`` plus a ``matrix`` whose row k gives Y_k = sum_i M_ki X_i),
or the left-invariant frame of the file's own group law.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path

import yaml

from . import expr as E
from .chart import Chart, Frame, left_invariant_frame, recombine, validate_adapted
from .graded import GradationError, validate_gradation
from .group import group_law
from .lie import LieAlgebraError, lie_validate


class DefinitionError(ValueError):
    pass


@dataclass
class KernelSpec:
    name: str
    expr: E.Expr
    box: tuple


@dataclass
class CutoffSpec:
    name: str
    plateau: float
    radius: float


@dataclass
class Definition:
    name: str
    graded: object
    algebra: object = None
    chart: Chart = None
    kernels: dict = field(default_factory=dict)
    cutoffs: dict = field(default_factory=dict)
    source: str = ""

    def require_algebra(self):
        if self.algebra is None:
            raise DefinitionError(f"definition '{self.name}' has no algebra")
        return self.algebra

    def require_chart(self):
        if self.chart is None:
            raise DefinitionError(f"definition '{self.name}' has no chart")
        return self.chart

    @property
    def law(self):
        return group_law(self.require_algebra())


def builtin_names():
    return sorted(p.name[:-5] for p in resources.files("filtcalc.data").iterdir() if p.name.endswith(".yaml"))


def _read(source):
    path = Path(source)
    if path.exists():
        return yaml.safe_load(path.read_text()), str(path)
    if source in builtin_names():
        text = resources.files("filtcalc.data").joinpath(f"{source}.yaml").read_text()
        return yaml.safe_load(text), f"builtin:{source}"
    raise DefinitionError(f"no such definition file or builtin: {source!r} (builtins: {builtin_names()})")


def _rational(value, where):
    try:
        return Fraction(str(value))
    except (ValueError, ZeroDivisionError):
        raise DefinitionError(f"{where}: not a rational number: {value!r}") from None


def _parse_algebra(graded, entries):
    n = graded.dim
    tensor = {}
    for pos, entry in enumerate(entries):
        where = f"brackets[{pos}]"
        if not isinstance(entry, (list, tuple)) or len(entry) not in (4, 5):
            raise DefinitionError(f"{where}: expected [i, j, k, p, q] or [i, j, k, value]")
        i, j, k = (int(a) - 1 for a in entry[:3])
        if not all(0 <= a < n for a in (i, j, k)):
            raise DefinitionError(f"{where}: index out of range 1..{n}")
        c = _rational(entry[3], where) / (_rational(entry[4], where) if len(entry) == 5 else 1)
        if (i, j, k) in tensor:
            raise DefinitionError(f"{where}: duplicate entry for c[{i + 1},{j + 1},{k + 1}]")
        tensor[(i, j, k)] = c
    full = dict(tensor)
    for (i, j, k), c in tensor.items():
        if (j, i, k) not in tensor:
            full[(j, i, k)] = -c
    return lie_validate(graded, full)


def _parse_expr(text, where):
    try:
        return E.parse(str(text))
    except E.ExprSyntaxError as err:
        raise DefinitionError(f"{where}: {err}") from None


def _parse_frames(graded, spec, algebra):
    frames = {}
    pending = dict(spec)
    n = graded.dim
    while pending:
        progress = False
        for name in list(pending):
            body = pending[name]
            where = f"chart.frames.{name}"
            if isinstance(body, list):
                body = {"fields": body}
            if body.get("left_invariant"):
                if algebra is None:
                    raise DefinitionError(f"{where}: left_invariant needs an algebra")
                frames[name] = left_invariant_frame(group_law(algebra), name)
            elif "fields" in body:
                rows = body["fields"]
                if len(rows) != n or any(len(r) != n for r in rows):
                    raise DefinitionError(f"{where}: need {n} rows of {n} coefficients")
                frames[name] = Frame(name, graded, [[_parse_expr(c, f"{where}[{i}][{k}]")
                                                     for k, c in enumerate(r)] for i, r in enumerate(rows)])
            elif "relative_to" in body:
                base = body["relative_to"]
                if base not in frames:
                    if base not in pending:
                        raise DefinitionError(f"{where}: unknown base frame {base!r}")
                    continue
                m = body["matrix"]
                if len(m) != n or any(len(r) != n for r in m):
                    raise DefinitionError(f"{where}: matrix must be {n} x {n}")
                m = [[_parse_expr(c, f"{where}.matrix[{k}][{i}]") for i, c in enumerate(r)] for k, r in enumerate(m)]
                frames[name] = recombine(frames[base], name, m)
            else:
                raise DefinitionError(f"{where}: needs 'fields', 'relative_to' or 'left_invariant'")
            del pending[name]
            progress = True
        if not progress:
            raise DefinitionError(f"cyclic frame definitions: {sorted(pending)}")
    return frames


def load_definition(source, validate=True):
    """Load a definition from a YAML path or the name of a shipped file."""
    data, origin = _read(source)
    if not isinstance(data, dict):
        raise DefinitionError(f"{origin}: top level must be a mapping")
    try:
        graded = validate_gradation(data["gradation"])
    except KeyError:
        raise DefinitionError(f"{origin}: missing 'gradation'") from None
    except GradationError as err:
        raise DefinitionError(f"{origin}: {err}") from None
    algebra = None
    if "brackets" in data:
        try:
            algebra = _parse_algebra(graded, data["brackets"] or [])
        except LieAlgebraError as err:
            raise DefinitionError(f"{origin}: {err}") from err
    chart = None
    kernels, cutoffs = {}, {}
    if "chart" in data:
        cdata = data["chart"]
        box = tuple(tuple(float(a) for a in b) for b in cdata.get("box", [[-1, 1]] * graded.dim))
        if len(box) != graded.dim:
            raise DefinitionError(f"{origin}: chart.box needs {graded.dim} intervals")
        frames = _parse_frames(graded, cdata.get("frames", {}), algebra)
        chart = Chart(graded, box, frames)
        if validate:
            pts = chart.sample_points(8, seed=0, exact=True)
            for fr in frames.values():
                validate_adapted(fr, pts)
        for name, k in (cdata.get("kernels") or {}).items():
            kbox = tuple(tuple(float(a) for a in b) for b in k["box"])
            kernels[name] = KernelSpec(name, _parse_expr(k["expr"], f"kernels.{name}"), kbox)
        for name, c in (cdata.get("cutoffs") or {}).items():
            cutoffs[name] = CutoffSpec(name, float(c["plateau"]), float(c["radius"]))
    return Definition(data.get("name", Path(str(source)).stem), graded, algebra, chart, kernels, cutoffs, origin)
