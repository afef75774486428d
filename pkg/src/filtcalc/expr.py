"""A small expression language for frame coefficients, kernels and test functions.

Grammar (whitespace-insensitive)::

    expression := term (('+' | '-') term)*
    term       := factor (('*' | '/') factor)*
    factor     := '-' factor | base ('^' integer)?
    base       := number | ident | '(' expression ')' | func '(' expression ')'
    func       := 'sin' | 'cos' | 'exp'
    ident      := [xv][1-9][0-9]*
    number     := decimal | integer '/' integer

Variables ``x1, x2, ...`` are chart coordinates and ``v1, v2, ...`` are
kernel (tangent) coordinates.  A literal quotient such as ``1/2`` is read as
the exact rational; literals are stored as ``Fraction``.
"""

from __future__ import annotations

import math
import re
from fractions import Fraction
from numbers import Number

import numpy as np

FUNCTIONS = ("sin", "cos", "exp")
_IDENT = re.compile(r"[xv][1-9][0-9]*")


class ExprSyntaxError(ValueError):
    def __init__(self, message, line, column):
        super().__init__(f"{message} at line {line}, column {column}")
        self.line = line
        self.column = column


class EvalDomainError(ArithmeticError):
    """Division by (numerically) zero during evaluation."""


# ---------------------------------------------------------------------------
# Nodes


class Expr:
    __slots__ = ("_hash",)
    kind = "?"

    def children(self):
        return ()

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Expr) or self._hash != other._hash or type(self) is not type(other):
            return False
        return self._key() == other._key()

    def __repr__(self):
        return f"Expr({to_string(self)})"

    def __str__(self):
        return to_string(self)

    # operator sugar builds simplified trees
    def __add__(self, other):
        return add(self, lift(other))

    def __radd__(self, other):
        return add(lift(other), self)

    def __sub__(self, other):
        return sub(self, lift(other))

    def __rsub__(self, other):
        return sub(lift(other), self)

    def __mul__(self, other):
        return mul(self, lift(other))

    def __rmul__(self, other):
        return mul(lift(other), self)

    def __truediv__(self, other):
        return div(self, lift(other))

    def __rtruediv__(self, other):
        return div(lift(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, k):
        return power(self, k)


class Num(Expr):
    __slots__ = ("value",)
    kind = "num"

    def __init__(self, value):
        if isinstance(value, float):
            value = Fraction(value)
        self.value = Fraction(value)
        self._hash = hash(("num", self.value))

    def _key(self):
        return self.value


class Var(Expr):
    __slots__ = ("name", "index")
    kind = "var"

    def __init__(self, name, index):
        if name not in ("x", "v") or index < 0:
            raise ValueError(f"bad variable {name}{index + 1}")
        self.name = name
        self.index = index
        self._hash = hash(("var", name, index))

    def _key(self):
        return (self.name, self.index)


class Binary(Expr):
    __slots__ = ("left", "right")

    def __init__(self, left, right):
        self.left = left
        self.right = right
        self._hash = hash((self.kind, left._hash, right._hash))

    def children(self):
        return (self.left, self.right)

    def _key(self):
        return (self.left, self.right)


class Add(Binary):
    __slots__ = ()
    kind = "+"


class Sub(Binary):
    __slots__ = ()
    kind = "-"


class Mul(Binary):
    __slots__ = ()
    kind = "*"


class Div(Binary):
    __slots__ = ()
    kind = "/"


class Pow(Expr):
    __slots__ = ("base", "exponent")
    kind = "^"

    def __init__(self, base, exponent):
        if not isinstance(exponent, int) or exponent < 0:
            raise ValueError("exponent must be a nonnegative integer")
        self.base = base
        self.exponent = exponent
        self._hash = hash(("^", base._hash, exponent))

    def children(self):
        return (self.base,)

    def _key(self):
        return (self.base, self.exponent)


class Neg(Expr):
    __slots__ = ("operand",)
    kind = "neg"

    def __init__(self, operand):
        self.operand = operand
        self._hash = hash(("neg", operand._hash))

    def children(self):
        return (self.operand,)

    def _key(self):
        return self.operand


class Func(Expr):
    __slots__ = ("name", "arg")
    kind = "func"

    def __init__(self, name, arg):
        if name not in FUNCTIONS:
            raise ValueError(f"unknown function {name}")
        self.name = name
        self.arg = arg
        self._hash = hash(("func", name, arg._hash))

    def children(self):
        return (self.arg,)

    def _key(self):
        return (self.name, self.arg)


ZERO = Num(0)
ONE = Num(1)


def lift(value):
    if isinstance(value, Expr):
        return value
    if isinstance(value, (Number, np.number)):
        return Num(Fraction(value) if not isinstance(value, (float, np.floating)) else float(value))
    raise TypeError(f"cannot turn {value!r} into an expression")


def x(i):
    """Chart coordinate x_{i+1} (zero-based index)."""
    return Var("x", i)


def v(i):
    """Tangent coordinate v_{i+1} (zero-based index)."""
    return Var("v", i)


# ---------------------------------------------------------------------------
# Simplifying constructors: constant folding and 0/1 identities only


def _is_num(e, value=None):
    return isinstance(e, Num) and (value is None or e.value == value)


def add(a, b):
    if _is_num(a) and _is_num(b):
        return Num(a.value + b.value)
    if _is_num(a, 0):
        return b
    if _is_num(b, 0):
        return a
    return Add(a, b)


def sub(a, b):
    if _is_num(a) and _is_num(b):
        return Num(a.value - b.value)
    if _is_num(b, 0):
        return a
    if _is_num(a, 0):
        return neg(b)
    if a == b:
        return ZERO
    return Sub(a, b)


def mul(a, b):
    if _is_num(a) and _is_num(b):
        return Num(a.value * b.value)
    if _is_num(a, 0) or _is_num(b, 0):
        return ZERO
    if _is_num(a, 1):
        return b
    if _is_num(b, 1):
        return a
    if _is_num(a, -1):
        return neg(b)
    if _is_num(b, -1):
        return neg(a)
    return Mul(a, b)


def div(a, b):
    if _is_num(b) and b.value != 0:
        if _is_num(a):
            return Num(a.value / b.value)
        if b.value == 1:
            return a
    if _is_num(a, 0) and not _is_num(b):
        return ZERO
    return Div(a, b)


def power(a, k):
    if k == 0:
        return ONE
    if k == 1:
        return a
    if _is_num(a):
        return Num(a.value ** k)
    return Pow(a, k)


def neg(a):
    if _is_num(a):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.operand
    return Neg(a)


def func(name, a):
    if _is_num(a, 0):
        return ZERO if name == "sin" else ONE
    return Func(name, a)


def simplify(e):
    """Rebuild bottom-up with constant folding and the 0/1 identities."""
    memo = {}

    def go(node):
        if node in memo:
            return memo[node]
        if isinstance(node, (Num, Var)):
            out = node
        elif isinstance(node, Add):
            out = add(go(node.left), go(node.right))
        elif isinstance(node, Sub):
            out = sub(go(node.left), go(node.right))
        elif isinstance(node, Mul):
            out = mul(go(node.left), go(node.right))
        elif isinstance(node, Div):
            out = div(go(node.left), go(node.right))
        elif isinstance(node, Pow):
            out = power(go(node.base), node.exponent)
        elif isinstance(node, Neg):
            out = neg(go(node.operand))
        elif isinstance(node, Func):
            out = func(node.name, go(node.arg))
        else:
            raise TypeError(node)
        memo[node] = out
        return out

    return go(e)


# ---------------------------------------------------------------------------
# Parsing


class _Token:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind, text, line, col):
        self.kind = kind
        self.text = text
        self.line = line
        self.col = col


def _tokenize(text):
    tokens = []
    i = 0
    line, col = 1, 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch.isspace():
            i += 1
            col += 1
            continue
        start_col = col
        if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == ".":
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            tokens.append(_Token("num", text[i:j], line, start_col))
            col += j - i
            i = j
            continue
        if ch.isalpha():
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            if word in FUNCTIONS:
                tokens.append(_Token("func", word, line, start_col))
            elif _IDENT.fullmatch(word):
                tokens.append(_Token("ident", word, line, start_col))
            else:
                raise ExprSyntaxError(f"unknown identifier '{word}'", line, start_col)
            col += j - i
            i = j
            continue
        if ch in "+-*/^()":
            tokens.append(_Token(ch, ch, line, start_col))
            i += 1
            col += 1
            continue
        raise ExprSyntaxError(f"unexpected character '{ch}'", line, start_col)
    tokens.append(_Token("end", "", line, col))
    return tokens


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.pos = 0

    @property
    def tok(self):
        return self.tokens[self.pos]

    def advance(self):
        t = self.tokens[self.pos]
        self.pos += 1
        return t

    def fail(self, message, tok=None):
        tok = tok or self.tok
        raise ExprSyntaxError(message, tok.line, tok.col)

    def expect(self, kind):
        if self.tok.kind != kind:
            found = "end of input" if self.tok.kind == "end" else f"'{self.tok.text}'"
            self.fail(f"expected '{kind}' but found {found}")
        return self.advance()

    def parse(self):
        if self.tok.kind == "end":
            self.fail("empty expression")
        node = self.expression()
        if self.tok.kind != "end":
            self.fail(f"unexpected '{self.tok.text}'")
        return node

    def expression(self):
        node, _ = self.term()
        while self.tok.kind in ("+", "-"):
            op = self.advance().kind
            right, _ = self.term()
            node = Add(node, right) if op == "+" else Sub(node, right)
        return node

    def term(self):
        node, literal = self.factor()
        while self.tok.kind in ("*", "/"):
            op = self.advance().kind
            right, right_literal = self.factor()
            if op == "/" and literal and right_literal and right.value != 0:
                node = Num(node.value / right.value)
                continue
            node = Mul(node, right) if op == "*" else Div(node, right)
            literal = False
        return node, literal

    def factor(self):
        if self.tok.kind == "-":
            self.advance()
            inner, literal = self.factor()
            if literal:
                return Num(-inner.value), True
            return Neg(inner), False
        node, literal = self.base()
        if self.tok.kind == "^":
            self.advance()
            t = self.tok
            if t.kind != "num" or not t.text.isdigit():
                self.fail("expected a nonnegative integer exponent")
            self.advance()
            return Pow(node, int(t.text)), False
        return node, literal

    def base(self):
        t = self.tok
        if t.kind == "num":
            self.advance()
            return Num(Fraction(t.text)), True
        if t.kind == "ident":
            self.advance()
            return Var(t.text[0], int(t.text[1:]) - 1), False
        if t.kind == "func":
            self.advance()
            self.expect("(")
            arg = self.expression()
            self.expect(")")
            return Func(t.text, arg), False
        if t.kind == "(":
            self.advance()
            node = self.expression()
            self.expect(")")
            return node, False
        if t.kind == "end":
            self.fail("unexpected end of input")
        self.fail(f"unexpected '{t.text}'")


def parse(text):
    """Parse source text into an expression tree (no simplification)."""
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# Printing (round-trips through ``parse``)


def _fmt_num(q):
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def _plain_nonneg_int(e):
    return isinstance(e, Num) and e.value.denominator == 1 and e.value >= 0


def to_string(e):
    if isinstance(e, Num):
        return _fmt_num(e.value)
    if isinstance(e, Var):
        return f"{e.name}{e.index + 1}"
    if isinstance(e, Func):
        return f"{e.name}({to_string(e.arg)})"
    if isinstance(e, Pow):
        b = e.base
        inner = to_string(b)
        if not (isinstance(b, (Var, Func)) or _plain_nonneg_int(b)):
            inner = f"({inner})"
        return f"{inner}^{e.exponent}"
    if isinstance(e, Neg):
        o = e.operand
        inner = to_string(o)
        if isinstance(o, (Add, Sub, Mul, Div, Num)):
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(e, (Add, Sub)):
        left = to_string(e.left)
        right = to_string(e.right)
        if isinstance(e.right, (Add, Sub)):
            right = f"({right})"
        return f"{left}{e.kind}{right}"
    if isinstance(e, (Mul, Div)):
        left = to_string(e.left)
        right = to_string(e.right)
        if isinstance(e.left, (Add, Sub)):
            left = f"({left})"
        elif isinstance(e, Div) and isinstance(e.left, Num) and isinstance(e.right, Num):
            left = f"({left})"
        if isinstance(e.right, (Add, Sub, Mul, Div)):
            right = f"({right})"
        elif isinstance(e.right, Num) and e.right.value.denominator != 1:
            right = f"({right})"
        return f"{left}{e.kind}{right}"
    raise TypeError(e)


# ---------------------------------------------------------------------------
# Calculus and substitution


def diff(e, var):
    """Symbolic partial derivative with respect to a Var node."""
    memo = {}

    def d(node):
        if node in memo:
            return memo[node]
        if isinstance(node, Num):
            out = ZERO
        elif isinstance(node, Var):
            out = ONE if node == var else ZERO
        elif isinstance(node, Add):
            out = add(d(node.left), d(node.right))
        elif isinstance(node, Sub):
            out = sub(d(node.left), d(node.right))
        elif isinstance(node, Mul):
            out = add(mul(d(node.left), node.right), mul(node.left, d(node.right)))
        elif isinstance(node, Div):
            da, db = d(node.left), d(node.right)
            if _is_num(db, 0):
                out = div(da, node.right)
            else:
                out = div(sub(mul(da, node.right), mul(node.left, db)), power(node.right, 2))
        elif isinstance(node, Pow):
            k = node.exponent
            out = ZERO if k == 0 else mul(mul(Num(k), power(node.base, k - 1)), d(node.base))
        elif isinstance(node, Neg):
            out = neg(d(node.operand))
        elif isinstance(node, Func):
            da = d(node.arg)
            if node.name == "sin":
                out = mul(func("cos", node.arg), da)
            elif node.name == "cos":
                out = neg(mul(func("sin", node.arg), da))
            else:
                out = mul(node, da)
        else:
            raise TypeError(node)
        memo[node] = out
        return out

    return d(e)


def substitute(e, mapping):
    """Replace variables according to ``mapping`` (Var -> Expr), simplifying."""
    memo = {}

    def go(node):
        if node in memo:
            return memo[node]
        if isinstance(node, Num):
            out = node
        elif isinstance(node, Var):
            out = mapping.get(node, node)
        elif isinstance(node, Add):
            out = add(go(node.left), go(node.right))
        elif isinstance(node, Sub):
            out = sub(go(node.left), go(node.right))
        elif isinstance(node, Mul):
            out = mul(go(node.left), go(node.right))
        elif isinstance(node, Div):
            out = div(go(node.left), go(node.right))
        elif isinstance(node, Pow):
            out = power(go(node.base), node.exponent)
        elif isinstance(node, Neg):
            out = neg(go(node.operand))
        else:
            out = func(node.name, go(node.arg))
        memo[node] = out
        return out

    return go(e)


def free_vars(e):
    out = set()
    stack = [e]
    seen = set()
    while stack:
        node = stack.pop()
        if node in seen:
            continue
        seen.add(node)
        if isinstance(node, Var):
            out.add(node)
        stack.extend(node.children())
    return out


def size(e):
    return 1 + sum(size(c) for c in e.children())


def is_zero(e):
    return _is_num(e, 0)


# ---------------------------------------------------------------------------
# Evaluation

_DIV_EPS = 1e-300


def _exact(value):
    return isinstance(value, (int, Fraction)) and not isinstance(value, bool)


def evaluate(e, x=(), v=()):
    """Tree-walking evaluation.

    With rational inputs and no transcendental function of a nonzero
    argument the result is an exact ``Fraction``.  Array inputs broadcast.
    """
    memo = {}

    def go(node):
        if node in memo:
            return memo[node]
        if isinstance(node, Num):
            out = node.value
        elif isinstance(node, Var):
            src = x if node.name == "x" else v
            if node.index >= len(src):
                raise KeyError(f"no value for {node.name}{node.index + 1}")
            out = src[node.index]
        elif isinstance(node, Add):
            out = go(node.left) + go(node.right)
        elif isinstance(node, Sub):
            out = go(node.left) - go(node.right)
        elif isinstance(node, Mul):
            out = go(node.left) * go(node.right)
        elif isinstance(node, Div):
            a, b = go(node.left), go(node.right)
            if _exact(b):
                if b == 0:
                    raise EvalDomainError(f"division by zero in {to_string(node)}")
                out = a / b
            else:
                if np.any(np.abs(b) <= _DIV_EPS):
                    raise EvalDomainError(f"division by ~0 in {to_string(node)}")
                out = a / b
        elif isinstance(node, Pow):
            out = go(node.base) ** node.exponent
        elif isinstance(node, Neg):
            out = -go(node.operand)
        else:
            a = go(node.arg)
            if _exact(a) and a == 0:
                out = Fraction(0) if node.name == "sin" else Fraction(1)
            elif _exact(a):
                out = getattr(math, node.name)(float(a))
            else:
                out = getattr(np, node.name)(a)
        if isinstance(out, np.ndarray) and out.dtype == object:
            out = out.astype(float)
        memo[node] = out
        return out

    return go(e)


class _Compiler:
    def __init__(self):
        self.lines = []
        self.names = {}
        self.consts = {}

    def emit(self, node):
        if node in self.names:
            return self.names[node]
        if isinstance(node, Num):
            name = f"c{len(self.consts)}"
            self.consts[name] = float(node.value)
            self.names[node] = name
            return name
        if isinstance(node, Var):
            ref = f"{node.name}[{node.index}]"
            self.names[node] = ref
            return ref
        if isinstance(node, Binary):
            a, b = self.emit(node.left), self.emit(node.right)
            if isinstance(node, Div):
                rhs = f"_div({a}, {b})"
            else:
                rhs = f"({a} {node.kind} {b})"
        elif isinstance(node, Pow):
            rhs = f"({self.emit(node.base)} ** {node.exponent})"
        elif isinstance(node, Neg):
            rhs = f"(-{self.emit(node.operand)})"
        else:
            rhs = f"_np.{node.name}({self.emit(node.arg)})"
        name = f"t{len(self.lines)}"
        self.lines.append(f"    {name} = {rhs}")
        self.names[node] = name
        return name


def _checked_div(a, b):
    if np.any(np.abs(b) <= _DIV_EPS):
        raise EvalDomainError("division by ~0")
    return a / b


def compile_exprs(exprs):
    """Compile a list of expressions into one numpy function f(x, v) -> list.

    ``x`` and ``v`` are sequences of arrays (or floats); constant outputs
    are broadcast against the inputs when possible.
    """
    comp = _Compiler()
    outs = [comp.emit(e) for e in exprs]
    body = "\n".join(comp.lines)
    src = f"def _f(x, v):\n{body}\n    return [{', '.join(outs)}]\n"
    env = {"_np": np, "_div": _checked_div, **comp.consts}
    exec(compile(src, "<expr>", "exec"), env)
    return env["_f"]


def compile_expr(e):
    f = compile_exprs([e])
    return lambda x=(), v=(): f(x, v)[0]


def vectorized(e, x, v=()):
    """Evaluate on float arrays, always returning an array of the broadcast shape."""
    f = compile_expr(e)
    out = f(x, v)
    shape = np.broadcast_shapes(*[np.shape(a) for a in list(x) + list(v)]) if (len(x) or len(v)) else ()
    return np.broadcast_to(np.asarray(out, dtype=float), shape).copy()
