"""Scalar expression language: parser, printer, evaluator, exact derivatives.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | power
    power  := base ('^' factor)?
    base   := number | ident | ident '(' expr ')' | '(' expr ')'

``^`` binds tighter than unary minus (``-x^2 == -(x^2)``) and is right
associative. ``pi`` and ``e`` are reserved constants; the functions are
``sin cos tan exp log sqrt``.

Expressions are compiled once to Python functions that work on floats and on
:class:`~ehresmann.dual.Dual` numbers alike, so every derivative in the
package is exact forward-mode AD rather than finite differences.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from ehresmann import dual as _d

FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt")
CONSTANTS = {"pi": math.pi, "e": math.e}

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


class ExprError(Exception):
    """Base class for expression errors."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, src: str, offset: int):
        self.src = src
        self.offset = offset  # byte offset into the UTF-8 encoding of src
        super().__init__(f"{message} at byte {offset}")


class UnknownVariableError(ExprError):
    def __init__(self, name: str, offset: int):
        self.name = name
        self.offset = offset
        super().__init__(f"unknown variable {name!r} at byte {offset}")


class ExprDomainError(ExprError, ArithmeticError):
    """Raised when evaluation leaves the domain of definition."""

    def __init__(self, node: "Expr", reason: str):
        self.node = node
        self.reason = reason
        super().__init__(f"{reason} in '{to_str(node)}'")


# ---------------------------------------------------------------------------
# AST


class Expr:
    """Base class of expression nodes (immutable)."""

    __slots__ = ()

    def __str__(self) -> str:
        return to_str(self)

    def variables(self) -> frozenset:
        return frozenset(_collect_vars(self))


@dataclass(frozen=True, eq=True)
class Num(Expr):
    value: float
    name: str | None = None  # "pi" / "e" when parsed from a reserved constant


@dataclass(frozen=True, eq=True)
class Var(Expr):
    name: str


@dataclass(frozen=True, eq=True)
class Unary(Expr):
    op: str  # "neg" or a function name
    arg: Expr


@dataclass(frozen=True, eq=True)
class Binary(Expr):
    op: str  # "add" "sub" "mul" "div" "pow"
    left: Expr
    right: Expr


ZERO = Num(0.0)
ONE = Num(1.0)


def _collect_vars(e: Expr):
    if isinstance(e, Var):
        yield e.name
    elif isinstance(e, Unary):
        yield from _collect_vars(e.arg)
    elif isinstance(e, Binary):
        yield from _collect_vars(e.left)
        yield from _collect_vars(e.right)


def is_zero(e: Expr) -> bool:
    return isinstance(e, Num) and e.value == 0.0


# ---------------------------------------------------------------------------
# Parser

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


class _Parser:
    def __init__(self, src: str, allowed: frozenset | None):
        self.src = src
        self.allowed = allowed
        self.tokens = self._tokenize()
        self.i = 0

    def _byte(self, char_index: int) -> int:
        return len(self.src[:char_index].encode("utf-8"))

    def _tokenize(self):
        toks = []
        pos = 0
        while pos < len(self.src):
            m = _TOKEN_RE.match(self.src, pos)
            if m is None:
                raise ExprSyntaxError(f"unexpected character {self.src[pos]!r}",
                                      self.src, self._byte(pos))
            kind = m.lastgroup
            if kind != "ws":
                toks.append((kind, m.group(), pos))
            pos = m.end()
        toks.append(("end", "", len(self.src)))
        return toks

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message, tok):
        raise ExprSyntaxError(message, self.src, self._byte(tok[2]))

    def expect(self, text):
        tok = self.take()
        if tok[1] != text or tok[0] == "end":
            self.error(f"expected {text!r}", tok)
        return tok

    def parse(self) -> Expr:
        if self.peek()[0] == "end":
            self.error("empty expression", self.peek())
        e = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            self.error(f"unexpected token {tok[1]!r}", tok)
        return e

    def expr(self) -> Expr:
        left = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = "add" if self.take()[1] == "+" else "sub"
            left = Binary(op, left, self.term())
        return left

    def term(self) -> Expr:
        left = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = "mul" if self.take()[1] == "*" else "div"
            left = Binary(op, left, self.factor())
        return left

    def factor(self) -> Expr:
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "-":
            self.take()
            return Unary("neg", self.factor())
        return self.power()

    def power(self) -> Expr:
        base = self.base()
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "^":
            self.take()
            return Binary("pow", base, self.factor())
        return base

    def base(self) -> Expr:
        tok = self.take()
        kind, text, pos = tok
        if kind == "num":
            return Num(float(text))
        if kind == "ident":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                if text not in FUNCTIONS:
                    self.error(f"unknown function {text!r}", tok)
                self.take()
                arg = self.expr()
                self.expect(")")
                return Unary(text, arg)
            if text in CONSTANTS:
                return Num(CONSTANTS[text], text)
            if text in FUNCTIONS:
                self.error(f"function {text!r} needs an argument", tok)
            if self.allowed is not None and text not in self.allowed:
                raise UnknownVariableError(text, self._byte(pos))
            return Var(text)
        if kind == "op" and text == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind == "end":
            self.error("unexpected end of input", tok)
        self.error(f"unexpected token {text!r}", tok)


def parse_expr(src: str, allowed_vars: Iterable[str] | None = None) -> Expr:
    """Parse ``src``; every identifier must be in ``allowed_vars`` (if given)."""
    allowed = None if allowed_vars is None else frozenset(allowed_vars)
    if allowed is not None:
        for name in allowed:
            check_var_name(name)
    return _Parser(src, allowed).parse()


def check_var_name(name: str) -> str:
    if not _IDENT_RE.match(name):
        raise ValueError(f"invalid variable name {name!r}")
    if name in CONSTANTS or name in FUNCTIONS:
        raise ValueError(f"{name!r} is reserved")
    return name


def as_expr(e, allowed_vars: Iterable[str] | None = None) -> Expr:
    """Accept an Expr, a number or a source string."""
    if isinstance(e, Expr):
        if allowed_vars is not None:
            extra = e.variables() - frozenset(allowed_vars)
            if extra:
                raise UnknownVariableError(sorted(extra)[0], -1)
        return e
    if isinstance(e, (int, float)):
        return Num(float(e))
    return parse_expr(e, allowed_vars)


# ---------------------------------------------------------------------------
# Printer

_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2, "neg": 3, "pow": 4}
_SYM = {"add": " + ", "sub": " - ", "mul": "*", "div": "/", "pow": "^"}


def _fmt_num(v: float) -> str:
    if not math.isfinite(v):
        raise ValueError("non-finite constant cannot be printed")
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def _prec(e: Expr) -> int:
    if isinstance(e, Binary):
        return _PREC[e.op]
    if isinstance(e, Unary) and e.op == "neg":
        return 3
    if isinstance(e, Num) and e.name is None and (e.value < 0 or math.copysign(1, e.value) < 0):
        return 3
    return 5


def to_str(e: Expr) -> str:
    """Print with the minimal parentheses needed to re-parse the same tree."""
    if isinstance(e, Num):
        if e.name is not None:
            return e.name
        if e.value < 0 or math.copysign(1, e.value) < 0:
            return "-" + _fmt_num(-e.value)
        return _fmt_num(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Unary):
        if e.op == "neg":
            inner = to_str(e.arg)
            return "-" + (f"({inner})" if _prec(e.arg) < 3 else inner)
        return f"{e.op}({to_str(e.arg)})"
    p = _PREC[e.op]
    ls, rs = to_str(e.left), to_str(e.right)
    if e.op == "pow":
        if _prec(e.left) <= p:
            ls = f"({ls})"
        if _prec(e.right) < p:
            rs = f"({rs})"
    else:
        if _prec(e.left) < p:
            ls = f"({ls})"
        if _prec(e.right) <= p:
            rs = f"({rs})"
    return ls + _SYM[e.op] + rs


# ---------------------------------------------------------------------------
# Construction helpers (no simplification beyond dropping literal 0 and 1)


def add(a: Expr, b: Expr) -> Expr:
    if is_zero(a):
        return b
    if is_zero(b):
        return a
    return Binary("add", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if is_zero(a) or is_zero(b):
        return ZERO
    if a == ONE:
        return b
    if b == ONE:
        return a
    return Binary("mul", a, b)


def lincomb(terms: Iterable[tuple[float, Expr]]) -> Expr:
    """Sum of ``coef * expr``; zero terms are skipped, unit factors omitted."""
    out = ZERO
    for coef, e in terms:
        coef = float(coef)
        if coef == 0.0 or is_zero(e):
            continue
        if coef == 1.0:
            term = e
        elif coef == -1.0:
            term = Unary("neg", e)
        else:
            term = mul(Num(coef), e)
        out = add(out, term)
    return out


def rename(e: Expr, mapping: Mapping[str, str]) -> Expr:
    if isinstance(e, Var):
        return Var(mapping.get(e.name, e.name))
    if isinstance(e, Unary):
        return Unary(e.op, rename(e.arg, mapping))
    if isinstance(e, Binary):
        return Binary(e.op, rename(e.left, mapping), rename(e.right, mapping))
    return e


# ---------------------------------------------------------------------------
# Evaluation

_UNARY_FN = {"sin": _d.dsin, "cos": _d.dcos, "tan": _d.dtan, "exp": _d.dexp,
             "log": _d.dlog, "sqrt": _d.dsqrt}
_NAMESPACE = {"_" + k: v for k, v in _UNARY_FN.items()}
_NAMESPACE["_pow"] = _d.dpow
_ARITH_ERRORS = (ZeroDivisionError, ValueError, OverflowError)


def _codegen(e: Expr, index: Mapping[str, int]) -> str:
    if isinstance(e, Num):
        return f"({float(e.value)!r})"
    if isinstance(e, Var):
        return f"v[{index[e.name]}]"
    if isinstance(e, Unary):
        a = _codegen(e.arg, index)
        if e.op == "neg":
            return f"(-{a})"
        return f"_{e.op}({a})"
    a, b = _codegen(e.left, index), _codegen(e.right, index)
    if e.op == "pow":
        return f"_pow({a}, {b})"
    return f"({a} {_SYM[e.op].strip()} {b})"


def _interpret(e: Expr, v: Sequence, index: Mapping[str, int]):
    """Slow tree walk used only to pin down which node failed."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return v[index[e.name]]
    if isinstance(e, Unary):
        a = _interpret(e.arg, v, index)
        if e.op == "neg":
            return -a
        try:
            return _UNARY_FN[e.op](a)
        except _ARITH_ERRORS as exc:
            raise ExprDomainError(e, f"{e.op} outside its domain ({exc})") from None
    a = _interpret(e.left, v, index)
    b = _interpret(e.right, v, index)
    try:
        if e.op == "add":
            return a + b
        if e.op == "sub":
            return a - b
        if e.op == "mul":
            return a * b
        if e.op == "div":
            return a / b
        return _d.dpow(a, b)
    except ZeroDivisionError:
        raise ExprDomainError(e, "division by zero") from None
    except _ARITH_ERRORS as exc:
        raise ExprDomainError(e, f"{e.op} outside its domain ({exc})") from None


class Compiled:
    """A list of expressions compiled into one Python function of a value list.

    ``Compiled(exprs, varnames)(values)`` returns the list of results; values
    may be floats or duals.
    """

    __slots__ = ("exprs", "varnames", "_fn", "_index")

    def __init__(self, exprs: Sequence[Expr], varnames: Sequence[str]):
        self.exprs = tuple(exprs)
        self.varnames = tuple(varnames)
        self._index = {name: i for i, name in enumerate(self.varnames)}
        for e in self.exprs:
            missing = e.variables() - self._index.keys()
            if missing:
                raise UnknownVariableError(sorted(missing)[0], -1)
        body = ", ".join(_codegen(e, self._index) for e in self.exprs)
        src = f"def _f(v):\n    return [{body}]\n"
        ns = dict(_NAMESPACE)
        exec(compile(src, "<exprdsl>", "exec"), ns)
        self._fn = ns["_f"]

    def __call__(self, values: Sequence) -> list:
        try:
            return self._fn(values)
        except _ARITH_ERRORS:
            for e in self.exprs:
                _interpret(e, values, self._index)
            raise

    def __len__(self) -> int:
        return len(self.exprs)


def _env_values(e: Expr, env: Mapping[str, float]):
    names = sorted(e.variables())
    missing = [n for n in names if n not in env]
    if missing:
        raise UnknownVariableError(missing[0], -1)
    return names, [float(env[n]) for n in names]


def evaluate(e: Expr | str, env: Mapping[str, float]) -> float:
    """Evaluate ``e`` at the point ``env`` (variable name -> value)."""
    e = as_expr(e)
    names, vals = _env_values(e, env)
    return float(Compiled([e], names)(vals)[0])


def partial(e: Expr | str, var: str, env: Mapping[str, float]) -> float:
    """Exact partial derivative of ``e`` with respect to ``var`` at ``env``."""
    return grad(e, [var], env)[0]


def grad(e: Expr | str, vars: Sequence[str], env: Mapping[str, float]) -> list[float]:
    e = as_expr(e)
    names, vals = _env_values(e, env)
    f = Compiled([e], names)
    out = []
    for var in vars:
        if var not in names:
            # absent from the expression, so the derivative vanishes
            out.append(0.0)
            continue
        tangent = [1.0 if n == var else 0.0 for n in names]
        _, d = _d.jvp(f, vals, tangent)
        out.append(float(d[0]))
    return out


def hessian(e: Expr | str, vars: Sequence[str], env: Mapping[str, float]) -> list[list[float]]:
    """Second partials by nested forward-mode passes."""
    e = as_expr(e)
    all_names = sorted(set(e.variables()) | set(vars))
    missing = [n for n in all_names if n not in env]
    if missing:
        raise UnknownVariableError(missing[0], -1)
    vals = [float(env[n]) for n in all_names]
    f = Compiled([e], all_names)
    k = len(vars)
    H = [[0.0] * k for _ in range(k)]
    for i, vi in enumerate(vars):
        ti = [1.0 if n == vi else 0.0 for n in all_names]
        for j, vj in enumerate(vars):
            tj = [1.0 if n == vj else 0.0 for n in all_names]
            zero = [0.0] * len(all_names)
            _, _, _, dte = _d.second_order(f, vals, ti, tj, zero)
            H[i][j] = float(dte[0])
    return H
