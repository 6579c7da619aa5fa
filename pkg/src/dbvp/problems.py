"""Expression language for nonlinearities and bracket functions.

Grammar, loosest binding first::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?            # right-associative
    atom   := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'

Names are the variables ``t``, ``y``, the grid constant ``T`` and the
functions exp, sin, cos, log, sqrt, abs. Evaluation accepts scalars or numpy
arrays and raises ``EvaluationError`` instead of returning nan or inf.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from .exceptions import (
    EvaluationError,
    ExpressionSyntaxError,
    ProblemFormatError,
    UnknownIdentifierError,
)

VARIABLES = ("t", "y", "T")
FUNCTIONS = {
    "exp": np.exp,
    "sin": np.sin,
    "cos": np.cos,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
}


class Expression:
    """Base node. Subclasses are frozen dataclasses, compared structurally."""

    def __call__(self, t=0.0, y=0.0, T=0.0):
        return evaluate(self, t, y, T)

    def variables(self):
        out = set()
        _collect(self, out)
        return out

    def __str__(self):
        return pretty(self)


@dataclass(frozen=True)
class Num(Expression):
    value: float


@dataclass(frozen=True)
class Var(Expression):
    name: str


@dataclass(frozen=True)
class Neg(Expression):
    operand: Expression


@dataclass(frozen=True)
class BinOp(Expression):
    op: str
    left: Expression
    right: Expression


@dataclass(frozen=True)
class Call(Expression):
    func: str
    arg: Expression


def _collect(e, out):
    if isinstance(e, Var):
        out.add(e.name)
    elif isinstance(e, Neg):
        _collect(e.operand, out)
    elif isinstance(e, BinOp):
        _collect(e.left, out)
        _collect(e.right, out)
    elif isinstance(e, Call):
        _collect(e.arg, out)


# -- lexer ------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()])"
    r")"
)


def _tokenize(source):
    tokens = []
    pos = 0
    n = len(source)
    while pos < n:
        if source[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            raise ExpressionSyntaxError(f"unexpected character {source[pos]!r}", source, pos)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, source):
        self.source = source
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, pos = self.take()
        if text != value or kind == "end":
            found = "end of input" if kind == "end" else repr(text)
            raise ExpressionSyntaxError(f"expected {value!r}, found {found}", self.source, pos)

    def error(self, message, pos=None):
        if pos is None:
            pos = self.peek()[2]
        return ExpressionSyntaxError(message, self.source, pos)

    def parse(self):
        if self.peek()[0] == "end":
            raise self.error("empty expression")
        e = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise self.error(f"unexpected {text!r}", pos)
        return e

    def expr(self):
        left = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            left = BinOp(op, left, self.term())
        return left

    def term(self):
        left = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            left = BinOp(op, left, self.unary())
        return left

    def unary(self):
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, text, pos = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if text in FUNCTIONS:
                if self.peek()[1] != "(":
                    raise self.error(f"function {text!r} needs a parenthesized argument")
                self.take()
                arg = self.expr()
                self.expect(")")
                return Call(text, arg)
            if text in VARIABLES:
                return Var(text)
            raise UnknownIdentifierError(text, self.source, pos)
        if (kind, text) == ("op", "("):
            e = self.expr()
            self.expect(")")
            return e
        found = "end of input" if kind == "end" else repr(text)
        raise ExpressionSyntaxError(f"unexpected {found}", self.source, pos)


def parse(source: str) -> Expression:
    if not isinstance(source, str):
        raise ExpressionSyntaxError("expression source must be a string", repr(source), 0)
    return _Parser(source).parse()


# -- printing ---------------------------------------------------------------


def pretty(e: Expression) -> str:
    """Fully parenthesized source text that reparses to the same tree."""
    if isinstance(e, Num):
        return repr(float(e.value))
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"(-{pretty(e.operand)})"
    if isinstance(e, BinOp):
        return f"({pretty(e.left)} {e.op} {pretty(e.right)})"
    if isinstance(e, Call):
        return f"{e.func}({pretty(e.arg)})"
    raise TypeError(f"not an expression node: {e!r}")


# -- evaluation -------------------------------------------------------------


def _first_bad(mask, t, y):
    idx = np.argwhere(np.atleast_1d(mask))
    if idx.size == 0:
        return None, None
    k = tuple(idx[0])

    def pick(v):
        a = np.atleast_1d(np.asarray(v, dtype=float))
        if a.size == 1:
            return float(a.reshape(-1)[0])
        return float(np.broadcast_to(a, np.atleast_1d(mask).shape)[k])

    return pick(t), pick(y)


def _eval(e, t, y, T, env):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return env[e.name]
    if isinstance(e, Neg):
        return -_eval(e.operand, t, y, T, env)
    if isinstance(e, Call):
        x = _eval(e.arg, t, y, T, env)
        if e.func == "log" and np.any(np.asarray(x) <= 0):
            bt, by = _first_bad(np.asarray(x) <= 0, t, y)
            raise EvaluationError("log of nonpositive value", pretty(e), bt, by)
        if e.func == "sqrt" and np.any(np.asarray(x) < 0):
            bt, by = _first_bad(np.asarray(x) < 0, t, y)
            raise EvaluationError("sqrt of negative value", pretty(e), bt, by)
        out = FUNCTIONS[e.func](x)
        return _finite(out, e, t, y)
    a = _eval(e.left, t, y, T, env)
    b = _eval(e.right, t, y, T, env)
    op = e.op
    if op == "+":
        out = a + b
    elif op == "-":
        out = a - b
    elif op == "*":
        out = a * b
    elif op == "/":
        zero = np.asarray(b) == 0
        if np.any(zero):
            bt, by = _first_bad(zero, t, y)
            raise EvaluationError("division by zero", pretty(e), bt, by)
        out = a / b
    else:
        out = np.power(a, b) if isinstance(a, np.ndarray) or isinstance(b, np.ndarray) else _scalar_pow(a, b, e, t, y)
    return _finite(out, e, t, y)


def _scalar_pow(a, b, e, t, y):
    if a == 0 and b < 0:
        raise EvaluationError("zero to a negative power", pretty(e), t, y)
    try:
        out = math.pow(a, b)
    except ValueError:
        raise EvaluationError("negative base with non-integer exponent", pretty(e), t, y) from None
    except OverflowError:
        raise EvaluationError("overflow", pretty(e), t, y) from None
    return out


def _finite(out, e, t, y):
    arr = np.asarray(out)
    bad = ~np.isfinite(arr)
    if np.any(bad):
        bt, by = _first_bad(bad, t, y)
        raise EvaluationError("non-finite result (overflow or invalid operation)", pretty(e), bt, by)
    return out


def evaluate(e: Expression, t, y=0.0, T=0.0):
    """Evaluate at scalar or array bindings (numpy broadcasting rules)."""
    t_ = np.asarray(t, dtype=float) if np.ndim(t) else float(t)
    y_ = np.asarray(y, dtype=float) if np.ndim(y) else float(y)
    env = {"t": t_, "y": y_, "T": float(T)}
    with np.errstate(all="ignore"):
        out = _eval(e, t_, y_, T, env)
    if np.ndim(out) == 0 and (np.ndim(t) or np.ndim(y)):
        out = np.broadcast_to(out, np.broadcast(t_, y_).shape).astype(float)
    return float(out) if np.ndim(out) == 0 else np.asarray(out, dtype=float)


def _bound(e, env):
    """(value, s) with |computed - exact| <~ eps * s, to first order."""
    if isinstance(e, (Num, Var)):
        v = e.value if isinstance(e, Num) else env[e.name]
        return v, np.abs(v)
    if isinstance(e, Neg):
        v, s = _bound(e.operand, env)
        return -v, s
    t, y = env["t"], env["y"]
    if isinstance(e, Call):
        x, sx = _bound(e.arg, env)
        r = _eval(e, t, y, None, env)
        ar = np.abs(r)
        if e.func == "exp":
            return r, ar * (1.0 + sx)
        if e.func == "log":
            return r, sx / np.abs(x) + ar
        if e.func == "sqrt":
            return r, sx / np.where(ar > 0, 2.0 * ar, 1.0) + ar
        return r, sx + ar  # sin, cos, abs: derivative bounded by 1
    a, sa = _bound(e.left, env)
    b, sb = _bound(e.right, env)
    r = _eval(e, t, y, None, env)
    ar = np.abs(r)
    if e.op in "+-":
        return r, sa + sb + ar
    if e.op == "*":
        return r, sa * np.abs(b) + np.abs(a) * sb + ar
    if e.op == "/":
        return r, sa / np.abs(b) + np.abs(a) * sb / (b * b) + ar
    safe_a = np.where(np.abs(a) > 0, np.abs(a), 1.0)
    return r, ar * (np.abs(b) * sa / safe_a + np.abs(np.log(safe_a)) * sb + 1.0)


def magnitude(e: Expression, t, y=0.0, T=0.0):
    """Rounding-error scale s of an evaluation: the result is known to ~eps*s.

    Cancellation such as ``exp(t) - exp(y)`` near t = y gives a small value
    but a large scale, since each exponential carries its own rounding.
    """
    env = {
        "t": np.asarray(t, dtype=float),
        "y": np.asarray(y, dtype=float),
        "T": float(T),
    }
    with np.errstate(all="ignore"):
        _, s = _bound(e, env)
    return np.broadcast_to(np.asarray(s, dtype=float), np.broadcast(env["t"], env["y"]).shape).copy()


# -- problem documents ------------------------------------------------------

BUILTINS = {
    "example1": {
        "f": "exp(y)/exp((T+1)^2)",
        "lower": "0",
        "upper": "(T+1)*t - t^2/2",
        # reference one-sided constant 1/e^{(T+1)^2}
        "M_reference": "1/exp((T+1)^2)",
    },
    "example2": {
        "f": "exp(t) - exp(y)",
        "lower": "0",
        "upper": "t",
        # printed constant; its sign is inconsistent with f being decreasing in y
        "M_reference": "exp(T+1)",
    },
}


@dataclass(frozen=True)
class ProblemDocument:
    T: Optional[int]
    f: str
    lower: str
    upper: str
    lam: Optional[float] = None
    M: Optional[float] = None
    tol: Optional[float] = None
    max_iter: Optional[int] = None

    # JSON field name -> attribute name
    _JSON_NAMES = {"lambda": "lam"}

    def __post_init__(self):
        for name in ("f", "lower", "upper"):
            text = getattr(self, name)
            if not isinstance(text, str):
                raise ProblemFormatError(f"field {name!r} must be a string")
            expr = parse(text)
            if name != "f" and "y" in expr.variables():
                raise ProblemFormatError(f"{name} expression must not reference y: {text!r}")
        if self.T is not None and (
            isinstance(self.T, bool) or not isinstance(self.T, int) or self.T < 1
        ):
            raise ProblemFormatError(f"T must be a positive integer, got {self.T!r}")
        for name in ("lam", "M", "tol"):
            v = getattr(self, name)
            if v is not None:
                if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                    raise ProblemFormatError(f"{name} must be a finite number, got {v!r}")
        if self.tol is not None and self.tol <= 0:
            raise ProblemFormatError("tol must be positive")
        mi = self.max_iter
        if mi is not None and (isinstance(mi, bool) or not isinstance(mi, int) or mi < 1):
            raise ProblemFormatError(f"max_iter must be a positive integer, got {mi!r}")

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ProblemFormatError("problem document must be a JSON object")
        allowed = {"T", "f", "lower", "upper", "lambda", "M", "tol", "max_iter"}
        unknown = sorted(set(data) - allowed)
        if unknown:
            raise ProblemFormatError(f"unknown field(s): {', '.join(unknown)}")
        missing = sorted({"T", "f", "lower", "upper"} - set(data))
        if missing:
            raise ProblemFormatError(f"missing field(s): {', '.join(missing)}")
        kwargs = {cls._JSON_NAMES.get(k, k): v for k, v in data.items()}
        return cls(**kwargs)

    @classmethod
    def from_json(cls, text):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ProblemFormatError(f"malformed JSON: {exc}") from None
        return cls.from_dict(data)

    def to_dict(self):
        out = {}
        inverse = {v: k for k, v in self._JSON_NAMES.items()}
        for f in fields(self):
            v = getattr(self, f.name)
            if v is not None:
                out[inverse.get(f.name, f.name)] = v
        return out

    def with_T(self, T):
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["T"] = T
        return ProblemDocument(**d)


def builtin(name: str, T: Optional[int] = None) -> ProblemDocument:
    if name not in BUILTINS:
        raise ProblemFormatError(
            f"unknown builtin problem {name!r}; choose from {', '.join(sorted(BUILTINS))}"
        )
    b = BUILTINS[name]
    return ProblemDocument(T=T, f=b["f"], lower=b["lower"], upper=b["upper"])


def reference_M(name: str, T: int) -> float:
    """The one-sided constant quoted alongside a builtin example."""
    return evaluate(parse(BUILTINS[name]["M_reference"]), 0.0, 0.0, T)


def parse_linear_document(data):
    """{T, lambda, h: [...], B} -> LinearProblem; h has T or T+2 entries."""
    from .linear import LinearProblem

    if not isinstance(data, dict):
        raise ProblemFormatError("linear problem document must be a JSON object")
    allowed = {"T", "lambda", "h", "B"}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ProblemFormatError(f"unknown field(s): {', '.join(unknown)}")
    missing = sorted({"T", "lambda", "h"} - set(data))
    if missing:
        raise ProblemFormatError(f"missing field(s): {', '.join(missing)}")
    T = data["T"]
    if isinstance(T, bool) or not isinstance(T, int) or T < 1:
        raise ProblemFormatError(f"T must be a positive integer, got {T!r}")
    h = data["h"]
    if not isinstance(h, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in h
    ):
        raise ProblemFormatError("h must be an array of numbers")
    if len(h) not in (T, T + 2):
        raise ProblemFormatError(f"h must have T={T} or T+2={T + 2} entries, got {len(h)}")
    lam = data["lambda"]
    B = data.get("B", 0.0)
    for name, v in (("lambda", lam), ("B", B)):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ProblemFormatError(f"{name} must be a number")
    return LinearProblem(T, float(lam), h, float(B))
