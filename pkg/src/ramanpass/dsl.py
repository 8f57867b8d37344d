"""Small arithmetic language for analytic pulse envelopes over (t, nu).

Grammar (EBNF)::

    expr    = term , { ("+" | "-") , term } ;
    term    = unary , { ("*" | "/") , unary } ;
    unary   = "-" , unary | power ;
    power   = primary , [ "^" , unary ] ;
    primary = number | "t" | "nu" | func , "(" , expr , ")" | "(" , expr , ")" ;

``^`` binds tighter than unary minus and is right-associative, so ``-2^2`` is
``-(2^2)`` and ``2^3^2`` is ``2^(3^2)``.  There is no implicit multiplication:
``2nu`` is a lexical error.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import ArityError, EvalDomainError, LexError, ParseError

FUNCTIONS = (
    "sin", "cos", "tan", "sec", "sech", "tanh", "sinh", "cosh",
    "exp", "ln", "sqrt", "abs",
)
VARIABLES = ("t", "nu")
OPERATORS = "+-*/^"
MAX_NESTING = 100
MAX_TREE_DEPTH = 256
# |cos x| below this is treated as a pole of sec/tan
POLE_TOL = 1e-15


@dataclass(frozen=True)
class Token:
    kind: str  # number | identifier | operator | paren | comma
    lexeme: str
    position: int


_NUMBER = re.compile(r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


def tokenize(source: str | bytes) -> list[Token]:
    if isinstance(source, (bytes, bytearray)):
        try:
            source = bytes(source).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise LexError("source is not valid UTF-8", exc.start) from None
    tokens: list[Token] = []
    i, n = 0, len(source)
    while i < n:
        ch = source[i]
        if ch in " \t\r\n":
            i += 1
            continue
        if ch.isascii() and (ch.isdigit() or ch == "."):
            m = _NUMBER.match(source, i)
            if m is None:
                raise LexError(f"malformed number {ch!r}", i)
            lexeme = m.group()
            if not math.isfinite(float(lexeme)):
                raise LexError(f"number {lexeme!r} is not finite", i)
            end = m.end()
            if end < n and (source[end].isalnum() or source[end] in "._"):
                raise LexError(f"unexpected character {source[end]!r} after number", end)
            tokens.append(Token("number", lexeme, i))
            i = end
        elif ch.isascii() and (ch.isalpha() or ch == "_"):
            m = _IDENT.match(source, i)
            tokens.append(Token("identifier", m.group(), i))
            i = m.end()
        elif ch in OPERATORS:
            tokens.append(Token("operator", ch, i))
            i += 1
        elif ch in "()":
            tokens.append(Token("paren", ch, i))
            i += 1
        elif ch == ",":
            tokens.append(Token("comma", ch, i))
            i += 1
        else:
            raise LexError(f"unrecognized character {ch!r}", i)
    return tokens


# --- AST ---------------------------------------------------------------------


@dataclass(frozen=True)
class Const:
    value: float
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Var:
    name: str  # "t" or "nu"
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Neg:
    operand: "Expr"
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Expr"
    right: "Expr"
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"
    pos: int = field(default=0, compare=False)


Expr = Union[Const, Var, Neg, BinOp, Call]


class _Parser:
    def __init__(self, tokens: list[Token], source_len: int):
        self.tokens = tokens
        self.i = 0
        self.depth = 0
        self.end = source_len

    def peek(self) -> Token | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def offset(self) -> int:
        tok = self.peek()
        return tok.position if tok is not None else self.end

    def take(self) -> Token:
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of expression", self.end)
        self.i += 1
        return tok

    def expect(self, kind: str, lexeme: str) -> Token:
        tok = self.peek()
        if tok is None or tok.kind != kind or tok.lexeme != lexeme:
            found = "end of expression" if tok is None else repr(tok.lexeme)
            raise ParseError(f"expected {lexeme!r}, found {found}", self.offset())
        return self.take()

    def _enter(self):
        self.depth += 1
        if self.depth > MAX_NESTING:
            raise ParseError("expression nested too deeply", self.offset())

    def expr(self) -> Expr:
        self._enter()
        node = self.term()
        while (tok := self.peek()) is not None and tok.kind == "operator" and tok.lexeme in "+-":
            self.take()
            node = BinOp(tok.lexeme, node, self.term(), tok.position)
        self.depth -= 1
        return node

    def term(self) -> Expr:
        node = self.unary()
        while (tok := self.peek()) is not None and tok.kind == "operator" and tok.lexeme in "*/":
            self.take()
            node = BinOp(tok.lexeme, node, self.unary(), tok.position)
        return node

    def unary(self) -> Expr:
        tok = self.peek()
        if tok is not None and tok.kind == "operator" and tok.lexeme == "-":
            self.take()
            self._enter()
            node = Neg(self.unary(), tok.position)
            self.depth -= 1
            return node
        return self.power()

    def power(self) -> Expr:
        base = self.primary()
        tok = self.peek()
        if tok is not None and tok.kind == "operator" and tok.lexeme == "^":
            self.take()
            self._enter()
            exponent = self.unary()
            self.depth -= 1
            return BinOp("^", base, exponent, tok.position)
        return base

    def primary(self) -> Expr:
        tok = self.take()
        if tok.kind == "number":
            return Const(float(tok.lexeme), tok.position)
        if tok.kind == "paren" and tok.lexeme == "(":
            node = self.expr()
            self.expect("paren", ")")
            return node
        if tok.kind == "identifier":
            if tok.lexeme in VARIABLES:
                return Var(tok.lexeme, tok.position)
            if tok.lexeme in FUNCTIONS:
                return self.call(tok)
            raise ParseError(f"unknown identifier {tok.lexeme!r}", tok.position)
        raise ParseError(f"unexpected {tok.lexeme!r}", tok.position)

    def call(self, name: Token) -> Call:
        nxt = self.peek()
        if nxt is None or nxt.lexeme != "(":
            raise ArityError(f"function {name.lexeme!r} needs one parenthesized argument",
                             self.offset())
        self.take()
        if (tok := self.peek()) is not None and tok.lexeme == ")":
            raise ArityError(f"function {name.lexeme!r} takes exactly one argument, got none",
                             tok.position)
        arg = self.expr()
        if (tok := self.peek()) is not None and tok.kind == "comma":
            raise ArityError(f"function {name.lexeme!r} takes exactly one argument",
                             tok.position)
        self.expect("paren", ")")
        return Call(name.lexeme, arg, name.position)


def parse_expr(tokens: list[Token], source_len: int | None = None) -> Expr:
    if source_len is None:
        source_len = tokens[-1].position + len(tokens[-1].lexeme) if tokens else 0
    parser = _Parser(list(tokens), source_len)
    if not tokens:
        raise ParseError("empty expression", 0)
    node = parser.expr()
    if parser.peek() is not None:
        tok = parser.peek()
        raise ParseError(f"unexpected {tok.lexeme!r}", tok.position)
    return node


def parse(source: str | bytes) -> Expr:
    """Tokenize and parse in one step."""
    tokens = tokenize(source)
    end = tokens[-1].position + len(tokens[-1].lexeme) if tokens else 0
    node = parse_expr(tokens, end)
    if depth(node) > MAX_TREE_DEPTH:
        raise ParseError(f"expression tree deeper than {MAX_TREE_DEPTH}", 0)
    return node


# --- evaluation ----------------------------------------------------------------


def _sec(x):
    c = math.cos(x)
    if abs(c) < POLE_TOL:
        raise EvalDomainError(f"sec has a pole at {x!r}")
    return 1.0 / c


def _tan(x):
    if abs(math.cos(x)) < POLE_TOL:
        raise EvalDomainError(f"tan has a pole at {x!r}")
    return math.tan(x)


def _ln(x):
    if x <= 0.0:
        raise EvalDomainError(f"ln of non-positive value {x!r}")
    return math.log(x)


def _sqrt(x):
    if x < 0.0:
        raise EvalDomainError(f"sqrt of negative value {x!r}")
    return math.sqrt(x)


def _sech(x):
    # cosh overflows past |x| ~ 710 while sech is just 0 there
    return 0.0 if abs(x) > 700.0 else 1.0 / math.cosh(x)


_SCALAR = {
    "sin": math.sin, "cos": math.cos, "tan": _tan, "sec": _sec, "sech": _sech,
    "tanh": math.tanh, "sinh": math.sinh, "cosh": math.cosh, "exp": math.exp,
    "ln": _ln, "sqrt": _sqrt, "abs": abs,
}


def _pow(a, b):
    if a == 0.0 and b < 0.0:
        raise EvalDomainError("zero raised to a negative power")
    if a < 0.0 and b != int(b):
        raise EvalDomainError(f"negative base {a!r} raised to non-integer power {b!r}")
    return math.pow(a, b)


def _scalar(node: Expr, t: float, nu: float) -> float:
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return t if node.name == "t" else nu
    if isinstance(node, Neg):
        return -_scalar(node.operand, t, nu)
    if isinstance(node, BinOp):
        a = _scalar(node.left, t, nu)
        b = _scalar(node.right, t, nu)
        op = node.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            if b == 0.0:
                raise EvalDomainError("division by zero", node.pos)
            return a / b
        return _pow(a, b)
    return _SCALAR[node.func](_scalar(node.arg, t, nu))


def eval_expr(ast: Expr, t: float, nu: float) -> float:
    """Evaluate ``ast`` at one point; raises :class:`EvalDomainError` off-domain."""
    try:
        value = _scalar(ast, float(t), float(nu))
    except (OverflowError, ZeroDivisionError, ValueError) as exc:
        raise EvalDomainError(f"evaluation failed: {exc}") from None
    if not math.isfinite(value):
        raise EvalDomainError(f"non-finite value at t={t!r}, nu={nu!r}")
    return float(value)


def _check(mask, message):
    if np.any(mask):
        raise EvalDomainError(message)


def _array(node: Expr, t: np.ndarray, nu: float) -> np.ndarray:
    if isinstance(node, Const):
        return np.full_like(t, node.value)
    if isinstance(node, Var):
        return t if node.name == "t" else np.full_like(t, nu)
    if isinstance(node, Neg):
        return -_array(node.operand, t, nu)
    if isinstance(node, BinOp):
        a = _array(node.left, t, nu)
        b = _array(node.right, t, nu)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            _check(b == 0.0, "division by zero")
            return a / b
        _check((a == 0.0) & (b < 0.0), "zero raised to a negative power")
        _check((a < 0.0) & (b != np.trunc(b)), "negative base raised to non-integer power")
        return np.power(a, b)
    x = _array(node.arg, t, nu)
    f = node.func
    if f in ("sec", "tan"):
        _check(np.abs(np.cos(x)) < POLE_TOL, f"{f} has a pole")
        return 1.0 / np.cos(x) if f == "sec" else np.tan(x)
    if f == "ln":
        _check(x <= 0.0, "ln of non-positive value")
        return np.log(x)
    if f == "sqrt":
        _check(x < 0.0, "sqrt of negative value")
        return np.sqrt(x)
    if f == "sech":
        out = np.zeros_like(x)
        small = np.abs(x) <= 700.0
        out[small] = 1.0 / np.cosh(x[small])
        return out
    return {"sin": np.sin, "cos": np.cos, "tanh": np.tanh, "sinh": np.sinh,
            "cosh": np.cosh, "exp": np.exp, "abs": np.abs}[f](x)


def eval_array(ast: Expr, t, nu: float) -> np.ndarray:
    """Vectorized evaluation over an array of times."""
    t = np.asarray(t, dtype=float)
    with np.errstate(all="ignore"):
        out = _array(ast, t.reshape(-1), float(nu)).reshape(t.shape)
    _check(~np.isfinite(out), "non-finite value in envelope")
    return out


# --- printing ------------------------------------------------------------------


def to_source(node: Expr) -> str:
    """Fully parenthesized source text that re-parses to the same tree."""
    if isinstance(node, Const):
        return repr(float(node.value))
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_source(node.operand)})"
    if isinstance(node, BinOp):
        return f"({to_source(node.left)} {node.op} {to_source(node.right)})"
    return f"{node.func}({to_source(node.arg)})"


def depth(node: Expr) -> int:
    # iterative: left-associative chains can be arbitrarily deep
    best, stack = 0, [(node, 1)]
    while stack:
        n, d = stack.pop()
        best = max(best, d)
        if isinstance(n, Neg):
            stack.append((n.operand, d + 1))
        elif isinstance(n, Call):
            stack.append((n.arg, d + 1))
        elif isinstance(n, BinOp):
            stack.extend([(n.left, d + 1), (n.right, d + 1)])
    return best
