"""Frontend for the rational ODE model language.

A model file declares parameters, states, inputs and outputs, then gives one
``d(state) = expr;`` equation per state and one ``output = expr;`` equation
per output.  Right-hand sides are rational expressions over the declared
symbols with arbitrary-precision integer constants (ratios of integers are
written with ``/``; decimal literals are rejected).

Grammar::

    file     := section+ equation+
    section  := ("params:" | "states:" | "inputs:" | "outputs:") ident ("," ident)* ";"
    equation := "d(" ident ")" "=" expr ";"  |  ident "=" expr ";"
    expr     := usual precedence over + - * / ^ with parentheses;
                "^" binds tightest, right-associative, literal nonnegative
                integer exponents only.

``#`` starts a comment running to the end of the line.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Union

__all__ = [
    "ModelError",
    "Const",
    "Var",
    "BinOp",
    "Pow",
    "Expr",
    "Model",
    "parse_model",
    "format_model",
    "expr_to_text",
    "eval_expr",
    "diff_expr",
    "expr_symbols",
]

KINDS = ("state", "parameter", "input", "output")

_SECTION_KINDS = {
    "params": "parameter",
    "states": "state",
    "inputs": "input",
    "outputs": "output",
}

_MAX_EXPONENT = 10**6


class ModelError(ValueError):
    """Parse or validation failure, carrying a source position when known."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        if line is not None:
            message = f"line {line}, column {col}: {message}"
        super().__init__(message)
        self.line = line
        self.col = col


# --------------------------------------------------------------------------
# Expression trees
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: int


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int  # literal nonnegative integer


Expr = Union[Const, Var, BinOp, Pow]

_ZERO = Const(0)
_ONE = Const(1)


def neg(e: Expr) -> Expr:
    return BinOp("-", _ZERO, e)


def _is_neg(e: Expr) -> bool:
    return isinstance(e, BinOp) and e.op == "-" and e.left == _ZERO


def expr_symbols(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, BinOp):
        return expr_symbols(e.left) | expr_symbols(e.right)
    if isinstance(e, Pow):
        return expr_symbols(e.base)
    return set()


def eval_expr(e: Expr, env: dict, ring):
    """Evaluate an expression tree over a ring (see ``obsid.slp`` for rings).

    ``env`` maps symbol names to ring elements.  Division by a non-unit
    raises whatever the ring's ``div`` raises (``ZeroDivisionError`` for the
    built-in rings).
    """
    if isinstance(e, Const):
        return ring.from_int(e.value)
    if isinstance(e, Var):
        return env[e.name]
    if isinstance(e, Pow):
        base = eval_expr(e.base, env, ring)
        acc = ring.from_int(1)
        k = e.exponent
        while k:
            if k & 1:
                acc = ring.mul(acc, base)
            k >>= 1
            if k:
                base = ring.mul(base, base)
        return acc
    a = eval_expr(e.left, env, ring)
    b = eval_expr(e.right, env, ring)
    if e.op == "+":
        return ring.add(a, b)
    if e.op == "-":
        return ring.sub(a, b)
    if e.op == "*":
        return ring.mul(a, b)
    return ring.div(a, b)


def diff_expr(e: Expr, name: str) -> Expr:
    """Formal partial derivative of an expression tree, unsimplified."""
    if isinstance(e, Const):
        return _ZERO
    if isinstance(e, Var):
        return _ONE if e.name == name else _ZERO
    if isinstance(e, Pow):
        if e.exponent == 0:
            return _ZERO
        db = diff_expr(e.base, name)
        if db == _ZERO:
            return _ZERO
        return BinOp("*", BinOp("*", Const(e.exponent), Pow(e.base, e.exponent - 1)), db)
    da = diff_expr(e.left, name)
    db = diff_expr(e.right, name)
    if e.op in "+-":
        if db == _ZERO:
            return da
        if da == _ZERO and e.op == "+":
            return db
        return BinOp(e.op, da, db)
    if e.op == "*":
        terms = []
        if da != _ZERO:
            terms.append(BinOp("*", da, e.right))
        if db != _ZERO:
            terms.append(BinOp("*", e.left, db))
        if not terms:
            return _ZERO
        if len(terms) == 1:
            return terms[0]
        return BinOp("+", terms[0], terms[1])
    # quotient rule: (da*b - a*db) / b^2
    num = BinOp("-", BinOp("*", da, e.right), BinOp("*", e.left, db))
    return BinOp("/", num, Pow(e.right, 2))


# --------------------------------------------------------------------------
# Tokenizer (shared with the group-file grammar, which adds "->")
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class _Tok:
    kind: str  # IDENT, INT, or the punctuation itself
    text: str
    line: int
    col: int


_PUNCT = ";,:()+-*/^="


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    line, col, i = 1, 1, 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_col = col
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(_Tok("IDENT", text[i:j], line, start_col))
            col += j - i
            i = j
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == ".":
                raise ModelError(
                    "decimal constants are not supported; write a ratio of integers",
                    line, start_col)
            toks.append(_Tok("INT", text[i:j], line, start_col))
            col += j - i
            i = j
            continue
        if ch == "-" and i + 1 < n and text[i + 1] == ">":
            toks.append(_Tok("->", "->", line, start_col))
            i += 2
            col += 2
            continue
        if ch in _PUNCT:
            toks.append(_Tok(ch, ch, line, start_col))
            i += 1
            col += 1
            continue
        raise ModelError(f"unexpected character {ch!r}", line, start_col)
    return toks


class _TokenStream:
    def __init__(self, toks: list[_Tok]):
        self.toks = toks
        self.pos = 0

    def peek(self, ahead: int = 0) -> _Tok | None:
        k = self.pos + ahead
        return self.toks[k] if k < len(self.toks) else None

    def take(self) -> _Tok:
        tok = self.peek()
        if tok is None:
            last = self.toks[-1] if self.toks else None
            raise ModelError("unexpected end of input",
                             last.line if last else 1, last.col if last else 1)
        self.pos += 1
        return tok

    def expect(self, kind: str) -> _Tok:
        tok = self.take()
        if tok.kind != kind:
            raise ModelError(f"expected {kind!r}, found {tok.text!r}", tok.line, tok.col)
        return tok

    @property
    def done(self) -> bool:
        return self.pos >= len(self.toks)


# --------------------------------------------------------------------------
# Expression parser, reusable for model and group files
# --------------------------------------------------------------------------

def _parse_expr(ts: _TokenStream, check_symbol) -> Expr:
    e = _parse_term(ts, check_symbol)
    while (tok := ts.peek()) is not None and tok.kind in "+-":
        ts.take()
        rhs = _parse_term(ts, check_symbol)
        e = BinOp(tok.kind, e, rhs)
    return e


def _parse_term(ts: _TokenStream, check_symbol) -> Expr:
    e = _parse_unary(ts, check_symbol)
    while (tok := ts.peek()) is not None and tok.kind in "*/":
        ts.take()
        rhs = _parse_unary(ts, check_symbol)
        e = BinOp(tok.kind, e, rhs)
    return e


def _parse_unary(ts: _TokenStream, check_symbol) -> Expr:
    tok = ts.peek()
    if tok is not None and tok.kind == "-":
        ts.take()
        return neg(_parse_unary(ts, check_symbol))
    return _parse_power(ts, check_symbol)


def _parse_power(ts: _TokenStream, check_symbol) -> Expr:
    base = _parse_atom(ts, check_symbol)
    tok = ts.peek()
    if tok is not None and tok.kind == "^":
        ts.take()
        k = _parse_exponent(ts)
        return Pow(base, k)
    return base


def _parse_exponent(ts: _TokenStream) -> int:
    tok = ts.take()
    if tok.kind != "INT":
        raise ModelError("exponent must be a nonnegative integer literal",
                         tok.line, tok.col)
    k = int(tok.text)
    nxt = ts.peek()
    if nxt is not None and nxt.kind == "^":  # right-associative exponent tower
        ts.take()
        k = k ** _parse_exponent(ts)
    if k > _MAX_EXPONENT:
        raise ModelError("exponent too large", tok.line, tok.col)
    return k


def _parse_atom(ts: _TokenStream, check_symbol) -> Expr:
    tok = ts.take()
    if tok.kind == "INT":
        return Const(int(tok.text))
    if tok.kind == "IDENT":
        check_symbol(tok)
        return Var(tok.text)
    if tok.kind == "(":
        e = _parse_expr(ts, check_symbol)
        ts.expect(")")
        return e
    raise ModelError(f"unexpected token {tok.text!r}", tok.line, tok.col)


# --------------------------------------------------------------------------
# Model
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Model:
    """A validated state-space model with rational right-hand sides."""

    name: str
    params: tuple[str, ...]
    states: tuple[str, ...]
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    f: tuple[Expr, ...]  # one per state, in declaration order
    g: tuple[Expr, ...]  # one per output, in declaration order

    @property
    def n(self) -> int:
        return len(self.states)

    @property
    def ell(self) -> int:
        return len(self.params)

    @property
    def r(self) -> int:
        return len(self.inputs)

    @property
    def m(self) -> int:
        return len(self.outputs)

    @property
    def unknowns(self) -> tuple[str, ...]:
        """Classification targets, states first then parameters."""
        return self.states + self.params

    def kind_of(self, name: str) -> str:
        for kind, group in (("state", self.states), ("parameter", self.params),
                            ("input", self.inputs), ("output", self.outputs)):
            if name in group:
                return kind
        raise KeyError(name)


def parse_model(text: str, name: str = "model") -> Model:
    """Parse and validate model-language source, raising ModelError on failure."""
    ts = _TokenStream(_tokenize(text))
    decls: dict[str, str] = {}
    ordered: dict[str, list[str]] = {k: [] for k in _SECTION_KINDS.values()}
    state_eqs: dict[str, Expr] = {}
    output_eqs: dict[str, Expr] = {}
    stray_eqs: list[tuple[_Tok, Expr]] = []
    seen_equation = False

    def check_symbol(tok: _Tok) -> None:
        kind = decls.get(tok.text)
        if kind is None:
            raise ModelError(f"undeclared symbol {tok.text!r}", tok.line, tok.col)
        if kind == "output":
            raise ModelError(f"output symbol {tok.text!r} used in an equation",
                             tok.line, tok.col)

    while not ts.done:
        tok = ts.peek()
        nxt = ts.peek(1)
        if tok.kind == "IDENT" and nxt is not None and nxt.kind == ":":
            if seen_equation:
                raise ModelError("sections must precede equations", tok.line, tok.col)
            kind = _SECTION_KINDS.get(tok.text)
            if kind is None:
                raise ModelError(f"unknown section {tok.text!r}", tok.line, tok.col)
            ts.take()
            ts.take()
            while True:
                ident = ts.expect("IDENT")
                if ident.text in decls:
                    raise ModelError(f"duplicate declaration of {ident.text!r}",
                                     ident.line, ident.col)
                decls[ident.text] = kind
                ordered[kind].append(ident.text)
                sep = ts.take()
                if sep.kind == ";":
                    break
                if sep.kind != ",":
                    raise ModelError(f"expected ',' or ';', found {sep.text!r}",
                                     sep.line, sep.col)
            continue

        # equation
        seen_equation = True
        if tok.kind == "IDENT" and tok.text == "d" and nxt is not None and nxt.kind == "(":
            ts.take()
            ts.take()
            ident = ts.expect("IDENT")
            ts.expect(")")
            ts.expect("=")
            if decls.get(ident.text) != "state":
                raise ModelError(f"d() applies to a declared state, not {ident.text!r}",
                                 ident.line, ident.col)
            if ident.text in state_eqs:
                raise ModelError(f"duplicate d({ident.text}) equation",
                                 ident.line, ident.col)
            rhs = _parse_expr(ts, check_symbol)
            ts.expect(";")
            state_eqs[ident.text] = rhs
            continue
        if tok.kind == "IDENT":
            ident = ts.take()
            ts.expect("=")
            rhs = _parse_expr(ts, check_symbol)
            ts.expect(";")
            kind = decls.get(ident.text)
            if kind == "output":
                if ident.text in output_eqs:
                    raise ModelError(f"duplicate equation for output {ident.text!r}",
                                     ident.line, ident.col)
                output_eqs[ident.text] = rhs
            else:
                stray_eqs.append((ident, rhs))
            continue
        raise ModelError(f"unexpected token {tok.text!r}", tok.line, tok.col)

    states = ordered["state"]
    outputs = ordered["output"]
    for s in states:
        if s not in state_eqs:
            raise ModelError(f"state {s!r} has no d({s}) equation")
    for y in outputs:
        if y not in output_eqs:
            raise ModelError(f"output {y!r} has no defining equation")
    if stray_eqs:
        ident, _ = stray_eqs[0]
        raise ModelError(
            f"equation target {ident.text!r} is not a declared output",
            ident.line, ident.col)
    if not outputs:
        raise ModelError("at least one output is required")
    if not states:
        raise ModelError("at least one state is required")
    model = Model(
        name=name,
        params=tuple(ordered["parameter"]),
        states=tuple(states),
        inputs=tuple(ordered["input"]),
        outputs=tuple(outputs),
        f=tuple(state_eqs[s] for s in states),
        g=tuple(output_eqs[y] for y in outputs),
    )
    if model.m > model.n:
        warnings.warn(f"model {name!r} has more outputs than states (m > n)",
                      stacklevel=2)
    return model


# --------------------------------------------------------------------------
# Pretty printer (round-trips through parse_model)
# --------------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def expr_to_text(e: Expr) -> str:
    return _fmt(e, 0)


def _fmt(e: Expr, parent: int) -> str:
    if isinstance(e, Const):
        return str(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Pow):
        base = _fmt(e.base, 3)
        if not isinstance(e.base, (Const, Var)):
            base = f"({base})"
        return f"{base}^{e.exponent}"
    if _is_neg(e):
        s = "-" + _fmt(e.right, 2)
        return f"({s})" if parent >= 2 else s
    prec = _PREC[e.op]
    left = _fmt(e.left, prec - 1)  # left-associative: same-prec left child unparenthesized
    right = _fmt(e.right, prec)
    s = f"{left} {e.op} {right}"
    return f"({s})" if parent >= prec else s


def format_model(model: Model) -> str:
    lines = []
    for label, group in (("params", model.params), ("states", model.states),
                         ("inputs", model.inputs), ("outputs", model.outputs)):
        if group:
            lines.append(f"{label}: {', '.join(group)};")
    for s, rhs in zip(model.states, model.f):
        lines.append(f"d({s}) = {expr_to_text(rhs)};")
    for y, rhs in zip(model.outputs, model.g):
        lines.append(f"{y} = {expr_to_text(rhs)};")
    return "\n".join(lines) + "\n"
