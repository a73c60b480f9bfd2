"""Concrete syntax: ``.ode``/``.sol`` parsing, pretty-printing and JSON.

A document is a sequence of ``;``-terminated statements::

    vars x;                 # base variable (default x)
    funcs f, g;             # unknown functions
    given a;                # coefficient functions with formal derivatives
    consts C1;              # constants
    params h;               # parametric functions (solution files)
    eq: x^2*f'' + g = 3*x;  # an equation
    f = h' + x*h;           # an assignment (solution files)
    residual: h' = 0;       # residual ODE of a solution

Derivatives are written with primes or ``D(expr, n)``; ``Int(expr)`` is a
formal antiderivative of a coefficient.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .coeffdomain import (CONST, GIVEN, INTEGRAL, ZERO, RatFunc, X, constant, differentiate,
                          format_rf, format_var, given, integrate_formal, registry)
from .diffop import DiffOp, FuncId, LinDiffExpr, compose

KEYWORDS = {"vars", "funcs", "given", "consts", "params", "eq", "residual", "D", "Int"}


class ParseError(Exception):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        self.msg, self.line, self.col = msg, line, col
        super().__init__(f"{line}:{col}: {msg}" if line else msg)


_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<num>\d+(?:\.\d+)?)
  | (?P<id>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),;=:'])
""", re.VERBOSE)


def tokenize(text: str) -> list:
    toks = []
    pos, line, lstart = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - lstart + 1)
        kind = m.lastgroup
        val = m.group()
        if kind != "ws":
            toks.append((kind, val, line, pos - lstart + 1))
        for i, ch in enumerate(val):
            if ch == "\n":
                line += 1
                lstart = pos + i + 1
        pos = m.end()
    toks.append(("eof", "", line, pos - lstart + 1))
    return toks


@dataclass
class Document:
    base_name: str = "x"
    functions: list = field(default_factory=list)
    params: list = field(default_factory=list)
    given: list = field(default_factory=list)
    consts: list = field(default_factory=list)
    equations: list = field(default_factory=list)
    assignments: dict = field(default_factory=dict)
    residual: Optional[LinDiffExpr] = None

    def function(self, name: str) -> FuncId:
        for f in self.functions + self.params:
            if f.name == name:
                return f
        raise KeyError(name)

    @property
    def all_functions(self) -> list:
        return self.functions + self.params


def _deriv(e: LinDiffExpr, n: int = 1) -> LinDiffExpr:
    # D o (sum D^k a_k) just shifts the factored coefficients
    terms = {f: DiffOp._raw((ZERO,) * n + op.coeffs) for f, op in e.terms.items()}
    inhom = e.inhom
    for _ in range(n):
        inhom = differentiate(inhom)
    return LinDiffExpr(terms, inhom)


def _scale(e: LinDiffExpr, c: RatFunc) -> LinDiffExpr:
    if not c:
        return LinDiffExpr()
    if c.is_one():
        return e
    left = DiffOp([c])
    return LinDiffExpr({f: compose(left, op) for f, op in e.terms.items()}, c * e.inhom)


class _Parser:
    def __init__(self, text: str, context: Optional[Document] = None):
        self.toks = tokenize(text)
        self.i = 0
        self.doc = Document()
        self.symbols: dict = {}
        if context is not None:
            self.doc.base_name = context.base_name
            self._declare_base(context.base_name)
            for f in context.all_functions:
                self._add_function(f.name, None, known=f)
            for g in context.given:
                self._add("given", g, None)
            for c in context.consts:
                self._add("consts", c, None)
        else:
            self._declare_base("x")
        self.vars_seen = False

    # -- token helpers ----------------------------------------------------
    def peek(self, k: int = 0):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def error(self, msg: str, tok=None):
        tok = tok or self.peek()
        raise ParseError(msg, tok[2], tok[3])

    def expect(self, val: str):
        t = self.next()
        if t[1] != val:
            self.error(f"expected {val!r}, found {t[1] or 'end of input'!r}", t)
        return t

    def at(self, val: str) -> bool:
        return self.peek()[1] == val and self.peek()[0] in ("op", "id")

    # -- declarations -----------------------------------------------------
    def _declare_base(self, name: str):
        self.symbols = {k: v for k, v in self.symbols.items() if v[0] != "base"}
        self.symbols[name] = ("base", X)

    def _add(self, kind: str, name: str, tok):
        if name in KEYWORDS:
            self.error(f"{name!r} is reserved", tok)
        old = self.symbols.get(name)
        if old is not None and old[0] != kind:
            self.error(f"{name!r} already declared as {old[0]}", tok)
        if old is not None:
            return
        if kind == "given":
            self.symbols[name] = (kind, given(name))
            self.doc.given.append(name)
        elif kind == "consts":
            self.symbols[name] = (kind, constant(name))
            self.doc.consts.append(name)

    def _add_function(self, name: str, tok, kind: str = "funcs", known: FuncId | None = None):
        if name in KEYWORDS:
            self.error(f"{name!r} is reserved", tok)
        old = self.symbols.get(name)
        if old is not None:
            if old[0] in ("funcs", "params"):
                # a solution file may declare an equation's function as a parameter
                if kind == "params" and old[1] not in self.doc.params:
                    if old[1] in self.doc.functions:
                        self.doc.functions.remove(old[1])
                    self.doc.params.append(old[1])
                    self.symbols[name] = ("params", old[1])
                return
            self.error(f"{name!r} already declared as {old[0]}", tok)
        if known is None:
            n = len(self.doc.functions) + len(self.doc.params)
            known = FuncId(name, "user" if kind == "funcs" else "param", n)
        else:
            kind = "funcs" if known.origin == "user" else "params"
        self.symbols[name] = (kind, known)
        (self.doc.functions if kind == "funcs" else self.doc.params).append(known)

    def idlist(self) -> list:
        out = [self.next()]
        while self.at(","):
            self.next()
            out.append(self.next())
        for t in out:
            if t[0] != "id":
                self.error("expected a name", t)
        self.expect(";")
        return out

    # -- statements -------------------------------------------------------
    def document(self) -> Document:
        while self.peek()[0] != "eof":
            self.statement()
        return self.doc

    def statement(self):
        t = self.peek()
        if t[0] != "id":
            self.error(f"unexpected {t[1]!r}")
        word = t[1]
        if word == "vars":
            self.next()
            names = self.idlist()
            if len(names) != 1:
                self.error("exactly one base variable is supported", names[1])
            if any(v[0] != "base" for k, v in self.symbols.items() if k == names[0][1]):
                self.error(f"{names[0][1]!r} already declared", names[0])
            self.doc.base_name = names[0][1]
            self._declare_base(names[0][1])
        elif word in ("funcs", "params"):
            self.next()
            for n in self.idlist():
                self._add_function(n[1], n, word)
        elif word in ("given", "consts"):
            self.next()
            for n in self.idlist():
                self._add(word, n[1], n)
        elif word in ("eq", "residual"):
            self.next()
            self.expect(":")
            lhs = self.expr()
            self.expect("=")
            rhs = self.expr()
            self.expect(";")
            e = lhs - rhs
            if word == "eq":
                if not e.terms:
                    self.error("equation contains no unknown function", t)
                self.doc.equations.append(e)
            else:
                if len(e.terms) != 1:
                    self.error("a residual must involve exactly one function", t)
                self.doc.residual = e
        elif self.peek(1)[1] == "=":
            sym = self.symbols.get(word)
            if sym is None or sym[0] not in ("funcs", "params"):
                self.error(f"assignment to undeclared function {word!r}")
            self.next()
            self.next()
            rhs = self.expr()
            self.expect(";")
            self.doc.assignments[sym[1]] = rhs
        else:
            self.error(f"unexpected {word!r}")

    # -- expressions ------------------------------------------------------
    def expr(self) -> LinDiffExpr:
        if self.at("+") or self.at("-"):
            neg = self.next()[1] == "-"
            e = self.term()
            if neg:
                e = -e
        else:
            e = self.term()
        while self.at("+") or self.at("-"):
            op = self.next()[1]
            t = self.term()
            e = e + t if op == "+" else e - t
        return e

    def term(self) -> LinDiffExpr:
        e = self.unary()
        while self.at("*") or self.at("/"):
            tok = self.next()
            r = self.unary()
            if tok[1] == "*":
                if e.terms and r.terms:
                    self.error("nonlinear term: product of unknown functions", tok)
                e = _scale(r, e.inhom) if not e.terms else _scale(e, r.inhom)
            else:
                if r.terms:
                    self.error("division by an unknown function", tok)
                if not r.inhom:
                    self.error("division by zero", tok)
                e = _scale(e, r.inhom.inverse())
        return e

    def unary(self) -> LinDiffExpr:
        if self.at("-"):
            self.next()
            return -self.unary()
        if self.at("+"):
            self.next()
            return self.unary()
        return self.power()

    def power(self) -> LinDiffExpr:
        base = self.postfix()
        if self.at("^"):
            tok = self.next()
            neg = False
            if self.at("-"):
                self.next()
                neg = True
            n = self.next()
            if n[0] != "num" or "." in n[1]:
                self.error("exponent must be an integer", n)
            k = int(n[1]) * (-1 if neg else 1)
            if base.terms:
                if k != 1:
                    self.error("nonlinear term: power of an unknown function", tok)
                return base
            if not base.inhom and k < 0:
                self.error("division by zero", tok)
            return LinDiffExpr({}, base.inhom ** k)
        return base

    def _derivable(self, e: LinDiffExpr, tok):
        # unknown functions, given functions and formal integrals may be differentiated
        kinds = {v.rank for v in e.inhom.variables()}
        if not e.terms and not kinds & {GIVEN, INTEGRAL}:
            self.error("derivative of a non-function", tok)

    def postfix(self) -> LinDiffExpr:
        start = self.peek()
        e = self.atom()
        n = 0
        while self.peek()[1] == "'":
            self.next()
            n += 1
        if n:
            self._derivable(e, start)
        return _deriv(e, n) if n else e

    def atom(self) -> LinDiffExpr:
        t = self.next()
        kind, val = t[0], t[1]
        if kind == "num":
            return LinDiffExpr({}, RatFunc.const(Fraction(val)))
        if val == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind != "id":
            self.error(f"unexpected {val or 'end of input'!r}", t)
        if val == "D":
            self.expect("(")
            e = self.expr()
            n = 1
            if self.at(","):
                self.next()
                k = self.next()
                if k[0] != "num" or "." in k[1]:
                    self.error("derivative order must be a natural number", k)
                n = int(k[1])
            self.expect(")")
            self._derivable(e, t)
            return _deriv(e, n)
        if val == "Int":
            self.expect("(")
            e = self.expr()
            self.expect(")")
            if e.terms:
                self.error("Int of an unknown function is not supported", t)
            return LinDiffExpr({}, integrate_formal(e.inhom))
        sym = self.symbols.get(val)
        if sym is None:
            self.error(f"undeclared symbol {val!r}", t)
        kind, obj = sym
        if kind in ("funcs", "params"):
            return LinDiffExpr.of(obj)
        return LinDiffExpr({}, RatFunc.var(obj))


def parse(text: str, context: Optional[Document] = None) -> Document:
    """Parse a document; ``context`` supplies declarations of a companion file."""
    return _Parser(text, context).document()


def parse_ode(text: str) -> Document:
    doc = parse(text)
    if not doc.equations:
        raise ParseError("no equations")
    for e in doc.equations:
        for f in e.terms:
            if f.origin != "user":
                raise ParseError(f"equation uses parametric function {f.name!r}")
    return doc


def parse_expr(text: str, doc: Document) -> LinDiffExpr:
    p = _Parser(text, doc)
    e = p.expr()
    if p.peek()[0] != "eof":
        p.error(f"unexpected {p.peek()[1]!r}")
    return e


# ---------------------------------------------------------------------------
# printing
# ---------------------------------------------------------------------------

def format_derivative(f: FuncId, k: int) -> str:
    if k == 0:
        return f.name
    if k <= 3:
        return f.name + "'" * k
    return f"D({f.name},{k})"


def _signed_coeff(c: RatFunc, base_name: str):
    """Split into a sign and a printable factor (empty for +-1)."""
    neg = len(c.num) == 1 and next(iter(c.num.terms.values())) < 0
    if neg:
        c = -c
    if c.is_one():
        return neg, ""
    s = format_rf(c, base_name)
    if c.den.is_one() and len(c.num) > 1:
        s = f"({s})"
    return neg, s


def format_expr(e: LinDiffExpr, base_name: str = "x") -> str:
    """Standard-form rendering, highest derivatives first."""
    parts = []
    for f, op in e.std_terms().items():
        for k in range(op.order, -1, -1):
            c = op.coeffs[k]
            if not c:
                continue
            neg, s = _signed_coeff(c, base_name)
            d = format_derivative(f, k)
            parts.append((neg, f"{s}*{d}" if s else d))
    if e.inhom:
        neg, s = _signed_coeff(e.inhom, base_name)
        parts.append((neg, s or "1"))
    if not parts:
        return "0"
    out = ("-" if parts[0][0] else "") + parts[0][1]
    for neg, body in parts[1:]:
        out += (" - " if neg else " + ") + body
    return out


def _coeff_symbols(exprs) -> tuple:
    given_names, consts = set(), set()

    def scan(r: RatFunc):
        for v in r.variables():
            if v.rank == GIVEN:
                given_names.add(v.name)
            elif v.rank == CONST:
                consts.add(v.name)
            elif v.rank == INTEGRAL:
                scan(registry.integrand(v))

    for e in exprs:
        for op in e.terms.values():
            for c in op.coeffs:
                scan(c)
        scan(e.inhom)
    return sorted(given_names), sorted(consts)


def format_substitutions(subs, base_name: str = "x", residual=None) -> str:
    """The substitution list in derivation order, one per line."""
    lines = [f"{s.target.name} = {format_expr(s.rhs, base_name)};" for s in subs]
    if residual is not None:
        lines.append(f"residual: {format_expr(residual, base_name)} = 0;")
    return "\n".join(lines) + "\n"


def format_solution(sol, base_name: str = "x", extra_given=(), extra_consts=()) -> str:
    """An explicit solution as a parseable ``.sol`` document."""
    exprs = list(sol.functions.values())
    if sol.residual is not None:
        exprs.append(sol.residual)
    g, c = _coeff_symbols(exprs)
    g = sorted(set(g) | set(extra_given))
    c = sorted(set(c) | set(extra_consts))
    lines = []
    if base_name != "x":
        lines.append(f"vars {base_name};")
    if g:
        lines.append(f"given {', '.join(g)};")
    if c:
        lines.append(f"consts {', '.join(c)};")
    if sol.parametric:
        lines.append(f"params {', '.join(f.name for f in sol.parametric)};")
    solved = [f for f in sol.functions if f not in sol.parametric]
    if solved:
        lines.append(f"funcs {', '.join(f.name for f in solved)};")
    for f in solved:
        lines.append(f"{f.name} = {format_expr(sol.functions[f], base_name)};")
    if sol.residual is not None:
        lines.append(f"residual: {format_expr(sol.residual, base_name)} = 0;")
    return "\n".join(lines) + "\n"


def format_ode(doc: Document) -> str:
    lines = []
    if doc.base_name != "x":
        lines.append(f"vars {doc.base_name};")
    if doc.given:
        lines.append(f"given {', '.join(doc.given)};")
    if doc.consts:
        lines.append(f"consts {', '.join(doc.consts)};")
    lines.append(f"funcs {', '.join(f.name for f in doc.functions)};")
    for e in doc.equations:
        lines.append(f"eq: {format_expr(e, doc.base_name)} = 0;")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------

def poly_json(p, base_name: str = "x") -> list:
    return [[str(c), [[format_var(v, base_name), e] for v, e in m]]
            for m, c in sorted(p.terms.items(), reverse=True)]


def expr_json(e: LinDiffExpr, base_name: str = "x") -> dict:
    out = {}
    for f, op in e.std_terms().items():
        out[f.name] = [[k, poly_json(c.num, base_name), poly_json(c.den, base_name)]
                       for k, c in enumerate(op.coeffs) if c]
    out["inhom"] = [poly_json(e.inhom.num, base_name), poly_json(e.inhom.den, base_name)]
    return out


_POLY = {"type": "array", "items": {
    "type": "array", "minItems": 2, "maxItems": 2,
    "prefixItems": [{"type": "string"},
                    {"type": "array", "items": {"type": "array", "minItems": 2, "maxItems": 2}}],
}}
_EXPR = {
    "type": "object",
    "required": ["inhom"],
    "properties": {"inhom": {"type": "array", "minItems": 2, "maxItems": 2, "items": _POLY}},
    "additionalProperties": {"type": "array", "items": {
        "type": "array", "minItems": 3, "maxItems": 3,
        "prefixItems": [{"type": "integer", "minimum": 0}, _POLY, _POLY],
    }},
}

SOLUTION_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["parametric", "substitutions", "explicit", "residual", "stats"],
    "properties": {
        "parametric": {"type": "array", "items": {"type": "string"}},
        "substitutions": {"type": "array", "items": {
            "type": "object", "required": ["target", "rhs"],
            "properties": {"target": {"type": "string"}, "rhs": _EXPR,
                           "kind": {"type": "string"}},
        }},
        "explicit": {"type": "object", "additionalProperties": _EXPR},
        "residual": {"oneOf": [{"type": "null"}, _EXPR]},
        "stats": {
            "type": "object",
            "required": ["steps", "order_sum_trace", "term_counts"],
            "properties": {
                "steps": {"type": "array"},
                "order_sum_trace": {"type": "array", "items": {"type": "integer"}},
                "term_counts": {"type": "object", "additionalProperties": {
                    "type": "array", "items": {"type": "integer"},
                    "minItems": 2, "maxItems": 2}},
            },
        },
    },
}


def result_json(result, base_name: str = "x") -> dict:
    from .solution import term_count
    sol = result.explicit()
    return {
        "parametric": [f.name for f in result.parametric],
        "substitutions": [{"target": s.target.name, "kind": s.kind,
                           "rhs": expr_json(s.rhs, base_name)}
                          for s in result.substitutions],
        "explicit": {f.name: expr_json(e, base_name) for f, e in sol.functions.items()},
        "residual": expr_json(result.residual, base_name) if result.residual is not None else None,
        "stats": {
            "steps": [r.as_dict() for r in result.trace],
            "order_sum_trace": result.order_sum_trace,
            "term_counts": {k: [v.num, v.den] for k, v in term_count(sol).items()},
        },
    }
