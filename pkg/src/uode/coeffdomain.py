"""Exact coefficient field: rational functions of ``x`` and differential indeterminates.

Polynomials are sparse maps from monomials to rational coefficients.  A
monomial is a tuple of ``(Indeterminate, exponent)`` pairs sorted by
decreasing indeterminate, so that plain tuple comparison realises the
lexicographic order with the base variable lowest.

Rational functions are kept in canonical form (coprime numerator and
denominator, denominator with leading coefficient one), which makes zero
testing a syntactic check.
"""
from __future__ import annotations

import os
import threading
from fractions import Fraction
from math import gcd as igcd
from typing import Iterable, NamedTuple, Union

try:  # optional accelerator for integer polynomial gcds
    import flint as _flint
except ImportError:  # pragma: no cover
    _flint = None
if os.environ.get("UODE_PURE_GCD"):
    _flint = None

__all__ = [
    "BASE", "GIVEN", "CONST", "INTEGRAL",
    "Indeterminate", "Poly", "RatFunc",
    "X", "given", "constant", "rf", "rf_make",
    "poly_gcd", "content_gcd", "differentiate", "integrate_formal",
    "is_zero", "diff_count", "registry",
]

BASE, GIVEN, CONST, INTEGRAL = 0, 1, 2, 3
_KINDS = {BASE: "base-variable", GIVEN: "given-function-derivative",
          CONST: "constant", INTEGRAL: "formal-integral"}

Number = Union[int, Fraction]


class Indeterminate(NamedTuple):
    """A symbol of the coefficient field.

    ``rank`` encodes the kind and dominates the monomial order.  For given
    functions ``order`` is the derivative order; for formal integrals it is
    the registry index.
    """

    rank: int
    name: str
    order: int = 0

    @property
    def kind(self) -> str:
        return _KINDS[self.rank]

    def __str__(self) -> str:
        if self.rank == GIVEN and self.order:
            return f"D({self.name},{self.order})"
        if self.rank == INTEGRAL:
            return f"Int{self.order}"
        return self.name


X = Indeterminate(BASE, "x", 0)


def given(name: str, order: int = 0) -> Indeterminate:
    if order < 0:
        raise ValueError("derivative order must be nonnegative")
    return Indeterminate(GIVEN, name, order)


def constant(name: str) -> Indeterminate:
    return Indeterminate(CONST, name, 0)


def _q(c: Number) -> Number:
    if type(c) is Fraction and c.denominator == 1:
        return c.numerator
    return c


def _mono_mul(m1: tuple, m2: tuple) -> tuple:
    if not m1:
        return m2
    if not m2:
        return m1
    if len(m1) == 1 and len(m2) == 1 and m1[0][0] == m2[0][0]:
        return ((m1[0][0], m1[0][1] + m2[0][1]),)
    d = dict(m1)
    for v, e in m2:
        d[v] = d.get(v, 0) + e
    return tuple(sorted(d.items(), reverse=True))


def _mono_div(m1: tuple, m2: tuple):
    """m1 / m2 or None when m2 does not divide m1."""
    if not m2:
        return m1
    d = dict(m1)
    for v, e in m2:
        r = d.get(v, 0) - e
        if r < 0:
            return None
        if r:
            d[v] = r
        else:
            del d[v]
    return tuple(sorted(d.items(), reverse=True))


class Poly:
    """Immutable sparse multivariate polynomial over the rationals."""

    __slots__ = ("terms", "_hash")

    def __init__(self, terms: dict | None = None):
        # callers guarantee: no zero coefficients, integral Fractions demoted
        self.terms = terms if terms is not None else {}
        self._hash = None

    @classmethod
    def from_terms(cls, items: Iterable) -> "Poly":
        out: dict = {}
        for m, c in items:
            if c:
                m = tuple(sorted(((v, e) for v, e in m if e), reverse=True))
                out[m] = out.get(m, 0) + c
        return cls({m: _q(c) for m, c in out.items() if c})

    @classmethod
    def const(cls, c: Number) -> "Poly":
        return cls({(): _q(Fraction(c))}) if c else cls()

    @classmethod
    def var(cls, v: Indeterminate, e: int = 1) -> "Poly":
        return cls({((v, e),): 1}) if e else cls({(): 1})

    # -- predicates -------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return not self.terms or (len(self.terms) == 1 and () in self.terms)

    def is_one(self) -> bool:
        return len(self.terms) == 1 and self.terms.get(()) == 1

    def constant_value(self) -> Number:
        return self.terms.get((), 0)

    def __len__(self) -> int:
        return len(self.terms)

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __eq__(self, other) -> bool:
        if isinstance(other, Poly):
            return self.terms == other.terms
        if isinstance(other, (int, Fraction)):
            return self.terms == ({(): other} if other else {})
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self.terms.items()))
        return self._hash

    # -- structure --------------------------------------------------------
    def lead(self):
        """(leading monomial, leading coefficient) under lex order."""
        m = max(self.terms)
        return m, self.terms[m]

    def lc(self) -> Number:
        return self.terms[max(self.terms)] if self.terms else 0

    def variables(self) -> set:
        return {v for m in self.terms for v, _ in m}

    def degree(self, v: Indeterminate) -> int:
        best = 0
        for m in self.terms:
            for w, e in m:
                if w == v and e > best:
                    best = e
        return best

    def total_degree(self) -> int:
        return max((sum(e for _, e in m) for m in self.terms), default=0)

    def coeffs_in(self, v: Indeterminate) -> dict:
        """Coefficients as a polynomial in ``v``: degree -> Poly."""
        out: dict = {}
        for m, c in self.terms.items():
            k = 0
            rest = m
            for i, (w, e) in enumerate(m):
                if w == v:
                    k = e
                    rest = m[:i] + m[i + 1:]
                    break
            out.setdefault(k, {})[rest] = c
        return {k: Poly(t) for k, t in out.items()}

    # -- arithmetic -------------------------------------------------------
    def __add__(self, other) -> "Poly":
        if not isinstance(other, Poly):
            other = Poly.const(other)
        if not other.terms:
            return self
        if not self.terms:
            return other
        a, b = (self, other) if len(self.terms) >= len(other.terms) else (other, self)
        out = dict(a.terms)
        for m, c in b.terms.items():
            s = out.get(m, 0) + c
            if s:
                out[m] = _q(s)
            else:
                out.pop(m, None)
        return Poly(out)

    __radd__ = __add__

    def __neg__(self) -> "Poly":
        return Poly({m: -c for m, c in self.terms.items()})

    def __sub__(self, other) -> "Poly":
        if not isinstance(other, Poly):
            other = Poly.const(other)
        return self + (-other)

    def __rsub__(self, other) -> "Poly":
        return Poly.const(other) - self

    def scale(self, c: Number) -> "Poly":
        if not c:
            return Poly()
        if c == 1:
            return self
        return Poly({m: _q(v * c) for m, v in self.terms.items()})

    def mul_mono(self, mono: tuple, c: Number = 1) -> "Poly":
        return Poly({_mono_mul(m, mono): _q(v * c) for m, v in self.terms.items()})

    def __mul__(self, other) -> "Poly":
        if not isinstance(other, Poly):
            return self.scale(other)
        if not self.terms or not other.terms:
            return Poly()
        if len(other.terms) == 1:
            (m, c), = other.terms.items()
            return self.mul_mono(m, c)
        if len(self.terms) == 1:
            (m, c), = self.terms.items()
            return other.mul_mono(m, c)
        if _flint is not None and len(self.terms) * len(other.terms) >= _FLINT_MUL_MIN:
            return _flint_mul(self, other)
        out: dict = {}
        get = out.get
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = _mono_mul(m1, m2)
                out[m] = get(m, 0) + c1 * c2
        return Poly({m: _q(c) for m, c in out.items() if c})

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "Poly":
        if n < 0:
            raise ValueError("negative power of a polynomial")
        result = Poly.const(1)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def divexact(self, other: "Poly") -> "Poly":
        """Exact quotient; raises ArithmeticError on a nonzero remainder."""
        if not other.terms:
            raise ZeroDivisionError("division by zero")
        if other.is_constant():
            return self.scale(Fraction(1) / other.terms[()])
        if _flint is not None and len(self.terms) >= _FLINT_DIV_MIN:
            return _flint_divexact(self, other)
        lm, lc = other.lead()
        rem = dict(self.terms)
        quot: dict = {}
        inv = Fraction(1) / lc
        while rem:
            m = max(rem)
            qm = _mono_div(m, lm)
            if qm is None:
                raise ArithmeticError("inexact polynomial division")
            qc = _q(rem[m] * inv)
            quot[qm] = qc
            for m2, c2 in other.terms.items():
                mm = _mono_mul(qm, m2)
                s = rem.get(mm, 0) - qc * c2
                if s:
                    rem[mm] = s
                else:
                    rem.pop(mm, None)
        return Poly(quot)

    def partial(self, v: Indeterminate) -> "Poly":
        out: dict = {}
        for m, c in self.terms.items():
            for i, (w, e) in enumerate(m):
                if w == v:
                    nm = m[:i] + ((w, e - 1),) + m[i + 1:] if e > 1 else m[:i] + m[i + 1:]
                    out[nm] = _q(c * e)
                    break
        return Poly(out)

    # -- integer normalisation --------------------------------------------
    def integer_form(self):
        """Return (k, P): self == k * P with P primitive over Z, lc(P) > 0."""
        if not self.terms:
            return Fraction(0), self
        den = 1
        for c in self.terms.values():
            if type(c) is Fraction:
                d = c.denominator
                den = den * d // igcd(den, d)
        num = 0
        ints = {}
        for m, c in self.terms.items():
            v = int(c * den)
            ints[m] = v
            num = igcd(num, v)
        if ints[max(ints)] < 0:
            num = -num
        P = Poly({m: v // num for m, v in ints.items()})
        return Fraction(num, den), P

    def primitive(self) -> "Poly":
        return self.integer_form()[1]

    def __repr__(self) -> str:
        return f"Poly({self})"

    def __str__(self) -> str:
        return format_poly(self)


def format_var(v: Indeterminate, base_name: str = "x") -> str:
    if v.rank == BASE:
        return base_name
    if v.rank == INTEGRAL:
        return f"Int({format_rf(registry.integrand(v), base_name)})"
    return str(v)


def format_poly(p: Poly, base_name: str = "x") -> str:
    if not p.terms:
        return "0"
    parts = []
    for m in sorted(p.terms, reverse=True):
        c = p.terms[m]
        factors = []
        for v, e in m:
            s = format_var(v, base_name)
            factors.append(s if e == 1 else f"{s}^{e}")
        mono = "*".join(factors)
        neg = c < 0
        a = -c if neg else c
        if not mono:
            body = str(a)
        elif a == 1:
            body = mono
        else:
            body = f"{a}*{mono}"
        parts.append(("-" if neg else "+", body))
    out = ("-" if parts[0][0] == "-" else "") + parts[0][1]
    for sign, body in parts[1:]:
        out += f" {sign} {body}"
    return out


def format_rf(r: "RatFunc", base_name: str = "x") -> str:
    num, den = r.num, r.den
    if not den.is_one():
        # integer coefficients on both sides read better: 1/(2*z), not 1/2/z
        scale = 1
        for c in list(num.terms.values()) + list(den.terms.values()):
            d = Fraction(c).denominator
            scale = scale * d // igcd(scale, d)
        g = 0
        for c in list(num.terms.values()) + list(den.terms.values()):
            g = igcd(g, int(c * scale))
        k = Fraction(scale, g)
        num, den = num.scale(k), den.scale(k)
    n = format_poly(num, base_name)
    if den.is_one():
        return n
    if len(num) > 1:
        n = f"({n})"
    d = format_poly(den, base_name)
    if len(den) > 1 or "*" in d:
        d = f"({d})"
    return f"{n}/{d}"


# ---------------------------------------------------------------------------
# GCD: primitive polynomial remainder sequences over Z
# ---------------------------------------------------------------------------

def _int_content(p: Poly) -> int:
    g = 0
    for c in p.terms.values():
        g = igcd(g, c)
        if g == 1:
            break
    return g


def _sign_normal(p: Poly) -> Poly:
    return -p if p.terms and p.lc() < 0 else p


def _mono_content(p: Poly) -> tuple:
    it = iter(p.terms)
    first = dict(next(it))
    for m in it:
        if not first:
            break
        md = dict(m)
        for v in list(first):
            e = md.get(v, 0)
            if e < first[v]:
                if e:
                    first[v] = e
                else:
                    del first[v]
    return tuple(sorted(first.items(), reverse=True))


def _to_dense(p: Poly, v: Indeterminate) -> list:
    deg = p.degree(v)
    out = [0] * (deg + 1)
    for m, c in p.terms.items():
        out[m[0][1] if m else 0] = c
    return out


def _from_dense(a: list, v: Indeterminate) -> Poly:
    return Poly({(((v, k),) if k else ()): c for k, c in enumerate(a) if c})


def _dense_prim(a: list) -> list:
    g = 0
    for c in a:
        g = igcd(g, c)
        if g == 1:
            return a
    return [c // g for c in a]


def _dense_prem(a: list, b: list) -> list:
    a = list(a)
    db = len(b) - 1
    lb = b[-1]
    while len(a) - 1 >= db and a:
        la = a[-1]
        shift = len(a) - 1 - db
        a = [c * lb for c in a]
        for k in range(db + 1):
            a[k + shift] -= la * b[k]
        while a and a[-1] == 0:
            a.pop()
    return a


def _dense_gcd(a: list, b: list) -> list:
    if len(a) < len(b):
        a, b = b, a
    a = _dense_prim(a)
    b = _dense_prim(b)
    while b:
        if len(b) == 1:
            return [1]
        r = _dense_prem(a, b)
        a, b = b, (_dense_prim(r) if r else r)
    if a[-1] < 0:
        a = [-c for c in a]
    return a


def _zgcd(p: Poly, q: Poly) -> Poly:
    """GCD over Z[vars] of integer-coefficient polynomials (positive lc)."""
    if not p.terms:
        return _sign_normal(q)
    if not q.terms:
        return _sign_normal(p)
    cp, cq = _int_content(p), _int_content(q)
    c = igcd(cp, cq)
    if p.is_constant() or q.is_constant():
        return Poly.const(c)
    pp = Poly({m: v // cp for m, v in p.terms.items()}) if cp != 1 else p
    qp = Poly({m: v // cq for m, v in q.terms.items()}) if cq != 1 else q
    return _zgcd_prim(pp, qp).scale(c)


def _zgcd_prim(p: Poly, q: Poly) -> Poly:
    if p == q:
        return _sign_normal(p)
    mp, mq = _mono_content(p), _mono_content(q)
    common = dict(mp)
    mqd = dict(mq)
    common = tuple(sorted(((v, min(e, mqd[v])) for v, e in common.items() if v in mqd),
                          reverse=True))
    if mp:
        p = Poly({_mono_div(m, mp): c for m, c in p.terms.items()})
    if mq:
        q = Poly({_mono_div(m, mq): c for m, c in q.terms.items()})
    g = _zgcd_core(p, q)
    if common:
        g = g.mul_mono(common)
    return _sign_normal(g)


def _flint_frame(*polys):
    vs = sorted(set().union(*(p.variables() for p in polys)), reverse=True)
    ctx = _flint.fmpz_mpoly_ctx.get(tuple(f"v{i}" for i in range(max(len(vs), 1))), "lex")
    return vs, ctx


def _to_flint(P: "Poly", vs: list, ctx):
    pos = {v: i for i, v in enumerate(vs)}
    n = max(len(vs), 1)
    d = {}
    for m, c in P.terms.items():
        e = [0] * n
        for v, k in m:
            e[pos[v]] = k
        d[tuple(e)] = int(c)
    return ctx.from_dict(d)


def _from_flint(g, vs: list, scale=1) -> "Poly":
    return Poly({tuple((vs[i], int(k)) for i, k in enumerate(e) if k): _q(int(c) * scale)
                 for e, c in g.to_dict().items()})


def _flint_gcd(p: "Poly", q: "Poly") -> "Poly":
    vs, ctx = _flint_frame(p, q)
    return _from_flint(_to_flint(p, vs, ctx).gcd(_to_flint(q, vs, ctx)), vs)


def _flint_mul(p: "Poly", q: "Poly") -> "Poly":
    k1, P = p.integer_form()
    k2, Q = q.integer_form()
    vs, ctx = _flint_frame(P, Q)
    return _from_flint(_to_flint(P, vs, ctx) * _to_flint(Q, vs, ctx), vs, k1 * k2)


def _flint_divexact(p: "Poly", q: "Poly") -> "Poly":
    # Gauss: a primitive integer divisor leaves an integer quotient
    k1, P = p.integer_form()
    k2, Q = q.integer_form()
    vs, ctx = _flint_frame(P, Q)
    try:
        r = _to_flint(P, vs, ctx) / _to_flint(Q, vs, ctx)
    except Exception as exc:
        raise ArithmeticError("inexact polynomial division") from exc
    return _from_flint(r, vs, k1 / k2)


_FLINT_MUL_MIN = 400
_FLINT_DIV_MIN = 24


def _zgcd_core(p: Poly, q: Poly) -> Poly:
    # both primitive over Z, no monomial content
    if p.is_constant() or q.is_constant():
        return Poly.const(1)
    if _flint is not None:
        return _flint_gcd(p, q)
    vp, vq = p.variables(), q.variables()
    only = (vp ^ vq)
    if only:
        v = max(only)
        a, b = (p, q) if v in vp else (q, p)
        g = b
        for coeff in a.coeffs_in(v).values():
            g = _zgcd(g, coeff)
            if g.is_constant():
                return Poly.const(1)
        return g
    if len(vp) == 1:
        v = next(iter(vp))
        return _from_dense(_dense_gcd(_to_dense(p, v), _to_dense(q, v)), v)
    v = max(vp)
    cont_p, pp = _content_in(p, v)
    cont_q, qq = _content_in(q, v)
    cont = _zgcd(cont_p, cont_q)
    g = _prs(pp, qq, v)
    return g * cont


def _content_in(p: Poly, v: Indeterminate):
    g = Poly()
    for coeff in p.coeffs_in(v).values():
        g = _zgcd(g, coeff)
        if g.is_one():
            break
    g = _sign_normal(g)
    if g.is_constant():
        c = g.constant_value()
        return g, (p if c == 1 else Poly({m: x // c for m, x in p.terms.items()}))
    return g, p.divexact(g)


def _lead_in(p: Poly, v: Indeterminate):
    d = p.degree(v)
    return d, p.coeffs_in(v)[d]


def _prem(a: Poly, b: Poly, v: Indeterminate) -> Poly:
    db, lb = _lead_in(b, v)
    r = a
    while r.terms:
        dr, lr = _lead_in(r, v)
        if dr < db:
            break
        t = lr.mul_mono(((v, dr - db),)) if dr > db else lr
        r = r * lb - t * b
    return r


def _prs(a: Poly, b: Poly, v: Indeterminate) -> Poly:
    if a.degree(v) < b.degree(v):
        a, b = b, a
    while True:
        r = _prem(a, b, v)
        if not r.terms:
            return _content_in(_sign_normal(b), v)[1]
        if r.degree(v) == 0:
            return Poly.const(1)
        a, b = b, _content_in(r, v)[1]


def poly_gcd(p: Poly, q: Poly) -> Poly:
    """GCD over Q, normalised primitive over Z with positive leading coefficient."""
    if not p.terms and not q.terms:
        return Poly()
    P = p.integer_form()[1] if p.terms else p
    Q = q.integer_form()[1] if q.terms else q
    return _zgcd(P, Q).primitive()


def _zlcm(a: Poly, b: Poly) -> Poly:
    g = _zgcd(a, b)
    return _sign_normal((a * b).divexact(g))


# ---------------------------------------------------------------------------
# Rational functions
# ---------------------------------------------------------------------------

_ONE_POLY = Poly({(): 1})
_ZERO_POLY = Poly()


class RatFunc:
    """Canonical quotient of polynomials: gcd(num, den) = 1 and lc(den) = 1."""

    __slots__ = ("num", "den", "_hash")

    def __init__(self, num: Poly, den: Poly = _ONE_POLY):
        # trusted constructor: arguments already canonical
        self.num = num
        self.den = den
        self._hash = None

    # -- constructors -----------------------------------------------------
    @staticmethod
    def make(n: Poly, d: Poly = _ONE_POLY) -> "RatFunc":
        if not d.terms:
            raise ZeroDivisionError("division by zero")
        if not n.terms:
            return ZERO
        if d.is_constant():
            c = d.terms[()]
            return RatFunc(n if c == 1 else n.scale(Fraction(1) / c))
        g = poly_gcd(n, d)
        if not g.is_one():
            n = n.divexact(g)
            d = d.divexact(g)
        c = d.lc()
        if c != 1:
            inv = Fraction(1) / c
            n, d = n.scale(inv), d.scale(inv)
        if d.is_one():
            return RatFunc(n)
        return RatFunc(n, d)

    @staticmethod
    def const(c: Number) -> "RatFunc":
        return RatFunc(Poly.const(c)) if c else ZERO

    @staticmethod
    def var(v: Indeterminate, e: int = 1) -> "RatFunc":
        return RatFunc(Poly.var(v, e))

    # -- predicates -------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.num.terms

    def __bool__(self) -> bool:
        return bool(self.num.terms)

    def is_one(self) -> bool:
        return self.num.is_one() and self.den.is_one()

    def is_polynomial(self) -> bool:
        return self.den.is_one()

    def is_constant(self) -> bool:
        return self.den.is_one() and self.num.is_constant()

    def constant_value(self) -> Number:
        if not self.is_constant():
            raise ValueError("not a numeric constant")
        return self.num.constant_value()

    def variables(self) -> set:
        return self.num.variables() | self.den.variables()

    def total_degree(self) -> int:
        return self.num.total_degree() + self.den.total_degree()

    def sign(self) -> int:
        if not self.num.terms:
            return 0
        return 1 if self.num.lc() > 0 else -1

    def __eq__(self, other) -> bool:
        if isinstance(other, RatFunc):
            return self.num == other.num and self.den == other.den
        if isinstance(other, (int, Fraction)):
            return self.den.is_one() and self.num == other
        if isinstance(other, Poly):
            return self.den.is_one() and self.num == other
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.num, self.den))
        return self._hash

    # -- arithmetic -------------------------------------------------------
    @staticmethod
    def _coerce(o) -> "RatFunc":
        if isinstance(o, RatFunc):
            return o
        if isinstance(o, Poly):
            return RatFunc.make(o)
        if isinstance(o, (int, Fraction)):
            return RatFunc.const(o)
        return NotImplemented

    def __add__(self, other) -> "RatFunc":
        other = RatFunc._coerce(other)
        if other is NotImplemented:
            return other
        if not other.num.terms:
            return self
        if not self.num.terms:
            return other
        d1, d2 = self.den, other.den
        if d1 == d2:
            n = self.num + other.num
            if d1.is_one():
                return RatFunc(n) if n.terms else ZERO
            return RatFunc.make(n, d1)
        if d1.is_one():
            return RatFunc(self.num * d2 + other.num, d2)
        if d2.is_one():
            return RatFunc(self.num + other.num * d1, d1)
        g = poly_gcd(d1, d2)
        if g.is_one():
            # already coprime to d1*d2
            return RatFunc(self.num * d2 + other.num * d1, d1 * d2)
        u1, u2 = d1.divexact(g), d2.divexact(g)
        n = self.num * u2 + other.num * u1
        return RatFunc.make(n, d1 * u2)

    __radd__ = __add__

    def __neg__(self) -> "RatFunc":
        return RatFunc(-self.num, self.den) if self.num.terms else self

    def __sub__(self, other) -> "RatFunc":
        other = RatFunc._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other) -> "RatFunc":
        return RatFunc._coerce(other) - self

    def __mul__(self, other) -> "RatFunc":
        if isinstance(other, (int, Fraction)):
            if not other:
                return ZERO
            return RatFunc(self.num.scale(other), self.den)
        other = RatFunc._coerce(other)
        if other is NotImplemented:
            return other
        if not self.num.terms or not other.num.terms:
            return ZERO
        n1, d1, n2, d2 = self.num, self.den, other.num, other.den
        if d1.is_one() and d2.is_one():
            return RatFunc(n1 * n2)
        if not d2.is_one():
            g = poly_gcd(n1, d2)
            if not g.is_one():
                n1, d2 = n1.divexact(g), d2.divexact(g)
        if not d1.is_one():
            g = poly_gcd(n2, d1)
            if not g.is_one():
                n2, d1 = n2.divexact(g), d1.divexact(g)
        n, d = n1 * n2, d1 * d2
        c = d.lc()
        if c != 1:
            inv = Fraction(1) / c
            n, d = n.scale(inv), d.scale(inv)
        return RatFunc(n, d) if not d.is_one() else RatFunc(n)

    __rmul__ = __mul__

    def inverse(self) -> "RatFunc":
        if not self.num.terms:
            raise ZeroDivisionError("division by zero")
        return RatFunc.make(self.den, self.num)

    def __truediv__(self, other) -> "RatFunc":
        if isinstance(other, (int, Fraction)):
            if not other:
                raise ZeroDivisionError("division by zero")
            return RatFunc(self.num.scale(Fraction(1) / other), self.den)
        other = RatFunc._coerce(other)
        if other is NotImplemented:
            return other
        return self * other.inverse()

    def __rtruediv__(self, other) -> "RatFunc":
        return RatFunc._coerce(other) * self.inverse()

    def __pow__(self, n: int) -> "RatFunc":
        if n < 0:
            return self.inverse() ** (-n)
        if n == 0:
            return ONE
        return RatFunc(self.num ** n, self.den ** n) if not self.den.is_one() \
            else RatFunc(self.num ** n)

    def __repr__(self) -> str:
        return f"RatFunc({format_rf(self)})"

    def __str__(self) -> str:
        return format_rf(self)


ZERO = RatFunc(_ZERO_POLY)
ONE = RatFunc(_ONE_POLY)


def rf(value) -> RatFunc:
    """Coerce an int, Fraction, Poly, Indeterminate or RatFunc to RatFunc."""
    if isinstance(value, RatFunc):
        return value
    if isinstance(value, Indeterminate):
        return RatFunc.var(value)
    r = RatFunc._coerce(value)
    if r is NotImplemented:
        raise TypeError(f"cannot convert {value!r} to RatFunc")
    return r


def rf_make(n: Poly, d: Poly) -> RatFunc:
    return RatFunc.make(n, d)


def is_zero(r: RatFunc) -> bool:
    return not r.num.terms


# ---------------------------------------------------------------------------
# Formal integrals
# ---------------------------------------------------------------------------

class _Registry:
    """Append-only store of formal-integral indeterminates and their integrands."""

    def __init__(self):
        self._lock = threading.Lock()
        self._integrands: list = []
        self._index: dict = {}

    def integral(self, integrand: RatFunc) -> Indeterminate:
        with self._lock:
            ind = self._index.get(integrand)
            if ind is None:
                ind = Indeterminate(INTEGRAL, "Int", len(self._integrands) + 1)
                self._integrands.append(integrand)
                self._index[integrand] = ind
            return ind

    def integrand(self, ind: Indeterminate) -> RatFunc:
        return self._integrands[ind.order - 1]


registry = _Registry()


# ---------------------------------------------------------------------------
# Derivation
# ---------------------------------------------------------------------------

_diff_calls = [0]


def diff_count() -> int:
    """Number of calls to :func:`differentiate` so far (instrumentation)."""
    return _diff_calls[0]


def _var_derivative(v: Indeterminate):
    if v.rank == BASE:
        return 1
    if v.rank == GIVEN:
        return Poly.var(Indeterminate(GIVEN, v.name, v.order + 1))
    if v.rank == CONST:
        return 0
    return registry.integrand(v)


def _poly_derivative(p: Poly):
    """Total derivative; a Poly unless formal integrals force a RatFunc."""
    out: dict = {}
    extra = ZERO
    for m, c in p.terms.items():
        for i, (v, e) in enumerate(m):
            dv = _var_derivative(v)
            if isinstance(dv, int) and dv == 0:
                continue
            rest = m[:i] + ((v, e - 1),) + m[i + 1:] if e > 1 else m[:i] + m[i + 1:]
            if isinstance(dv, int):
                out[rest] = out.get(rest, 0) + c * e
            elif isinstance(dv, Poly):
                (dm, _), = dv.terms.items()
                nm = _mono_mul(rest, dm)
                out[nm] = out.get(nm, 0) + c * e
            else:
                extra = extra + dv * RatFunc(Poly({rest: _q(c * e)}))
    poly = Poly({k: _q(v) for k, v in out.items() if v})
    if extra.num.terms:
        return extra + RatFunc(poly)
    return poly


def differentiate(r: RatFunc) -> RatFunc:
    """d/dx with the derivation extended to the declared indeterminates."""
    _diff_calls[0] += 1
    dn = _poly_derivative(r.num)
    if r.den.is_one():
        return RatFunc(dn) if isinstance(dn, Poly) else dn
    dd = _poly_derivative(r.den)
    if isinstance(dn, Poly) and isinstance(dd, Poly):
        n = dn * r.den - r.num * dd
        return RatFunc.make(n, r.den * r.den)
    dn, dd = rf(dn), rf(dd)
    return (dn * RatFunc(r.den) - RatFunc(r.num) * dd) / RatFunc(r.den * r.den)


def _exactly_integrable(r: RatFunc) -> bool:
    if not r.den.is_one():
        return False
    return all(v.rank in (BASE, CONST) for v in r.num.variables())


def integrate_formal(r: RatFunc) -> RatFunc:
    """Antiderivative: exact for polynomials in x, otherwise a formal integral symbol.

    Polynomials whose only other indeterminates are constants are also
    integrated exactly.
    """
    if not r.num.terms:
        return ZERO
    if _exactly_integrable(r):
        out = {}
        for m, c in r.num.terms.items():
            d = dict(m)
            e = d.get(X, 0) + 1
            d[X] = e
            out[tuple(sorted(d.items(), reverse=True))] = _q(Fraction(c) / e)
        return RatFunc(Poly(out))
    return RatFunc.var(registry.integral(r))


# ---------------------------------------------------------------------------
# Content of coefficient lists
# ---------------------------------------------------------------------------

def _integer_fraction(r: RatFunc):
    """r == N/M with N, M integer polynomials, coprime, lc(M) > 0."""
    kn, N = r.num.integer_form()
    km, M = r.den.integer_form()
    k = kn / km
    return N.scale(k.numerator), M.scale(k.denominator)


def content_gcd(cs: list) -> RatFunc:
    """gcd of numerators over lcm of denominators, both taken over Z."""
    nonzero = [c for c in cs if c.num.terms]
    if not nonzero:
        raise ValueError("content of an all-zero coefficient list")
    g = Poly()
    l = _ONE_POLY
    for c in nonzero:
        N, M = _integer_fraction(c)
        g = _zgcd(g, N)
        if not M.is_one():
            l = _zlcm(l, M)
    return RatFunc.make(g, l)
