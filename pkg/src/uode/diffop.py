"""Linear differential operators over the coefficient field.

Inside the solver an operator is held in D-factored form: coefficients
``a_0 .. a_n`` stand for ``D^n a_n + ... + D a_1 + a_0``, i.e. the operator
maps ``f`` to ``sum_k (a_k f)^(k)``.  Multiplying the unknown by a
coefficient is then slotwise multiplication.  The standard form
``sum_j c_j f^(j)`` is only used for parsing, printing and counting.
"""
from __future__ import annotations

from math import comb
from typing import Iterable, NamedTuple

from .coeffdomain import ONE, ZERO, RatFunc, differentiate, is_zero, rf

__all__ = [
    "FuncId", "StdOp", "DiffOp", "LinDiffExpr",
    "std_to_factored", "factored_to_std", "split",
    "compose_mul", "compose_D", "compose", "op_linear", "op_add",
    "apply", "apply_expr", "right_divide", "right_gcd", "monic", "identity", "D",
]


class FuncId(NamedTuple):
    """An unknown function.  ``index`` orders functions by creation."""

    name: str
    origin: str = "user"
    index: int = 0

    def __str__(self) -> str:
        return self.name


def _strip(coeffs: list) -> tuple:
    n = len(coeffs)
    while n and is_zero(coeffs[n - 1]):
        n -= 1
    return tuple(coeffs[:n])


class _OpBase:
    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Iterable = ()):
        self.coeffs = _strip([rf(c) for c in coeffs])

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    def __getitem__(self, k: int) -> RatFunc:
        return self.coeffs[k] if 0 <= k < len(self.coeffs) else ZERO

    def __len__(self) -> int:
        return len(self.coeffs)

    def __iter__(self):
        return iter(self.coeffs)

    def __eq__(self, other) -> bool:
        if type(other) is not type(self):
            return NotImplemented
        return self.coeffs == other.coeffs

    def __hash__(self) -> int:
        return hash((type(self).__name__, self.coeffs))

    def n_terms(self) -> int:
        """Total number of numerator monomials over all slots."""
        return sum(len(c.num) for c in self.coeffs)

    def lead(self) -> RatFunc:
        return self.coeffs[-1] if self.coeffs else ZERO

    def __repr__(self) -> str:
        return f"{type(self).__name__}({', '.join(str(c) for c in self.coeffs)})"


class StdOp(_OpBase):
    """``sum_j c_j (d/dx)^j``; coefficient ``c_j`` multiplies the j-th derivative."""

    __slots__ = ()


class DiffOp(_OpBase):
    """``sum_k D^k a_k`` (D-factored form)."""

    __slots__ = ()

    @classmethod
    def _raw(cls, coeffs: tuple) -> "DiffOp":
        op = cls.__new__(cls)
        op.coeffs = coeffs
        return op

    def __add__(self, other: "DiffOp") -> "DiffOp":
        return op_add(self, other)

    def __neg__(self) -> "DiffOp":
        return DiffOp._raw(tuple(-c for c in self.coeffs))

    def __sub__(self, other: "DiffOp") -> "DiffOp":
        return op_add(self, -other)

    def scale_const(self, c) -> "DiffOp":
        """Left multiplication by a numeric constant (commutes with D)."""
        if not c:
            return DiffOp()
        return DiffOp._raw(tuple(a * c for a in self.coeffs))


def identity() -> DiffOp:
    return DiffOp._raw((ONE,))


def D(m: int = 1) -> DiffOp:
    """The operator ``D^m``."""
    return DiffOp._raw((ZERO,) * m + (ONE,))


def _derivatives(r: RatFunc, m: int, cache: dict) -> RatFunc:
    lst = cache.setdefault(id(r), [r])
    while len(lst) <= m:
        lst.append(differentiate(lst[-1]))
    return lst[m]


def std_to_factored(s: StdOp) -> DiffOp:
    """Solve ``c_j = sum_{k>=j} C(k,j) a_k^(k-j)`` top-down for the ``a_k``."""
    n = s.order
    if n < 0:
        return DiffOp()
    a = [ZERO] * (n + 1)
    cache: dict = {}
    for j in range(n, -1, -1):
        acc = s[j]
        for k in range(j + 1, n + 1):
            if a[k]:
                acc = acc - _derivatives(a[k], k - j, cache) * comb(k, j)
        a[j] = acc
    return DiffOp._raw(_strip(a))


def factored_to_std(a: DiffOp) -> StdOp:
    """Leibniz expansion of ``sum_k D^k a_k``."""
    n = a.order
    if n < 0:
        return StdOp()
    c = [ZERO] * (n + 1)
    for k, ak in enumerate(a.coeffs):
        if not ak:
            continue
        d = ak
        for j in range(k, -1, -1):
            # d == ak^(k-j)
            if d:
                c[j] = c[j] + d * comb(k, j)
            if j:
                d = differentiate(d)
    out = StdOp.__new__(StdOp)
    out.coeffs = _strip(c)
    return out


def split(a: DiffOp):
    """``a = D*Atilde + a0``; returns ``(Atilde, a0)``."""
    if not a.coeffs:
        return DiffOp(), ZERO
    return DiffOp._raw(_strip(list(a.coeffs[1:]))), a.coeffs[0]


def compose_mul(a: DiffOp, g) -> DiffOp:
    """``a`` composed with multiplication by ``g``: slotwise product, no derivatives."""
    g = rf(g)
    if not g:
        return DiffOp()
    if g.is_one():
        return a
    return DiffOp._raw(_strip([c * g for c in a.coeffs]))


def _compose_D1(a: DiffOp) -> DiffOp:
    # D^k (h f') = D^{k+1}(h f) - D^k (h' f)
    n = len(a.coeffs)
    if not n:
        return a
    b = [ZERO] * (n + 1)
    for k, ak in enumerate(a.coeffs):
        if ak:
            b[k + 1] = b[k + 1] + ak
            b[k] = b[k] - differentiate(ak)
    return DiffOp._raw(_strip(b))


def compose_D(a: DiffOp, m: int = 1) -> DiffOp:
    """``a`` composed with ``D^m``."""
    if m < 0:
        raise ValueError("negative derivative order")
    for _ in range(m):
        a = _compose_D1(a)
    return a


def op_add(a: DiffOp, b: DiffOp) -> DiffOp:
    if not b.coeffs:
        return a
    if not a.coeffs:
        return b
    n = max(len(a.coeffs), len(b.coeffs))
    return DiffOp._raw(_strip([a[k] + b[k] for k in range(n)]))


def op_linear(a: DiffOp, b: DiffOp, lam) -> DiffOp:
    """``a + b o lam``, i.e. ``a + compose_mul(b, lam)``."""
    return op_add(a, compose_mul(b, lam))


def compose(a: DiffOp, b: DiffOp) -> DiffOp:
    """Operator product ``a o b`` = sum_m (a o D^m) o b_m."""
    out = DiffOp()
    if not a.coeffs or not b.coeffs:
        return out
    am = a
    for m, bm in enumerate(b.coeffs):
        if m:
            am = _compose_D1(am)
        if bm:
            out = op_add(out, compose_mul(am, bm))
    return out


def apply(a: DiffOp, r) -> RatFunc:
    """``sum_k (a_k r)^(k)`` evaluated by nested differentiation."""
    r = rf(r)
    if not r or not a.coeffs:
        return ZERO
    acc = ZERO
    for ak in reversed(a.coeffs):
        if acc:
            acc = differentiate(acc)
        if ak:
            acc = acc + ak * r
    return acc


class LinDiffExpr:
    """``sum_i A_i f_i + inhom`` with every A_i nonzero."""

    __slots__ = ("terms", "inhom")

    def __init__(self, terms: dict | None = None, inhom=ZERO):
        self.terms = {f: op for f, op in (terms or {}).items() if op.coeffs}
        self.inhom = rf(inhom)

    @classmethod
    def of(cls, f: FuncId, op: DiffOp | None = None) -> "LinDiffExpr":
        return cls({f: op if op is not None else identity()})

    def functions(self) -> list:
        return sorted(self.terms, key=lambda f: f.index)

    def op(self, f: FuncId) -> DiffOp:
        return self.terms.get(f, DiffOp())

    def order(self, f: FuncId) -> int:
        return self.op(f).order

    def is_zero(self) -> bool:
        return not self.terms and not self.inhom

    def is_homogeneous(self) -> bool:
        return not self.inhom

    def __add__(self, other: "LinDiffExpr") -> "LinDiffExpr":
        terms = dict(self.terms)
        for f, op in other.terms.items():
            terms[f] = op_add(terms[f], op) if f in terms else op
        return type(self)(terms, self.inhom + other.inhom)

    def __neg__(self) -> "LinDiffExpr":
        return type(self)({f: -op for f, op in self.terms.items()}, -self.inhom)

    def __sub__(self, other: "LinDiffExpr") -> "LinDiffExpr":
        return self + (-other)

    def __eq__(self, other) -> bool:
        if not isinstance(other, LinDiffExpr):
            return NotImplemented
        return self.terms == other.terms and self.inhom == other.inhom

    def __hash__(self) -> int:
        return hash((frozenset(self.terms.items()), self.inhom))

    def references(self, f: FuncId) -> bool:
        return f in self.terms

    def substitute(self, target: FuncId, expr: "LinDiffExpr") -> "LinDiffExpr":
        """Replace ``target`` by ``expr``."""
        op = self.terms.get(target)
        if op is None:
            return self
        rest = type(self)({f: o for f, o in self.terms.items() if f != target}, self.inhom)
        return rest + apply_expr(op, expr)

    def std_terms(self) -> dict:
        """Map function -> StdOp."""
        return {f: factored_to_std(self.terms[f]) for f in self.functions()}

    def __repr__(self) -> str:
        parts = [f"{f}: {op!r}" for f, op in self.terms.items()]
        return f"{type(self).__name__}({{{', '.join(parts)}}}, inhom={self.inhom})"


def apply_expr(a: DiffOp, e: LinDiffExpr) -> LinDiffExpr:
    """The expression ``a(e)``; composes ``a`` with every operator in ``e``."""
    return LinDiffExpr({f: compose(a, op) for f, op in e.terms.items()}, apply(a, e.inhom))


def right_divide(A: DiffOp, B: DiffOp):
    """``A = Q o B + R`` with ``order(R) < order(B)``."""
    if not B.coeffs:
        raise ZeroDivisionError("right division by the zero operator")
    Q = DiffOp()
    R = A
    lb = B.lead()
    while R.order >= B.order:
        d = R.order - B.order
        T = DiffOp._raw((ZERO,) * d + (R.lead() / lb,))
        Q = op_add(Q, T)
        R = op_add(R, -compose(T, B))
    return Q, R


def monic(A: DiffOp) -> DiffOp:
    """Left-multiply so that the leading coefficient is one."""
    if not A.coeffs or A.lead().is_one():
        return A
    return compose(DiffOp._raw((A.lead().inverse(),)), A)


def right_gcd(A: DiffOp, B: DiffOp) -> DiffOp:
    """Greatest common right divisor, normalised to leading coefficient one."""
    if not A.coeffs and not B.coeffs:
        raise ValueError("gcd of two zero operators")
    while B.coeffs:
        A, B = B, right_divide(A, B)[1]
    return monic(A)
