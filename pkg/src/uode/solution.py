"""Back-substitution, verification and size statistics for solutions."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from .coeffdomain import Poly, RatFunc, _zlcm
from .diffop import FuncId, LinDiffExpr, apply, right_divide


class TermCount(NamedTuple):
    num: int
    den: int

    def __str__(self) -> str:
        return f"{self.num}/{self.den}"


@dataclass
class ExplicitSolution:
    """Each original function written in terms of the parametric ones.

    ``residual`` (if any) is a single-function ODE that the corresponding
    parametric function must still satisfy.
    """

    functions: dict
    parametric: list
    residual: Optional[LinDiffExpr] = None
    base_name: str = field(default="x")

    def __getitem__(self, f) -> LinDiffExpr:
        if isinstance(f, str):
            f = next(k for k in self.functions if k.name == f)
        return self.functions[f]

    @property
    def residual_function(self) -> Optional[FuncId]:
        if self.residual is None:
            return None
        return next(iter(self.residual.terms))

    @property
    def free(self) -> list:
        return [f for f in self.parametric if f != self.residual_function]


def apply_subst_sequence(expr: LinDiffExpr, subs) -> LinDiffExpr:
    """Perform the substitutions front to back."""
    for s in subs:
        expr = expr.substitute(s.target, s.rhs)
    return expr


def back_substitute(subs, parametric, residual=None, functions=None) -> ExplicitSolution:
    """Resolve the substitution list from its end.

    The right-hand side of a substitution can only mention functions that
    are either parametric or replaced by a later entry, so one backwards
    sweep gives every target in parametric functions only.
    """
    resolved: dict = {}
    allowed = set(parametric)
    for s in reversed(subs):
        if s.target in resolved:
            raise ValueError(f"malformed substitution list: {s.target} assigned twice")
        rhs = s.rhs
        for t in [t for t in rhs.terms if t in resolved]:
            rhs = rhs.substitute(t, resolved[t])
        stray = [f.name for f in rhs.terms if f not in allowed]
        if stray:
            raise ValueError(f"malformed substitution list: {', '.join(stray)} unresolved")
        resolved[s.target] = rhs
    if functions is None:
        functions = [s.target for s in subs if s.target.origin == "user"]
        functions += [f for f in parametric if f.origin == "user"]
        functions.sort(key=lambda f: f.index)
    out = {f: resolved.get(f, LinDiffExpr.of(f)) for f in functions}
    return ExplicitSolution(out, list(parametric), residual)


def _reduce_by_residual(e: LinDiffExpr, residual: LinDiffExpr) -> LinDiffExpr:
    """Remainder of ``e`` modulo the single-function ODE ``residual = 0``."""
    (r, R), = residual.terms.items()
    B = e.terms.get(r)
    if B is None:
        return e
    Q, rem = right_divide(B, R)
    terms = {f: op for f, op in e.terms.items() if f != r}
    if rem.coeffs:
        terms[r] = rem
    return LinDiffExpr(terms, e.inhom - apply(Q, residual.inhom))


def substitute_solution(ode: LinDiffExpr, sol: ExplicitSolution) -> LinDiffExpr:
    """The ODE after replacing every solved function, residual reduced."""
    missing = [f.name for f in ode.terms if f not in sol.functions and f not in sol.parametric]
    if missing:
        raise ValueError(f"solution does not cover {', '.join(missing)}")
    e = ode
    for f, expr in sol.functions.items():
        e = e.substitute(f, expr)
    if sol.residual is not None:
        e = _reduce_by_residual(e, sol.residual)
    return e


def verify_substitutions(ode: LinDiffExpr, subs, residual=None) -> bool:
    """Check a substitution list by applying it front to back.

    The final expression equals the one obtained from the explicit
    solution, but intermediate expressions stay small.
    """
    e = apply_subst_sequence(ode, subs)
    if residual is not None:
        e = _reduce_by_residual(e, residual)
    return e.is_zero()


def verify(ode: LinDiffExpr, sol, explicit: bool = False) -> bool:
    """True if the solution turns the ODE into an identity.

    A solver result is checked through its substitution list unless
    ``explicit`` asks for the back-substituted form.
    """
    if hasattr(sol, "substitutions") and hasattr(sol, "explicit"):
        if not explicit:
            return verify_substitutions(ode, sol.substitutions, getattr(sol, "residual", None))
        sol = sol.explicit()
    return substitute_solution(ode, sol).is_zero()


def _lcm_all(polys) -> Poly:
    out = Poly.const(1)
    for p in polys:
        if not p.is_constant():
            out = _zlcm(out, p.integer_form()[1])
    return out


def expr_term_count(e: LinDiffExpr) -> TermCount:
    """Terms of the expression over one common denominator (standard form)."""
    coeffs = [c for op in e.std_terms().values() for c in op.coeffs if c]
    if e.inhom:
        coeffs.append(e.inhom)
    if not coeffs:
        return TermCount(0, 1)
    den = _lcm_all(c.den for c in coeffs)
    dr = RatFunc(den)
    num = sum(len((c * dr).num) for c in coeffs)
    return TermCount(num, len(den))


def term_count(sol) -> dict:
    """Function name -> :class:`TermCount` for every original function."""
    if hasattr(sol, "explicit"):
        sol = sol.explicit()
    return {f.name: expr_term_count(e) for f, e in sol.functions.items()}
