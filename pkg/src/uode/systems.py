"""Decoupling of linear ODE systems into single-function equations."""
from __future__ import annotations

from dataclasses import dataclass, field

from .diffop import DiffOp, LinDiffExpr, apply, right_divide, right_gcd
from .solution import ExplicitSolution, apply_subst_sequence, back_substitute
from .solver import InconsistentError, Session, SolverConfig, Substitution, Uode, solve

__all__ = ["OdeSystem", "DecoupleResult", "decouple", "reduce_pair", "right_divide",
           "right_gcd", "verify_system"]


class OdeSystem(list):
    """Ordered equations over one set of functions."""

    def __init__(self, equations=()):
        super().__init__(Uode(e.terms, e.inhom) for e in equations)
        if not self:
            raise ValueError("empty system")

    def functions(self) -> list:
        seen = {}
        for e in self:
            for f in e.terms:
                seen.setdefault(f, None)
        return sorted(seen, key=lambda f: f.index)


@dataclass
class DecoupleResult:
    substitutions: list
    decoupled: list
    functions: list
    parametric: list
    forced: list = field(default_factory=list)

    def explicit(self) -> ExplicitSolution:
        """Original functions in terms of parametric and decoupled ones."""
        return back_substitute(self.substitutions, self.parametric, None, self.functions)


def reduce_pair(p: Uode, q: Uode) -> Uode:
    """One Euclidean reduction of two ODEs in the same function.

    With ``p = A f + a`` and ``q = B f + b`` and ``A = Q B + R`` the
    returned equation is ``R f + a - Q(b)``; it holds whenever both do.
    """
    (f, A), = p.terms.items()
    B = q.terms[f]
    Q, R = right_divide(A, B)
    return Uode({f: R} if R.coeffs else {}, p.inhom - apply(Q, q.inhom))


def _gcd_equations(eqs: list) -> Uode:
    cur = eqs[0]
    for nxt in eqs[1:]:
        a, b = cur, nxt
        while b.terms:
            if a.order_sum < b.order_sum:
                a, b = b, a
            a, b = b, reduce_pair(a, b)
        if b.inhom:
            raise InconsistentError()
        cur = a
    return cur


def decouple(system, cfg: SolverConfig | None = None) -> DecoupleResult:
    """Solve multi-function equations one at a time and reduce the rest.

    The equation with the fewest functions (then lowest order sum, then
    input position) is solved first; its substitutions are pushed into the
    remaining equations.  Afterwards equations sharing a single function
    are combined by right division.
    """
    cfg = cfg or SolverConfig()
    if not isinstance(system, OdeSystem):
        system = OdeSystem(system)
    functions = system.functions()
    session = Session.for_ode(LinDiffExpr({f: DiffOp([1]) for f in functions}))
    pending = list(system)
    subs: list = []
    seen = list(functions)
    while True:
        for e in pending:
            if not e.terms and e.inhom:
                raise InconsistentError()
        pending = [e for e in pending if e.terms]
        multi = [(len(e.terms), e.order_sum, k) for k, e in enumerate(pending) if len(e.terms) >= 2]
        if not multi:
            break
        _, _, k = min(multi)
        eq = pending.pop(k)
        res = solve(eq, cfg, session)
        subs.extend(res.substitutions)
        for s in res.substitutions:
            seen.extend(f for f in s.rhs.terms if f not in seen)
        pending = [Uode(x.terms, x.inhom) for x in
                   (apply_subst_sequence(e, res.substitutions) for e in pending)]
        if res.residual is not None:
            pending.append(res.residual)

    groups: dict = {}
    for e in pending:
        groups.setdefault(next(iter(e.terms)), []).append(e)
    decoupled = []
    forced = []
    for f in sorted(groups, key=lambda f: f.index):
        eq = _gcd_equations(groups[f])
        op = eq.terms[f]
        if op.order == 0:
            # the function is forced to a particular value
            val = -(eq.inhom / op.coeffs[0])
            sub = Substitution(f, LinDiffExpr({}, val), "forced")
            subs.append(sub)
            forced.append(f)
        else:
            decoupled.append(eq)
    targets = {s.target for s in subs}
    parametric = [f for f in seen if f not in targets]
    return DecoupleResult(subs, decoupled, functions, parametric, forced)


def verify_system(system, result: DecoupleResult) -> bool:
    """Every original equation reduces to zero modulo the decoupled ODEs."""
    sol = result.explicit()
    decoupled = {next(iter(d.terms)): d for d in result.decoupled}
    for e in system:
        r = e
        for f, expr in sol.functions.items():
            r = r.substitute(f, expr)
        for f, d in decoupled.items():
            if f in r.terms:
                Q, rem = right_divide(r.terms[f], d.terms[f])
                terms = {g: op for g, op in r.terms.items() if g != f}
                if rem.coeffs:
                    terms[f] = rem
                r = LinDiffExpr(terms, r.inhom - apply(Q, d.inhom))
        if not r.is_zero():
            return False
    return True
