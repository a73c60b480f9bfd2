"""Iteration engine for underdetermined linear ODEs.

Two interchangeable step types operate on the same D-factored
representation ``0 = sum_i A_i f_i + a00``:

* the *new* step writes the ODE as ``0 = D g + sum a_i0 f_i + a00`` with
  ``g = sum Atilde_i f_i``, solves the algebraic part for one function and
  turns the definition of ``g`` into the next ODE;
* the *Euclid* step substitutes ``f_j = g - D^d (q f_i)`` so that the
  leading term of ``A_i`` cancels.

Either way the total differential order strictly decreases, so :func:`solve`
terminates with one function occurring algebraically (solved for, last
substitution) or with a residual single-function ODE.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

from .coeffdomain import ONE, ZERO, Indeterminate, RatFunc, constant, rf, content_gcd, integrate_formal
from .diffop import (DiffOp, FuncId, LinDiffExpr, StdOp, apply, compose, compose_D,
                     compose_mul, identity, op_add, op_linear, split,
                     std_to_factored)

log = logging.getLogger(__name__)

METHODS = ("new", "euclid", "hybrid-interleave", "hybrid-compare")
SIZE_METRICS = ("term-count", "degree-sum")


class SolverError(Exception):
    pass


class NotUnderdetermined(SolverError):
    def __init__(self, msg: str = "not underdetermined"):
        super().__init__(msg)


class ExactODE(SolverError):
    """Raised by :func:`new_step` when every algebraic part vanishes."""

    def __init__(self, msg: str = "exact"):
        super().__init__(msg)


class InconsistentError(SolverError):
    def __init__(self, msg: str = "inconsistent"):
        super().__init__(msg)


@dataclass(frozen=True)
class SolverConfig:
    method: str = "new"
    absorb_gcd: bool = False
    avoid_denominators: bool = False
    integration_constant: bool = True
    size_metric: str = "term-count"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.size_metric not in SIZE_METRICS:
            raise ValueError(f"unknown size metric {self.size_metric!r}")


@dataclass(frozen=True)
class Substitution:
    """``target = rhs``.  ``kind`` is one of step, scale, absorb, final."""

    target: FuncId
    rhs: LinDiffExpr
    kind: str = "step"

    def __post_init__(self):
        if self.target in self.rhs.terms:
            raise ValueError(f"{self.target} occurs in its own substitution")


@dataclass
class StepRecord:
    kind: str
    pivot: Optional[FuncId]
    introduced: list
    order_sum_before: int
    order_sum_after: int
    size_before: int
    size_after: int

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "pivot": self.pivot.name if self.pivot else None,
            "introduced": [f.name for f in self.introduced],
            "order_sum_before": self.order_sum_before,
            "order_sum_after": self.order_sum_after,
            "size_before": self.size_before,
            "size_after": self.size_after,
        }


class Uode(LinDiffExpr):
    """The equation ``0 = sum_i A_i f_i + inhom``."""

    __slots__ = ()

    @classmethod
    def from_std(cls, terms: dict, inhom=ZERO) -> "Uode":
        """Build from standard-form coefficient lists ``{f: [c_0, c_1, ...]}``."""
        return cls({f: std_to_factored(StdOp(cs)) for f, cs in terms.items()}, inhom)

    @property
    def orders(self) -> dict:
        return {f: op.order for f, op in self.terms.items()}

    @property
    def order_sum(self) -> int:
        return sum(op.order for op in self.terms.values())

    def is_underdetermined(self) -> bool:
        return len(self.terms) >= 2 and all(op.order > 0 for op in self.terms.values())


class Session:
    """Fresh-name source for solver-introduced functions and constants."""

    def __init__(self, taken=(), prefix: str = "f", start: int = 1,
                 next_index: int = 0, const_prefix: str = "C"):
        self.taken = set(taken)
        self.prefix = prefix
        self.counter = start
        self.next_index = next_index
        self.const_prefix = const_prefix
        self.const_counter = 1

    @classmethod
    def for_ode(cls, ode: LinDiffExpr, prefix: str = "f", start: Optional[int] = None,
                extra=()) -> "Session":
        fs = list(ode.terms) + list(extra)
        users = [f for f in fs if f.origin == "user"]
        nxt = max((f.index for f in fs), default=-1) + 1
        if start is None:
            start = len(users) + 1
        return cls({f.name for f in fs}, prefix, start, nxt)

    def new_function(self) -> FuncId:
        while f"{self.prefix}{self.counter}" in self.taken:
            self.counter += 1
        name = f"{self.prefix}{self.counter}"
        self.counter += 1
        self.taken.add(name)
        f = FuncId(name, "solver", self.next_index)
        self.next_index += 1
        return f

    def new_constant(self) -> Indeterminate:
        while f"{self.const_prefix}{self.const_counter}" in self.taken:
            self.const_counter += 1
        name = f"{self.const_prefix}{self.const_counter}"
        self.const_counter += 1
        self.taken.add(name)
        return constant(name)

    def fork(self) -> "Session":
        s = Session(self.taken, self.prefix, self.counter, self.next_index, self.const_prefix)
        s.const_counter = self.const_counter
        return s

    def adopt(self, other: "Session") -> None:
        self.__dict__.update(other.__dict__)
        self.taken = set(other.taken)


# ---------------------------------------------------------------------------
# size measures
# ---------------------------------------------------------------------------

def expr_size(e: LinDiffExpr, metric: str = "term-count") -> int:
    """Numerator terms (or total degrees) over the standard-form coefficients."""
    coeffs = [c for op in e.std_terms().values() for c in op.coeffs if c]
    if e.inhom:
        coeffs.append(e.inhom)
    if metric == "term-count":
        return sum(len(c.num) for c in coeffs)
    return sum(c.total_degree() for c in coeffs)


def _normalize_sign(ode: Uode) -> Uode:
    """Fix the free sign of a newly formed equation.

    The algebraic coefficient of the function the next step would solve
    for is given a positive leading numeric coefficient.  Equations that
    admit no further step are left alone.
    """
    if not ode.is_underdetermined():
        return ode
    try:
        p = choose_pivot_new(ode)
    except ExactODE:
        return ode
    return -ode if ode.terms[p].coeffs[0].sign() < 0 else ode


def _pivot_key(f: FuncId, order: int, a0: RatFunc):
    return (order, a0.total_degree(), len(a0.num) + len(a0.den), -f.index)


def choose_pivot_new(ode: Uode) -> FuncId:
    """Lowest order among functions with nonvanishing algebraic part."""
    cands = [(f, op) for f, op in ode.terms.items() if op.coeffs and op.coeffs[0]]
    if not cands:
        raise ExactODE()
    return min(cands, key=lambda t: _pivot_key(t[0], t[1].order, t[1].coeffs[0]))[0]


def scale_function(ode: Uode, f: FuncId, c, session: Session):
    """Substitute ``f = c * g`` for a fresh ``g``; only multiplies coefficients."""
    c = rf(c)
    if not c:
        raise ValueError("scaling by zero")
    if f not in ode.terms:
        raise KeyError(f"{f} does not occur in the ODE")
    g = session.new_function()
    terms = {(g if h == f else h): (compose_mul(op, c) if h == f else op)
             for h, op in ode.terms.items()}
    sub = Substitution(f, LinDiffExpr({g: DiffOp([c])}), "scale")
    return Uode(terms, ode.inhom), sub


def _op_size(e: LinDiffExpr) -> int:
    # cheap size for the trace: numerator terms of the factored operators
    return sum(op.n_terms() for op in e.terms.values()) + len(e.inhom.num)


def _record(kind, pivot, introduced, before: Uode, after: Uode, metric=None) -> StepRecord:
    return StepRecord(kind, pivot, list(introduced), before.order_sum, after.order_sum,
                      _op_size(before), _op_size(after))


def _squared_primitive(a: RatFunc) -> RatFunc:
    if a.is_constant():
        return ONE
    p = a.num.primitive()
    return RatFunc(p * p)


def new_step(ode: Uode, cfg: SolverConfig, session: Session):
    """One step of the new method; returns ``(ode', substitutions, record)``.

    Raises :class:`ExactODE` when every ``a_i0`` vanishes.
    """
    if len(ode.terms) < 2:
        raise NotUnderdetermined()
    j = choose_pivot_new(ode)
    start = ode
    subs = []
    introduced = []
    if cfg.avoid_denominators:
        aj0 = ode.terms[j].coeffs[0]
        for i in ode.functions():
            if i == j or not ode.terms[i].coeffs or not ode.terms[i].coeffs[0]:
                continue
            d = (ode.terms[i].coeffs[0] / aj0).den
            if not d.is_one():
                ode, sub = scale_function(ode, i, RatFunc(d), session)
                subs.append(sub)
                introduced.append(next(iter(sub.rhs.terms)))
    parts = {f: split(op) for f, op in ode.terms.items()}
    tj, aj0 = parts[j]
    inv = -aj0.inverse()
    w = _squared_primitive(aj0) if cfg.avoid_denominators else ONE
    g = session.new_function()
    introduced.append(g)

    # f_j = -(1/a_j0) (D(w g) + sum_{i != j} a_i0 f_i + a00)
    rhs = {g: compose_mul(compose_D(DiffOp([inv]), 1), w)}
    for i, (_, ai0) in parts.items():
        if i != j and ai0:
            rhs[i] = DiffOp([inv * ai0])
    subs.append(Substitution(j, LinDiffExpr(rhs, inv * ode.inhom)))

    # new ODE: the definition of g with f_j eliminated
    terms = {g: compose_mul(op_add(DiffOp([-1]), compose_D(compose_mul(tj, inv), 1)), w)}
    for i, (ti, ai0) in parts.items():
        if i != j:
            terms[i] = op_linear(ti, tj, inv * ai0) if ai0 else ti
    new = _normalize_sign(Uode(terms, apply(tj, inv * ode.inhom)))
    rec = _record("new", j, introduced, start, new, cfg.size_metric)
    return new, subs, rec


def _euclid_key(f: FuncId, op: DiffOp):
    return (op.order, op.n_terms(), f.index)


def euclid_step(ode: Uode, cfg: SolverConfig, session: Session):
    """One right-Euclid step; the inhomogeneity is left untouched."""
    if len(ode.terms) < 2:
        raise NotUnderdetermined()
    start = ode
    fs = sorted(ode.terms, key=lambda f: _euclid_key(f, ode.terms[f]))
    j, i = fs[0], fs[1]
    subs = []
    introduced = []
    Aj = ode.terms[j]
    q = ode.terms[i].lead() / Aj.lead()
    if cfg.avoid_denominators and not q.den.is_one():
        ode, sub = scale_function(ode, i, RatFunc(q.den), session)
        subs.append(sub)
        i = next(iter(sub.rhs.terms))
        introduced.append(i)
        q = ode.terms[i].lead() / Aj.lead()
    Ai = ode.terms[i]
    d = Ai.order - Aj.order
    g = session.new_function()
    introduced.append(g)
    shift = DiffOp([ZERO] * d + [-q])
    subs.append(Substitution(j, LinDiffExpr({g: identity(), i: shift})))
    terms = {}
    for h, op in ode.terms.items():
        if h == j:
            terms[g] = Aj
        elif h == i:
            terms[i] = op_add(Ai, -compose_mul(compose_D(Aj, d), q))
        else:
            terms[h] = op
    new = Uode(terms, ode.inhom)
    rec = _record("euclid", j, introduced, start, new, cfg.size_metric)
    return new, subs, rec


def exact_step(ode: Uode, cfg: SolverConfig, session: Session):
    """Integrate an exact ODE once: ``0 = sum Atilde_i f_i + Int(a00) [+ C]``."""
    terms = {}
    for f, op in ode.terms.items():
        t, a0 = split(op)
        if a0:
            raise SolverError("exact_step on an ODE that is not exact")
        terms[f] = t
    inhom = integrate_formal(ode.inhom)
    if cfg.integration_constant:
        inhom = inhom + RatFunc.var(session.new_constant())
    new = Uode(terms, inhom)
    return new, _record("exact", None, [], ode, new, cfg.size_metric)


def absorb_gcd(ode: Uode, session: Session):
    """Absorb the content of each operator into a fresh function ``f = g / c``."""
    subs = []
    terms = {}
    for f in ode.functions():
        op = ode.terms[f]
        c = content_gcd(list(op.coeffs))
        if c.is_one():
            terms[f] = op
            continue
        g = session.new_function()
        inv = c.inverse()
        terms[g] = compose_mul(op, inv)
        subs.append(Substitution(f, LinDiffExpr({g: DiffOp([inv])}), "absorb"))
    return Uode(terms, ode.inhom), subs


def _hybrid_candidate(kind: str, ode: Uode, cfg: SolverConfig, session: Session):
    if kind == "euclid":
        return euclid_step(ode, cfg, session)
    try:
        return new_step(ode, cfg, session)
    except ExactODE:
        new, rec = exact_step(ode, cfg, session)
        return new, [], rec


def hybrid_step(ode: Uode, cfg: SolverConfig, session: Session, step_index: int = 0):
    """Interleave (new first) or compare both candidates and keep the smaller."""
    if len(ode.terms) < 2:
        raise NotUnderdetermined()
    if cfg.method == "hybrid-interleave":
        kind = "new" if step_index % 2 == 0 else "euclid"
        return _hybrid_candidate(kind, ode, cfg, session)
    results = []
    for kind in ("new", "euclid"):
        s = session.fork()
        new, subs, rec = _hybrid_candidate(kind, ode, cfg, s)
        size = expr_size(new, cfg.size_metric) + sum(
            expr_size(sub.rhs, cfg.size_metric) for sub in subs)
        results.append((size, s, (new, subs, rec)))
    size, s, best = min(results, key=lambda t: t[0])  # stable: ties keep new
    log.debug("hybrid sizes new=%d euclid=%d", results[0][0], results[1][0])
    session.adopt(s)
    return best


def _algebraic_solve(ode: Uode, cfg: SolverConfig, session: Session):
    """Solve for a function of order 0; returns the list of substitutions."""
    cands = [f for f, op in ode.terms.items() if op.order == 0]
    i = min(cands, key=lambda f: _pivot_key(f, 0, ode.terms[f].coeffs[0]))
    ai0 = ode.terms[i].coeffs[0]
    subs = []
    if cfg.avoid_denominators and not ai0.is_constant() and ai0.is_polynomial():
        p = RatFunc(ai0.num.primitive())
        inv = ai0.inverse()
        for j in ode.functions():
            if j == i:
                continue
            op = ode.terms[j]
            for e in range(op.order + 2):
                scaled = compose(DiffOp([inv]), compose_mul(op, p ** e))
                if all(c.is_polynomial() for c in scaled.coeffs):
                    break
            if e:
                ode, sub = scale_function(ode, j, p ** e, session)
                subs.append(sub)
    inv = -ode.terms[i].coeffs[0].inverse()
    rhs = {j: compose(DiffOp([inv]), op) for j, op in ode.terms.items() if j != i}
    subs.append(Substitution(i, LinDiffExpr(rhs, inv * ode.inhom), "final"))
    return subs


@dataclass
class SolveResult:
    """Outcome of :func:`solve`.

    ``parametric`` lists every function the solution is expressed in; when a
    residual single-function ODE remains, its function is among them and
    :attr:`free` excludes it.
    """

    original: Uode
    functions: list
    substitutions: list
    parametric: list
    residual: Optional[Uode]
    trace: list = field(default_factory=list)
    config: SolverConfig = field(default_factory=SolverConfig)
    _explicit: object = field(default=None, repr=False)

    @property
    def residual_function(self) -> Optional[FuncId]:
        return next(iter(self.residual.terms)) if self.residual is not None else None

    @property
    def free(self) -> list:
        return [f for f in self.parametric if f != self.residual_function]

    @property
    def iterations(self) -> int:
        return sum(1 for r in self.trace if r.kind in ("new", "euclid", "exact"))

    @property
    def order_sum_trace(self) -> list:
        steps = [r for r in self.trace if r.kind in ("new", "euclid", "exact")]
        if not steps:
            return [self.original.order_sum]
        return [steps[0].order_sum_before] + [r.order_sum_after for r in steps]

    def explicit(self):
        """Back-substituted solution (computed once)."""
        if self._explicit is None:
            from .solution import back_substitute
            self._explicit = back_substitute(self.substitutions, self.parametric,
                                             self.residual, self.functions)
        return self._explicit


def solve(ode: LinDiffExpr, cfg: SolverConfig | None = None,
          session: Session | None = None) -> SolveResult:
    """Reduce the ODE until one function is algebraic or only one function is left."""
    cfg = cfg or SolverConfig()
    original = Uode(ode.terms, ode.inhom)
    if session is None:
        session = Session.for_ode(original)
    current = original
    subs: list = []
    trace: list = []
    seen = list(original.functions())
    step_index = 0
    while current.is_underdetermined():
        if cfg.method == "new":
            try:
                current, new_subs, rec = new_step(current, cfg, session)
            except ExactODE:
                current, rec = exact_step(current, cfg, session)
                new_subs = []
        elif cfg.method == "euclid":
            current, new_subs, rec = euclid_step(current, cfg, session)
        else:
            current, new_subs, rec = hybrid_step(current, cfg, session, step_index)
        step_index += 1
        for sub in new_subs:
            if sub.kind == "scale":
                trace.append(StepRecord("scale", sub.target, list(sub.rhs.terms),
                                        rec.order_sum_before, rec.order_sum_before,
                                        rec.size_before, rec.size_before))
        trace.append(rec)
        subs.extend(new_subs)
        seen.extend(rec.introduced)
        log.debug("%s step: pivot=%s order sum %d -> %d", rec.kind, rec.pivot,
                  rec.order_sum_before, rec.order_sum_after)
        if cfg.absorb_gcd:
            before = current
            current, absorbed = absorb_gcd(current, session)
            for sub in absorbed:
                g = next(iter(sub.rhs.terms))
                seen.append(g)
                trace.append(_record("absorb", sub.target, [g], before, current,
                                     cfg.size_metric))
            subs.extend(absorbed)

    residual = None
    if not current.terms:
        if current.inhom:
            raise InconsistentError()
    elif any(op.order == 0 for op in current.terms.values()):
        final = _algebraic_solve(current, cfg, session)
        for sub in final:
            if sub.kind == "scale":
                seen.extend(sub.rhs.terms)
        subs.extend(final)
        trace.append(StepRecord("final-algebraic", final[-1].target, [],
                                current.order_sum, current.order_sum - 0, 0, 0))
    else:
        residual = current
    targets = {s.target for s in subs}
    parametric = []
    for f in seen:
        if f not in targets and f not in parametric:
            parametric.append(f)
    return SolveResult(original, list(original.functions()), subs, parametric,
                       residual, trace, cfg)
