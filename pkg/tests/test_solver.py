import random

import pytest

from randgen import random_uode
from uode.coeffdomain import CONST, X, RatFunc, differentiate
from uode.diffop import D, DiffOp, FuncId, LinDiffExpr, compose, identity, op_add
from uode.solution import apply_subst_sequence, verify
from uode.solver import (METHODS, ExactODE, NotUnderdetermined, Session, SolverConfig,
                         Substitution, Uode, absorb_gcd, choose_pivot_new, euclid_step,
                         exact_step, hybrid_step, new_step, scale_function, solve)

x = RatFunc.var(X)
f, g, h = (FuncId(n, "user", i) for i, n in enumerate("fgh"))


def step(kind, ode, cfg=None, session=None):
    cfg = cfg or SolverConfig()
    session = session or Session.for_ode(ode)
    return {"new": new_step, "euclid": euclid_step}[kind](ode, cfg, session)


# -- new step -----------------------------------------------------------------

def test_new_step_simple():
    ode = Uode({f: D(), g: identity()})
    new, subs, rec = step("new", ode)
    (sub,) = subs
    f3 = FuncId("f3", "solver", 2)
    assert rec.pivot == g and rec.introduced == [f3]
    assert sub.target == g and sub.rhs == LinDiffExpr({f3: DiffOp([0, -1])})
    assert new in (Uode({f: identity(), f3: DiffOp([-1])}), -Uode({f: identity(), f3: DiffOp([-1])}))


def test_new_step_signals_exact():
    with pytest.raises(ExactODE):
        step("new", Uode({f: D(), g: D()}))


def test_single_function_is_not_underdetermined():
    ode = Uode({f: D(2)})
    for kind in ("new", "euclid"):
        with pytest.raises(NotUnderdetermined):
            step(kind, ode)


def test_symmetry_first_step(load):
    _, ode = load("symmetry_b13.ode")
    s = Session.for_ode(ode, prefix="c", start=1)
    new, subs, rec = new_step(ode, SolverConfig(), s)
    names = {fn.name: fn for fn in ode.terms}
    z = x
    c1 = rec.introduced[0]
    assert rec.pivot.name == "b13" and c1.name == "c1"
    # c1 = 3 z b13 - 6 z^2 b15 - 2 z^2 b17' + 5 z b17: with b13 eliminated
    # the new equation is 0 = 2 z^2 b17' - 2 z b17 - z c1' + c1 (up to sign)
    expected = Uode({names["b17"]: DiffOp([-2 * z - 4 * z, 2 * z * z]),
                     c1: DiffOp([1 + 1, -z])})
    assert new in (expected, -expected)
    assert names["b15"] not in new.terms


def test_pivot_choices(load):
    _, ode = load("symmetry_b13.ode")
    assert choose_pivot_new(ode).name == "b13"
    s = Session.for_ode(ode, prefix="c", start=1)
    new, _, _ = new_step(ode, SolverConfig(), s)
    assert choose_pivot_new(new).name == "c1"
    assert choose_pivot_new(Uode({f: DiffOp([x, 1]), g: D(2)})) == f


def test_order_sum_decreases_per_step(load):
    for fixture in ("intro.ode", "symmetry_b13.ode", "appendix.ode", "single_step.ode"):
        _, ode = load(fixture)
        for method in METHODS:
            r = solve(ode, SolverConfig(method=method))
            steps = [t for t in r.trace if t.kind in ("new", "euclid")]
            assert all(t.order_sum_after < t.order_sum_before for t in steps)


# -- euclid step -----------------------------------------------------------------

def test_euclid_equal_orders():
    ode = Uode({f: D(), g: D()})
    new, subs, _ = step("euclid", ode)
    (sub,) = subs
    f3 = FuncId("f3", "solver", 2)
    # ties on order and size go to the lower index, so f is eliminated
    assert sub.target == f and sub.rhs == LinDiffExpr({f3: identity(), g: DiffOp([-1])})
    assert new == Uode({f3: D()})


def test_euclid_lowers_order():
    ode = Uode({f: D(2), g: D()})
    new, subs, _ = step("euclid", ode)
    (sub,) = subs
    f3 = FuncId("f3", "solver", 2)
    assert sub.target == g and sub.rhs == LinDiffExpr({f3: identity(), f: DiffOp([0, -1])})
    assert new == Uode({f3: D()})


def test_euclid_keeps_inhomogeneity():
    rng = random.Random(8)
    for _ in range(20):
        ode = random_uode(rng, max_order=3, max_deg=2)
        ode = Uode(ode.terms, x * x + 1)
        new, _, _ = step("euclid", ode)
        assert new.inhom == ode.inhom


# -- exact branch ------------------------------------------------------------------

def test_exact_step_examples():
    cfg = SolverConfig()
    new, rec = exact_step(Uode({f: D(), g: D()}), cfg, Session())
    (c,) = new.inhom.num.variables()
    assert c.rank == CONST and rec.kind == "exact"
    assert new.terms == {f: identity(), g: identity()}

    new, _ = exact_step(Uode({f: D(), g: D()}, 3 * x), cfg, Session())
    assert new.inhom - RatFunc.var(next(v for v in new.inhom.num.variables() if v.rank == CONST)) \
        == RatFunc.const(3) / 2 * x * x

    ode = Uode({f: op_add(D(2), DiffOp([0, x]))})
    new, _ = exact_step(ode, cfg, Session())
    assert new.terms == {f: DiffOp([x, 1])}

    new, _ = exact_step(Uode({f: D(), g: D()}), SolverConfig(integration_constant=False), Session())
    assert new.inhom.is_zero()


def test_solve_takes_exact_branch():
    ode = Uode({f: D(), g: D()})
    r = solve(ode)
    assert r.trace[0].kind == "exact"
    assert verify(ode, r)
    # the family f + g + C = 0
    (sub,) = r.substitutions
    assert sub.rhs.terms.keys() == {f} or sub.rhs.terms.keys() == {g}
    assert any(v.rank == CONST for v in sub.rhs.inhom.num.variables())


def test_exactness_on_random_total_derivatives():
    rng = random.Random(9)
    for _ in range(10):
        base = random_uode(rng, r=2, max_order=2, max_deg=2)
        ode = Uode({fn: compose(D(), op) for fn, op in base.terms.items()})
        r = solve(ode)
        assert r.trace[0].kind == "exact"
        assert verify(ode, r)


# -- absorption and scaling -----------------------------------------------------------

def test_absorb_gcd():
    ode = Uode({f: DiffOp([4 * x, 2 * x * x]), g: D()})
    new, subs = absorb_gcd(ode, Session.for_ode(ode))
    (sub,) = subs
    (f3,) = sub.rhs.terms
    assert sub.target == f and sub.rhs.terms[f3] == DiffOp([1 / (2 * x)])
    assert new.terms[f3] == DiffOp([2, x]) and new.terms[g] == D()
    assert absorb_gcd(new, Session.for_ode(new))[1] == []


def test_absorb_coprime_unchanged():
    ode = Uode({f: DiffOp([x, 1]), g: D()})
    new, subs = absorb_gcd(ode, Session.for_ode(ode))
    assert subs == [] and new == ode


def test_scale_function():
    ode = Uode({f: DiffOp([1 / x, 1]), g: D()})
    new, sub = scale_function(ode, f, x, Session.for_ode(ode))
    (f3,) = sub.rhs.terms
    assert new.terms[f3] == DiffOp([1, x])
    same, _ = scale_function(ode, f, 1, Session.for_ode(ode))
    assert list(same.terms.values()) == list(ode.terms.values())
    with pytest.raises(ValueError):
        scale_function(ode, f, 0, Session.for_ode(ode))


def _denominator_free(subs):
    for s in subs:
        for op in s.rhs.terms.values():
            if not all(c.is_polynomial() for c in op.coeffs):
                return False
        if not s.rhs.inhom.is_polynomial():
            return False
    return True


@pytest.mark.parametrize("method", METHODS)
def test_avoid_denominators(load, method):
    _, ode = load("intro.ode")
    hom = Uode(ode.terms)
    r = solve(hom, SolverConfig(method=method, avoid_denominators=True))
    assert verify(hom, r)
    assert _denominator_free(r.substitutions)
    for s in r.substitutions:
        assert all(c.is_polynomial() for op in s.rhs.std_terms().values() for c in op.coeffs)


@pytest.mark.parametrize("method", METHODS)
def test_absorb_flag_verifies(load, method):
    _, ode = load("intro.ode")
    r = solve(ode, SolverConfig(method=method, absorb_gcd=True))
    assert verify(ode, r)


# -- hybrid ------------------------------------------------------------------------

def test_hybrid_compare_choices(load):
    cfg = SolverConfig(method="hybrid-compare")
    _, e24 = load("table1_ex24.ode")
    _, e25 = load("table1_ex25.ode")
    assert hybrid_step(e24, cfg, Session.for_ode(e24))[2].kind == "new"
    assert hybrid_step(e25, cfg, Session.for_ode(e25))[2].kind == "euclid"


def test_hybrid_tie_prefers_new():
    # both candidates give a one-term result here
    ode = Uode({f: D(), g: identity()})
    cfg = SolverConfig(method="hybrid-compare")
    out = hybrid_step(ode, cfg, Session.for_ode(ode))
    assert out[2].kind == "new"


def test_hybrid_interleave_alternates(load):
    _, ode = load("appendix.ode")
    r = solve(ode, SolverConfig(method="hybrid-interleave"))
    kinds = [t.kind for t in r.trace if t.kind in ("new", "euclid", "exact")]
    assert kinds[:2] == ["new", "euclid"]
    assert verify(ode, r)


# -- solve -------------------------------------------------------------------------

def test_solve_trivial():
    ode = Uode({f: D(), g: identity()})
    r = solve(ode)
    (sub,) = r.substitutions
    assert sub.target == g and sub.rhs == LinDiffExpr({f: DiffOp([0, -1])})
    assert r.parametric == [f] and r.residual is None
    sol = r.explicit()
    assert sol[f] == LinDiffExpr.of(f) and sol[g] == LinDiffExpr({f: DiffOp([0, -1])})


def test_solve_single_function_returns_residual():
    ode = Uode({f: op_add(D(2), DiffOp([0, x]))})
    r = solve(ode)
    assert r.substitutions == [] and r.residual == ode


def test_common_right_factor_gives_residual():
    right = DiffOp([x, 1])                       # (x f)' acting first ...
    outer = op_add(D(), DiffOp([x]))             # ... then D + x on the sum
    ode = Uode({f: compose(outer, compose(D(), right)), g: compose(outer, right)})
    for method in METHODS:
        r = solve(ode, SolverConfig(method=method))
        assert r.residual is not None
        assert max(op.order for op in r.residual.terms.values()) <= max(ode.orders.values())
        assert len(r.free) == len(ode.terms) - 1
        assert verify(ode, r)


def test_session_names():
    ode = Uode({f: D(), g: D(2)})
    s = Session.for_ode(ode, prefix="c", start=1)
    assert s.new_function().name == "c1" and s.new_function().name == "c2"
    s = Session.for_ode(ode)
    assert s.new_function().name == "f3"


def test_substitution_target_not_in_rhs():
    with pytest.raises(ValueError):
        Substitution(f, LinDiffExpr({f: identity()}))


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(method="gauss")


# -- reversibility --------------------------------------------------------------------

def _recovers(kind, before, after, subs):
    back = apply_subst_sequence(before, subs)
    if kind == "euclid":
        return back == after
    # a new step loses one derivative: the old equation is D of the new one
    Dafter = LinDiffExpr({fn: compose(D(), op) for fn, op in after.terms.items()},
                         differentiate(after.inhom))
    return (back - Dafter).is_zero() or (back + Dafter).is_zero()


@pytest.mark.parametrize("kind", ["new", "euclid"])
@pytest.mark.parametrize("avoid", [False, True])
def test_step_reversibility(kind, avoid):
    rng = random.Random(10 + avoid)
    cfg = SolverConfig(avoid_denominators=avoid)
    for _ in range(100):
        ode = random_uode(rng, r=rng.choice((2, 3)), max_order=3, max_deg=2)
        ode = Uode(ode.terms, x + 1)
        session = Session.for_ode(ode)
        cur = ode
        while cur.is_underdetermined():
            try:
                new, subs, _ = step(kind, cur, cfg, session)
            except ExactODE:
                break
            assert _recovers(kind, cur, new, subs)
            cur = new


def test_reversibility_on_fixtures(load):
    for fixture in ("intro.ode", "symmetry_b13.ode", "appendix.ode", "table1_ex25.ode"):
        _, ode = load(fixture)
        for kind in ("new", "euclid"):
            session = Session.for_ode(ode)
            cur = ode
            while cur.is_underdetermined():
                new, subs, _ = step(kind, cur, SolverConfig(), session)
                assert _recovers(kind, cur, new, subs)
                cur = new
