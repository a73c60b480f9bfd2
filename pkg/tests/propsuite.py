"""Checks applied to every random instance of the property sweeps."""
from __future__ import annotations

import random
import time

from randgen import random_uode
from uode.solution import verify
from uode.solver import SolverConfig, solve

STEP_KINDS = ("new", "euclid", "exact")


def denominator_free(subs) -> bool:
    for s in subs:
        for op in s.rhs.std_terms().values():
            if not all(c.is_polynomial() for c in op.coeffs):
                return False
        if not s.rhs.inhom.is_polynomial():
            return False
    return True


def check_instance(ode, cfg: SolverConfig, explicit: bool = False) -> list:
    """Names of the properties the solver run violates (empty when all hold)."""
    r = solve(ode, cfg)
    bad = []
    if not verify(ode, r, explicit=explicit):
        bad.append("verify")
    steps = [t for t in r.trace if t.kind in STEP_KINDS]
    if not all(t.order_sum_after < t.order_sum_before for t in steps):
        bad.append("order-sum")
    if len(steps) > ode.order_sum:
        bad.append("step-bound")
    if cfg.avoid_denominators and not denominator_free(r.substitutions):
        bad.append("denominators")
    if r.residual is None and len(r.free) != len(ode.terms) - 1:
        bad.append("parametric-count")
    return bad


def sweep(cfg: SolverConfig, count: int, seed: int, explicit: bool = False, **shape):
    """Run ``count`` random instances; returns (failures, seconds)."""
    rng = random.Random(seed)
    failures = []
    t0 = time.perf_counter()
    for k in range(count):
        ode = random_uode(rng, **shape)
        bad = check_instance(ode, cfg, explicit)
        if bad:
            failures.append((k, bad))
    return failures, time.perf_counter() - t0
