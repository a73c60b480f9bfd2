"""Random polynomial-coefficient UODEs for property checks."""
from __future__ import annotations

import random

from uode.coeffdomain import Poly, RatFunc, X
from uode.diffop import FuncId, StdOp, std_to_factored
from uode.solver import Uode


def random_poly(rng: random.Random, max_deg: int = 3, nonzero: bool = False) -> RatFunc:
    while True:
        deg = rng.randint(0, max_deg)
        terms = {}
        for e in range(deg + 1):
            c = rng.randint(-5, 5)
            if c:
                terms[((X, e),) if e else ()] = c
        p = RatFunc(Poly(terms))
        if p or not nonzero:
            return p


def random_uode(rng: random.Random, r: int | None = None, max_order: int = 4,
                max_deg: int = 3, min_order: int = 1) -> Uode:
    """Homogeneous ODE in ``r`` functions with random standard-form coefficients."""
    r = r or rng.choice((2, 3, 4))
    terms = {}
    for i in range(r):
        n = rng.randint(min_order, max_order)
        cs = [random_poly(rng, max_deg) for _ in range(n)]
        cs.append(random_poly(rng, max_deg, nonzero=True))
        terms[FuncId(f"u{i + 1}", "user", i)] = std_to_factored(StdOp(cs))
    return Uode(terms)
