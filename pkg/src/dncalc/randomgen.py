"""Seeded random instances for property runs.

Metric blocks are identity-dominated symmetric jets (strict diagonal
dominance of the constant term keeps them positive definite); weights are
random jets vanishing at the base point, which the exact backend requires of
anything that gets exponentiated.  Tangential content is kept at low degree:
truncation budgets gate derivatives, not content, so this keeps property
runs fast without weakening any identity being tested.
"""

from __future__ import annotations

import random

from .geometry import BoundaryMetricJet
from .jets import Jet, JetSpace
from .scalars import mpq


def _random_value(rng: random.Random):
    return mpq(rng.randint(-2, 2), rng.randint(1, 4))


def _random_index(rng: random.Random, n: int, kr: int, ky: int, tangential_degree: int):
    m = rng.randint(0, kr)
    rest = [0] * (n - 1)
    for _ in range(rng.randint(0, min(ky, tangential_degree))):
        rest[rng.randrange(n - 1)] += 1
    return (m, *rest)


def random_weight(
    rng: random.Random,
    space: JetSpace,
    kr: int,
    ky: int,
    terms: int = 6,
    tangential_degree: int = 2,
) -> Jet:
    """Random weight jet with V(base point) = 0."""
    coeffs = {}
    for _ in range(terms):
        idx = _random_index(rng, space.n, kr, ky, tangential_degree)
        if idx == (0,) * space.n:
            continue
        coeffs[idx] = _random_value(rng)
    return space.jet(coeffs, kr, ky)


def random_metric(
    rng: random.Random,
    space: JetSpace,
    kr: int,
    ky: int,
    terms: int = 5,
    tangential_degree: int = 2,
) -> BoundaryMetricJet:
    nt = space.n - 1
    rows = [[None] * nt for _ in range(nt)]
    for a in range(nt):
        for b in range(a, nt):
            coeffs = {}
            for _ in range(terms):
                idx = _random_index(rng, space.n, kr, ky, tangential_degree)
                if idx == (0,) * space.n:
                    continue
                # small perturbations keep the constant term diagonally dominant
                coeffs[idx] = _random_value(rng) / 4
            base = mpq(1) if a == b else mpq(0)
            coeffs[(0,) * space.n] = base + mpq(rng.randint(-1, 1), 8)
            rows[a][b] = space.jet(coeffs, kr, ky)
            rows[b][a] = rows[a][b]
    return BoundaryMetricJet(rows)


def random_instance(
    seed: int,
    n: int = 3,
    kr: int = 5,
    ky: int = 4,
    backend: str = "rational",
    tangentially_constant: bool = False,
):
    """A (metric, weight) pair; the same seed always returns the same pair."""
    rng = random.Random(seed)
    space = JetSpace(n, backend=backend)
    tdeg = 0 if tangentially_constant else 2
    metric = random_metric(rng, space, kr, ky, tangential_degree=tdeg)
    weight = random_weight(rng, space, kr, ky, tangential_degree=tdeg)
    return metric, weight
