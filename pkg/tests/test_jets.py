import math
import random

import pytest

from dncalc.errors import (
    BackendError,
    BudgetExhaustedError,
    IncompatibleJetsError,
    NotInvertibleError,
)
from dncalc.jets import Jet, JetSpace, collar_from_radial_orders, dense_product_oracle
from dncalc.scalars import mpq


def rational_space(n=3):
    return JetSpace(n)


def random_jet(rng, space, kr, ky, terms=8, unit=False, zero_constant=False):
    coeffs = {}
    for _ in range(terms):
        m = rng.randint(0, kr)
        rest = [0] * (space.n - 1)
        budget = rng.randint(0, min(ky, 2))
        for _ in range(budget):
            rest[rng.randrange(space.n - 1)] += 1
        coeffs[(m, *rest)] = mpq(rng.randint(-3, 3), rng.randint(1, 3))
    if unit:
        coeffs[(0,) * space.n] = mpq(rng.randint(1, 3), 1)
    if zero_constant:
        coeffs.pop((0,) * space.n, None)
    return space.jet(coeffs, kr, ky)


def test_mul_difference_of_squares():
    sp = rational_space()
    r = sp.coordinate(0, 3, 2)
    one = sp.one(3, 2)
    assert (one + r) * (one - r) == one - r * r


def test_mul_identity():
    rng = random.Random(1)
    sp = rational_space()
    a = random_jet(rng, sp, 4, 3)
    assert a * sp.one(4, 3) == a


def test_mul_matches_dense_convolution_oracle():
    rng = random.Random(2)
    sp = rational_space()
    for _ in range(40):
        a = random_jet(rng, sp, rng.randint(1, 5), rng.randint(1, 4))
        b = random_jet(rng, sp, rng.randint(1, 5), rng.randint(1, 4))
        assert a * b == dense_product_oracle(a, b)


def test_ring_axioms_on_random_jets():
    rng = random.Random(3)
    sp = rational_space()
    for _ in range(20):
        a = random_jet(rng, sp, 4, 3)
        b = random_jet(rng, sp, 4, 3)
        c = random_jet(rng, sp, 4, 3)
        assert (a + b) * c == a * c + b * c
        assert (a * b) * c == a * (b * c)
        assert a * b == b * a


def test_space_mismatch_raises():
    a = JetSpace(3).one(2, 2)
    b = JetSpace(4).one(2, 2)
    with pytest.raises(IncompatibleJetsError):
        a * b
    c = JetSpace(3, base_point="q").one(2, 2)
    with pytest.raises(IncompatibleJetsError):
        a + c


def test_reciprocal_trivial_and_geometric():
    sp = rational_space()
    one = sp.one(4, 2)
    assert one.reciprocal() == one
    r = sp.coordinate(0, 4, 2)
    expected = sp.jet({(m, 0, 0): 1 for m in range(5)}, 4, 2)
    assert (one - r).reciprocal() == expected


def test_reciprocal_round_trip_random():
    rng = random.Random(4)
    sp = rational_space()
    for _ in range(15):
        a = random_jet(rng, sp, 4, 3, unit=True)
        assert a * a.reciprocal() == sp.one(4, 3)


def test_reciprocal_requires_unit():
    sp = rational_space()
    with pytest.raises(NotInvertibleError):
        sp.coordinate(0, 3, 1).reciprocal()


def test_sqrt_trivial_and_perfect_square():
    sp = rational_space()
    one = sp.one(4, 2)
    assert one.sqrt() == one
    r = sp.coordinate(0, 4, 2)
    sq = one + r.scale(2) + r * r
    assert sq.sqrt() == one + r


def test_sqrt_round_trip_random():
    rng = random.Random(5)
    sp = rational_space()
    for _ in range(15):
        a = random_jet(rng, sp, 4, 3, zero_constant=True)
        a = a + 1  # positive perfect-square-free unit; square it first
        s = (a * a).sqrt()
        assert s * s == a * a
        assert s.constant_term() > 0


def test_sqrt_rejects_bad_constant_terms():
    sp = rational_space()
    with pytest.raises(NotInvertibleError):
        (sp.one(2, 2) - sp.one(2, 2) * 2).sqrt()
    with pytest.raises(BackendError):
        sp.constant(2, 2, 2).sqrt()  # irrational in the exact backend


def test_partial_basics():
    sp = rational_space()
    r = sp.coordinate(0, 3, 2)
    y1 = sp.coordinate(1, 3, 2)
    f = r * r * y1
    assert f.partial(0) == r.truncated(2, 2) * y1.truncated(2, 2) * 2
    assert (r * r).partial(1).is_zero


def test_partial_commutes():
    rng = random.Random(6)
    sp = rational_space()
    for _ in range(15):
        a = random_jet(rng, sp, 4, 3)
        assert a.partial(0).partial(1) == a.partial(1).partial(0)


def test_partial_budget_errors():
    sp = rational_space()
    flatjet = sp.one(0, 0)
    with pytest.raises(BudgetExhaustedError):
        flatjet.partial(0)
    with pytest.raises(BudgetExhaustedError):
        flatjet.partial(1)


def test_exp_series_and_inverse_identity():
    sp = rational_space()
    assert sp.zero(3, 2).exp() == sp.one(3, 2)
    r = sp.coordinate(0, 4, 0)
    expected = sp.jet({(m, 0, 0): mpq(1, math.factorial(m)) for m in range(5)}, 4, 0)
    assert r.exp() == expected
    rng = random.Random(7)
    for _ in range(10):
        a = random_jet(rng, sp, 4, 3, zero_constant=True)
        assert a.exp() * (-a).exp() == sp.one(4, 3)


def test_exp_rational_backend_requires_zero_constant():
    sp = rational_space()
    with pytest.raises(BackendError):
        sp.one(2, 2).exp()


def test_float_backend_transcendental_constants():
    sp = JetSpace(3, backend="float")
    v = sp.constant(0.5, 3, 2)
    e = v.exp()
    assert e.constant_term() == pytest.approx(math.exp(0.5))
    assert v.sqrt().constant_term() == pytest.approx(math.sqrt(0.5))
    assert (v.exp().log()).constant_term() == pytest.approx(0.5)


def test_log_inverts_exp():
    rng = random.Random(8)
    sp = rational_space()
    for _ in range(10):
        a = random_jet(rng, sp, 4, 3, zero_constant=True)
        assert a.exp().log() == a


def test_nth_root():
    sp = rational_space()
    one = sp.one(4, 2)
    r = sp.coordinate(0, 4, 2)
    cube = (one + r) * (one + r) * (one + r)
    assert cube.nth_root(3) == one + r


def test_truncation_alignment():
    sp = rational_space()
    a = sp.jet({(3, 0, 0): 1, (0, 2, 0): 1}, 3, 2)
    b = sp.one(2, 1)
    c = a + b
    assert c.kr == 2 and c.ky == 1
    assert (3, 0, 0) not in c.c and (0, 2, 0) not in c.c


def test_radial_coefficient_helpers():
    sp = rational_space()
    r = sp.coordinate(0, 3, 2)
    y1 = sp.coordinate(1, 3, 2)
    f = r * r * y1.scale(mpq(1, 2))
    d2 = f.radial_derivative_at_zero(2)
    assert d2 == sp.jet({(0, 1, 0): 1}, 0, 2)
    rebuilt = collar_from_radial_orders(
        sp, [sp.zero(0, 2), sp.zero(0, 2), d2], 3, 2
    )
    assert rebuilt == f


def test_restricted_to_boundary():
    sp = rational_space()
    r = sp.coordinate(0, 3, 2)
    y1 = sp.coordinate(1, 3, 2)
    f = (r + y1) * (r + y1)
    g = f.restricted_to_boundary()
    assert g.kr == 0
    assert g == sp.jet({(0, 2, 0): 1}, 0, 2)
