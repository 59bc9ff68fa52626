import random

import pytest

from dncalc.dn import dn_symbol_gauge, dn_symbol_scalar
from dncalc.errors import DataError
from dncalc.jets import JetSpace
from dncalc.randomgen import random_instance
from dncalc.scalars import mpq
from dncalc.geometry import BoundaryMetricJet
from dncalc.symbols import HomSymbol


KR, KY = 5, 4


def flat_metric(n=3, kr=KR, ky=KY, backend="rational"):
    sp = JetSpace(n, backend=backend)
    nt = n - 1
    rows = [
        [sp.one(kr, ky) if a == b else sp.zero(kr, ky) for b in range(nt)]
        for a in range(nt)
    ]
    return BoundaryMetricJet(rows)


def test_flat_scalar_dn():
    g = flat_metric()
    v = g.space.zero(KR, KY)
    dn = dn_symbol_scalar(g, v, 4)
    bctx = dn.ctx
    assert dn.symbol.grade(1) == -HomSymbol.xi_norm(bctx)
    for j in (0, -1, -2):
        assert dn.symbol.grade(j).is_zero
    assert dn.density_sq == g.space.one(0, KY)


def test_flat_gauge_dn_both_gauges():
    g = flat_metric()
    v = g.space.zero(KR, KY)
    for tag in ("s", "sigma"):
        dn = dn_symbol_gauge(g, v, 4, tag)
        assert dn.symbol.grade(1) == -HomSymbol.xi_norm(dn.ctx)
        assert dn.density_sq == g.space.one(0, KY)


def test_constant_weight_only_changes_density():
    # constant weights drop out of the drift and the tangential potential;
    # transcendental density constants need the float backend
    g = flat_metric(backend="float")
    sp = g.space
    v0 = 0.7
    v = sp.constant(v0, KR, KY)
    dn = dn_symbol_scalar(g, v, 3)
    base = dn_symbol_scalar(g, sp.zero(KR, KY), 3)
    for j in dn.symbol.grades():
        assert dn.symbol.grade(j) == base.symbol.grade(j)
    import math

    assert dn.density_sq.constant_term() == pytest.approx(math.exp(-2 * v0))


def test_principal_square_is_q2_times_density_sq():
    metric, weight = random_instance(31)
    xi = (mpq(2), mpq(3, 2))
    dn0 = dn_symbol_scalar(metric, weight, 4)
    dn_sig = dn_symbol_gauge(metric, weight, 4, "sigma")
    bmetric = metric.restricted_to_boundary()
    q2v = dn0.ctx.q2_value(xi)
    # lambda0 and the weight gauge carry e^{-2V} delta; the flat gauge delta
    dens0 = (weight.scale(-2).exp() * metric.delta).restricted_to_boundary()
    assert dn0.principal_square_eval(xi) == q2v * dens0
    assert dn_sig.principal_square_eval(xi) == q2v * bmetric.delta


def test_gauge_sigma_principal_determinant_is_delta_power():
    # det of the squared principal form q2 * delta equals delta^{n-2} * delta
    # ... restated: det(delta g^{ab}) = delta^{n-2}; n=3 here
    metric, weight = random_instance(32)
    dn_sig = dn_symbol_gauge(metric, weight, 4, "sigma")
    bmetric = metric.restricted_to_boundary()
    nt = metric.n - 1
    form = [
        [bmetric.g_upper[a][b] * bmetric.delta for b in range(nt)] for a in range(nt)
    ]
    det = form[0][0] * form[1][1] - form[0][1] * form[1][0]
    assert det == bmetric.delta  # delta^{n-2} with n = 3
    # and the form itself is what principal_square_eval samples
    e0 = (mpq(1), mpq(0))
    assert dn_sig.principal_square_eval(e0) == form[0][0]


def test_rescale_invariance_of_honest_accessors():
    metric, weight = random_instance(33)
    dn = dn_symbol_gauge(metric, weight, 4, "s")
    sp = metric.space
    unit = sp.one(KR, KY) + sp.coordinate(1, KR, KY).scale(mpq(1, 3))
    scaled = dn.rescaled(unit)
    xi = (mpq(1), mpq(2))
    assert dn.principal_square_eval(xi) == scaled.principal_square_eval(xi)
    for j in (0, -1, -2):
        ev_a, od_a = dn.grade_ratio_eval(j, xi)
        ev_b, od_b = scaled.grade_ratio_eval(j, xi)
        assert ev_a == ev_b and od_a == od_b


def test_density_ratio_between_gauges_recovers_weight_factor():
    metric, weight = random_instance(34)
    dn_s = dn_symbol_gauge(metric, weight, 4, "s")
    dn_sig = dn_symbol_gauge(metric, weight, 4, "sigma")
    xi = (mpq(1), mpq(1))
    ratio = dn_s.density_ratio_sq(dn_sig, xi)
    expected = weight.scale(-2).exp().restricted_to_boundary()
    assert ratio == expected


def test_tangentially_constant_gauges_agree_up_to_density():
    metric, weight = random_instance(35, tangentially_constant=True)
    dn_s = dn_symbol_gauge(metric, weight, 4, "s")
    dn_sig = dn_symbol_gauge(metric, weight, 4, "sigma")
    for j in dn_s.symbol.grades():
        assert dn_s.symbol.grade(j) == dn_sig.symbol.grade(j)
    factor = weight.scale(-2).exp().restricted_to_boundary()
    assert dn_s.density_sq == factor * dn_sig.density_sq


def test_bad_gauge_tag_rejected():
    metric, weight = random_instance(36)
    with pytest.raises(DataError):
        dn_symbol_gauge(metric, weight, 4, "tau")
