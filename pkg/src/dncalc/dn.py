"""Observable boundary data: full DN symbols at r = 0 with their densities.

The boundary operator sends Dirichlet data to weighted conormal data; modulo
smoothing contributions (modelled by the finite retained depth) its full
symbol is the boundary restriction of the factorisation symbol multiplied by
a positive density:

  * scalar version: density e^{-V} sqrt(delta),
  * gauge version along the weight gauge: density e^{-V} sqrt(delta)
    (the conormal operator is d_r - d_r V / 2; the shift is internal to the
    factorisation, whose radial potential is a_r = d_r V / 2),
  * gauge version along the flat gauge: density sqrt(delta).

Densities are stored squared so the exact backend never needs sqrt(delta);
the square is what every reconstruction formula consumes anyway.  A data
object (symbol, density_sq) represents the observable symbol *
sqrt(density_sq); the factorisation is not canonical, so honest consumers
only use rescale-invariant combinations: squares of components times
density_sq, and ratios of components.  ``rescaled`` realises the gauge
freedom so invariance is testable.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .errors import DataError, DepthError
from .factorization import factorize_gauge, factorize_scalar
from .geometry import BoundaryMetricJet, gauge_s, gauge_sigma
from .jets import Jet
from .symbols import CJet, FormalSymbol, SymbolContext


@dataclass(frozen=True)
class DNSymbolData:
    map_kind: str  # "lambda0" | "lambda1"
    gauge_tag: str | None  # "s" | "sigma" for lambda1, None for lambda0
    symbol: FormalSymbol  # restricted to r = 0
    density_sq: Jet  # restricted to r = 0, constant term > 0
    boundary_metric: BoundaryMetricJet
    n: int
    depth: int

    def __post_init__(self):
        if self.density_sq.constant_term() <= 0:
            raise DataError("squared density must have a positive constant term")
        principal = self.symbol.grade(1)
        if not principal.a.is_zero or principal.p != 0:
            raise DataError("principal symbol must be an odd multiple of ||xi'||")

    @property
    def ctx(self) -> SymbolContext:
        return self.symbol.ctx

    # -- honest accessors ---------------------------------------------------

    def _principal_odd(self, xi) -> CJet:
        _, odd = self.symbol.grade(1).eval_pair(xi)
        return odd

    def principal_square_eval(self, xi) -> Jet:
        """Square of the principal observable at a fibre point: a real y-jet
        equal to q2(xi) * delta * (gauge density factors)."""
        odd = self._principal_odd(xi)
        if not odd.im.is_zero:
            raise DataError("principal symbol has an imaginary part")
        q2v = self.ctx.q2_value(xi)
        return odd.re * odd.re * q2v * self.density_sq

    def grade_ratio_eval(self, j: int, xi) -> tuple[CJet, CJet]:
        """(even, odd) parts of s_j / s_1 at a fibre point; density-free and
        invariant under the representation rescaling."""
        if j > 1 or j < self.symbol.lo:
            raise DepthError("grade %d not retained (lo=%d)" % (j, self.symbol.lo))
        ev_j, od_j = self.symbol.grade(j).eval_pair(xi)
        od_1 = self._principal_odd(xi)
        inv1 = od_1.reciprocal()
        even = od_j * inv1
        odd = ev_j * inv1 * self.ctx.q2_value(xi).reciprocal()
        return even, odd

    def density_ratio_sq(self, other: "DNSymbolData", xi) -> Jet:
        """(O_1 / O_1')^2 for two data sets over the same boundary metric:
        the squared ratio of principal observables, a rescale-invariant
        positive y-jet."""
        if not self.ctx.same_structure(other.ctx):
            raise DataError("density ratio requires a shared boundary metric")
        num = self.principal_square_eval(xi)
        den = other.principal_square_eval(xi)
        return num * den.reciprocal()

    # -- representation gauge -------------------------------------------------

    def rescaled(self, unit: Jet) -> "DNSymbolData":
        """Equivalent representation (s * t, density^2 / t^2); the observable
        s * sqrt(density^2) is unchanged."""
        if unit.constant_term() <= 0:
            raise DataError("rescaling factor must be a positive unit jet")
        t = unit.restricted_to_boundary()
        sym = self.symbol.map_components(lambda s: s.scale(t))
        dsq = self.density_sq * (t * t).reciprocal()
        return replace(self, symbol=sym, density_sq=dsq)

    def agrees_with(self, other: "DNSymbolData") -> bool:
        """Exact equality of the stored representation, grade by grade."""
        if (
            self.map_kind != other.map_kind
            or self.gauge_tag != other.gauge_tag
            or self.depth != other.depth
        ):
            return False
        if not self.ctx.same_structure(other.ctx):
            return False
        if self.density_sq != other.density_sq:
            return False
        return all(
            self.symbol.grade(j) == other.symbol.grade(j) for j in self.symbol.grades()
        )


def _restrict(symbol: FormalSymbol, metric: BoundaryMetricJet) -> tuple:
    bmetric = metric.restricted_to_boundary()
    return symbol.restricted_to_boundary(bmetric.ctx), bmetric


def dn_symbol_scalar(metric: BoundaryMetricJet, weight: Jet, depth: int) -> DNSymbolData:
    """Boundary symbol of the scalar DN map with density e^{-V} sqrt(delta)."""
    result = factorize_scalar(metric, weight, depth)
    sym, bmetric = _restrict(result.symbol, metric)
    density_sq = (weight.scale(-2).exp() * metric.delta).restricted_to_boundary()
    return DNSymbolData("lambda0", None, sym, density_sq, bmetric, metric.n, depth)


def dn_symbol_gauge(
    metric: BoundaryMetricJet, weight: Jet, depth: int, gauge_tag: str
) -> DNSymbolData:
    """Boundary symbol of the gauge DN map in one of the two distinguished
    trivialisations."""
    if gauge_tag == "s":
        gauge = gauge_s(metric, weight)
    elif gauge_tag == "sigma":
        gauge = gauge_sigma(metric, weight)
    else:
        raise DataError("gauge tag must be 's' or 'sigma', got %r" % gauge_tag)
    result = factorize_gauge(metric, gauge, depth, weight=weight)
    sym, bmetric = _restrict(result.symbol, metric)
    density_sq = gauge.density_sq.restricted_to_boundary()
    return DNSymbolData("lambda1", gauge_tag, sym, density_sq, bmetric, metric.n, depth)
