"""Symbol recursions factorising the collar operator, and their verifier.

Both factorisations split the operator into first-order radial factors whose
tangential part is a pseudo-differential family with a classical symbol
sum_{j<=1} s_j.  Writing the defining identity

    -q - e*s + d_r s + sum_{|K|>=1} 1/K! d^K_xi s D^K_y a_r
            + sum_K 1/K! d^K_xi s D^K_y s  ~  0

(with e the first-order drift and a_r the radial gauge potential, both absent
or adapted in the scalar mode), the grade-(j+1) homogeneous component of the
identity determines s_j: the only terms containing s_j there are the two
K = 0 products s_1 s_j, and division by 2 s_1 = -2 ||xi'|| stays inside the
symbol ring.  The solver below extracts each grade of the identity directly,
which keeps every multi-index bound and combinatorial factor tied to one
place; the verifier recombines the identity independently through the full
asymptotic composition and demands that every reliable grade vanish.

Residual grades are labelled by the component they determine (label = grade
of the identity minus one), so a corrupted s_j trips the verifier at label j.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations_with_replacement

from .errors import BudgetExhaustedError, DepthError
from .geometry import BoundaryMetricJet, GaugeData, compute_q_symbols, radial_drift
from .jets import Jet
from .symbols import CJet, FormalSymbol, HomSymbol, SymbolContext, XiPoly, compose


@dataclass(frozen=True)
class FactorizationResult:
    mode: str  # "gauge" | "scalar"
    symbol: FormalSymbol
    metric: BoundaryMetricJet
    weight: Jet | None
    gauge: GaugeData | None
    depth: int


class _Recursion:
    def __init__(self, ctx: SymbolContext, q2, q1, q0, drift: Jet, a_r: Jet | None):
        self.ctx = ctx
        self.q = {2: q2, 1: q1, 0: q0}
        self.drift = drift
        self.a_r = a_r
        self.comps: dict[int, HomSymbol] = {}
        self._xi: dict = {}
        self._dy: dict = {}
        self._ar_dy: dict = {}

    def xi_deriv(self, j: int, key: tuple) -> HomSymbol:
        sym = self._xi.get((j, key))
        if sym is None:
            sym = self.comps[j] if not key else self.xi_deriv(j, key[:-1]).xi_partial(key[-1])
            self._xi[(j, key)] = sym
        return sym

    def dy_deriv(self, j: int, key: tuple) -> HomSymbol:
        sym = self._dy.get((j, key))
        if sym is None:
            sym = self.comps[j] if not key else self.dy_deriv(j, key[:-1]).d_y(key[-1])
            self._dy[(j, key)] = sym
        return sym

    def ar_deriv(self, key: tuple) -> CJet:
        val = self._ar_dy.get(key)
        if val is None:
            if not key:
                val = CJet(self.a_r)
            else:
                val = self.ar_deriv(key[:-1]).partial(key[-1] + 1).times_minus_i()
            self._ar_dy[key] = val
        return val

    def _inv_factorial(self, key: tuple):
        backend = self.ctx.space.backend
        mult = 1
        for a in set(key):
            mult *= math.factorial(key.count(a))
        return backend.one() / backend.coerce(mult)

    def known_grade(self, gamma: int) -> HomSymbol:
        """Grade-gamma component of the defining identity over the components
        computed so far (the yet-unknown component never enters because it is
        not in ``comps``)."""
        ctx = self.ctx
        nxi = ctx.nxi
        terms = []
        q = self.q.get(gamma)
        if q is not None:
            terms.append(-q)
        bg = self.comps.get(gamma)
        if bg is not None and not bg.is_zero:
            terms.append(-bg.scale(self.drift))
            terms.append(bg.base_partial(0))
        if self.a_r is not None:
            for k in range(1, 1 - gamma + 1):
                m = gamma + k
                if m not in self.comps:
                    continue
                for key in combinations_with_replacement(range(nxi), k):
                    left = self.xi_deriv(m, key)
                    if left.is_zero:
                        continue
                    right = self.ar_deriv(key)
                    if right.is_zero:
                        continue
                    terms.append((left.scale(right)).scale(self._inv_factorial(key)))
        for m in self.comps:
            for l in self.comps:
                k = m + l - gamma
                if k < 0:
                    continue
                for key in combinations_with_replacement(range(nxi), k):
                    left = self.xi_deriv(m, key)
                    if left.is_zero:
                        continue
                    right = self.dy_deriv(l, key)
                    if right.is_zero:
                        continue
                    term = left * right
                    if k:
                        term = term.scale(self._inv_factorial(key))
                    terms.append(term)
        return HomSymbol.sum(terms, ctx, gamma)

    def solve(self, depth: int) -> FormalSymbol:
        ctx = self.ctx
        self.comps[1] = -HomSymbol.xi_norm(ctx)
        for j in range(0, 1 - depth, -1):
            rhs = self.known_grade(j + 1)
            self.comps[j] = (-rhs).div_2b1()
        return FormalSymbol(ctx, dict(self.comps), 1, 2 - depth)


def _check_budgets(metric: BoundaryMetricJet, weight: Jet | None, depth: int):
    if depth < 1:
        raise DepthError("depth must be at least 1, got %d" % depth)
    if metric.kr < depth + 1 or metric.ky < depth:
        raise BudgetExhaustedError(
            "metric truncation orders (%d, %d) cannot support depth %d "
            "(need radial >= %d, tangential >= %d)"
            % (metric.kr, metric.ky, depth, depth + 1, depth)
        )
    if weight is not None and (weight.kr < depth + 1 or weight.ky < depth):
        raise BudgetExhaustedError(
            "weight truncation orders (%d, %d) cannot support depth %d"
            % (weight.kr, weight.ky, depth)
        )


def factorize_gauge(
    metric: BoundaryMetricJet,
    gauge: GaugeData,
    depth: int,
    weight: Jet | None = None,
) -> FactorizationResult:
    """Solve the gauge-mode recursion to the requested depth.

    The retained grades run from 1 down to 2 - depth; the principal component
    is always -||xi'||.
    """
    _check_budgets(metric, weight, depth)
    q2, q1, q0 = compute_q_symbols(metric, weight, gauge)
    drift = radial_drift(metric)
    rec = _Recursion(metric.ctx, q2, q1, q0, drift, gauge.a_r)
    sym = rec.solve(depth)
    return FactorizationResult("gauge", sym, metric, weight, gauge, depth)


def factorize_scalar(
    metric: BoundaryMetricJet, weight: Jet, depth: int
) -> FactorizationResult:
    """Solve the scalar-mode recursion (the weight lives in the drift)."""
    _check_budgets(metric, weight, depth)
    q2, q1, q0 = compute_q_symbols(metric, weight, None)
    drift = radial_drift(metric, weight)
    rec = _Recursion(metric.ctx, q2, q1, q0, drift, None)
    sym = rec.solve(depth)
    return FactorizationResult("scalar", sym, metric, weight, None, depth)


def _defining_expression(result: FactorizationResult) -> FormalSymbol:
    """The identity recombined with the full asymptotic composition."""
    metric, weight, gauge = result.metric, result.weight, result.gauge
    ctx = metric.ctx
    b = result.symbol
    lo_check = 3 - result.depth

    if result.mode == "gauge":
        q2, q1, q0 = compute_q_symbols(metric, weight, gauge)
        drift = radial_drift(metric)
    else:
        q2, q1, q0 = compute_q_symbols(metric, weight, None)
        drift = radial_drift(metric, weight)

    q_formal = FormalSymbol(ctx, {2: q2, 1: q1, 0: q0}, 2, 0, tail_exact=True)
    expr = b.d_r() - b.scale_jet(drift) - q_formal
    expr = expr + compose(b, b, lowest=lo_check)
    if result.mode == "gauge" and not result.gauge.a_r.is_zero:
        ar_sym = FormalSymbol.single(HomSymbol.from_jet(ctx, result.gauge.a_r))
        full = compose(b, ar_sym, lowest=lo_check)
        pointwise = b.scale_jet(result.gauge.a_r)
        expr = expr + full - pointwise
    return expr.truncated_below(lo_check)


def verify_residual(result: FactorizationResult) -> int | None:
    """Recheck the defining identity on every reliable grade.

    Returns None when all grades vanish identically, otherwise the highest
    violated label, where a grade-gamma identity component is labelled
    gamma - 1 (the index of the symbol component it determines).
    """
    expr = _defining_expression(result)
    for gamma in expr.grades():
        if not expr.grade(gamma).is_zero:
            return gamma - 1
    return None


def perturb_component(result: FactorizationResult, grade: int) -> FactorizationResult:
    """Copy of the result with a unit homogeneous bump added at one grade;
    used to demonstrate that the verifier localises corrupted coefficients."""
    ctx = result.metric.ctx
    nxi = ctx.nxi
    if grade > 0:
        raise DepthError("only determined components (grade <= 0) can be perturbed")
    if grade == 0:
        bump = HomSymbol.from_jet(ctx, ctx.space.one(ctx.kr, ctx.ky))
    else:
        p = -grade
        e = [0] * nxi
        e[0] = p - 1
        odd = XiPoly(nxi, p - 1, {tuple(e): ctx.one_cjet()})
        bump = HomSymbol(ctx, grade, XiPoly(nxi, 2 * p + grade, {}), odd, p)
    comps = dict(result.symbol.comps)
    comps[grade] = comps[grade] + bump
    sym = FormalSymbol(ctx, comps, result.symbol.hi, result.symbol.lo)
    return FactorizationResult(
        result.mode, sym, result.metric, result.weight, result.gauge, result.depth
    )
