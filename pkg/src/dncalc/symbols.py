"""Classical homogeneous symbols on the boundary cotangent fibre.

A homogeneous symbol of degree j is stored in the canonical form

    (A(x, xi') + B(x, xi') * w) / q2^p

where q2 = g^{ab} xi_a xi_b is the principal quadratic form of the tangential
part of the operator, w = sqrt(q2) = ||xi'|| is its square root, A and B are
polynomials in the fibre variable xi' with complex jet coefficients, A is
xi'-homogeneous of degree j + 2p and B of degree j + 2p - 1.  The form is
closed under the operations the factorisation recursions need: products
(w^2 rewrites to q2), xi'-derivatives (d w/d xi_a = g^{ab} xi_b w / q2),
base derivatives (which hit both the jet coefficients and the metric inside
w and q2), and division by the principal factor -w.

Normalisation divides out common q2 factors of A and B, so two symbols are
equal exactly when their components coincide; w is not a rational function
of xi', hence (A, B, p) with minimal p is a faithful representation.

Complex scalars never appear inside a single jet; instead every polynomial
coefficient is a pair of real jets (CJet), which keeps the frequent
all-real products cheap.

A FormalSymbol is a graded family of homogeneous symbols on a contiguous
range of degrees; the asymptotic composition

    (h # g)(x, xi') = sum_K 1/K! d^K_xi h(x, xi') D^K_y g(x, xi')

is truncated exactly at the grades that remain reliable given the retained
ranges of the factors (truncation replaces the smoothing-remainder calculus).
"""

from __future__ import annotations

import math
from itertools import combinations_with_replacement

from .errors import (
    BudgetExhaustedError,
    DepthError,
    IncompatibleJetsError,
    NotInvertibleError,
)
from .jets import Jet, JetSpace


class CJet:
    """A complex jet as a pair of real jets."""

    __slots__ = ("re", "im")

    def __init__(self, re: Jet, im: Jet | None = None):
        self.re = re
        self.im = re.space.zero(re.kr, re.ky) if im is None else im

    @property
    def is_zero(self):
        return self.re.is_zero and self.im.is_zero

    def __add__(self, other: "CJet") -> "CJet":
        return CJet(self.re + other.re, self.im + other.im)

    def __sub__(self, other: "CJet") -> "CJet":
        return CJet(self.re - other.re, self.im - other.im)

    def __neg__(self):
        return CJet(-self.re, -self.im)

    def __mul__(self, other):
        if isinstance(other, Jet):
            return CJet(self.re * other, self.im * other)
        if not isinstance(other, CJet):
            return self.scale(other)
        a, b, c, d = self.re, self.im, other.re, other.im
        if b.is_zero and d.is_zero:
            return CJet(a * c)
        return CJet(a * c - b * d, a * d + b * c)

    __rmul__ = __mul__

    def scale(self, value) -> "CJet":
        return CJet(self.re.scale(value), self.im.scale(value))

    def times_i(self) -> "CJet":
        return CJet(-self.im, self.re)

    def times_minus_i(self) -> "CJet":
        return CJet(self.im, -self.re)

    def partial(self, direction: int) -> "CJet":
        return CJet(self.re.partial(direction), self.im.partial(direction))

    def restricted_to_boundary(self) -> "CJet":
        return CJet(self.re.restricted_to_boundary(), self.im.restricted_to_boundary())

    def reciprocal(self) -> "CJet":
        if not self.im.is_zero:
            raise NotInvertibleError("reciprocal implemented for real jets only")
        return CJet(self.re.reciprocal())

    def __eq__(self, other):
        if not isinstance(other, CJet):
            return NotImplemented
        return self.re == other.re and self.im == other.im

    def __hash__(self):
        return hash((self.re, self.im))

    def constant_complex(self) -> complex:
        backend = self.re.space.backend
        return complex(
            backend.to_float(self.re.constant_term()),
            backend.to_float(self.im.constant_term()),
        )

    def __repr__(self):
        if self.im.is_zero:
            return "CJet(%r)" % self.re
        return "CJet(%r + i*%r)" % (self.re, self.im)


class XiPoly:
    """Homogeneous polynomial in xi' with CJet coefficients."""

    __slots__ = ("nxi", "deg", "c")

    def __init__(self, nxi: int, deg: int, coeffs: dict | None = None):
        self.nxi = nxi
        self.deg = deg
        self.c = {}
        if coeffs:
            for e, v in coeffs.items():
                if sum(e) != deg:
                    raise IncompatibleJetsError(
                        "monomial %r is not homogeneous of degree %d" % (e, deg)
                    )
                if not v.is_zero:
                    self.c[e] = v

    @classmethod
    def _make(cls, nxi, deg, coeffs):
        self = object.__new__(cls)
        self.nxi = nxi
        self.deg = deg
        self.c = coeffs
        return self

    @property
    def is_zero(self):
        return not self.c

    def __add__(self, other: "XiPoly") -> "XiPoly":
        if self.is_zero:
            return other
        if other.is_zero:
            return self
        if self.deg != other.deg:
            raise IncompatibleJetsError(
                "cannot add polynomials of degrees %d and %d" % (self.deg, other.deg)
            )
        out = dict(self.c)
        for e, v in other.c.items():
            s = out.get(e)
            s = v if s is None else s + v
            if s.is_zero:
                out.pop(e, None)
            else:
                out[e] = s
        return XiPoly._make(self.nxi, self.deg, out)

    def __neg__(self):
        return XiPoly._make(self.nxi, self.deg, {e: -v for e, v in self.c.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other: "XiPoly") -> "XiPoly":
        deg = self.deg + other.deg
        if self.is_zero or other.is_zero:
            return XiPoly._make(self.nxi, deg, {})
        out: dict = {}
        for e1, v1 in self.c.items():
            for e2, v2 in other.c.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                p = v1 * v2
                s = out.get(e)
                s = p if s is None else s + p
                if s.is_zero:
                    out.pop(e, None)
                else:
                    out[e] = s
        return XiPoly._make(self.nxi, deg, out)

    def scale(self, factor) -> "XiPoly":
        """Multiply every coefficient by a CJet, Jet or scalar."""
        if isinstance(factor, (CJet, Jet)):
            out = {e: v * factor for e, v in self.c.items()}
        else:
            out = {e: v.scale(factor) for e, v in self.c.items()}
        return XiPoly._make(self.nxi, self.deg, {e: v for e, v in out.items() if not v.is_zero})

    def map_coeffs(self, fn) -> "XiPoly":
        out = {}
        for e, v in self.c.items():
            w = fn(v)
            if not w.is_zero:
                out[e] = w
        return XiPoly._make(self.nxi, self.deg, out)

    def _backend(self):
        for v in self.c.values():
            return v.re.space.backend
        return None

    def scale_half(self) -> "XiPoly":
        backend = self._backend()
        if backend is None:
            return self
        return self.scale(backend.one() / backend.coerce(2))

    def scale_minus_half(self) -> "XiPoly":
        backend = self._backend()
        if backend is None:
            return self
        return self.scale(-(backend.one() / backend.coerce(2)))

    def xi_partial(self, a: int) -> "XiPoly":
        out = {}
        for e, v in self.c.items():
            k = e[a]
            if k == 0:
                continue
            ne = e[:a] + (k - 1,) + e[a + 1 :]
            w = v.scale(k)
            s = out.get(ne)
            out[ne] = w if s is None else s + w
        return XiPoly._make(self.nxi, self.deg - 1, out)

    def base_partial(self, direction: int) -> "XiPoly":
        return self.map_coeffs(lambda v: v.partial(direction))

    def evaluate(self, xi, space: JetSpace, kr: int, ky: int) -> CJet:
        """Value at a numeric fibre point (a CJet in the base variables)."""
        backend = space.backend
        acc = CJet(space.zero(kr, ky))
        for e, v in self.c.items():
            s = backend.one()
            for val, k in zip(xi, e):
                if k:
                    s = s * backend.coerce(val) ** k
            acc = acc + v.scale(s)
        return acc

    def __eq__(self, other):
        if not isinstance(other, XiPoly):
            return NotImplemented
        return (self - other).is_zero

    def __repr__(self):
        if not self.c:
            return "XiPoly(0; deg=%d)" % self.deg
        terms = []
        for e in sorted(self.c):
            mono = "*".join(
                "xi%d%s" % (i + 1, "" if k == 1 else "^%d" % k)
                for i, k in enumerate(e)
                if k
            )
            terms.append("(%r)%s" % (self.c[e], "*" + mono if mono else ""))
        return "XiPoly(%s)" % " + ".join(terms)


class SymbolContext:
    """Fibre-metric data every homogeneous symbol refers to.

    Built from the inverse tangential metric g^{ab} (a symmetric matrix of
    real jets); caches the quadratic form q2 as a polynomial, its xi- and
    base-derivatives, and the reciprocal of its leading coefficient, which
    drives exact division during normalisation.
    """

    __slots__ = (
        "space",
        "nxi",
        "g_upper",
        "kr",
        "ky",
        "q2",
        "q2_xi",
        "_q2_base",
        "_lead_inv",
        "_q2_values",
    )

    def __init__(self, g_upper):
        self.g_upper = tuple(tuple(row) for row in g_upper)
        first = self.g_upper[0][0]
        self.space = first.space
        self.nxi = self.space.n - 1
        if len(self.g_upper) != self.nxi:
            raise IncompatibleJetsError("inverse metric size does not match dimension")
        self.kr = min(j.kr for row in self.g_upper for j in row)
        self.ky = min(j.ky for row in self.g_upper for j in row)
        coeffs = {}
        for a in range(self.nxi):
            for b in range(a, self.nxi):
                e = [0] * self.nxi
                e[a] += 1
                e[b] += 1
                val = self.g_upper[a][b]
                if a != b:
                    val = val.scale(2)
                coeffs[tuple(e)] = CJet(val)
        self.q2 = XiPoly(self.nxi, 2, coeffs)
        self.q2_xi = tuple(self.q2.xi_partial(a) for a in range(self.nxi))
        self._q2_base = {}
        self._lead_inv = None
        self._q2_values = {}

    def q2_base_partial(self, direction: int) -> XiPoly:
        poly = self._q2_base.get(direction)
        if poly is None:
            poly = self.q2.base_partial(direction)
            self._q2_base[direction] = poly
        return poly

    @property
    def lead_inv(self) -> Jet:
        if self._lead_inv is None:
            self._lead_inv = self.g_upper[0][0].reciprocal()
        return self._lead_inv

    def q2_value(self, xi) -> Jet:
        """q2 evaluated at a rational fibre point, as a real jet."""
        key = tuple(xi)
        val = self._q2_values.get(key)
        if val is None:
            cval = self.q2.evaluate(xi, self.space, self.kr, self.ky)
            val = cval.re
            self._q2_values[key] = val
        return val

    def restricted_to_boundary(self) -> "SymbolContext":
        return SymbolContext(
            tuple(
                tuple(j.restricted_to_boundary() for j in row) for row in self.g_upper
            )
        )

    def same_structure(self, other: "SymbolContext") -> bool:
        if self is other:
            return True
        if self.nxi != other.nxi or self.space != other.space:
            return False
        return all(
            self.g_upper[a][b] == other.g_upper[a][b]
            for a in range(self.nxi)
            for b in range(self.nxi)
        )

    def zero_cjet(self) -> CJet:
        return CJet(self.space.zero(self.kr, self.ky))

    def one_cjet(self) -> CJet:
        return CJet(self.space.one(self.kr, self.ky))

    # exact polynomial division by q2 (or None if not divisible) -----------

    def divide_by_q2(self, poly: XiPoly) -> XiPoly | None:
        if poly.is_zero:
            return XiPoly._make(poly.nxi, poly.deg - 2, {})
        if poly.deg < 2:
            return None
        # necessary conditions from the extreme monomials of a product with
        # q2, whose lex-max is xi_1^2 and lex-min is xi_{n-1}^2
        if max(poly.c)[0] < 2 or min(poly.c)[-1] < 2:
            return None
        lead_inv = self.lead_inv
        q2items = list(self.q2.c.items())
        rem = dict(poly.c)
        quot: dict = {}
        while rem:
            e = max(rem)
            if e[0] < 2:
                return None
            c = rem.pop(e) * lead_inv
            t = (e[0] - 2,) + e[1:]
            s = quot.get(t)
            quot[t] = c if s is None else s + c
            for qe, qv in q2items:
                te = tuple(a + b for a, b in zip(t, qe))
                if te == e:
                    continue
                v = c * qv
                s = rem.get(te)
                s = -v if s is None else s - v
                if s.is_zero:
                    rem.pop(te, None)
                else:
                    rem[te] = s
        return XiPoly._make(poly.nxi, poly.deg - 2, {e: v for e, v in quot.items() if not v.is_zero})


#: budget value meaning "no truncation restriction" (exact zero tails)
UNRESTRICTED = 1 << 30


class HomSymbol:
    """Homogeneous symbol (A + B*w)/q2^p of a fixed degree.

    Every symbol carries uniform truncation budgets (kr, ky) for its jet
    coefficients.  The budgets are tracked on the symbol, not recovered from
    the surviving coefficients: a truncated coefficient that cancels to the
    zero jet would otherwise take its validity restriction with it when
    pruned, silently overstating the precision of later sums.
    """

    __slots__ = ("ctx", "degree", "p", "a", "b", "kr", "ky")

    def __init__(
        self,
        ctx: SymbolContext,
        degree: int,
        a: XiPoly,
        b: XiPoly,
        p: int,
        kr: int | None = None,
        ky: int | None = None,
    ):
        if p < 0:
            raise IncompatibleJetsError("denominator power must be nonnegative")
        if not a.is_zero and a.deg != degree + 2 * p:
            raise IncompatibleJetsError(
                "even part has degree %d, expected %d" % (a.deg, degree + 2 * p)
            )
        if not b.is_zero and b.deg != degree + 2 * p - 1:
            raise IncompatibleJetsError(
                "odd part has degree %d, expected %d" % (b.deg, degree + 2 * p - 1)
            )
        if kr is None:
            kr = min(
                [v.re.kr for poly in (a, b) for v in poly.c.values()],
                default=UNRESTRICTED,
            )
        if ky is None:
            ky = min(
                [v.re.ky for poly in (a, b) for v in poly.c.values()],
                default=UNRESTRICTED,
            )
        if kr < UNRESTRICTED or ky < UNRESTRICTED:
            trunc = lambda v: CJet(
                v.re.truncated(kr, ky), v.im.truncated(kr, ky)
            )
            a = a.map_coeffs(trunc)
            b = b.map_coeffs(trunc)
        self.ctx = ctx
        self.degree = degree
        self.p = p
        self.a = a
        self.b = b
        self.kr = kr
        self.ky = ky

    def _budgets_with(self, other: "HomSymbol"):
        return min(self.kr, other.kr), min(self.ky, other.ky)

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls, ctx: SymbolContext, degree: int) -> "HomSymbol":
        nxi = ctx.nxi
        return cls(ctx, degree, XiPoly(nxi, degree, {}), XiPoly(nxi, degree - 1, {}), 0)

    @classmethod
    def from_jet(cls, ctx: SymbolContext, value) -> "HomSymbol":
        """Degree-0 symbol given by a Jet or CJet multiplier."""
        if isinstance(value, Jet):
            value = CJet(value)
        nxi = ctx.nxi
        a = XiPoly(nxi, 0, {(0,) * nxi: value})
        return cls(ctx, 0, a, XiPoly(nxi, -1, {}), 0, value.re.kr, value.re.ky)

    @classmethod
    def xi_norm(cls, ctx: SymbolContext) -> "HomSymbol":
        """w = ||xi'|| as a symbol of degree 1."""
        nxi = ctx.nxi
        b = XiPoly(nxi, 0, {(0,) * nxi: ctx.one_cjet()})
        return cls(ctx, 1, XiPoly(nxi, 1, {}), b, 0, ctx.kr, ctx.ky)

    @classmethod
    def q2_symbol(cls, ctx: SymbolContext) -> "HomSymbol":
        return cls(ctx, 2, ctx.q2, XiPoly(ctx.nxi, 1, {}), 0, ctx.kr, ctx.ky)

    @classmethod
    def linear_form(cls, ctx: SymbolContext, coefficients) -> "HomSymbol":
        """Degree-1 symbol sum_a c_a xi_a from CJet coefficients."""
        nxi = ctx.nxi
        coeffs = {}
        kr = ky = UNRESTRICTED
        for a, v in enumerate(coefficients):
            e = [0] * nxi
            e[a] = 1
            coeffs[tuple(e)] = v
            kr = min(kr, v.re.kr)
            ky = min(ky, v.re.ky)
        return cls(ctx, 1, XiPoly(nxi, 1, coeffs), XiPoly(nxi, 0, {}), 0, kr, ky)

    # -- canonical form -------------------------------------------------------

    @property
    def is_zero(self):
        return self.a.is_zero and self.b.is_zero

    def normalized(self) -> "HomSymbol":
        """Minimal denominator power; prunes zero terms (w^2 -> q2 is
        structural through the even/odd split)."""
        a, b, p = self.a, self.b, self.p
        while p > 0 and not (a.is_zero and b.is_zero):
            qb = self.ctx.divide_by_q2(b)
            if qb is None:
                break
            qa = self.ctx.divide_by_q2(a)
            if qa is None:
                break
            a, b, p = qa, qb, p - 1
        if a.is_zero and b.is_zero:
            p = 0
            a = XiPoly(self.ctx.nxi, self.degree, {})
            b = XiPoly(self.ctx.nxi, self.degree - 1, {})
        if p == self.p and a is self.a and b is self.b:
            return self
        return HomSymbol(self.ctx, self.degree, a, b, p, self.kr, self.ky)

    def _check(self, other: "HomSymbol"):
        if self.ctx is not other.ctx and not self.ctx.same_structure(other.ctx):
            raise IncompatibleJetsError("symbols refer to different fibre metrics")

    @staticmethod
    def sum(terms, ctx: SymbolContext, degree: int) -> "HomSymbol":
        """Sum of same-degree symbols with one final normalisation instead of
        one per pairwise addition."""
        terms = [t for t in terms if not t.is_zero]
        if not terms:
            return HomSymbol.zero(ctx, degree)
        p = max(t.p for t in terms)
        kr = min(t.kr for t in terms)
        ky = min(t.ky for t in terms)
        acc_a = None
        acc_b = None
        for t in terms:
            if t.degree != degree:
                raise IncompatibleJetsError(
                    "sum mixes degrees %d and %d" % (t.degree, degree)
                )
            r = t._raise_p(p)
            acc_a = r.a if acc_a is None else acc_a + r.a
            acc_b = r.b if acc_b is None else acc_b + r.b
        return HomSymbol(ctx, degree, acc_a, acc_b, p, kr, ky).normalized()

    def _raise_p(self, p: int) -> "HomSymbol":
        if p == self.p:
            return self
        a, b = self.a, self.b
        for _ in range(p - self.p):
            a = a * self.ctx.q2
            b = b * self.ctx.q2
        return HomSymbol(self.ctx, self.degree, a, b, p, self.kr, self.ky)

    # -- ring operations --------------------------------------------------------

    def __add__(self, other: "HomSymbol") -> "HomSymbol":
        self._check(other)
        if self.degree != other.degree:
            raise IncompatibleJetsError(
                "cannot add symbols of degrees %d and %d" % (self.degree, other.degree)
            )
        p = max(self.p, other.p)
        x = self._raise_p(p)
        y = other._raise_p(p)
        kr, ky = self._budgets_with(other)
        return HomSymbol(self.ctx, self.degree, x.a + y.a, x.b + y.b, p, kr, ky).normalized()

    def __neg__(self):
        return HomSymbol(self.ctx, self.degree, -self.a, -self.b, self.p, self.kr, self.ky)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other: "HomSymbol") -> "HomSymbol":
        self._check(other)
        deg = self.degree + other.degree
        a = self.a * other.a + (self.b * other.b) * self.ctx.q2
        b = self.a * other.b + self.b * other.a
        kr, ky = self._budgets_with(other)
        return HomSymbol(self.ctx, deg, a, b, self.p + other.p, kr, ky).normalized()

    def scale(self, factor) -> "HomSymbol":
        kr, ky = self.kr, self.ky
        if isinstance(factor, CJet):
            kr, ky = min(kr, factor.re.kr), min(ky, factor.re.ky)
        elif isinstance(factor, Jet):
            kr, ky = min(kr, factor.kr), min(ky, factor.ky)
        return HomSymbol(
            self.ctx, self.degree, self.a.scale(factor), self.b.scale(factor), self.p, kr, ky
        ).normalized()

    def times_i(self) -> "HomSymbol":
        return HomSymbol(
            self.ctx,
            self.degree,
            self.a.map_coeffs(lambda v: v.times_i()),
            self.b.map_coeffs(lambda v: v.times_i()),
            self.p,
            self.kr,
            self.ky,
        )

    def times_minus_i(self) -> "HomSymbol":
        return HomSymbol(
            self.ctx,
            self.degree,
            self.a.map_coeffs(lambda v: v.times_minus_i()),
            self.b.map_coeffs(lambda v: v.times_minus_i()),
            self.p,
            self.kr,
            self.ky,
        )

    # -- calculus -----------------------------------------------------------------

    def xi_partial(self, a: int) -> "HomSymbol":
        """d/d xi_a; the degree drops by one."""
        ctx = self.ctx
        q2d = ctx.q2_xi[a]
        if self.p == 0:
            na = self.a.xi_partial(a) * ctx.q2
            nb = self.b.xi_partial(a) * ctx.q2 + (self.b * q2d).scale_half()
        else:
            pa = self.a.xi_partial(a)
            pb = self.b.xi_partial(a)
            na = pa * ctx.q2 - (self.a * q2d).scale(self.p)
            nb = (
                pb * ctx.q2
                + (self.b * q2d).scale_half()
                - (self.b * q2d).scale(self.p)
            )
        kr, ky = min(self.kr, ctx.kr), min(self.ky, ctx.ky)
        return HomSymbol(ctx, self.degree - 1, na, nb, self.p + 1, kr, ky).normalized()

    def base_partial(self, direction: int) -> "HomSymbol":
        """d/dr or d/dy; hits jet coefficients and the metric inside w, q2."""
        ctx = self.ctx
        if direction == 0:
            if min(self.kr, ctx.kr) == 0:
                raise BudgetExhaustedError("radial symbol budget exhausted")
            kr, ky = min(self.kr, ctx.kr) - 1, min(self.ky, ctx.ky)
        else:
            if min(self.ky, ctx.ky) == 0:
                raise BudgetExhaustedError("tangential symbol budget exhausted")
            kr, ky = min(self.kr, ctx.kr), min(self.ky, ctx.ky) - 1
        q2b = ctx.q2_base_partial(direction)
        da = self.a.base_partial(direction)
        db = self.b.base_partial(direction)
        na = da * ctx.q2
        nb = db * ctx.q2 + (self.b * q2b).scale_half()
        if self.p:
            na = na - (self.a * q2b).scale(self.p)
            nb = nb - (self.b * q2b).scale(self.p)
        return HomSymbol(ctx, self.degree, na, nb, self.p + 1, kr, ky).normalized()

    def d_y(self, a: int) -> "HomSymbol":
        """D_{y^a} = -i d/dy^a (tangential direction a is jet direction a+1)."""
        return self.base_partial(a + 1).times_minus_i()

    def div_2b1(self) -> "HomSymbol":
        """Division by twice the principal factor b1 = -w, i.e. multiplication
        by -w/(2 q2)."""
        na = (self.b * self.ctx.q2).scale_minus_half()
        nb = self.a.scale_minus_half()
        kr, ky = min(self.kr, self.ctx.kr), min(self.ky, self.ctx.ky)
        return HomSymbol(self.ctx, self.degree - 1, na, nb, self.p + 1, kr, ky).normalized()

    def lower_by_q2(self) -> "HomSymbol":
        """Division by q2 (degree drops by two)."""
        return HomSymbol(
            self.ctx, self.degree - 2, self.a, self.b, self.p + 1, self.kr, self.ky
        ).normalized()

    def restricted_to_boundary(self, bctx: SymbolContext) -> "HomSymbol":
        kr = 0 if self.kr < UNRESTRICTED else UNRESTRICTED
        return HomSymbol(
            bctx,
            self.degree,
            self.a.map_coeffs(lambda v: v.restricted_to_boundary()),
            self.b.map_coeffs(lambda v: v.restricted_to_boundary()),
            self.p,
            kr,
            self.ky,
        ).normalized()

    # -- evaluation ------------------------------------------------------------

    def eval_pair(self, xi) -> tuple[CJet, CJet]:
        """(even, odd) parts at a rational fibre point: the symbol value is
        even + odd * w(xi) with both parts exact jets."""
        ctx = self.ctx
        kr, ky = min(self.kr, ctx.kr), min(self.ky, ctx.ky)
        av = self.a.evaluate(xi, ctx.space, kr, ky)
        bv = self.b.evaluate(xi, ctx.space, kr, ky)
        if self.p:
            inv = ctx.q2_value(xi).reciprocal()
            for _ in range(self.p):
                av = av * inv
                bv = bv * inv
        trunc = lambda v: CJet(v.re.truncated(kr, ky), v.im.truncated(kr, ky))
        return trunc(av), trunc(bv)

    def eval_at_base(self, xi) -> complex:
        """Numeric value at the base point (r=0, y=0) of the fibre point xi."""
        av, bv = self.eval_pair(xi)
        backend = self.ctx.space.backend
        q2c = backend.to_float(self.ctx.q2_value(xi).constant_term())
        w = math.sqrt(q2c)
        return av.constant_complex() + bv.constant_complex() * w

    def __eq__(self, other):
        if not isinstance(other, HomSymbol):
            return NotImplemented
        self._check(other)
        if self.degree != other.degree:
            return False
        return (self - other).is_zero

    def __repr__(self):
        return "HomSymbol(deg=%d, p=%d, even=%r, odd=%r)" % (
            self.degree,
            self.p,
            self.a,
            self.b,
        )


class FormalSymbol:
    """Graded family of homogeneous symbols on a contiguous degree range.

    ``tail_exact`` records whether degrees below ``lo`` are genuinely zero
    (finite symbols such as q2 + q1 + q0) rather than unknown truncation.
    """

    __slots__ = ("ctx", "comps", "hi", "lo", "tail_exact")

    def __init__(self, ctx: SymbolContext, comps: dict, hi: int, lo: int, tail_exact=False):
        if hi < lo:
            raise DepthError("empty grade range [%d, %d]" % (lo, hi))
        self.ctx = ctx
        self.hi = hi
        self.lo = lo
        self.tail_exact = tail_exact
        self.comps = {}
        for j in range(lo, hi + 1):
            s = comps.get(j)
            self.comps[j] = s if s is not None else HomSymbol.zero(ctx, j)

    @classmethod
    def single(cls, sym: HomSymbol, tail_exact=True) -> "FormalSymbol":
        return cls(sym.ctx, {sym.degree: sym}, sym.degree, sym.degree, tail_exact)

    @property
    def depth(self) -> int:
        return self.hi - self.lo + 1

    def grade(self, j: int) -> HomSymbol:
        if j > self.hi:
            return HomSymbol.zero(self.ctx, j)
        if j < self.lo:
            if self.tail_exact:
                return HomSymbol.zero(self.ctx, j)
            raise DepthError("grade %d below retained range (lo=%d)" % (j, self.lo))
        return self.comps[j]

    def grades(self):
        return range(self.hi, self.lo - 1, -1)

    def map_components(self, fn, tail_exact=None) -> "FormalSymbol":
        out = {j: fn(s) for j, s in self.comps.items()}
        te = self.tail_exact if tail_exact is None else tail_exact
        return FormalSymbol(self.ctx, out, self.hi, self.lo, te)

    def d_r(self) -> "FormalSymbol":
        return self.map_components(lambda s: s.base_partial(0))

    def scale_jet(self, jet) -> "FormalSymbol":
        return self.map_components(lambda s: s.scale(jet))

    def __neg__(self):
        return self.map_components(lambda s: -s)

    def __add__(self, other: "FormalSymbol") -> "FormalSymbol":
        bounds = []
        if not self.tail_exact:
            bounds.append(self.lo)
        if not other.tail_exact:
            bounds.append(other.lo)
        hi = max(self.hi, other.hi)
        lo = max(bounds) if bounds else min(self.lo, other.lo)
        out = {}
        for j in range(lo, hi + 1):
            out[j] = self.grade(j) + other.grade(j)
        return FormalSymbol(self.ctx, out, hi, lo, self.tail_exact and other.tail_exact)

    def __sub__(self, other):
        return self + (-other)

    def truncated_below(self, lo: int) -> "FormalSymbol":
        if lo <= self.lo:
            return self
        return FormalSymbol(
            self.ctx,
            {j: self.comps[j] for j in range(lo, self.hi + 1)},
            self.hi,
            lo,
            False,
        )

    def restricted_to_boundary(self, bctx: SymbolContext) -> "FormalSymbol":
        return self.map_components(lambda s: s.restricted_to_boundary(bctx))

    def is_zero(self) -> bool:
        return all(s.is_zero for s in self.comps.values())

    def __eq__(self, other):
        if not isinstance(other, FormalSymbol):
            return NotImplemented
        if self.hi != other.hi or self.lo != other.lo:
            return False
        return all(self.comps[j] == other.comps[j] for j in self.comps)

    def __repr__(self):
        return "FormalSymbol(grades %d..%d%s)" % (
            self.hi,
            self.lo,
            ", exact tail" if self.tail_exact else "",
        )


def compose(f: FormalSymbol, g: FormalSymbol, lowest: int | None = None) -> FormalSymbol:
    """Asymptotic composition sum_K 1/K! d^K_xi f D^K_y g.

    The output grades are those unaffected by the factors' dropped tails:
    a missing component of f below f.lo would first contribute at grade
    f.lo - 1 + g.hi, and symmetrically for g.  Exact tails impose no bound.
    The K-sum is finite on every retained grade because |K| lowers the grade.
    """
    if f.ctx is not g.ctx and not f.ctx.same_structure(g.ctx):
        raise IncompatibleJetsError("composition of symbols over different metrics")
    ctx = f.ctx
    bounds = []
    if not f.tail_exact:
        bounds.append(f.lo + g.hi)
    if not g.tail_exact:
        bounds.append(g.lo + f.hi)
    if lowest is not None:
        bounds.append(lowest)
    if not bounds:
        raise DepthError("composition of two exact symbols needs an explicit depth")
    lo = max(bounds)
    hi = f.hi + g.hi
    if hi < lo:
        raise DepthError("no reliable grades in composition (hi=%d < lo=%d)" % (hi, lo))
    out = {j: [] for j in range(lo, hi + 1)}
    tail_exact = f.tail_exact and g.tail_exact and lowest is not None

    nxi = ctx.nxi
    # cache per-component derivative chains
    f_x: dict = {}
    g_y: dict = {}

    def xi_deriv(j1, key):
        sym = f_x.get((j1, key))
        if sym is None:
            if not key:
                sym = f.comps[j1]
            else:
                sym = xi_deriv(j1, key[:-1]).xi_partial(key[-1])
            f_x[(j1, key)] = sym
        return sym

    def y_deriv(j2, key):
        sym = g_y.get((j2, key))
        if sym is None:
            if not key:
                sym = g.comps[j2]
            else:
                sym = y_deriv(j2, key[:-1]).d_y(key[-1])
            g_y[(j2, key)] = sym
        return sym

    backend = ctx.space.backend
    for j1 in f.grades():
        s1 = f.comps[j1]
        if s1.is_zero:
            continue
        for j2 in g.grades():
            s2 = g.comps[j2]
            if s2.is_zero:
                continue
            kmax = j1 + j2 - lo
            for k in range(0, kmax + 1):
                grade = j1 + j2 - k
                if grade > hi:
                    continue
                for key in combinations_with_replacement(range(nxi), k):
                    left = xi_deriv(j1, key)
                    if left.is_zero:
                        continue
                    right = y_deriv(j2, key)
                    if right.is_zero:
                        continue
                    term = left * right
                    if k:
                        mult = 1
                        for a in set(key):
                            mult *= math.factorial(key.count(a))
                        term = term.scale(backend.one() / backend.coerce(mult))
                    out[grade].append(term)
    comps = {j: HomSymbol.sum(terms, ctx, j) for j, terms in out.items()}
    return FormalSymbol(ctx, comps, hi, lo, tail_exact)
