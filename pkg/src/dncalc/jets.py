"""Exact truncated power series (jets) on a boundary collar.

A jet truncates a smooth function of the collar coordinates (r, y^1..y^{n-1})
around a boundary base point: r is the inward distance to the boundary and
the y's are tangential.  Coefficients are stored sparsely, keyed by the
multi-index (m, mu_1, ..., mu_{n-1}); m is bounded by the jet's radial order
and sum(mu) by its tangential order.

Radial and tangential truncation orders act as derivative budgets: taking a
radial derivative returns a jet whose radial order is one lower, and
combining jets of different orders truncates to the common (minimum) orders.
Jets from different spaces (dimension, base point or scalar backend) never
combine.

All values are immutable after construction and all operations are pure.
"""

from __future__ import annotations

import math
from typing import Callable, Iterable, Mapping

from .errors import (
    BackendError,
    BudgetExhaustedError,
    IncompatibleJetsError,
    NotInvertibleError,
)
from .scalars import get_backend


class JetSpace:
    """Ambient data shared by compatible jets: dimension, base point, backend."""

    __slots__ = ("n", "base_point", "backend")

    def __init__(self, n: int, base_point: str = "p0", backend="rational"):
        if n < 2:
            raise IncompatibleJetsError("ambient dimension must be at least 2")
        self.n = n
        self.base_point = base_point
        self.backend = get_backend(backend) if isinstance(backend, str) else backend

    def __eq__(self, other):
        return (
            isinstance(other, JetSpace)
            and self.n == other.n
            and self.base_point == other.base_point
            and self.backend is other.backend
        )

    def __hash__(self):
        return hash((self.n, self.base_point, self.backend.name))

    def __repr__(self):
        return "JetSpace(n=%d, base_point=%r, backend=%s)" % (
            self.n,
            self.base_point,
            self.backend.name,
        )

    # -- constructors -----------------------------------------------------

    def zero(self, kr: int, ky: int) -> "Jet":
        return Jet._make(self, kr, ky, {})

    def one(self, kr: int, ky: int) -> "Jet":
        return self.constant(1, kr, ky)

    def constant(self, value, kr: int, ky: int) -> "Jet":
        v = self.backend.coerce(value)
        if not v:
            return self.zero(kr, ky)
        return Jet._make(self, kr, ky, {(0,) * self.n: v})

    def coordinate(self, direction: int, kr: int, ky: int) -> "Jet":
        """The coordinate function r (direction 0) or y^direction."""
        idx = [0] * self.n
        idx[direction] = 1
        return Jet._make(self, kr, ky, {tuple(idx): self.backend.one()})

    def jet(self, coeffs: Mapping[tuple, object], kr: int, ky: int) -> "Jet":
        """Build a jet from an index->value mapping, validating the indices."""
        out = {}
        for idx, val in coeffs.items():
            idx = tuple(int(i) for i in idx)
            if len(idx) != self.n or any(i < 0 for i in idx):
                raise IncompatibleJetsError("bad multi-index %r for n=%d" % (idx, self.n))
            if idx[0] > kr or sum(idx[1:]) > ky:
                raise IncompatibleJetsError(
                    "index %r exceeds truncation orders (%d, %d)" % (idx, kr, ky)
                )
            v = self.backend.coerce(val)
            if v:
                out[idx] = v
        return Jet._make(self, kr, ky, out)


class Jet:
    __slots__ = ("space", "kr", "ky", "c")

    def __init__(self, *args, **kwargs):
        raise TypeError("use JetSpace constructors or Jet arithmetic to build jets")

    @classmethod
    def _make(cls, space: JetSpace, kr: int, ky: int, coeffs: dict) -> "Jet":
        self = object.__new__(cls)
        self.space = space
        self.kr = kr
        self.ky = ky
        self.c = coeffs
        return self

    # -- bookkeeping -------------------------------------------------------

    def _check_space(self, other: "Jet"):
        if self.space is not other.space and self.space != other.space:
            raise IncompatibleJetsError(
                "jets from %r and %r cannot combine" % (self.space, other.space)
            )

    def truncated(self, kr: int, ky: int) -> "Jet":
        """Restriction to lower truncation orders (drops excess indices)."""
        kr = min(kr, self.kr)
        ky = min(ky, self.ky)
        if kr == self.kr and ky == self.ky:
            return self
        out = {
            idx: v for idx, v in self.c.items() if idx[0] <= kr and sum(idx[1:]) <= ky
        }
        return Jet._make(self.space, kr, ky, out)

    def _aligned(self, other: "Jet"):
        self._check_space(other)
        kr = min(self.kr, other.kr)
        ky = min(self.ky, other.ky)
        return self.truncated(kr, ky), other.truncated(kr, ky), kr, ky

    def with_budgets(self, kr: int, ky: int) -> "Jet":
        """Re-declare truncation orders.  Raising an order asserts that the
        dropped tail is genuinely zero; only callers constructing functions
        from known coefficients may do that."""
        if kr < self.kr or ky < self.ky:
            return self.truncated(kr, ky)
        return Jet._make(self.space, kr, ky, dict(self.c))

    @property
    def is_zero(self) -> bool:
        return not self.c

    def constant_term(self):
        return self.c.get((0,) * self.space.n, self.space.backend.zero())

    def __eq__(self, other):
        if isinstance(other, (int, str)) or type(other).__name__ in ("mpq", "Fraction"):
            other = self.space.constant(other, self.kr, self.ky)
        if not isinstance(other, Jet):
            return NotImplemented
        a, b, _, _ = self._aligned(other)
        return a.c == b.c

    def __hash__(self):
        return hash((self.kr, self.ky, frozenset(self.c.items())))

    # -- ring operations ----------------------------------------------------

    def __add__(self, other):
        if not isinstance(other, Jet):
            other = self.space.constant(other, self.kr, self.ky)
        a, b, kr, ky = self._aligned(other)
        out = dict(a.c)
        for idx, v in b.c.items():
            s = out.get(idx)
            if s is None:
                out[idx] = v
            else:
                s = s + v
                if s:
                    out[idx] = s
                else:
                    del out[idx]
        return Jet._make(self.space, kr, ky, out)

    __radd__ = __add__

    def __neg__(self):
        return Jet._make(self.space, self.kr, self.ky, {i: -v for i, v in self.c.items()})

    def __sub__(self, other):
        if not isinstance(other, Jet):
            other = self.space.constant(other, self.kr, self.ky)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return self.scale(other)
        self._check_space(other)
        kr = self.kr if self.kr < other.kr else other.kr
        ky = self.ky if self.ky < other.ky else other.ky
        ac, bc = self.c, other.c
        if not ac or not bc:
            return Jet._make(self.space, kr, ky, {})
        if len(bc) < len(ac):
            ac, bc = bc, ac
        bitems = []
        for i2, v2 in bc.items():
            m2 = i2[0]
            t2 = sum(i2[1:])
            if m2 <= kr and t2 <= ky:
                bitems.append((i2, m2, t2, v2))
        out: dict = {}
        get = out.get
        for i1, v1 in ac.items():
            m1 = i1[0]
            if m1 > kr:
                continue
            t1 = sum(i1[1:])
            if t1 > ky:
                continue
            mmax = kr - m1
            tmax = ky - t1
            for i2, m2, t2, v2 in bitems:
                if m2 > mmax or t2 > tmax:
                    continue
                idx = tuple(map(int.__add__, i1, i2))
                cur = get(idx)
                if cur is None:
                    out[idx] = v1 * v2
                else:
                    out[idx] = cur + v1 * v2
        return Jet._make(
            self.space, kr, ky, {k: v for k, v in out.items() if v}
        )

    __rmul__ = __mul__

    def scale(self, value) -> "Jet":
        v = self.space.backend.coerce(value)
        if not v:
            return Jet._make(self.space, self.kr, self.ky, {})
        return Jet._make(
            self.space, self.kr, self.ky, {i: c * v for i, c in self.c.items()}
        )

    # -- calculus ------------------------------------------------------------

    def partial(self, direction: int) -> "Jet":
        """Formal partial derivative; spends one unit of the matching budget."""
        n = self.space.n
        if not 0 <= direction < n:
            raise IncompatibleJetsError("direction %d out of range" % direction)
        if direction == 0:
            if self.kr == 0:
                raise BudgetExhaustedError("radial derivative budget exhausted")
            kr, ky = self.kr - 1, self.ky
        else:
            if self.ky == 0:
                raise BudgetExhaustedError("tangential derivative budget exhausted")
            kr, ky = self.kr, self.ky - 1
        out = {}
        for idx, v in self.c.items():
            e = idx[direction]
            if e == 0:
                continue
            nidx = idx[:direction] + (e - 1,) + idx[direction + 1 :]
            out[nidx] = v * e
        return Jet._make(self.space, kr, ky, out)

    def restricted_to_boundary(self) -> "Jet":
        """The y-jet at r = 0 (keeps only radially constant coefficients)."""
        out = {i: v for i, v in self.c.items() if i[0] == 0}
        return Jet._make(self.space, 0, self.ky, out)

    def radial_coefficient(self, m: int) -> "Jet":
        """The y-jet multiplying r^m (a Taylor coefficient, not a derivative)."""
        out = {(0,) + i[1:]: v for i, v in self.c.items() if i[0] == m}
        return Jet._make(self.space, 0, self.ky, out)

    def radial_derivative_at_zero(self, m: int) -> "Jet":
        """The y-jet of the m-th radial derivative at r = 0."""
        return self.radial_coefficient(m).scale(math.factorial(m))

    # -- series functions ------------------------------------------------------

    def _series(self, coefficients: Iterable) -> "Jet":
        """Sum coeff[k] * (self - self(0))^k; the deviation has positive order
        so the sum terminates at total order kr + ky."""
        c0 = self.constant_term()
        u = self - c0
        acc = self.space.constant(0, self.kr, self.ky)
        power = self.space.one(self.kr, self.ky)
        for k, coeff in enumerate(coefficients):
            if k > 0:
                power = power * u
                if power.is_zero:
                    break
            acc = acc + power.scale(coeff)
        return acc

    def _series_order(self) -> int:
        return self.kr + self.ky + 1

    def reciprocal(self) -> "Jet":
        """Multiplicative inverse; requires a nonzero constant term."""
        c0 = self.constant_term()
        if not c0:
            raise NotInvertibleError("reciprocal of a jet with zero constant term")
        one = self.space.backend.one()
        inv0 = one / c0
        coeffs = []
        acc = inv0
        for _ in range(self._series_order()):
            coeffs.append(acc)
            acc = -acc * inv0
        return self._series(coeffs)

    def sqrt(self) -> "Jet":
        """Square root with positive constant term; exact in the rational
        backend only when the constant term is a perfect square."""
        backend = self.space.backend
        c0 = self.constant_term()
        if backend.exact:
            if c0 <= 0:
                raise NotInvertibleError("sqrt of a jet with non-positive constant term")
        s0 = backend.sqrt(c0)
        return self._binomial_series(s0, c0, 2)

    def nth_root(self, k: int) -> "Jet":
        """k-th root with positive constant term (exactness as for sqrt)."""
        backend = self.space.backend
        c0 = self.constant_term()
        if backend.exact and c0 <= 0:
            raise NotInvertibleError("root of a jet with non-positive constant term")
        s0 = backend.nth_root(c0, k)
        return self._binomial_series(s0, c0, k)

    def _binomial_series(self, s0, c0, k: int) -> "Jet":
        # (c0 + u)^(1/k) = s0 * sum C(1/k, j) (u/c0)^j
        backend = self.space.backend
        one = backend.one()
        alpha = one / backend.coerce(k)
        inv0 = one / c0
        coeffs = []
        binom = one
        for j in range(self._series_order()):
            coeffs.append(s0 * binom * inv0**j)
            binom = binom * (alpha - j) / (j + 1)
        return self._series(coeffs)

    def exp(self) -> "Jet":
        """Truncated exponential; the rational backend needs a zero constant
        term so the result stays in the field."""
        backend = self.space.backend
        e0 = backend.exp(self.constant_term())
        one = backend.one()
        coeffs = []
        acc = e0
        for j in range(self._series_order()):
            coeffs.append(acc)
            acc = acc * one / backend.coerce(j + 1)
        return self._series(coeffs)

    def log(self) -> "Jet":
        """Truncated logarithm; the rational backend needs constant term 1."""
        backend = self.space.backend
        c0 = self.constant_term()
        if not c0 or (not backend.exact and c0 <= 0):
            raise NotInvertibleError("log of a jet with non-positive constant term")
        l0 = backend.log(c0)
        one = backend.one()
        inv0 = one / c0
        coeffs = [l0]
        for j in range(1, self._series_order()):
            coeffs.append((-one) ** (j + 1) * inv0**j / backend.coerce(j))
        return self._series(coeffs)

    # -- display ---------------------------------------------------------------

    def _monomial_str(self, idx) -> str:
        parts = []
        names = ["r"] + ["y%d" % a for a in range(1, self.space.n)]
        for name, e in zip(names, idx):
            if e == 1:
                parts.append(name)
            elif e > 1:
                parts.append("%s^%d" % (name, e))
        return "*".join(parts)

    def __repr__(self):
        if not self.c:
            return "Jet(0)"
        terms = []
        for idx in sorted(self.c):
            mono = self._monomial_str(idx)
            val = self.space.backend.to_str(self.c[idx])
            terms.append(val if not mono else "%s*%s" % (val, mono))
        return "Jet(%s)" % " + ".join(terms)


def dense_product_oracle(a: Jet, b: Jet) -> Jet:
    """Independent convolution over all coefficient pairs, truncated afterwards.

    Deliberately ignores every shortcut the fast path takes; used by tests.
    """
    a2, b2, kr, ky = a._aligned(b)
    out: dict = {}
    for i1, v1 in a2.c.items():
        for i2, v2 in b2.c.items():
            idx = tuple(x + y for x, y in zip(i1, i2))
            out[idx] = out.get(idx, a.space.backend.zero()) + v1 * v2
    out = {
        idx: v
        for idx, v in out.items()
        if v and idx[0] <= kr and sum(idx[1:]) <= ky
    }
    return Jet._make(a.space, kr, ky, out)


def collar_from_radial_orders(
    space: JetSpace, orders: list, kr: int, ky: int
) -> Jet:
    """Assemble sum_m r^m/m! * orders[m](y) from boundary y-jets.

    The orders are m-th radial derivatives at r = 0; tangential content beyond
    each y-jet's own truncation is asserted to be zero.
    """
    coeffs: dict = {}
    for m, yjet in enumerate(orders):
        if yjet is None:
            continue
        if m > kr:
            raise BudgetExhaustedError("radial order %d exceeds budget %d" % (m, kr))
        fact = math.factorial(m)
        for idx, v in yjet.c.items():
            if sum(idx[1:]) > ky:
                continue
            coeffs[(m,) + idx[1:]] = v / space.backend.coerce(fact)
    return Jet._make(space, kr, ky, coeffs)
