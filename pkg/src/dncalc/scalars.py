"""Scalar backends for jet coefficients.

Two backends are supported and selected per run: exact rationals (the
default, backed by gmpy2.mpq when available) and double-precision floats.
Exactness of the rational backend is what makes all the residual and
round-trip checks zero-tolerance, so rational operations that would leave
the field (square roots of non-squares, exp of a nonzero rational) raise
instead of approximating.
"""

from __future__ import annotations

import math

from .errors import BackendError, NotInvertibleError

try:
    from gmpy2 import mpq

    _HAVE_GMPY2 = True
except ImportError:  # pragma: no cover - gmpy2 is a declared dependency
    from fractions import Fraction as mpq

    _HAVE_GMPY2 = False


def _int_nth_root(n: int, k: int) -> int | None:
    """Exact integer k-th root of n >= 0, or None if n is not a k-th power."""
    if n < 0:
        return None
    if n in (0, 1) or k == 1:
        return n
    # Newton iteration on integers.
    x = 1 << (-(-n.bit_length() // k))
    while True:
        y = ((k - 1) * x + n // x ** (k - 1)) // k
        if y >= x:
            break
        x = y
    return x if x**k == n else None


def rational(value) -> "mpq":
    """Coerce ints, 'p/q' strings and rational-like values to the exact type."""
    if isinstance(value, float):
        raise BackendError("float value %r not allowed in the rational backend" % value)
    return mpq(value)


class RationalBackend:
    name = "rational"
    exact = True

    @staticmethod
    def coerce(value):
        return rational(value)

    @staticmethod
    def zero():
        return mpq(0)

    @staticmethod
    def one():
        return mpq(1)

    @staticmethod
    def sqrt(c):
        if c < 0:
            raise NotInvertibleError("square root of negative rational %s" % c)
        num = _int_nth_root(int(c.numerator), 2)
        den = _int_nth_root(int(c.denominator), 2)
        if num is None or den is None:
            raise BackendError("%s is not a perfect rational square" % c)
        return mpq(num, den)

    @staticmethod
    def nth_root(c, k):
        if c <= 0:
            raise NotInvertibleError("%d-th root of non-positive rational %s" % (k, c))
        num = _int_nth_root(int(c.numerator), k)
        den = _int_nth_root(int(c.denominator), k)
        if num is None or den is None:
            raise BackendError("%s is not a perfect rational %d-th power" % (c, k))
        return mpq(num, den)

    @staticmethod
    def exp(c):
        if c != 0:
            raise BackendError(
                "exp of nonzero constant term %s leaves the rational field" % c
            )
        return mpq(1)

    @staticmethod
    def log(c):
        if c != 1:
            raise BackendError(
                "log of constant term %s != 1 leaves the rational field" % c
            )
        return mpq(0)

    @staticmethod
    def to_float(c):
        return float(c)

    @staticmethod
    def to_str(c):
        return str(c)

    @staticmethod
    def from_str(s: str):
        return mpq(s)


class FloatBackend:
    name = "float"
    exact = False

    @staticmethod
    def coerce(value):
        if isinstance(value, str):
            return float(mpq(value))
        return float(value)

    @staticmethod
    def zero():
        return 0.0

    @staticmethod
    def one():
        return 1.0

    @staticmethod
    def sqrt(c):
        if c <= 0:
            raise NotInvertibleError("square root of non-positive constant %s" % c)
        return math.sqrt(c)

    @staticmethod
    def nth_root(c, k):
        if c <= 0:
            raise NotInvertibleError("%d-th root of non-positive constant %s" % (k, c))
        return c ** (1.0 / k)

    @staticmethod
    def exp(c):
        return math.exp(c)

    @staticmethod
    def log(c):
        if c <= 0:
            raise NotInvertibleError("log of non-positive constant %s" % c)
        return math.log(c)

    @staticmethod
    def to_float(c):
        return c

    @staticmethod
    def to_str(c):
        return repr(c)

    @staticmethod
    def from_str(s: str):
        return float(s)


RATIONAL = RationalBackend()
FLOAT = FloatBackend()

_BACKENDS = {"rational": RATIONAL, "float": FLOAT}


def get_backend(name: str):
    try:
        return _BACKENDS[name]
    except KeyError:
        raise BackendError("unknown scalar backend %r" % name) from None
