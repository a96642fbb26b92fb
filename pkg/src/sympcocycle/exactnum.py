"""Exact arithmetic in the quadratic field Q(sqrt(5)).

Periodic points of the torus automorphism are rational, but points on
its invariant manifolds (hence heteroclinic points) have coordinates of
the form a + b*sqrt(5) with rational a, b.  Carrying them exactly
removes all shadowing error from long forward/backward orbits; the
denominators are invariant under the integer map so iteration never
inflates the representation.
"""

from __future__ import annotations

import math
from fractions import Fraction

__all__ = ["QuadraticNumber", "as_quadratic", "mod1", "floor_exact"]


class QuadraticNumber:
    """An element a + b*sqrt(5) with exact rational a, b."""

    __slots__ = ("a", "b")

    def __init__(self, a=0, b=0):
        self.a = Fraction(a)
        self.b = Fraction(b)

    # -- ring operations -------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, QuadraticNumber):
            return other
        if isinstance(other, (int, Fraction)):
            return QuadraticNumber(other, 0)
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return QuadraticNumber(self.a + o.a, self.b + o.b)

    __radd__ = __add__

    def __neg__(self):
        return QuadraticNumber(-self.a, -self.b)

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return QuadraticNumber(self.a - o.a, self.b - o.b)

    def __rsub__(self, other):
        return (-self).__add__(other)

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return QuadraticNumber(self.a * o.a + 5 * self.b * o.b, self.a * o.b + self.b * o.a)

    __rmul__ = __mul__

    def inverse(self):
        den = self.a * self.a - 5 * self.b * self.b
        if den == 0:
            raise ZeroDivisionError("division by zero in Q(sqrt(5))")
        return QuadraticNumber(self.a / den, -self.b / den)

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return self * o.inverse()

    def __rtruediv__(self, other):
        return self.inverse() * other

    # -- order ------------------------------------------------------------
    def sign(self):
        """Exact sign of a + b*sqrt(5)."""
        a, b = self.a, self.b
        if b == 0:
            return (a > 0) - (a < 0)
        if a == 0:
            return 1 if b > 0 else -1
        if a > 0 and b > 0:
            return 1
        if a < 0 and b < 0:
            return -1
        # opposite signs: compare a^2 against 5 b^2
        cmp = a * a - 5 * b * b
        s = (cmp > 0) - (cmp < 0)
        return s if a > 0 else -s

    def _cmp(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return (self - o).sign()

    def __lt__(self, other):
        return self._cmp(other) < 0

    def __le__(self, other):
        return self._cmp(other) <= 0

    def __gt__(self, other):
        return self._cmp(other) > 0

    def __ge__(self, other):
        return self._cmp(other) >= 0

    def __eq__(self, other):
        if isinstance(other, (QuadraticNumber, int, Fraction)):
            return self._cmp(other) == 0
        return NotImplemented

    def __hash__(self):
        if self.b == 0:
            return hash(self.a)
        return hash((self.a, self.b))

    # -- conversions -------------------------------------------------------
    def __float__(self):
        # a and b may be huge with near-total cancellation (orbits of a
        # hyperbolic map), so sqrt(5) is approximated rationally with
        # enough bits for the cancellation before a single final rounding.
        if self.b == 0:
            return float(self.a)
        bits = abs(self.b.numerator).bit_length() + 64
        scale = 1 << bits
        s5 = Fraction(math.isqrt(5 * scale * scale), scale)
        return float(self.a + self.b * s5)

    def __repr__(self):
        if self.b == 0:
            return f"QuadraticNumber({self.a})"
        return f"QuadraticNumber({self.a}, {self.b})"

    def floor(self):
        """Exact integer floor, using a float guess corrected by exact
        comparisons (the guess is off by at most one ulp-scale unit)."""
        n = math.floor(float(self))
        while self._cmp(n) < 0:
            n -= 1
        while self._cmp(n + 1) >= 0:
            n += 1
        return n

    def mod1(self):
        return self - self.floor()

    @property
    def is_rational(self):
        return self.b == 0


def as_quadratic(x):
    """Coerce an int/Fraction/QuadraticNumber into the field."""
    if isinstance(x, QuadraticNumber):
        return x
    return QuadraticNumber(x, 0)


def floor_exact(x):
    """Floor for float, Fraction, or QuadraticNumber inputs."""
    if isinstance(x, QuadraticNumber):
        return x.floor()
    return math.floor(x)


def mod1(x):
    """Reduce a coordinate into [0, 1) exactly for exact types."""
    if isinstance(x, QuadraticNumber):
        return x.mod1()
    if isinstance(x, Fraction):
        return x - math.floor(x)
    return x % 1.0
