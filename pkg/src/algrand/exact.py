"""Exact numbers: rationals, dyadic intervals and precision-indexed reals.

Rationals are :class:`fractions.Fraction`.  Transcendental quantities
(pi, logarithms, sines and cosines of rational angles) are enclosed in
dyadic intervals computed with integer fixed-point series and explicit
error bounds, so every result here is reproducible bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Union

Rational = Fraction
Number = Union[int, Fraction]

# guard bits carried by the fixed-point series before the final outward rounding
GUARD = 24


def as_rational(x: Union[Number, str]) -> Fraction:
    """Coerce ints, Fractions and "num/den" strings; floats are refused."""
    if isinstance(x, float):
        raise TypeError("binary floating point is not accepted; pass a Fraction or 'num/den'")
    return Fraction(x)


def frac_part(x: Number) -> Fraction:
    """``x - floor(x)``, always in [0, 1)."""
    x = as_rational(x)
    return x - math.floor(x)


def pow_rational(r: Number, n: int) -> Fraction:
    if n < 0:
        raise ValueError("exponent must be nonnegative")
    return as_rational(r) ** n


def is_dyadic(x: Fraction) -> bool:
    d = x.denominator
    return d & (d - 1) == 0


def floor_dyadic(x: Fraction, p: int) -> Fraction:
    """Largest multiple of 2^-p not above x."""
    return Fraction(math.floor(x * (1 << p)), 1 << p)


def ceil_dyadic(x: Fraction, p: int) -> Fraction:
    return Fraction(math.ceil(x * (1 << p)), 1 << p)


@dataclass(frozen=True)
class DyadicInterval:
    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        lo, hi = Fraction(self.lo), Fraction(self.hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if not (is_dyadic(lo) and is_dyadic(hi)):
            raise ValueError(f"endpoints must be dyadic: [{lo}, {hi}]")
        if lo > hi:
            raise ValueError(f"empty interval [{lo}, {hi}]")

    @classmethod
    def point(cls, x: Number) -> "DyadicInterval":
        x = as_rational(x)
        return cls(x, x)

    @classmethod
    def enclosing(cls, lo: Fraction, hi: Fraction, p: int) -> "DyadicInterval":
        """Outward-rounded enclosure of [lo, hi] on the grid 2^-p."""
        lo, hi = Fraction(lo), Fraction(hi)
        if not is_dyadic(lo):
            lo = floor_dyadic(lo, p)
        if not is_dyadic(hi):
            hi = ceil_dyadic(hi, p)
        return cls(lo, hi)

    @classmethod
    def from_fixed(cls, lo: int, hi: int, p: int) -> "DyadicInterval":
        return cls(Fraction(lo, 1 << p), Fraction(hi, 1 << p))

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def midpoint(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def contains(self, x: Number) -> bool:
        return self.lo <= as_rational(x) <= self.hi

    def intersects(self, other: "DyadicInterval") -> bool:
        return self.lo <= other.hi and other.lo <= self.hi

    def __add__(self, other: "DyadicInterval") -> "DyadicInterval":
        if not isinstance(other, DyadicInterval):
            other = DyadicInterval.point(other)
        return DyadicInterval(self.lo + other.lo, self.hi + other.hi)

    __radd__ = __add__

    def __neg__(self) -> "DyadicInterval":
        return DyadicInterval(-self.hi, -self.lo)

    def __sub__(self, other: "DyadicInterval") -> "DyadicInterval":
        if not isinstance(other, DyadicInterval):
            other = DyadicInterval.point(other)
        return self + (-other)

    def __mul__(self, other: "DyadicInterval") -> "DyadicInterval":
        if not isinstance(other, DyadicInterval):
            other = DyadicInterval.point(other)
        products = (self.lo * other.lo, self.lo * other.hi, self.hi * other.lo, self.hi * other.hi)
        return DyadicInterval(min(products), max(products))

    def square(self) -> "DyadicInterval":
        lo, hi = self.lo, self.hi
        if lo >= 0:
            return DyadicInterval(lo * lo, hi * hi)
        if hi <= 0:
            return DyadicInterval(hi * hi, lo * lo)
        return DyadicInterval(Fraction(0), max(lo * lo, hi * hi))

    def scale(self, c: Number, p: int) -> "DyadicInterval":
        """Multiply by a rational, rounding outward to the grid 2^-p if needed."""
        c = as_rational(c)
        a, b = self.lo * c, self.hi * c
        if a > b:
            a, b = b, a
        return DyadicInterval.enclosing(a, b, p)

    def __str__(self) -> str:
        return f"[{self.lo}, {self.hi}]"


class CauchyReal:
    """A real given by rational approximants ``q_k`` with ``|q_k - x| <= 2^-k``.

    Approximants are cached, so refinement is deterministic for a fixed
    instance.
    """

    def __init__(self, approximant: Callable[[int], Fraction], exact: Fraction | None = None,
                 name: str = "real"):
        self._approximant = approximant
        self._cache: dict[int, Fraction] = {}
        self.exact = exact
        self.name = name

    @classmethod
    def from_rational(cls, q: Number) -> "CauchyReal":
        q = as_rational(q)
        return cls(lambda k: q, exact=q, name=str(q))

    def approx(self, k: int) -> Fraction:
        if k < 0:
            raise ValueError("precision index must be nonnegative")
        if k not in self._cache:
            self._cache[k] = Fraction(self._approximant(k))
        return self._cache[k]

    def refine(self, k: int) -> DyadicInterval:
        return refine(self, k)

    def __repr__(self) -> str:
        return f"CauchyReal({self.name})"


def refine(x: CauchyReal, k: int) -> DyadicInterval:
    """Dyadic interval of width at most 2^(1-k) containing ``x``."""
    if k < 0:
        raise ValueError("precision index must be nonnegative")
    if x.exact is not None:
        if is_dyadic(x.exact):
            return DyadicInterval.point(x.exact)
        return DyadicInterval(floor_dyadic(x.exact, k + 1), ceil_dyadic(x.exact, k + 1))
    # q_{k+1} is within 2^-(k+1); rounding each end to 2^-(k+2) keeps width <= 1.5 * 2^-k
    q = x.approx(k + 1)
    r = Fraction(1, 1 << (k + 1))
    return DyadicInterval(floor_dyadic(q - r, k + 2), ceil_dyadic(q + r, k + 2))


def check_cauchy_consistency(x: CauchyReal, kmax: int) -> tuple[int, int] | None:
    """First (i, k) with |q_i - q_k| > 2^-i + 2^-k, or None."""
    qs = [x.approx(k) for k in range(kmax + 1)]
    for k in range(kmax + 1):
        for i in range(k + 1):
            if abs(qs[i] - qs[k]) > Fraction(1, 1 << i) + Fraction(1, 1 << k):
                return (i, k)
    return None


def sqrt_real(n: int) -> CauchyReal:
    """Square root of a nonnegative integer; approximant floor(sqrt(n) 2^k) / 2^k."""
    if n < 0:
        raise ValueError("negative radicand")
    return CauchyReal(lambda k: Fraction(math.isqrt(n << (2 * k)), 1 << k), name=f"sqrt({n})")


def champernowne_binary_digits(count: int) -> str:
    """First ``count`` binary digits of 0.1 10 11 100 101 ..."""
    parts = []
    total = 0
    m = 1
    while total < count:
        b = format(m, "b")
        parts.append(b)
        total += len(b)
        m += 1
    return "".join(parts)[:count]


def champernowne_binary() -> CauchyReal:
    def approx(k: int) -> Fraction:
        if k == 0:
            return Fraction(0)
        return Fraction(int(champernowne_binary_digits(k), 2), 1 << k)

    return CauchyReal(approx, name="champernowne2")


# --- fixed-point transcendental kernels -------------------------------------
# A fixed-point number at precision q is an int X standing for X / 2^q.
# Every kernel returns (value, err) with |true - value| <= err ulps.


def _atan_inv_fixed(x: int, q: int) -> tuple[int, int]:
    """arctan(1/x) for an integer x >= 2."""
    one = 1 << q
    power = one // x
    x2 = x * x
    total = power
    k = 1
    terms = 1
    while power:
        power //= x2
        term = power // (2 * k + 1)
        total += -term if k % 2 else term
        k += 1
        terms += 1
    return total, 2 * terms + 2


@lru_cache(maxsize=64)
def pi_fixed(p: int) -> tuple[int, int]:
    """Fixed-point enclosure (lo, hi) of pi at precision p."""
    q = p + GUARD
    a, ea = _atan_inv_fixed(5, q)
    b, eb = _atan_inv_fixed(239, q)
    value = 16 * a - 4 * b
    err = 16 * ea + 4 * eb
    return (value - err) >> GUARD, -((-(value + err)) >> GUARD)


def pi_interval(p: int) -> DyadicInterval:
    lo, hi = pi_fixed(p)
    return DyadicInterval.from_fixed(lo, hi, p)


def _sin_cos_series(x: int, q: int) -> tuple[int, int, int]:
    """sin and cos of X/2^q for 0 <= X/2^q <= 1 by alternating Taylor series."""
    one = 1 << q
    x2 = (x * x) >> q
    # sine
    term = x
    s = x
    k = 1
    terms = 1
    while term:
        term = (term * x2 >> q) // ((2 * k) * (2 * k + 1))
        s += -term if k % 2 else term
        k += 1
        terms += 1
    # cosine
    term = one
    c = one
    k = 1
    while term:
        term = (term * x2 >> q) // ((2 * k - 1) * (2 * k))
        c += -term if k % 2 else term
        k += 1
        terms += 1
    return s, c, 2 * terms + 6


_EXACT_QUARTERS = {
    Fraction(0): (1, 0),
    Fraction(1, 4): (0, 1),
    Fraction(1, 2): (-1, 0),
    Fraction(3, 4): (0, -1),
}


def cos_sin_2pi_fixed(theta: Fraction, p: int) -> tuple[int, int, int, int]:
    """Fixed-point enclosures of cos(2 pi theta) and sin(2 pi theta) at precision p.

    Returns ``(cos_lo, cos_hi, sin_lo, sin_hi)``; the reals are these
    integers divided by 2^p.
    """
    return _cos_sin_2pi_cached(theta.numerator, theta.denominator, p)


@lru_cache(maxsize=1 << 16)
def _cos_sin_2pi_cached(num: int, den: int, p: int) -> tuple[int, int, int, int]:
    t = Fraction(num % den, den)
    if t in _EXACT_QUARTERS:
        c, s = _EXACT_QUARTERS[t]
        return c << p, c << p, s << p, s << p
    octant = (8 * t.numerator) // t.denominator
    phi = t - Fraction(octant, 8)
    psi = Fraction(1, 8) - phi if octant % 2 else phi
    q = p + GUARD
    pi_lo, pi_hi = pi_fixed(q)
    # angle 2 pi psi in [0, pi/4], enclosed as [a_lo, a_hi] at precision q
    a_lo = (2 * pi_lo * psi.numerator) // psi.denominator
    a_hi = -((-2 * pi_hi * psi.numerator) // psi.denominator)
    mid = (a_lo + a_hi) // 2
    s, c, err = _sin_cos_series(mid, q)
    # |sin'|, |cos'| <= 1, so the angle uncertainty adds at most its half-width
    err += (a_hi - a_lo) // 2 + 2
    s_lo, s_hi = s - err, s + err
    c_lo, c_hi = c - err, c + err
    if octant in (1, 2, 5, 6):
        base = ((s_lo, s_hi), (c_lo, c_hi))
    else:
        base = ((c_lo, c_hi), (s_lo, s_hi))
    cos_sign = -1 if octant in (2, 3, 4, 5) else 1
    sin_sign = -1 if octant >= 4 else 1

    def signed(iv, sign):
        lo, hi = iv
        if sign < 0:
            lo, hi = -hi, -lo
        return lo >> GUARD, -((-hi) >> GUARD)

    clo, chi = signed(base[0], cos_sign)
    slo, shi = signed(base[1], sin_sign)
    return clo, chi, slo, shi


def cos_sin_2pi(theta: Number, p: int) -> tuple[DyadicInterval, DyadicInterval]:
    theta = as_rational(theta)
    clo, chi, slo, shi = cos_sin_2pi_fixed(theta, p)
    return DyadicInterval.from_fixed(clo, chi, p), DyadicInterval.from_fixed(slo, shi, p)


def _atanh_fixed(y_num: int, y_den: int, q: int) -> tuple[int, int]:
    """atanh(y) for 0 <= y <= 1/3 given as a rational."""
    y = (y_num << q) // y_den
    y2 = (y * y) >> q
    power = y
    total = y
    k = 1
    terms = 1
    while power:
        power = (power * y2) >> q
        total += power // (2 * k + 1)
        k += 1
        terms += 1
    # the floor of y costs at most 1.2 ulps through the series derivative
    return total, 2 * terms + 4


@lru_cache(maxsize=64)
def _ln2_fixed(q: int) -> tuple[int, int]:
    v, e = _atanh_fixed(1, 3, q)
    return 2 * v, 2 * e


def ln_fixed(x: Fraction, p: int) -> tuple[int, int]:
    """Fixed-point enclosure (lo, hi) of ln(x) at precision p, for rational x > 0."""
    x = as_rational(x)
    if x <= 0:
        raise ValueError("logarithm of a nonpositive number")
    if x == 1:
        return 0, 0
    e = x.numerator.bit_length() - x.denominator.bit_length()
    m = x / Fraction(2) ** e
    if m < 1:
        m *= 2
        e -= 1
    elif m >= 2:
        m /= 2
        e += 1
    g = GUARD + abs(e).bit_length()
    q = p + g
    y = (m - 1) / (m + 1)
    v, err = _atanh_fixed(y.numerator, y.denominator, q)
    v, err = 2 * v, 2 * err
    if e:
        l2, el2 = _ln2_fixed(q)
        v += e * l2
        err += abs(e) * el2
    return (v - err) >> g, -((-(v + err)) >> g)


def ln_interval(x: Number, p: int) -> DyadicInterval:
    lo, hi = ln_fixed(as_rational(x), p)
    return DyadicInterval.from_fixed(lo, hi, p)


def ln_upper(x: Number, p: int = 64) -> Fraction:
    return ln_interval(x, p).hi


def ln_lower(x: Number, p: int = 64) -> Fraction:
    return ln_interval(x, p).lo


def rational_str(x: Number) -> str:
    """Canonical "num/den" wire form."""
    x = as_rational(x)
    return f"{x.numerator}/{x.denominator}"


def parse_rational(text: str) -> Fraction:
    text = text.strip()
    if any(c in text for c in ".eE") and "/" not in text:
        raise ValueError(f"decimal literals are not accepted: {text!r}")
    return Fraction(text)
