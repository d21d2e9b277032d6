"""Orbits modulo one, Weyl sums, uniform-distribution defect and Solovay-test budgets."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Callable, Sequence, Union

from .exact import (
    CauchyReal,
    DyadicInterval,
    as_rational,
    cos_sin_2pi_fixed,
    frac_part,
    ln_fixed,
    ln_interval,
    refine,
)

Point = Union[Fraction, DyadicInterval]


class InsufficientPrecision(ArithmeticError):
    """An enclosure straddles an integer, so its fractional part is not localized."""


class IntervalPointsUnsupported(TypeError):
    pass


class GapViolation(ValueError):
    pass


@dataclass(frozen=True)
class PowerBase:
    """Multiplier law x * r^n."""

    r: Fraction

    def __post_init__(self):
        object.__setattr__(self, "r", as_rational(self.r))
        if self.r <= 1:
            raise ValueError("power base must exceed 1")


@dataclass(frozen=True)
class SeparatedSequence:
    """Multiplier law u_n * x with |u_i - u_j| > gap for i != j."""

    u: Callable[[int], Fraction]
    gap: Fraction

    def __post_init__(self):
        object.__setattr__(self, "gap", as_rational(self.gap))
        if self.gap <= 0:
            raise ValueError("gap must be positive")

    def multipliers(self, n: int) -> list[Fraction]:
        us = [as_rational(self.u(j)) for j in range(n)]
        ordered = sorted(us)
        for a, b in zip(ordered, ordered[1:]):
            if b - a <= self.gap:
                raise GapViolation(f"multipliers {a} and {b} are not {self.gap}-separated")
        return us


def integer_multipliers() -> SeparatedSequence:
    """u_j = j, separated with gap 1/2 (any gap below 1 works; the bound uses k = 1)."""
    return SeparatedSequence(lambda j: Fraction(j), Fraction(1, 2))


@dataclass(frozen=True)
class OrbitSpec:
    seed: Union[Fraction, CauchyReal]
    law: Union[PowerBase, SeparatedSequence]


@dataclass
class PointSample:
    points: list

    def __post_init__(self):
        pts = []
        for x in self.points:
            if isinstance(x, DyadicInterval):
                if x.hi < 0 or x.lo >= 1:
                    raise ValueError(f"interval point {x} misses [0, 1)")
                pts.append(x)
            else:
                x = as_rational(x)
                if not 0 <= x < 1:
                    raise ValueError(f"point {x} outside [0, 1)")
                pts.append(x)
        self.points = pts

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def exact(self) -> bool:
        return all(isinstance(x, Fraction) for x in self.points)


@dataclass(frozen=True)
class UdVerdict:
    defect: Fraction
    bins: int
    n: int
    counts: tuple


def _ceil_log2(r: Fraction) -> int:
    # smallest b >= 0 with r <= 2^b
    b = max(0, r.numerator.bit_length() - r.denominator.bit_length())
    while Fraction(1 << b) < r:
        b += 1
    while b > 0 and Fraction(1 << (b - 1)) >= r:
        b -= 1
    return b


def _frac_interval(iv: DyadicInterval) -> DyadicInterval:
    fl = math.floor(iv.lo)
    if math.floor(iv.hi) != fl or iv.hi == fl + 1:
        raise InsufficientPrecision(f"enclosure {iv} straddles an integer")
    return DyadicInterval(iv.lo - fl, iv.hi - fl)


def orbit_frac(spec: OrbitSpec, n: int, k: int = 30) -> PointSample:
    """First ``n`` points of frac(x r^j) or frac(u_j x).

    Rational seeds give exact points; a :class:`CauchyReal` seed gives
    dyadic intervals of width at most 2^-k.
    """
    if n < 1:
        raise ValueError("need at least one orbit point")
    seed, law = spec.seed, spec.law
    if isinstance(seed, CauchyReal) and seed.exact is not None:
        seed = seed.exact
    if isinstance(law, PowerBase):
        r = law.r
        if not isinstance(seed, CauchyReal):
            x = as_rational(seed)
            if r.denominator == 1:
                # integer base: frac(x r^{j+1}) = frac(frac(x r^j) r)
                y = frac_part(x)
                out = [y]
                for _ in range(n - 1):
                    y = frac_part(y * r)
                    out.append(y)
                return PointSample(out)
            value = x
            out = []
            for _ in range(n):
                out.append(frac_part(value))
                value *= r
            return PointSample(out)
        step = _ceil_log2(r)
        out = []
        power = Fraction(1)
        for j in range(n):
            iv = refine(seed, k + 2 + j * step)
            out.append(_frac_interval(iv.scale(power, k + 2)))
            power *= r
        return PointSample(out)
    us = law.multipliers(n)
    if not isinstance(seed, CauchyReal):
        x = as_rational(seed)
        return PointSample([frac_part(u * x) for u in us])
    out = []
    for u in us:
        au = abs(u)
        extra = _ceil_log2(au) if au > 1 else 0
        iv = refine(seed, k + 2 + extra)
        out.append(_frac_interval(iv.scale(u, k + 2)))
    return PointSample(out)


# --- Weyl sums ---------------------------------------------------------------


def _lipschitz_pad(half_width: Fraction, h: int, p: int) -> int:
    # |d/dt cos(2 pi h t)| <= 2 pi |h| < 7 |h|
    return math.ceil(7 * abs(h) * half_width * (1 << p)) + 1


def _point_cos_sin(x: Point, h: int, p: int) -> tuple[int, int, int, int]:
    if isinstance(x, DyadicInterval):
        clo, chi, slo, shi = cos_sin_2pi_fixed(h * x.midpoint, p)
        pad = _lipschitz_pad(x.width / 2, h, p)
        return clo - pad, chi + pad, slo - pad, shi + pad
    return cos_sin_2pi_fixed(h * x, p)


def _mean_interval(lo: int, hi: int, n: int, p: int) -> DyadicInterval:
    return DyadicInterval.from_fixed(lo // n, -((-hi) // n), p)


def _weyl_at(sample: PointSample, h: int, p: int) -> tuple[DyadicInterval, DyadicInterval]:
    re_lo = re_hi = im_lo = im_hi = 0
    for x in sample.points:
        clo, chi, slo, shi = _point_cos_sin(x, h, p)
        re_lo += clo
        re_hi += chi
        im_lo += slo
        im_hi += shi
    n = sample.n
    return _mean_interval(re_lo, re_hi, n, p), _mean_interval(im_lo, im_hi, n, p)


def _check_args(sample: PointSample, h: int):
    if h == 0:
        raise ValueError("h must be a nonzero integer")
    if sample.n < 1:
        raise ValueError("empty sample")


def weyl_sum(sample: PointSample, h: int, k: int = 30) -> tuple[DyadicInterval, DyadicInterval]:
    """Enclosures of the real and imaginary parts of (1/N) sum_j exp(2 pi i h x_j)."""
    _check_args(sample, h)
    target = Fraction(1, 1 << k)
    p = k + 8
    for _ in range(6):
        re, im = _weyl_at(sample, h, p)
        if (re.width <= target and im.width <= target) or not sample.exact:
            return re, im
        p += 16
    return re, im


def weyl_abs_sq(sample: PointSample, h: int, k: int = 30) -> DyadicInterval:
    """|S_h|^2 through the direct complex sum."""
    re, im = weyl_sum(sample, h, k + 4)
    return re.square() + im.square()


def _cosine_at(sample: PointSample, h: int, p: int) -> DyadicInterval:
    pts = sample.points
    n = len(pts)
    lo = hi = 0
    for i in range(n):
        xi = pts[i]
        for j in range(i + 1, n):
            xj = pts[j]
            if isinstance(xi, DyadicInterval) or isinstance(xj, DyadicInterval):
                a = xi if isinstance(xi, DyadicInterval) else DyadicInterval.point(xi)
                b = xj if isinstance(xj, DyadicInterval) else DyadicInterval.point(xj)
                d = a - b
                clo, chi, _, _ = cos_sin_2pi_fixed(h * d.midpoint, p)
                pad = _lipschitz_pad(d.width / 2, h, p)
                clo, chi = clo - pad, chi + pad
            else:
                clo, chi, _, _ = cos_sin_2pi_fixed(h * (xi - xj), p)
            lo += clo
            hi += chi
    base = n << p
    n2 = n * n
    return DyadicInterval.from_fixed((base + 2 * lo) // n2, -((-(base + 2 * hi)) // n2), p)


def weyl_sum_sq_cosine(sample: PointSample, h: int, k: int = 30) -> DyadicInterval:
    """(1/N^2)(N + 2 sum_{i<j} cos(2 pi h (x_i - x_j))), the pairwise route to |S_h|^2."""
    _check_args(sample, h)
    target = Fraction(1, 1 << k)
    p = k + 6
    for _ in range(6):
        out = _cosine_at(sample, h, p)
        if out.width <= target or not sample.exact:
            return out
        p += 16
    return out


def ud_defect(sample: PointSample, bins: int) -> UdVerdict:
    """max over half-open bins [i/b, (i+1)/b) of |count/N - 1/b|."""
    if bins < 1:
        raise ValueError("need at least one bin")
    if not sample.exact:
        raise IntervalPointsUnsupported("ud_defect needs exact rational points")
    counts = [0] * bins
    for x in sample.points:
        counts[(x.numerator * bins) // x.denominator] += 1
    n = sample.n
    defect = max(abs(Fraction(c, n) - Fraction(1, bins)) for c in counts)
    return UdVerdict(defect, bins, n, tuple(counts))


def van_der_corput(n: int) -> PointSample:
    pts = []
    for j in range(n):
        bits = format(j, "b")[::-1] if j else "0"
        pts.append(Fraction(int(bits, 2), 1 << len(bits)))
    return PointSample(pts)


# --- Koksma / Solovay ---------------------------------------------------------


def koksma_bound(n: int, h: int, k: Fraction, p: int = 64) -> Fraction:
    """Upper enclosure of 1/n + 8 ln(3n) / (|h| k n)."""
    if n < 1:
        raise ValueError("n must be positive")
    if h == 0:
        raise ValueError("h must be nonzero")
    k = as_rational(k)
    if k <= 0:
        raise ValueError("gap k must be positive")
    ln3n = ln_interval(3 * n, p).hi
    return Fraction(1, n) + 8 * ln3n / (abs(h) * k * n)


class Membership(str, Enum):
    IN = "In"
    OUT = "Out"
    UNKNOWN = "Unknown"


def solovay_member(seed: Union[Fraction, CauchyReal], law: SeparatedSequence, h: int, n: int,
                   k: int = 30) -> Membership:
    """Is |S_h(n^2, orbit)|^2 > 1/ln n?  Decided by interval comparison."""
    if n < 2:
        raise ValueError("n must be at least 2")
    sample = orbit_frac(OrbitSpec(seed, law), n * n, k + 4)
    sq = weyl_abs_sq(sample, h, k)
    ln_n = ln_interval(n, k + 8)
    # threshold 1/ln n lies in [1/ln_hi, 1/ln_lo]
    thr_lo, thr_hi = 1 / ln_n.hi, 1 / ln_n.lo
    if sq.lo > thr_hi:
        return Membership.IN
    if sq.hi <= thr_lo:
        return Membership.OUT
    return Membership.UNKNOWN


def solovay_terms(n_max: int, h: int, k: Fraction, p: int = 64) -> list[tuple[int, int]]:
    """Fixed-point upper bounds (precision p) of ln n (1/n^2 + 8 ln(3n^2)/(|h| k n^2)), n = 2..n_max."""
    k = as_rational(k)
    out = []
    hk = abs(h) * k
    for n in range(2, n_max + 1):
        ln_n = ln_fixed(Fraction(n), p)[1]
        ln_3n2 = ln_fixed(Fraction(3 * n * n), p)[1]
        n2 = n * n
        # bracket = 1/n^2 + 8 ln(3n^2) / (hk n^2), as an upper fixed-point value
        num = (hk.numerator << p) + 8 * ln_3n2 * hk.denominator
        den = hk.numerator * n2
        bracket = -((-num) // den)
        out.append((n, -((-ln_n * bracket) >> p)))
    return out


def solovay_measure_budget(n_max: int, h: int, k: Fraction, p: int = 64) -> Fraction:
    """Upper enclosure of sum_{n=2}^{n_max} ln n (1/n^2 + 8 ln(3n^2)/(|h| k n^2))."""
    if n_max < 2:
        raise ValueError("n_max must be at least 2")
    if h == 0:
        raise ValueError("h must be nonzero")
    k = as_rational(k)
    if k <= 0:
        raise ValueError("gap k must be positive")
    total = sum(v for _, v in solovay_terms(n_max, h, k, p))
    return Fraction(total, 1 << p)


# --- seeded Monte-Carlo estimate of the mean square Weyl sum ------------------


@dataclass(frozen=True)
class MonteCarloEstimate:
    mean: Fraction
    variance: Fraction  # unbiased sample variance of the per-sample values
    samples: int

    @property
    def standard_error_sq(self) -> Fraction:
        return self.variance / self.samples

    def within(self, target: Fraction, sigmas: int = 3) -> bool:
        """|mean - target| <= sigmas * standard error, decided exactly."""
        return (self.mean - target) ** 2 <= sigmas * sigmas * self.standard_error_sq


def mean_square_weyl_mc(n: int, h: int, samples: int, seed: int, k: int = 20,
                        law: SeparatedSequence | None = None) -> MonteCarloEstimate:
    """Estimate the integral over x in [0,1] of |S_h(n, u x)|^2.

    Sample points are x = U / 2^64 with U drawn from ``random.Random(seed)``;
    each value is the midpoint of its enclosure.
    """
    law = law or integer_multipliers()
    rng = random.Random(seed)
    values = []
    for _ in range(samples):
        x = Fraction(rng.getrandbits(64), 1 << 64)
        sq = weyl_abs_sq(orbit_frac(OrbitSpec(x, law), n, k), h, k)
        values.append(sq.midpoint)
    mean = sum(values, Fraction(0)) / samples
    var = sum(((v - mean) ** 2 for v in values), Fraction(0)) / (samples - 1)
    return MonteCarloEstimate(mean, var, samples)


def subsample_bound_holds(sample_m: PointSample, sample_n2: PointSample, n: int, h: int,
                          k: int = 30) -> bool:
    """Check |S_h(m)| <= |S_h(n^2)| + 2/n via squared enclosures (m in [n^2, (n+1)^2))."""
    a = weyl_abs_sq(sample_m, h, k)
    b = weyl_abs_sq(sample_n2, h, k)
    # |S(m)| <= |S(n^2)| + 2/n  <=  sqrt(a.lo) <= sqrt(b.hi) + 2/n
    # compare squares: a.lo <= (sqrt(b.hi) + 2/n)^2, using a rational upper bound of sqrt(b.hi)
    sb = _sqrt_upper(b.hi)
    return a.lo <= (sb + Fraction(2, n)) ** 2


def _sqrt_upper(x: Fraction, bits: int = 40) -> Fraction:
    scaled = x * (1 << (2 * bits))
    r = math.isqrt(math.ceil(scaled))
    if r * r < scaled:
        r += 1
    return Fraction(r, 1 << bits)


def digit_window_defect(digits: str, n: int, window: int) -> Fraction:
    """Direct-counting defect of the base-2 shift orbit: bin of point j is digits[j:j+window]."""
    bins = 1 << window
    counts = [0] * bins
    for j in range(n):
        counts[int(digits[j:j + window], 2)] += 1
    return max(abs(Fraction(c, n) - Fraction(1, bins)) for c in counts)


def orbit_seed_from_digits(digits: str) -> Fraction:
    return Fraction(int(digits, 2), 1 << len(digits))


def sample_from(points: Sequence) -> PointSample:
    return PointSample(list(points))
