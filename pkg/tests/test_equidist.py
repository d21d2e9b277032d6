import random
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from algrand.equidist import (
    GapViolation,
    IntervalPointsUnsupported,
    Membership,
    OrbitSpec,
    PowerBase,
    SeparatedSequence,
    integer_multipliers,
    koksma_bound,
    orbit_frac,
    sample_from,
    solovay_measure_budget,
    solovay_member,
    subsample_bound_holds,
    ud_defect,
    van_der_corput,
    weyl_abs_sq,
    weyl_sum,
    weyl_sum_sq_cosine,
)
from algrand.exact import DyadicInterval, champernowne_binary, champernowne_binary_digits

mpmath.mp.prec = 120


def mpf(q):
    return mpmath.mpf(q.numerator) / q.denominator


def holds(iv, value):
    return mpf(iv.lo) <= value <= mpf(iv.hi)


samples = st.lists(st.fractions(min_value=0, max_value=Fraction(499, 500), max_denominator=500),
                   min_size=1, max_size=24)
hs = st.integers(-8, 8).filter(bool)


def test_orbit_three_halves():
    s = orbit_frac(OrbitSpec(Fraction(1, 2), PowerBase(Fraction(3, 2))), 3)
    assert s.points == [Fraction(1, 2), Fraction(3, 4), Fraction(1, 8)]


def test_orbit_integer_base_matches_power_formula():
    x = Fraction(5, 17)
    s = orbit_frac(OrbitSpec(x, PowerBase(Fraction(2))), 40)
    assert s.points == [(x * 2**j) % 1 for j in range(40)]


def test_orbit_three_halves_against_modular_oracle():
    # frac(3^j / 2^(j+1)) = (3^j mod 2^(j+1)) / 2^(j+1)
    n = 300
    s = orbit_frac(OrbitSpec(Fraction(1, 2), PowerBase(Fraction(3, 2))), n)
    assert s.points == [Fraction(pow(3, j, 2 ** (j + 1)), 2 ** (j + 1)) for j in range(n)]


def test_champernowne_interval_orbit_contains_shifted_digits():
    digits = champernowne_binary_digits(200)
    s = orbit_frac(OrbitSpec(champernowne_binary(), PowerBase(Fraction(2))), 64, k=30)
    for j, iv in enumerate(s.points):
        assert iv.width <= Fraction(1, 1 << 30)
        assert iv.contains(Fraction(int(digits[j:j + 120], 2), 1 << 120))


def test_power_base_must_exceed_one():
    with pytest.raises(ValueError):
        PowerBase(Fraction(1))


def test_gap_violation():
    law = SeparatedSequence(lambda j: Fraction(j, 2), Fraction(1))
    with pytest.raises(GapViolation):
        law.multipliers(3)


def test_weyl_trivial_cases():
    re, im = weyl_sum(sample_from([0]), 5)
    assert re == DyadicInterval.point(1) and im == DyadicInterval.point(0)
    re, im = weyl_sum(sample_from([0, Fraction(1, 2)]), 1)
    assert re.contains(0) and im.contains(0)
    assert weyl_sum_sq_cosine(sample_from([0, Fraction(1, 2)]), 1).contains(0)
    assert weyl_sum_sq_cosine(sample_from([Fraction(3, 7)]), 4) == DyadicInterval.point(1)


def test_weyl_rejects_zero_h():
    with pytest.raises(ValueError):
        weyl_sum(sample_from([0]), 0)


def test_weyl_random_sample_against_direct_complex_sum():
    rng = random.Random(20)
    pts = [Fraction(rng.randrange(1000), 1000) for _ in range(20)]
    for h in (1, -3, 7):
        direct = sum(mpmath.expjpi(2 * h * mpf(x)) for x in pts) / len(pts)
        re, im = weyl_sum(sample_from(pts), h, 40)
        assert holds(re, direct.real) and holds(im, direct.imag)
        assert holds(weyl_abs_sq(sample_from(pts), h, 40), abs(direct) ** 2)
        assert holds(weyl_sum_sq_cosine(sample_from(pts), h, 40), abs(direct) ** 2)


@settings(max_examples=60, deadline=None)
@given(samples, hs)
def test_cosine_identity_enclosures_intersect(pts, h):
    s = sample_from(pts)
    assert weyl_abs_sq(s, h, 30).intersects(weyl_sum_sq_cosine(s, h, 30))


@settings(max_examples=60, deadline=None)
@given(samples, hs, st.integers(4, 40))
def test_trivial_weyl_bound(pts, h, k):
    re, im = weyl_sum(sample_from(pts), h, k)
    bound = 1 + Fraction(4, 1 << k)
    assert re.square().hi + im.square().hi <= bound ** 2


def test_weyl_on_interval_points_is_enclosure():
    s = orbit_frac(OrbitSpec(champernowne_binary(), PowerBase(Fraction(2))), 16, k=30)
    exact = [Fraction(int(champernowne_binary_digits(200)[j:j + 150], 2), 1 << 150) for j in range(16)]
    re, im = weyl_sum(s, 3, 20)
    re2, im2 = weyl_sum(sample_from(exact), 3, 40)
    assert re.intersects(re2) and im.intersects(im2)


def test_ud_defect_examples():
    assert ud_defect(sample_from([Fraction(j, 8) for j in range(8)]), 8).defect == 0
    assert ud_defect(sample_from([0] * 8), 2).defect == Fraction(1, 2)


def test_ud_defect_rejects_intervals():
    s = orbit_frac(OrbitSpec(champernowne_binary(), PowerBase(Fraction(2))), 4)
    with pytest.raises(IntervalPointsUnsupported):
        ud_defect(s, 4)


def test_ud_defect_champernowne_4096_frozen():
    # frozen by direct counting of 3-bit digit windows
    digits = champernowne_binary_digits(4096 + 40)
    seed = Fraction(int(digits, 2), 1 << len(digits))
    s = orbit_frac(OrbitSpec(seed, PowerBase(Fraction(2))), 4096)
    assert ud_defect(s, 8).defect == Fraction(191, 4096)


@pytest.mark.parametrize("B", [4, 8, 11])
def test_van_der_corput_defect(B):
    n = 1 << B
    s = van_der_corput(n)
    for b in range(B + 1):
        assert ud_defect(s, 1 << b).defect <= Fraction(1 << b, n)


def test_koksma_against_mpmath():
    v = koksma_bound(1, 1, Fraction(1))
    exact = 1 + 8 * mpmath.log(3)
    assert mpf(v) >= exact and mpf(v) - exact < mpmath.mpf(2) ** -55
    v = koksma_bound(100, 2, Fraction(1))
    exact = mpmath.mpf(1) / 100 + 8 * mpmath.log(300) / 200
    assert mpf(v) >= exact and mpf(v) - exact < mpmath.mpf(2) ** -55


def test_koksma_doubling_h_halves_second_summand():
    for n in (1, 7, 100):
        a = koksma_bound(n, 1, Fraction(1)) - Fraction(1, n)
        b = koksma_bound(n, 2, Fraction(1)) - Fraction(1, n)
        assert a == 2 * b


def test_exact_mean_square_by_riemann_sum():
    # |S_h|^2 is a trig polynomial of degree < M, so the M-point average is the integral
    law = integer_multipliers()
    for n, h in ((4, 1), (6, 2)):
        M = abs(h) * n + 1
        lo = hi = Fraction(0)
        for t in range(M):
            sq = weyl_abs_sq(orbit_frac(OrbitSpec(Fraction(t, M), law), n), h, 40)
            lo += sq.lo
            hi += sq.hi
        assert lo / M <= Fraction(1, n) <= hi / M
        assert Fraction(1, n) <= koksma_bound(n, h, Fraction(1))


def test_solovay_examples():
    law = integer_multipliers()
    assert solovay_member(Fraction(1, 3), law, 1, 2) == Membership.OUT
    assert solovay_member(Fraction(0), law, 1, 8) == Membership.IN
    # |S_1(9)|^2 sits about 3e-6 below 1/ln 3 here
    assert solovay_member(Fraction(301, 16000), law, 1, 3, 8) == Membership.UNKNOWN
    assert solovay_member(Fraction(301, 16000), law, 1, 3, 40) == Membership.OUT


def test_solovay_budget_first_term():
    v = solovay_measure_budget(2, 1, Fraction(1))
    exact = mpmath.log(2) * (mpmath.mpf(1) / 4 + 8 * mpmath.log(12) / 4)
    assert mpf(v) >= exact and mpf(v) - exact < mpmath.mpf(2) ** -50


def test_solovay_budget_against_mpmath_partial_sum():
    v = solovay_measure_budget(60, 3, Fraction(1, 2))
    exact = mpmath.fsum(mpmath.log(n) * (mpmath.mpf(1) / n**2 + 8 * mpmath.log(3 * n * n) / (3 * mpmath.mpf(1) / 2 * n**2))
                        for n in range(2, 61))
    assert mpf(v) >= exact and mpf(v) - exact < mpmath.mpf(2) ** -50


@given(st.integers(2, 200))
def test_solovay_budget_monotone(n):
    assert solovay_measure_budget(n + 1, 1, Fraction(1)) >= solovay_measure_budget(n, 1, Fraction(1))


@settings(max_examples=40, deadline=None)
@given(st.fractions(min_value=0, max_value=1, max_denominator=10**4), st.integers(2, 5), hs)
def test_subsampling_bound(x, n, h):
    law = integer_multipliers()
    s_n2 = orbit_frac(OrbitSpec(x, law), n * n)
    for m in range(n * n, (n + 1) ** 2):
        assert subsample_bound_holds(orbit_frac(OrbitSpec(x, law), m), s_n2, n, h)
