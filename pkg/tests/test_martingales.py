import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from algrand.martingales import (
    CylinderMeasure,
    InvalidMeasure,
    MeasureNotBelowOne,
    NoDisjointnessWitness,
    NotPrefixFree,
    PairMeasure,
    PartialMartingale,
    PrefixMap,
    UndefinedParent,
    ZeroMarginal,
    ZeroMeasureCylinder,
    adversarial_measure_build,
    audit_adversarial,
    check_martingale,
    check_phi_martingale,
    constant_machine,
    doob_ratio,
    flip_first_bit,
    identity_map,
    kucera_tail_cover,
    never_machine,
    proportional_machine,
    pullback_weight,
    pushforward_martingale,
    savings_transform,
    scripted_family,
    strings_of_length,
    strings_upto,
    zero_shift,
)

FAIR = CylinderMeasure.fair_coin(10)


def random_martingale(rng, depth, root=""):
    """Fair-coin martingale on extensions of root, with rational betting fractions."""
    vals = {root: Fraction(1)}
    for s in strings_upto(depth - 1):
        if s in vals:
            r = Fraction(rng.randint(-4, 4), 4)
            vals[s + "0"] = vals[s] * (1 + r)
            vals[s + "1"] = vals[s] * (1 - r)
    return vals


def all_zero_bets(s):
    return Fraction(1 << len(s)) if "1" not in s else Fraction(0)


def test_fair_coin_and_bernoulli_validate():
    CylinderMeasure.fair_coin(6).validate()
    CylinderMeasure.bernoulli(Fraction(1, 3), 6).validate()
    with pytest.raises(InvalidMeasure):
        CylinderMeasure({"": Fraction(1), "0": Fraction(1, 2), "1": Fraction(1, 3)}, 1).validate()


def test_check_martingale_examples():
    assert check_martingale(PartialMartingale.from_function(lambda s: Fraction(1), 6), FAIR, 6).passed
    assert check_martingale(PartialMartingale.from_function(all_zero_bets, 6), FAIR, 6).passed
    bad = PartialMartingale({"": 1, "0": 2, "1": 1})
    r = check_martingale(bad, FAIR, 1)
    assert (r.passed, r.node, r.residual) == (False, "", Fraction(1, 2))


def test_check_martingale_second_clause():
    M = PartialMartingale({"": 1, "0": 2})
    r = check_martingale(M, FAIR, 1)
    assert not r.passed and r.clause == "defined-on-positive-measure" and r.node == "1"


def test_zero_measure_child_may_be_undefined():
    mu = CylinderMeasure({"": Fraction(1), "0": Fraction(1), "1": Fraction(0)}, 1)
    assert check_martingale(PartialMartingale({"": 3, "0": 3}), mu, 1).passed


def test_savings_constant_martingale():
    r = savings_transform(PartialMartingale.from_function(lambda s: Fraction(1), 6), 6)
    assert all(v == 1 for v in r.martingale.values.values())
    assert all(v == 0 for v in r.bank.values())


def test_savings_all_in_on_zero_against_hand_trace():
    # oracle: replay the rule on the single live path 0^n by hand
    depth = 6
    r = savings_transform(PartialMartingale.from_function(all_zero_bets, depth), depth, FAIR)
    active, bank = Fraction(1), Fraction(0)
    for n in range(depth + 1):
        s = "0" * n
        if n:
            active *= 2
        while active >= 2:
            active /= 2
            bank += active
        assert (r.active[s], r.bank[s]) == (active, bank)
        assert r.bank[s] == n and r.martingale(s) == n + 1
    # a lost bet keeps what was banked at "0"
    assert r.martingale("01") == 1 and r.active["01"] == 0


def test_savings_undefined_parent():
    with pytest.raises(UndefinedParent):
        savings_transform(PartialMartingale({"": 1, "0": 2}), 1, FAIR)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_savings_properties(seed):
    depth = 7
    b = PartialMartingale(random_martingale(random.Random(seed), depth))
    r = savings_transform(b, depth, FAIR)
    assert check_martingale(r.martingale, FAIR, depth).passed
    for s in strings_upto(depth):
        assert r.active[s] < 2
        if len(s) < depth:
            for c in "01":
                assert r.bank[s + c] >= r.bank[s]


def test_pushforward_closed_forms():
    b = PartialMartingale(random_martingale(random.Random(1), 6))
    for s in strings_upto(5):
        assert pushforward_martingale(b, identity_map(), FAIR, s, 6) == b(s)
    for s in strings_upto(5):
        if s.startswith("0"):
            assert pushforward_martingale(b, flip_first_bit(), FAIR, s, 6) == b("1" + s[1:])


def test_pushforward_zero_shift():
    vals = random_martingale(random.Random(2), 7, "0")
    vals[""] = vals["0"]
    b = PartialMartingale(vals)
    assert check_phi_martingale(b, zero_shift(), FAIR, 6).passed
    for s in strings_upto(5):
        assert pushforward_martingale(b, zero_shift(), FAIR, s, 7) == b("0" + s)


def test_pullback_weight_direct_enumeration():
    assert pullback_weight(zero_shift(), FAIR, "1") == 0
    assert pullback_weight(zero_shift(), FAIR, "01") == Fraction(1, 2)
    assert pullback_weight(flip_first_bit(), FAIR, "10") == Fraction(1, 4)


def test_pushforward_errors():
    mu = CylinderMeasure({"": Fraction(1), "0": Fraction(1), "1": Fraction(0)}, 1)
    b = PartialMartingale.from_function(lambda s: Fraction(1), 3)
    with pytest.raises(ZeroMeasureCylinder):
        pushforward_martingale(b, identity_map(), mu, "1", 3)
    constant = PrefixMap("constant", lambda s: "0" * len(s), lambda n: n)
    with pytest.raises(NoDisjointnessWitness):
        pushforward_martingale(b, constant, FAIR, "1", 3)


def test_prefix_maps_monotone_and_injective():
    for phi in (identity_map(), flip_first_bit(), zero_shift()):
        assert phi.check_monotone(6)
        assert phi.check_injective(5)
    assert not PrefixMap("constant", lambda s: "0" * len(s), lambda n: n).check_injective(3)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(["identity", "flip"]))
def test_pushforward_is_martingale(seed, name):
    phi = identity_map() if name == "identity" else flip_first_bit()
    b = PartialMartingale(random_martingale(random.Random(seed), 6))
    out = PartialMartingale({s: pushforward_martingale(b, phi, FAIR, s, 6) for s in strings_upto(5)})
    assert check_martingale(out, FAIR, 5).passed


def test_doob_ratio():
    mu1, mu2 = CylinderMeasure.bernoulli(Fraction(1, 3), 4), CylinderMeasure.fair_coin(4)
    pm = PairMeasure.product(mu1, mu2)
    assert doob_ratio(pm, "01", "1") == mu1("01")
    assert doob_ratio(pm, "011", "") == pm("011", "")
    diag = PairMeasure.diagonal_fair()
    cells = {(a, b): diag(a, b) for a in "01" for b in "01"}
    assert cells == {("0", "0"): Fraction(1, 2), ("1", "1"): Fraction(1, 2),
                     ("0", "1"): 0, ("1", "0"): 0}
    assert doob_ratio(diag, "0", "0") == 1
    with pytest.raises(ZeroMarginal):
        doob_ratio(PairMeasure(lambda s, t: Fraction(0) if t else Fraction(1)), "", "0")


def test_pair_measures_additive():
    for pm in (PairMeasure.product(CylinderMeasure.bernoulli(Fraction(1, 5), 4), FAIR), PairMeasure.diagonal_fair()):
        assert pm("", "") == 1
        for s in strings_upto(3):
            for t in strings_upto(3):
                assert pm(s + "0", t) + pm(s + "1", t) == pm(s, t)
                assert pm(s, t + "0") + pm(s, t + "1") == pm(s, t)


def test_kucera_tail_cover():
    assert kucera_tail_cover({"0"}, 3) == Fraction(1, 8)
    assert kucera_tail_cover({"00", "01", "10"}, 2) == Fraction(9, 16)
    with pytest.raises(NotPrefixFree):
        kucera_tail_cover({"0", "01"}, 2)
    with pytest.raises(MeasureNotBelowOne):
        kucera_tail_cover({"0", "1"}, 2)


def test_kucera_against_block_enumeration():
    # rho^2 is the measure of sequences starting with two consecutive blocks
    prefixes = ["1", "01"]
    hits = {u + v for u in prefixes for v in prefixes}
    measure = sum(Fraction(1, 1 << len(w)) for w in hits)
    assert kucera_tail_cover(prefixes, 2) == measure


# --- adversarial construction ---------------------------------------------------


def test_no_machines_slices_sum_to_one():
    r = adversarial_measure_build([], 8, 30)
    limit = r.limit_measure()
    limit.validate()
    for d in range(9):
        assert sum(limit(s) for s in strings_of_length(d)) == 1


def test_epsilon_after_first_answer():
    r = adversarial_measure_build([constant_machine()], 8, 5)
    assert constant_machine()("10", 1) == 2
    assert r.eps[""] == Fraction(1, 8)
    assert any(e.event == "epsilon" and e.tau == "1" and e.stage == 1 for e in r.trace)


def test_threat_released_mass_is_dyadic_and_below_parent():
    r = adversarial_measure_build(scripted_family(), 12, 100, [True, True, False, True])
    for e in r.trace:
        if e.event == "release":
            node = e.detail["node"]
            assert r.mu[node] <= r.mu[node[:-1]] / 2
            assert r.mu[node] <= Fraction(1, 1 << e.stage)


def test_never_converging_machine_waits():
    r = adversarial_measure_build([never_machine()], 10, 50)
    assert r.strategies["1"].state.endswith("(waiting)")
    assert "" not in r.eps
    assert "10" in r.threats


@settings(max_examples=10, deadline=None)
@given(st.lists(st.sampled_from(["constant", "proportional", "never"]), min_size=1, max_size=3),
       st.integers(1, 80))
def test_invariants_hold_at_every_budget(kinds, stages):
    make = {"constant": constant_machine, "proportional": proportional_machine, "never": never_machine}
    machines = [make[k]() for k in kinds]
    r = adversarial_measure_build(machines, 10, stages, [k != "never" for k in kinds])
    a = audit_adversarial(r)
    assert a["mu_additive"] and a["N_fair"] and a["N_defined_on_positive_mass"] and a["capital_bound"]
    r.limit_measure().validate()
