"""Acceptance criteria, one test each; conftest prints a PASS/FAIL line per criterion."""

import json
import random
from fractions import Fraction

import pytest

from algrand.cli import run
from algrand.equidist import (
    OrbitSpec,
    PowerBase,
    digit_window_defect,
    koksma_bound,
    mean_square_weyl_mc,
    orbit_frac,
    orbit_seed_from_digits,
    sample_from,
    solovay_measure_budget,
    ud_defect,
    weyl_abs_sq,
    weyl_sum,
    weyl_sum_sq_cosine,
)
from algrand.equivalence import mind_change_profile, random_dce_relation, slow_copy_complete, verify_equivalence
from algrand.exact import champernowne_binary_digits
from algrand.games import (
    ForcingMachine,
    MatchingOpponent,
    audit,
    blind_opponent,
    default_delta,
    ktrivial_builder_strategy,
    play,
    strong_string_strategy,
)
from algrand.martingales import (
    CylinderMeasure,
    PartialMartingale,
    adversarial_measure_build,
    check_martingale,
    flip_first_bit,
    identity_map,
    pushforward_martingale,
    scripted_family,
    strings_upto,
    zero_shift,
)
from algrand.metric import (
    EmbeddingCandidate,
    StagedPremetric,
    triangle_repair,
    triangle_violation,
    ultrametric_diagonalize,
    ultrametric_violation,
)

EPS30 = Fraction(1, 1 << 30)
EPS40 = Fraction(1, 1 << 40)


@pytest.mark.criterion(1, 10)
def test_criterion_01_weyl_identity():
    rng = random.Random(101)
    for _ in range(200):
        n = rng.randint(1, 64)
        h = rng.choice([x for x in range(-8, 9) if x])
        pts = [Fraction(rng.randrange(d), d) for d in (rng.randint(1, 1000) for _ in range(n))]
        s = sample_from(pts)
        direct, cos = weyl_abs_sq(s, h, 34), weyl_sum_sq_cosine(s, h, 34)
        assert direct.intersects(cos)
        assert direct.width <= EPS30 and cos.width <= EPS30


@pytest.mark.criterion(2, 1)
def test_criterion_02_roots_of_unity():
    for m in range(1, 13):
        s = sample_from([Fraction(j, m) for j in range(m)])
        for h in [x for x in range(-2 * m - 1, 2 * m + 2) if x]:
            re, im = weyl_sum(s, h, 44)
            assert re.width <= EPS40 and im.width <= EPS40
            assert im.contains(0)
            assert re.contains(1 if h % m == 0 else 0)


@pytest.mark.criterion(3, 30)
def test_criterion_03_koksma_monte_carlo():
    for n in (16, 64):
        for h in (1, 2):
            exact = Fraction(1, n)
            mc = mean_square_weyl_mc(n, h, 2000, seed=1000 * n + h)
            assert mc.within(exact, 3)
            assert exact <= koksma_bound(n, h, Fraction(1))


@pytest.mark.criterion(4, 5)
def test_criterion_04_solovay_budget_tail():
    k = Fraction(1)
    b900, b1000 = solovay_measure_budget(900, 1, k), solovay_measure_budget(1000, 1, k)
    for n in (2, 10, 100, 500, 999):
        assert solovay_measure_budget(n + 1, 1, k) >= solovay_measure_budget(n, 1, k)
    assert b1000 >= b900
    # the summand behaves like 16 (ln n)^2 / n^2, so this increase is about 0.09
    assert b1000 - b900 < Fraction(1, 10**4)


D_STAR = Fraction(11, 512)  # direct window count of 4-bit digit blocks


@pytest.mark.criterion(5, 10)
def test_criterion_05_champernowne_defect():
    n = 1 << 14
    digits = champernowne_binary_digits(n + 64)
    assert digit_window_defect(digits, n, 4) == D_STAR
    s = orbit_frac(OrbitSpec(orbit_seed_from_digits(digits), PowerBase(Fraction(2))), n)
    assert ud_defect(s, 16).defect <= D_STAR + 0


@pytest.mark.criterion(6, 5)
def test_criterion_06_three_halves_orbit(capsys, tmp_path):
    out = tmp_path / "orbit.json"
    assert run(["orbit", "--x", "1/2", "--base", "3/2", "--n", "2000", "--bins", "10", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["results"]["normality_verdict"] is None
    oracle = [Fraction(pow(3, j, 2 ** (j + 1)), 2 ** (j + 1)) for j in range(2000)]
    assert rep["results"]["points"][-1] == f"{oracle[-1].numerator}/{oracle[-1].denominator}"
    assert rep["results"]["defect"] == "23/2000" == str(ud_defect(sample_from(oracle), 10).defect)


@pytest.mark.criterion(7, 30)
def test_criterion_07_adversarial_measure():
    r = adversarial_measure_build(scripted_family(), 12, 500, [True, True, False, True])
    mu, N = r.mu, r.N
    for s in mu:
        if s + "0" in mu and s + "1" in mu:
            assert mu[s + "0"] + mu[s + "1"] == mu[s]
            if N.defined(s) and mu[s] > 0:
                assert sum(N(s + b) * mu[s + b] for b in "01" if mu[s + b] > 0) == N(s) * mu[s]
        if mu[s] > 0:
            assert N.defined(s)
    for node in r.strategies.values():
        assert node.capital_at_begin < 2 - Fraction(1, 1 << (len(node.tau) - 1))
    tau = r.true_path_tau
    assert len(tau) >= 3
    for i in range(1, 4):
        assert N(r.strategies[tau[:i]].sigma) >= 1 << (2 * (i - 1))


def closure(t):
    n = len(t)
    d = [row[:] for row in t]
    for k in range(n):
        for i in range(n):
            for j in range(n):
                d[i][j] = min(d[i][j], d[i][k] + d[k][j])
    return d


@pytest.mark.criterion(8, 10)
def test_criterion_08_repair_oracle():
    rng = random.Random(808)
    metric_seen = nonmetric_seen = 0
    for trial in range(100):
        raw = [[Fraction(0)] * 8 for _ in range(8)]
        for v in range(8):
            for w in range(v + 1, 8):
                raw[v][w] = raw[w][v] = Fraction(rng.randint(1, 16), 16)
        table = closure(raw) if trial % 2 == 0 else raw
        r = triangle_repair(StagedPremetric.constant(table, Fraction(1)), 8, 40)
        assert triangle_violation(r.g) is None
        if triangle_violation(table) is None:
            metric_seen += 1
            assert r.W == 8 and r.g == table
        else:
            nonmetric_seen += 1
            assert r.g == closure([row[:r.W] for row in table[:r.W]])
    assert metric_seen >= 50 and nonmetric_seen > 0


@pytest.mark.criterion(9, 10)
def test_criterion_09_slow_copy():
    rng = random.Random(909)
    ers = 0
    for _ in range(50):
        E = random_dce_relation(rng, m=20, settle=200)
        r = slow_copy_complete(E, 260)
        assert all(verify_equivalence(F, 20) for F in r.F.states)
        if verify_equivalence(E.at(260), 20):
            ers += 1
            assert r.F_equals_E_on_prefix
        for a in range(20):
            for b in range(20):
                if a != b:
                    for R in (E, r.F):
                        first, changes = mind_change_profile(R, (a, b))
                        assert not first and changes <= 2
    assert ers > 0


@pytest.mark.criterion(10, 10)
def test_criterion_10_ktrivial_game():
    rng = random.Random(1010)
    incs = {}
    for _ in range(32):
        n = rng.randint(1, 40)
        incs.setdefault(rng.randint(1, 149), []).append((n, Fraction(1, 1 << (n // 2 + 3))))
    assert sum(d for v in incs.values() for _, d in v) <= 1
    feeds = {}
    for n in range(1, 9):
        feeds.setdefault(rng.randint(1, 299), []).append((n, rng.randint(2 * n, 64)))
    r = play(blind_opponent(incs, feeds), ktrivial_builder_strategy(), 500)
    rep = audit(r.transcript, "ktrivial", probe=64)
    assert rep["matching"] and rep["settled_lengths"] > 0
    assert rep["caps"] and r.state.total("player") <= 2
    assert rep["qualifying_served"] and rep["add_to_A_rules"]
    for m in range(65):
        assert 2 * len([a for a in r.state.A if a < m]) <= m


@pytest.mark.criterion(11, 10)
def test_criterion_11_strong_string_game():
    eps = Fraction(1, 10)
    gamma = ForcingMachine.everywhere()
    strat = strong_string_strategy(gamma, eps)
    r = play(MatchingOpponent(), strat, 4000, variant="strong")
    assert strat.terminated is not None
    assert 0 in r.state.W.get(0, set())
    rep = audit(r.transcript, "strong", gamma, eps=eps)
    started = set(strat.spent)
    assert rep["spent"] == rep["matched"] + rep["unmatched"]
    assert rep["unmatched"] <= sum(default_delta(eps)(x) for x in started)
    assert rep["accounting"]


@pytest.mark.criterion(12, 5)
def test_criterion_12_ultrametric_diagonalizer():
    rng = random.Random(1212)
    target = StagedPremetric(Fraction(1))
    for _ in range(40):
        v, w = rng.sample(range(10), 2)
        target.add(rng.randint(0, 20), v, w, Fraction(rng.randint(1, 16), 16))
    cands = []
    for n in range(6):
        vals = {k: (rng.randrange(10), rng.randint(0, 25)) for k in range(12)}
        if n >= 4:
            del vals[2 * n]  # partial: never defined on its own witness pair
        cands.append(EmbeddingCandidate(vals))
    stages = 30
    r = ultrametric_diagonalize(target, cands, stages)
    for d in r.tables:
        assert ultrametric_violation(d) is None
    final_target = target.table(stages, 10)
    final = r.tables[-1]
    for n in range(4):
        a, b = cands[n].values[2 * n][0], cands[n].values[2 * n + 1][0]
        assert final[2 * n][2 * n + 1] > final_target[a][b] + 2
    assert [e["settled"] for e in r.log] == [True] * 4 + [False] * 2


def fair_martingale(rng, depth, root=""):
    vals = {root: Fraction(1)}
    for s in strings_upto(depth - 1):
        if s in vals:
            r = Fraction(rng.randint(-4, 4), 4)
            vals[s + "0"], vals[s + "1"] = vals[s] * (1 + r), vals[s] * (1 - r)
    return vals


@pytest.mark.criterion(13, 5)
def test_criterion_13_pushforward():
    rng = random.Random(1313)
    mu = CylinderMeasure.fair_coin(9)
    b = PartialMartingale(fair_martingale(rng, 9))
    shifted = fair_martingale(rng, 9, "0")
    shifted[""] = shifted["0"]
    b0 = PartialMartingale(shifted)
    cases = [
        (identity_map(), b, lambda s: b(s)),
        (flip_first_bit(), b, lambda s: b(flip_first_bit().image(s))),
        (zero_shift(), b0, lambda s: b0("0" + s)),
    ]
    for phi, mart, closed in cases:
        out = {s: pushforward_martingale(mart, phi, mu, s, 9) for s in strings_upto(8)}
        for s, v in out.items():
            assert v == closed(s)
        assert check_martingale(PartialMartingale(out), mu, 8).passed
