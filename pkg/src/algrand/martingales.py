"""Measures and martingales on Cantor space, as finite tables over binary strings.

Strings are ``str`` objects over ``"01"``; the empty string is the root.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Callable, Iterable, Iterator, Mapping, Optional, Sequence

from .exact import as_rational

Machine = Callable[[str, int], Optional[Fraction]]


class InvalidMeasure(ValueError):
    pass


class UndefinedParent(ValueError):
    pass


class NoDisjointnessWitness(RuntimeError):
    pass


class ZeroMeasureCylinder(ZeroDivisionError):
    pass


class ZeroMarginal(ZeroDivisionError):
    pass


class NotPrefixFree(ValueError):
    pass


class MeasureNotBelowOne(ValueError):
    pass


def strings_of_length(n: int) -> Iterator[str]:
    for bits in product("01", repeat=n):
        yield "".join(bits)


def strings_upto(depth: int) -> Iterator[str]:
    for n in range(depth + 1):
        yield from strings_of_length(n)


def extensions(sigma: str, length: int) -> Iterator[str]:
    for tail in strings_of_length(length - len(sigma)):
        yield sigma + tail


def flip(bit: str) -> str:
    return "1" if bit == "0" else "0"


class CylinderMeasure:
    """mu(sigma) for all strings up to ``depth``; backed by a table or a function."""

    def __init__(self, values: Mapping[str, Fraction] | Callable[[str], Fraction], depth: int):
        self.depth = depth
        if callable(values):
            self._fn = values
            self._table: dict[str, Fraction] = {}
        else:
            self._fn = None
            self._table = {s: as_rational(v) for s, v in values.items()}

    @classmethod
    def fair_coin(cls, depth: int) -> "CylinderMeasure":
        return cls(lambda s: Fraction(1, 1 << len(s)), depth)

    @classmethod
    def bernoulli(cls, p: Fraction, depth: int) -> "CylinderMeasure":
        p = as_rational(p)
        return cls(lambda s: p ** s.count("1") * (1 - p) ** s.count("0"), depth)

    def __call__(self, sigma: str) -> Fraction:
        if sigma in self._table:
            return self._table[sigma]
        if self._fn is None:
            raise KeyError(f"measure undefined at {sigma!r}")
        v = as_rational(self._fn(sigma))
        self._table[sigma] = v
        return v

    def validate(self) -> None:
        if self("") != 1:
            raise InvalidMeasure("mu(empty) must be 1")
        for s in strings_upto(self.depth - 1):
            m = self(s)
            if m < 0:
                raise InvalidMeasure(f"negative mass at {s!r}")
            if self(s + "0") + self(s + "1") != m:
                raise InvalidMeasure(f"not additive at {s!r}")

    def table(self) -> dict[str, Fraction]:
        return {s: self(s) for s in strings_upto(self.depth)}


class PartialMartingale:
    """M(sigma) as a partial table; a missing key means undefined."""

    def __init__(self, values: Mapping[str, Fraction] | None = None):
        self.values: dict[str, Fraction] = {s: as_rational(v) for s, v in (values or {}).items()}

    @classmethod
    def from_function(cls, fn: Callable[[str], Optional[Fraction]], depth: int) -> "PartialMartingale":
        out = {}
        for s in strings_upto(depth):
            v = fn(s)
            if v is not None:
                out[s] = as_rational(v)
        return cls(out)

    def __call__(self, sigma: str) -> Optional[Fraction]:
        return self.values.get(sigma)

    def defined(self, sigma: str) -> bool:
        return sigma in self.values

    def __setitem__(self, sigma: str, value: Fraction) -> None:
        self.values[sigma] = as_rational(value)


@dataclass(frozen=True)
class MartingaleReport:
    passed: bool
    node: Optional[str] = None
    clause: Optional[str] = None
    residual: Optional[Fraction] = None


def check_martingale(M: PartialMartingale, mu: CylinderMeasure, depth: int) -> MartingaleReport:
    """Exhaustively check both clauses of the martingale definition up to ``depth``.

    The residual of a fairness violation is (children's capital) - (parent's capital),
    each weighted by measure.  An undefined child of measure zero contributes 0.
    """
    for s in strings_upto(depth):
        if mu(s) > 0 and not M.defined(s):
            return MartingaleReport(False, s, "defined-on-positive-measure")
        if len(s) == depth or not M.defined(s):
            continue
        total = Fraction(0)
        complete = True
        for b in "01":
            child = s + b
            if M.defined(child):
                total += M(child) * mu(child)
            elif mu(child) != 0:
                complete = False
        if not complete:
            continue
        residual = total - M(s) * mu(s)
        if residual:
            return MartingaleReport(False, s, "fairness", residual)
    return MartingaleReport(True)


# --- savings -----------------------------------------------------------------


@dataclass
class SavingsResult:
    martingale: PartialMartingale
    active: dict[str, Fraction]
    bank: dict[str, Fraction]


def savings_transform(b: PartialMartingale, depth: int, mu: CylinderMeasure | None = None,
                      threshold: Fraction = Fraction(2)) -> SavingsResult:
    """Split capital into an active part and a bank that never decreases.

    Active capital follows b's betting ratios; whenever it reaches the
    threshold, half of it moves to the bank.  The output is active + bank.
    """
    active: dict[str, Fraction] = {}
    bank: dict[str, Fraction] = {}

    def settle(a: Fraction, k: Fraction) -> tuple[Fraction, Fraction]:
        while a >= threshold:
            a /= 2
            k += a
        return a, k

    if not b.defined(""):
        raise UndefinedParent("b undefined at the root")
    active[""], bank[""] = settle(b(""), Fraction(0))
    for s in strings_upto(depth - 1):
        if s not in active:
            continue
        for bit in "01":
            child = s + bit
            if not b.defined(child):
                if mu is not None and mu(child) > 0:
                    raise UndefinedParent(f"b undefined on positive-measure node {child!r}")
                continue
            parent_value = b(s)
            a = active[s] * b(child) / parent_value if parent_value > 0 else Fraction(0)
            active[child], bank[child] = settle(a, bank[s])
    total = PartialMartingale({s: active[s] + bank[s] for s in active})
    return SavingsResult(total, active, bank)


# --- monotone prefix maps and pushforward martingales -----------------------


@dataclass(frozen=True)
class PrefixMap:
    """A monotone map on finite strings with a use modulus.

    ``image(rho)`` is the output prefix determined by input prefix ``rho``;
    the first n output bits are determined by the first ``use(n)`` input bits.
    """

    name: str
    image: Callable[[str], str]
    use: Callable[[int], int]

    def output_prefix(self, rho: str, n: int) -> str:
        out = self.image(rho)
        if len(out) < n:
            raise ValueError(f"{self.name}: {rho!r} determines only {len(out)} output bits")
        return out[:n]

    def check_monotone(self, depth: int) -> bool:
        for s in strings_upto(depth - 1):
            img = self.image(s)
            for bit in "01":
                if not self.image(s + bit).startswith(img):
                    return False
        return True

    def check_injective(self, depth: int) -> bool:
        """Distinct inputs of length ``depth`` have distinct images at use-depth."""
        n = depth
        while self.use(n) < depth:
            n += 1
        seen = {}
        for rho in strings_of_length(self.use(n)):
            out = self.output_prefix(rho, n)
            key = rho[:depth]
            if seen.setdefault(out, key) != key:
                return False
        return True


def identity_map() -> PrefixMap:
    return PrefixMap("identity", lambda s: s, lambda n: n)


def flip_first_bit() -> PrefixMap:
    return PrefixMap("flip", lambda s: (flip(s[0]) + s[1:]) if s else "", lambda n: n)


def zero_shift() -> PrefixMap:
    return PrefixMap("shift", lambda s: "0" + s, lambda n: max(n - 1, 0))


def pullback_weight(phi: PrefixMap, mu: CylinderMeasure, tau: str) -> Fraction:
    """mu(Phi^-1[tau])."""
    n = len(tau)
    length = phi.use(n)
    return sum((mu(r) for r in strings_of_length(length) if phi.output_prefix(r, n) == tau),
               Fraction(0))


def check_phi_martingale(b: PartialMartingale, phi: PrefixMap, mu: CylinderMeasure,
                         depth: int) -> MartingaleReport:
    """Fairness weighted by preimage measures, up to output depth ``depth``."""
    weights = {t: pullback_weight(phi, mu, t) for t in strings_upto(depth)}
    for t in strings_upto(depth - 1):
        if weights[t] == 0:
            continue
        total = Fraction(0)
        for bit in "01":
            c = t + bit
            if weights[c]:
                if not b.defined(c):
                    return MartingaleReport(False, c, "defined-on-positive-measure")
                total += b(c) * weights[c]
        if not b.defined(t):
            return MartingaleReport(False, t, "defined-on-positive-measure")
        residual = total - b(t) * weights[t]
        if residual:
            return MartingaleReport(False, t, "fairness", residual)
    return MartingaleReport(True)


def disjointness_witness(phi: PrefixMap, sigma: str, bound: int) -> int:
    """Least n <= bound separating images of [sigma] from images of its complement."""
    for n in range(bound + 1):
        length = max(len(sigma), phi.use(n))
        inside, outside = set(), set()
        for rho in strings_of_length(length):
            (inside if rho.startswith(sigma) else outside).add(phi.output_prefix(rho, n))
        if not inside & outside:
            return n
    raise NoDisjointnessWitness(f"no separating output length <= {bound} for {sigma!r}")


def pushforward_martingale(b: PartialMartingale, phi: PrefixMap, mu: CylinderMeasure, sigma: str,
                           precision: int) -> Fraction:
    """b'(sigma) = sum_{|tau|=n} b(tau) mu([sigma] & Phi^-1[tau]) / mu(sigma) at the witness n."""
    m = mu(sigma)
    if m == 0:
        raise ZeroMeasureCylinder(f"mu({sigma!r}) = 0")
    n = disjointness_witness(phi, sigma, precision)
    length = max(len(sigma), phi.use(n))
    total = Fraction(0)
    for rho in extensions(sigma, length):
        w = mu(rho)
        if not w:
            continue
        tau = phi.output_prefix(rho, n)
        v = b(tau)
        if v is None:
            raise UndefinedParent(f"b undefined at {tau!r}")
        total += v * w
    return total / m


# --- pair measures ----------------------------------------------------------


class PairMeasure:
    def __init__(self, fn: Callable[[str, str], Fraction]):
        self._fn = fn

    def __call__(self, sigma: str, tau: str) -> Fraction:
        return as_rational(self._fn(sigma, tau))

    @classmethod
    def product(cls, mu1: CylinderMeasure, mu2: CylinderMeasure) -> "PairMeasure":
        return cls(lambda s, t: mu1(s) * mu2(t))

    @classmethod
    def diagonal_fair(cls) -> "PairMeasure":
        """X = Y with X a fair coin."""

        def fn(s: str, t: str) -> Fraction:
            if not (s.startswith(t) or t.startswith(s)):
                return Fraction(0)
            return Fraction(1, 1 << max(len(s), len(t)))

        return cls(fn)


def doob_ratio(pm: PairMeasure, sigma: str, tau: str) -> Fraction:
    marginal = pm("", tau)
    if marginal == 0:
        raise ZeroMarginal(f"second marginal vanishes at {tau!r}")
    return pm(sigma, tau) / marginal


def kucera_tail_cover(prefixes: Iterable[str], n: int) -> Fraction:
    """rho^n, the measure of sequences that start with n consecutive blocks from the set."""
    us = sorted(set(prefixes))
    for i, a in enumerate(us):
        for c in us[i + 1:]:
            if c.startswith(a):
                raise NotPrefixFree(f"{a!r} is a prefix of {c!r}")
    rho = sum((Fraction(1, 1 << len(u)) for u in us), Fraction(0))
    if rho >= 1:
        raise MeasureNotBelowOne(f"rho = {rho}")
    return rho ** n


# --- adversarial construction -------------------------------------------------


@dataclass
class TraceEvent:
    stage: int
    tau: str
    event: str
    detail: dict = field(default_factory=dict)


@dataclass
class StrategyNode:
    tau: str
    sigma: str
    bit: str
    begun: int
    capital_at_begin: Fraction
    state: str = "start"

    @property
    def target(self) -> str:
        return self.sigma + self.bit


@dataclass
class AdversarialResult:
    depth: int
    stages: int
    mu: dict[str, Fraction]
    N: PartialMartingale
    eps: dict[str, Fraction]
    strategies: dict[str, StrategyNode]
    threats: dict[str, int]
    trace: list[TraceEvent]
    true_path_tau: str
    true_path_prefix: str

    def limit_measure(self) -> CylinderMeasure:
        """The measure obtained if every pending threat is kept forever."""
        out: dict[str, Fraction] = {"": self.mu[""]}
        for s in strings_upto(self.depth):
            if not s:
                continue
            if s in self.mu:
                out[s] = self.mu[s]
                continue
            parent = out[s[:-1]]
            sib = s[:-1] + flip(s[-1])
            if parent == 0 or s in self.threats:
                out[s] = Fraction(0)
            elif sib in self.threats:
                out[s] = parent
            elif sib in self.mu:
                out[s] = parent - self.mu[sib]
            else:
                out[s] = parent / 2
        return CylinderMeasure(out, self.depth)


def _uniform_fill(table: dict[str, Fraction], root: str, depth: int, skip: Sequence[str] = ()) -> None:
    base = table[root]
    for length in range(len(root) + 1, depth + 1):
        scale = Fraction(1, 1 << (length - len(root)))
        for rho in extensions(root, length):
            if any(rho.startswith(p) and rho != p for p in skip):
                continue
            table[rho] = base * scale


def adversarial_measure_build(machines: Sequence[Machine], depth: int, stage_budget: int,
                              totality_guess: Sequence[bool] | None = None) -> AdversarialResult:
    """Run the partial-martingale construction against staged machine declarations.

    A machine maps (string, stage) to a strict upper bound on its capital there,
    or None while undeclared; bounds are non-increasing in the stage.
    """
    mu: dict[str, Fraction] = {"": Fraction(1), "0": Fraction(1, 2), "1": Fraction(1, 2)}
    N = PartialMartingale()
    for s in strings_upto(depth):
        if len(s) < 3 or s[1] == "1":
            N[s] = Fraction(1)
    eps: dict[str, Fraction] = {}
    threats: dict[str, int] = {}
    trace: list[TraceEvent] = []
    strategies = {
        "0": StrategyNode("0", "0", "0", 0, Fraction(0)),
        "1": StrategyNode("1", "1", "0", 0, Fraction(0)),
    }
    active = ["0", "1"]
    for tau in active:
        trace.append(TraceEvent(0, tau, "begin", {"sigma": "0" if tau == "0" else "1", "bit": "0"}))

    def machine_bound(i: int, rho: str, stage: int) -> Optional[Fraction]:
        if i >= len(machines):
            return None
        v = machines[i](rho, stage)
        return None if v is None else as_rational(v)

    def capital(tau: str, rho: str, stage: int) -> Optional[Fraction]:
        total = Fraction(0)
        for i, bit in enumerate(tau):
            if bit != "1":
                continue
            if tau[:i] not in eps:
                return None
            v = machine_bound(i, rho, stage)
            if v is None:
                return None
            total += eps[tau[:i]] * v
        return total

    def step(node: StrategyNode, s: int) -> list[StrategyNode]:
        tau = node.tau
        if node.state == "start":
            threats[node.target] = s
            trace.append(TraceEvent(s, tau, "threaten", {"node": node.target}))
            node.state = "wait-bound" if tau[-1] == "1" else "wait-defined"
        if node.state == "wait-bound":
            a = machine_bound(len(tau) - 1, node.target, s)
            if a is None or a <= 0:
                return []
            eps[tau[:-1]] = Fraction(1, 1 << (2 * len(tau))) / a
            trace.append(TraceEvent(s, tau, "epsilon", {"tau": tau[:-1], "bound": a,
                                                       "epsilon": eps[tau[:-1]]}))
            node.state = "wait-defined"
        if node.state != "wait-defined":
            return []
        length = len(node.sigma) + 1 + 2 * len(tau) + 2
        if length > depth:
            node.state = "depth-exhausted"
            trace.append(TraceEvent(s, tau, "depth-exhausted", {"needed": length}))
            return []
        base = capital(tau, node.target, s)
        if base is None:
            return []
        ext = list(extensions(node.target, length))
        values = {}
        for rho in ext:
            v = capital(tau, rho, s)
            if v is None:
                return []
            values[rho] = v
        # cease threatening
        target, other = node.target, node.sigma + flip(node.bit)
        m = min(Fraction(1, 1 << s), mu[node.sigma] / 2)
        mu[target] = m
        mu[other] = mu[node.sigma] - m
        del threats[target]
        _uniform_fill(mu, other, depth)
        trace.append(TraceEvent(s, tau, "release", {"node": target, "mass": m}))
        bound = base + Fraction(1, 1 << (2 * len(tau)))
        good = [rho for rho in ext if values[rho] < bound]
        pair = None
        for i, first in enumerate(good):
            partner = next((r for r in good[i + 1:] if r[:-1] != first[:-1]), None)
            if partner is not None:
                pair = (first, partner)
                break
        if pair is None:
            _uniform_fill(mu, target, depth)
            for rho in strings_upto(depth):
                if rho.startswith(target) and rho != target:
                    N[rho] = N(target)
            node.state = "failed"
            trace.append(TraceEvent(s, tau, "no-pair", {}))
            return []
        parents = [p[:-1] for p in pair]
        _uniform_fill(mu, target, depth, skip=parents)
        stake = N(target) * (1 << (2 * len(tau)))
        for rho in strings_upto(depth):
            if not rho.startswith(target) or rho == target:
                continue
            if any(rho.startswith(p) or p.startswith(rho) for p in parents):
                continue
            N[rho] = Fraction(0)
        for p, sj in zip(parents, pair):
            N[p] = stake
            N[p + "0"] = stake
            N[p + "1"] = stake
            off = p + flip(sj[-1])
            for rho in strings_upto(depth):
                if rho.startswith(off):
                    N[rho] = stake
        # prefixes strictly between target and the parents follow from fairness
        for length_ in range(len(parents[0]) - 1, len(target), -1):
            for rho in extensions(target, length_):
                if any(p.startswith(rho) for p in parents):
                    N[rho] = (N(rho + "0") * mu[rho + "0"] + N(rho + "1") * mu[rho + "1"]) / mu[rho]
        node.state = "split"
        trace.append(TraceEvent(s, tau, "split", {"strings": list(pair), "stake": stake}))
        children = []
        for j, sj in enumerate(pair):
            child = StrategyNode(tau + str(j), sj[:-1], sj[-1], s, values[sj])
            children.append(child)
            trace.append(TraceEvent(s, child.tau, "begin", {"sigma": child.sigma, "bit": child.bit,
                                                           "capital": values[sj]}))
        return children

    for s in range(1, stage_budget + 1):
        born = []
        for tau in sorted(active, key=lambda t: (len(t), t)):
            node = strategies[tau]
            if node.state in ("split", "failed", "depth-exhausted"):
                continue
            born.extend(step(node, s))
        for child in born:
            strategies[child.tau] = child
            active.append(child.tau)
        active = [t for t in active if strategies[t].state not in ("split", "failed")]

    if totality_guess is None:
        answered = {len(e.tau) - 1 for e in trace if e.event == "epsilon"}
        totality_guess = [i in answered for i in range(len(machines))]
    path = ""
    for i in range(len(totality_guess)):
        nxt = path + ("1" if totality_guess[i] else "0")
        if nxt not in strategies:
            break
        path = nxt
    prefix = strategies[path].sigma if path else ""
    for t in strategies.values():
        if t.state not in ("split", "failed", "depth-exhausted"):
            t.state = t.state + " (waiting)" if "waiting" not in t.state else t.state
    return AdversarialResult(depth, stage_budget, mu, N, eps, strategies, threats, trace, path, prefix)


def audit_adversarial(result: AdversarialResult, path_levels: int = 3) -> dict[str, bool]:
    """Exact invariant checks on a finished run."""
    mu, N = result.mu, result.N
    additive = all(mu[s + "0"] + mu[s + "1"] == mu[s] for s in mu
                   if s + "0" in mu and s + "1" in mu)
    fair = True
    for s in mu:
        if not (s + "0" in mu and s + "1" in mu and N.defined(s)):
            continue
        if not (N.defined(s + "0") or mu[s + "0"] == 0) or not (N.defined(s + "1") or mu[s + "1"] == 0):
            continue
        lhs = sum((N(s + b) * mu[s + b] for b in "01" if N.defined(s + b)), Fraction(0))
        if lhs != N(s) * mu[s]:
            fair = False
            break
    defined = all(N.defined(s) for s, m in mu.items() if m > 0)
    capital = all(node.capital_at_begin < 2 - Fraction(1, 1 << (len(node.tau) - 1))
                  for node in result.strategies.values())
    tau = result.true_path_tau
    growth = True
    for i in range(1, min(len(tau), path_levels) + 1):
        node = result.strategies[tau[:i]]
        v = N(node.sigma)
        if v is None or v < (1 << (2 * (i - 1))):
            growth = False
    return {
        "mu_additive": additive,
        "N_fair": fair,
        "N_defined_on_positive_mass": defined,
        "capital_bound": capital,
        "N_growth_on_path": growth,
    }


# --- scripted machine family ------------------------------------------------


def constant_machine(value: Fraction = Fraction(1)) -> Machine:
    """Total constant capital; declares value + 2^(1-s) at stage s."""
    value = as_rational(value)
    return lambda sigma, s: value + Fraction(2, 1 << s)


def proportional_machine(fraction: Fraction = Fraction(1, 2), favored: str = "0") -> Machine:
    """Bets a fixed fraction of capital on the favored bit at every step."""
    f = as_rational(fraction)

    def value(sigma: str) -> Fraction:
        v = Fraction(1)
        for b in sigma:
            v *= (1 + f) if b == favored else (1 - f)
        return v

    return lambda sigma, s: value(sigma) + Fraction(1, 1 << s)


def never_machine() -> Machine:
    return lambda sigma, s: None


def slow_machine(delay: int = 20, value: Fraction = Fraction(1)) -> Machine:
    """Total, but declares at sigma only from stage delay * (|sigma| + 1) on."""
    value = as_rational(value)

    def fn(sigma: str, s: int) -> Optional[Fraction]:
        if s < delay * (len(sigma) + 1):
            return None
        return value + Fraction(1, 1 << s)

    return fn


def scripted_family() -> list[Machine]:
    return [constant_machine(), proportional_machine(), never_machine(), slow_machine()]
