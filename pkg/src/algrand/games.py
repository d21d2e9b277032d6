"""Weight games on the binary tree, with rule enforcement and replayable transcripts."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Optional, Protocol, Sequence

from .exact import as_rational, parse_rational, rational_str


class ScriptExceedsCap(ValueError):
    pass


# --- moves --------------------------------------------------------------------


@dataclass(frozen=True)
class AddWeightLength:
    n: int
    delta: Fraction

    def args(self) -> list[str]:
        return [str(self.n), rational_str(self.delta)]


@dataclass(frozen=True)
class AddWeightVertex:
    sigma: str
    delta: Fraction

    def args(self) -> list[str]:
        return [self.sigma or "-", rational_str(self.delta)]


@dataclass(frozen=True)
class FlipBit:
    i: int

    def args(self) -> list[str]:
        return [str(self.i)]


@dataclass(frozen=True)
class EnumerateW:
    n: int
    u: int

    def args(self) -> list[str]:
        return [str(self.n), str(self.u)]


@dataclass(frozen=True)
class AddToA:
    u: int
    n: int = -1  # index of the W_n being served, -1 if none

    def args(self) -> list[str]:
        return [str(self.u), str(self.n)]


Move = AddWeightLength | AddWeightVertex | FlipBit | EnumerateW | AddToA
MOVE_TYPES = {cls.__name__: cls for cls in (AddWeightLength, AddWeightVertex, FlipBit, EnumerateW, AddToA)}


def parse_move(name: str, args: Sequence[str]) -> Move:
    cls = MOVE_TYPES[name]
    if cls is AddWeightLength:
        return AddWeightLength(int(args[0]), parse_rational(args[1]))
    if cls is AddWeightVertex:
        return AddWeightVertex("" if args[0] == "-" else args[0], parse_rational(args[1]))
    if cls is FlipBit:
        return FlipBit(int(args[0]))
    if cls is EnumerateW:
        return EnumerateW(int(args[0]), int(args[1]))
    return AddToA(int(args[0]), int(args[1]))


# --- state ----------------------------------------------------------------------

VARIANTS = {
    # move type -> owning side
    "ktrivial": {AddWeightLength: "opponent", EnumerateW: "opponent",
                 AddWeightVertex: "player", AddToA: "player", FlipBit: "player"},
    "strong": {AddWeightLength: "player", EnumerateW: "player",
               AddWeightVertex: "opponent", FlipBit: "opponent", AddToA: "opponent"},
}
DEFAULT_CAPS = {
    "ktrivial": {"opponent": Fraction(1), "player": Fraction(2)},
    "strong": {"opponent": Fraction(2), "player": Fraction(1)},
}


@dataclass
class GameState:
    variant: str
    caps: dict[str, Fraction]
    length_weights: dict[int, Fraction] = field(default_factory=dict)
    vertex_weights: dict[str, Fraction] = field(default_factory=dict)
    path: dict[int, str] = field(default_factory=dict)
    path_log: list[tuple[int, int, str]] = field(default_factory=list)
    W: dict[int, set[int]] = field(default_factory=dict)
    A: set[int] = field(default_factory=set)
    stage: int = 0

    @classmethod
    def new(cls, variant: str, caps: dict[str, Fraction] | None = None) -> "GameState":
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}")
        return cls(variant, dict(caps or DEFAULT_CAPS[variant]))

    def owner(self, move: Move) -> str:
        return VARIANTS[self.variant][type(move)]

    def bit(self, i: int) -> str:
        return self.path.get(i, "0")

    def prefix(self, n: int) -> str:
        return "".join(self.bit(i) for i in range(n))

    def length_total(self) -> Fraction:
        return sum(self.length_weights.values(), Fraction(0))

    def vertex_total(self) -> Fraction:
        return sum(self.vertex_weights.values(), Fraction(0))

    def total(self, side: str) -> Fraction:
        length_side = VARIANTS[self.variant][AddWeightLength]
        return self.length_total() if side == length_side else self.vertex_total()

    def vertex(self, sigma: str) -> Fraction:
        return self.vertex_weights.get(sigma, Fraction(0))

    def length(self, n: int) -> Fraction:
        return self.length_weights.get(n, Fraction(0))

    def check(self, side: str, move: Move) -> Optional[str]:
        """Reason the move is illegal, or None."""
        if self.owner(move) != side:
            return f"{type(move).__name__} belongs to the {self.owner(move)}"
        if isinstance(move, (AddWeightLength, AddWeightVertex)):
            if move.delta <= 0:
                return "weights only grow"
            if self.total(side) + move.delta > self.caps[side]:
                return f"{side} total would exceed {rational_str(self.caps[side])}"
        if isinstance(move, AddToA) and move.u in self.A:
            return f"{move.u} already in A"
        return None

    def apply(self, move: Move) -> None:
        if isinstance(move, AddWeightLength):
            self.length_weights[move.n] = self.length(move.n) + move.delta
        elif isinstance(move, AddWeightVertex):
            self.vertex_weights[move.sigma] = self.vertex(move.sigma) + move.delta
        elif isinstance(move, FlipBit):
            self._set_bit(move.i, "1" if self.bit(move.i) == "0" else "0")
        elif isinstance(move, EnumerateW):
            self.W.setdefault(move.n, set()).add(move.u)
        elif isinstance(move, AddToA):
            self.A.add(move.u)
            self._set_bit(move.u, "1")

    def _set_bit(self, i: int, b: str) -> None:
        if self.bit(i) != b:
            self.path[i] = b
            self.path_log.append((self.stage, i, b))

    def canonical(self) -> str:
        lines = [f"variant {self.variant}"]
        lines += [f"cap {s} {rational_str(c)}" for s, c in sorted(self.caps.items())]
        lines += [f"L {n} {rational_str(w)}" for n, w in sorted(self.length_weights.items())]
        lines += [f"V {s or '-'} {rational_str(w)}" for s, w in sorted(self.vertex_weights.items())]
        lines += [f"P {i} {b}" for i, b in sorted(self.path.items())]
        lines += [f"W {n} {' '.join(map(str, sorted(u)))}" for n, u in sorted(self.W.items())]
        lines.append("A " + " ".join(map(str, sorted(self.A))))
        return "\n".join(lines)

    def state_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


# --- transcripts ----------------------------------------------------------------


@dataclass
class Violation:
    stage: int
    side: str
    move: Move
    reason: str


@dataclass
class MoveTranscript:
    variant: str
    caps: dict[str, Fraction]
    stages: int = 0
    moves: list[tuple[int, str, Move]] = field(default_factory=list)

    def dumps(self) -> str:
        out = [f"# variant {self.variant}", f"# stages {self.stages}"]
        out += [f"# cap {s} {rational_str(c)}" for s, c in sorted(self.caps.items())]
        out += [" ".join([str(st), side, type(m).__name__, *m.args()]) for st, side, m in self.moves]
        return "\n".join(out) + "\n"

    @classmethod
    def loads(cls, text: str) -> "MoveTranscript":
        variant, stages, caps, moves = "ktrivial", 0, {}, []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if parts[0] == "variant":
                    variant = parts[1]
                elif parts[0] == "stages":
                    stages = int(parts[1])
                elif parts[0] == "cap":
                    caps[parts[1]] = parse_rational(parts[2])
                continue
            st, side, name, *args = line.split()
            moves.append((int(st), side, parse_move(name, args)))
        return cls(variant, caps or dict(DEFAULT_CAPS[variant]), stages, moves)


def replay(transcript: MoveTranscript) -> GameState:
    state = GameState.new(transcript.variant, transcript.caps)
    for st, side, move in transcript.moves:
        state.stage = st
        reason = state.check(side, move)
        if reason is not None:
            raise ValueError(f"illegal move in transcript at stage {st}: {reason}")
        state.apply(move)
    state.stage = transcript.stages
    return state


class Strategy(Protocol):
    def moves(self, state: GameState, stage: int) -> Iterator[Move]: ...


class Silent:
    def moves(self, state: GameState, stage: int) -> Iterator[Move]:
        return iter(())


@dataclass
class GameResult:
    transcript: MoveTranscript
    violations: list[Violation]
    state: GameState


def play(opponent: Strategy, player: Strategy, stages: int, variant: str = "ktrivial",
         caps: dict[str, Fraction] | None = None) -> GameResult:
    """Alternate turns, opponent first; illegal moves are blocked and logged.

    Strategies yield moves one at a time and see each accepted move applied
    before producing the next.
    """
    state = GameState.new(variant, caps)
    transcript = MoveTranscript(variant, dict(state.caps), stages)
    violations: list[Violation] = []
    for s in range(1, stages + 1):
        state.stage = s
        for side, strat in (("opponent", opponent), ("player", player)):
            for move in strat.moves(state, s):
                reason = state.check(side, move)
                if reason is not None:
                    violations.append(Violation(s, side, move, reason))
                    continue
                state.apply(move)
                transcript.moves.append((s, side, move))
    return GameResult(transcript, violations, state)


# --- opponents --------------------------------------------------------------------


class BlindOpponent:
    """Scripted moves that ignore the game state."""

    def __init__(self, script: dict[int, list[Move]]):
        self.script = script

    def moves(self, state: GameState, stage: int) -> Iterator[Move]:
        yield from self.script.get(stage, ())


def blind_opponent(semimeasure: dict[int, list[tuple[int, Fraction]]],
                   W_feeds: dict[int, list[tuple[int, int]]] | None = None,
                   cap: Fraction = Fraction(1)) -> BlindOpponent:
    total = sum((as_rational(d) for incs in semimeasure.values() for _, d in incs), Fraction(0))
    if total > cap:
        raise ScriptExceedsCap(f"script places {rational_str(total)} > {rational_str(cap)}")
    script: dict[int, list[Move]] = {}
    for s, incs in semimeasure.items():
        script.setdefault(s, []).extend(AddWeightLength(n, as_rational(d)) for n, d in incs)
    for s, feeds in (W_feeds or {}).items():
        script.setdefault(s, []).extend(EnumerateW(n, u) for n, u in feeds)
    return BlindOpponent(script)


class MatchingOpponent:
    """Strong-string variant: tops up vertex weight on the current path to match lengths."""

    def moves(self, state: GameState, stage: int) -> Iterator[Move]:
        for n, w in sorted(state.length_weights.items()):
            sigma = state.prefix(n)
            gap = w - state.vertex(sigma)
            if gap > 0:
                yield AddWeightVertex(sigma, gap)


# --- K-trivial builder -------------------------------------------------------------


def action_cost(state: GameState, u: int) -> Fraction:
    """Player weight on current-path vertices of length >= u."""
    return sum((w for s, w in state.vertex_weights.items() if len(s) >= u and state.prefix(len(s)) == s),
               Fraction(0))


class KTrivialBuilder:
    """Mirror the opponent's length weights along the path of A, and make A simple.

    W_n is served (for n >= 1) by some u > 2n whose action cost is below 2^-n.
    """

    def __init__(self) -> None:
        self.served: set[int] = set()
        self.actions: list[tuple[int, int, int, Fraction]] = []  # stage, n, u, cost

    def _mirror(self, state: GameState) -> Iterator[Move]:
        for n, w in sorted(state.length_weights.items()):
            sigma = state.prefix(n)
            gap = w - state.vertex(sigma)
            if gap > 0:
                yield AddWeightVertex(sigma, gap)

    def moves(self, state: GameState, stage: int) -> Iterator[Move]:
        yield from self._mirror(state)
        for n in sorted(state.W):
            if n < 1 or n in self.served:
                continue
            for u in sorted(state.W[n]):
                if u <= 2 * n or u in state.A:
                    continue
                cost = action_cost(state, u)
                if cost < Fraction(1, 1 << n):
                    self.served.add(n)
                    self.actions.append((stage, n, u, cost))
                    yield AddToA(u, n)
                    yield from self._mirror(state)
                    break


def ktrivial_builder_strategy() -> KTrivialBuilder:
    return KTrivialBuilder()


# --- strong strings ------------------------------------------------------------------


@dataclass
class ForcingMachine:
    """strong(u, stage): u is known by ``stage`` to force output 0; monotone in u."""

    strong_at: Callable[[str], Optional[int]]  # discovery stage, None if never

    def strong(self, u: str, stage: int) -> bool:
        for k in range(len(u) + 1):
            d = self.strong_at(u[:k])
            if d is not None and d <= stage:
                return True
        return False

    @classmethod
    def everywhere(cls) -> "ForcingMachine":
        return cls(lambda u: 0)

    @classmethod
    def nowhere(cls) -> "ForcingMachine":
        return cls(lambda u: None)

    @classmethod
    def above(cls, prefixes: dict[str, int]) -> "ForcingMachine":
        return cls(lambda u: prefixes.get(u))


def string_code(x: str) -> int:
    return int("1" + x, 2) - 1


def string_for_length(l: int) -> Optional[str]:
    """Inverse of l_x = code(x) + |x| + 1."""
    n = 0
    while (1 << n) + n <= l:
        code = l - n - 1
        if (1 << n) - 1 <= code <= (1 << (n + 1)) - 2:
            return format(code + 1, "b")[1:]
        n += 1
    return None


def default_delta(eps: Fraction) -> Callable[[str], Fraction]:
    return lambda x: eps / (1 << (2 * string_code(x) + 2))


class StrongStringStrategy:
    """Processes P_x for strong x add delta_x at length l_x while x is on the path.

    Each process waits until its last increment is matched on the current path.
    When total spend reaches 1 - 2*eps every process halts and 0 enters W_0.
    """

    def __init__(self, gamma: ForcingMachine, eps: Fraction,
                 delta: Callable[[str], Fraction] | None = None, depth: int = 4):
        eps = as_rational(eps)
        if not 0 < eps < Fraction(1, 6):
            raise ValueError("eps must lie in (0, 1/6)")
        self.gamma = gamma
        self.eps = eps
        self.delta = delta or default_delta(eps)
        self.depth = depth
        self.processes: list[str] = []
        self.pending: dict[str, int] = {}  # x -> its length l_x
        self.spent: dict[str, Fraction] = {}
        self.terminated: Optional[int] = None
        self.idle_sleep: list[tuple[int, str]] = []

    @staticmethod
    def length_for(x: str) -> int:
        return string_code(x) + len(x) + 1

    def _discover(self, stage: int) -> None:
        known = set(self.processes)
        for n in range(self.depth + 1):
            for k in range(1 << n):
                x = format(k, f"0{n}b") if n else ""
                if x not in known and self.gamma.strong(x, stage):
                    self.processes.append(x)
                    known.add(x)

    def total_spent(self) -> Fraction:
        return sum(self.spent.values(), Fraction(0))

    def moves(self, state: GameState, stage: int) -> Iterator[Move]:
        if self.terminated is not None:
            return
        self._discover(stage)
        threshold = 1 - 2 * self.eps
        for x in self.processes:
            if self.total_spent() >= threshold:
                break
            if state.prefix(len(x)) != x:
                continue
            lx = self.length_for(x)
            if state.vertex(state.prefix(lx)) < state.length(lx):
                continue  # last increment not yet matched
            d = self.delta(x)
            self.spent[x] = self.spent.get(x, Fraction(0)) + d
            yield AddWeightLength(lx, d)
        if self.total_spent() >= threshold:
            self.terminated = stage
            yield EnumerateW(0, 0)


def strong_string_strategy(gamma: ForcingMachine, eps: Fraction,
                           delta_schedule: Callable[[str], Fraction] | None = None,
                           depth: int = 4) -> StrongStringStrategy:
    return StrongStringStrategy(gamma, eps, delta_schedule, depth)


# --- audit -------------------------------------------------------------------------------


def settled_lengths(state: GameState, stages: int, horizon: int) -> list[int]:
    """Lengths n <= horizon whose path prefix did not change in the last quarter of the run."""
    cutoff = stages - stages // 4
    late = [i for st, i, _ in state.path_log if st > cutoff]
    first_late = min(late, default=None)
    return [n for n in range(horizon + 1) if first_late is None or n <= first_late]


def audit(transcript: MoveTranscript, game: str | None = None, gamma: ForcingMachine | None = None,
          probe: int = 64, eps: Fraction | None = None) -> dict:
    game = game or transcript.variant
    state = GameState.new(transcript.variant, transcript.caps)
    report: dict = {"variant": game}
    cap_ok = True
    add_to_a_ok = True
    for st, side, move in transcript.moves:
        state.stage = st
        if state.check(side, move) is not None:
            cap_ok = False
        if isinstance(move, AddToA) and game == "ktrivial":
            n = move.n
            if n < 0 or move.u <= 2 * n or move.u not in state.W.get(n, set()) \
                    or action_cost(state, move.u) >= Fraction(1, 1 << n):
                add_to_a_ok = False
        state.apply(move)
        for side_ in ("opponent", "player"):
            if state.total(side_) > state.caps[side_]:
                cap_ok = False
    state.stage = transcript.stages
    report["caps"] = cap_ok
    report["totals"] = {s: state.total(s) for s in ("opponent", "player")}
    horizon = max([*state.length_weights, 0])
    settled = settled_lengths(state, transcript.stages, horizon)
    if game == "ktrivial":
        report["matching"] = all(state.vertex(state.prefix(n)) >= state.length(n)
                                 for n in settled if state.length(n) > 0)
        report["settled_lengths"] = len(settled)
        served = {m.n for _, _, m in transcript.moves if isinstance(m, AddToA)}
        unserved = []
        for n, ws in sorted(state.W.items()):
            if n < 1 or n in served:
                continue
            if any(u > 2 * n and u not in state.A and action_cost(state, u) < Fraction(1, 1 << n) for u in ws):
                unserved.append(n)
        report["qualifying_served"] = not unserved
        report["add_to_A_rules"] = add_to_a_ok
        report["sparse_A"] = all(2 * len([a for a in state.A if a < m]) <= m for m in range(probe + 1))
        report["pass"] = all(report[k] for k in ("caps", "matching", "qualifying_served",
                                                 "add_to_A_rules", "sparse_A"))
    else:
        spent = state.length_total()
        matched = Fraction(0)
        for n, w in state.length_weights.items():
            matched += min(w, state.vertex(state.prefix(n)))
        unmatched = spent - matched
        on_path = {state.prefix(len(s)) for s in state.vertex_weights}
        off_path = sum((w for s, w in state.vertex_weights.items() if s not in on_path), Fraction(0))
        terminated = 0 in state.W.get(0, set())
        report.update(spent=spent, matched=matched, unmatched=unmatched, off_path_weight=off_path,
                      terminated=terminated)
        report["opponent_matching"] = all(state.vertex(state.prefix(n)) >= state.length(n) for n in settled
                                          if state.length(n) > 0)
        if gamma is not None:
            eps_ = eps if eps is not None else Fraction(1, 10)
            started = {x for x in map(string_for_length, state.length_weights) if x is not None}
            bound = sum((default_delta(eps_)(x) for x in started), Fraction(0))
            report["delta_bound"] = bound
            report["accounting"] = spent == matched + unmatched and unmatched <= bound
            path_strong = any(gamma.strong(state.prefix(n), transcript.stages) for n in range(probe + 1))
            report["win_by_divergence"] = not terminated and not path_strong
        report["pass"] = report["caps"] and report.get("accounting", True)
    return report
