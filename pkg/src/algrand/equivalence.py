"""Staged binary relations and the slow-copy construction."""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable, Optional

Pair = tuple[int, int]


class StagedRelation:
    """A relation on [0, m) given at each stage; stage 0 is the initial state."""

    def __init__(self, m: int, states: Iterable[Iterable[Pair]]):
        self.m = m
        self.states: list[frozenset[Pair]] = [frozenset(s) for s in states]
        if not self.states:
            self.states = [frozenset()]
        for st in self.states:
            for a, b in st:
                if not (0 <= a < m and 0 <= b < m):
                    raise ValueError(f"pair {(a, b)} outside [0, {m})")

    @property
    def last_stage(self) -> int:
        return len(self.states) - 1

    def at(self, s: int) -> frozenset[Pair]:
        return self.states[min(s, self.last_stage)]

    @classmethod
    def from_ops(cls, m: int, ops: Iterable[tuple[int, str, int, int]], stages: int | None = None) -> "StagedRelation":
        by_stage: dict[int, list[tuple[str, Pair]]] = {}
        for s, op, a, b in ops:
            if op not in ("add", "del"):
                raise ValueError(f"unknown op {op!r}")
            by_stage.setdefault(s, []).append((op, (a, b)))
        last = max(by_stage, default=0) if stages is None else stages
        current: set[Pair] = set()
        states = []
        for s in range(last + 1):
            for op, p in by_stage.get(s, ()):
                (current.add if op == "add" else current.discard)(p)
            states.append(frozenset(current))
        return cls(m, states)

    def ops(self) -> list[tuple[int, str, int, int]]:
        out = []
        prev: frozenset[Pair] = frozenset()
        for s, st in enumerate(self.states):
            out += [(s, "add", a, b) for a, b in sorted(st - prev)]
            out += [(s, "del", a, b) for a, b in sorted(prev - st)]
            prev = st
        return out

    def dumps(self) -> str:
        head = f"# domain {self.m}\n# stages {self.last_stage}\n"
        return head + "".join(f"{s} {op} {a} {b}\n" for s, op, a, b in self.ops())

    @classmethod
    def loads(cls, text: str, m: int | None = None) -> "StagedRelation":
        ops = []
        stages = None
        for line in text.splitlines():
            line = line.strip()
            if line.startswith("# domain") and m is None:
                m = int(line.split()[2])
                continue
            if line.startswith("# stages"):
                stages = int(line.split()[2])
                continue
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            s, op, a, b = line.split()
            ops.append((int(s), op, int(a), int(b)))
        if m is None:
            m = 1 + max((max(a, b) for _, _, a, b in ops), default=-1)
        return cls.from_ops(m, ops, stages)


@dataclass(frozen=True)
class EquivalenceVerdict:
    ok: bool
    axiom: Optional[str] = None
    witness: Optional[tuple[int, ...]] = None

    def __bool__(self) -> bool:
        return self.ok


def verify_equivalence(R: Iterable[Pair], m: int) -> EquivalenceVerdict:
    rel = set(R)
    for a in range(m):
        if (a, a) not in rel:
            return EquivalenceVerdict(False, "reflexivity", (a,))
    for a, b in sorted(rel):
        if (b, a) not in rel:
            return EquivalenceVerdict(False, "symmetry", (a, b))
    succ: dict[int, list[int]] = {}
    for a, b in sorted(rel):
        succ.setdefault(a, []).append(b)
    for a in sorted(succ):
        for b in succ[a]:
            for c in succ.get(b, ()):
                if (a, c) not in rel:
                    return EquivalenceVerdict(False, "transitivity", (a, b, c))
    return EquivalenceVerdict(True)


def diagonal(m: int) -> frozenset[Pair]:
    return frozenset((a, a) for a in range(m))


@dataclass
class SlowCopyResult:
    F: StagedRelation
    n_trace: list[int]
    F_equals_E_on_prefix: bool


def slow_copy_complete(E: StagedRelation, stages: int) -> SlowCopyResult:
    """Copy E onto a growing prefix, one more point per stage the copy is an equivalence relation."""
    m = E.m
    diag = diagonal(m)
    F = [diag]
    n = [0]
    for s in range(1, stages + 1):
        k = min(n[-1] + 1, m)
        restricted = frozenset((a, b) for a, b in E.at(s) if a < k and b < k)
        if verify_equivalence(restricted, k):
            F.append(restricted | diag)
            n.append(k)
        else:
            F.append(F[-1])
            n.append(n[-1])
    k = min(n[-1], m)
    final_E = {(a, b) for a, b in E.at(stages) if a < k and b < k}
    final_F = {(a, b) for a, b in F[-1] if a < k and b < k}
    return SlowCopyResult(StagedRelation(m, F), n, final_E == final_F)


def mind_change_profile(R: StagedRelation, pair: Pair) -> tuple[bool, int]:
    first = pair in R.states[0]
    changes = sum(1 for a, b in zip(R.states, R.states[1:]) if (pair in a) != (pair in b))
    return first, changes


def random_dce_relation(rng: random.Random, m: int = 20, settle: int = 200,
                        equivalence: bool | None = None) -> StagedRelation:
    """A symmetric d.c.e. relation whose last change happens before ``settle``.

    Off-diagonal pairs start out; each pair changes at most twice (out, in, out).
    When ``equivalence`` is true the final relation is a random partition.
    """
    if equivalence is None:
        equivalence = rng.random() < 0.5
    if equivalence:
        blocks = [rng.randrange(max(1, m // 3)) for _ in range(m)]
        final = {(a, b) for a in range(m) for b in range(a + 1, m) if blocks[a] == blocks[b]}
    else:
        final = {(a, b) for a in range(m) for b in range(a + 1, m) if rng.random() < 0.15}
    ops = [(0, "add", a, a) for a in range(m)]
    for a in range(m):
        for b in range(a + 1, m):
            if (a, b) in final:
                s = rng.randrange(1, settle)
                ops += [(s, "add", a, b), (s, "add", b, a)]
            elif rng.random() < 0.1:
                s, t = sorted(rng.sample(range(1, settle), 2))
                ops += [(s, "add", a, b), (s, "add", b, a), (t, "del", a, b), (t, "del", b, a)]
    return StagedRelation.from_ops(m, ops, stages=settle)
