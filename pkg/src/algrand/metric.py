"""Left-c.e. metric spaces presented by staged distance tables."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Optional, Sequence

from .exact import as_rational, parse_rational, rational_str


class IndexOutsideW(IndexError):
    pass


class NotPerfectWitness(RuntimeError):
    pass


Table = list[list[Fraction]]


class StagedPremetric:
    """Undergraph triples (stage, v, w, q); h_t(v, w) is the largest q enumerated by stage t."""

    def __init__(self, gamma: Fraction, triples: Iterable[tuple[int, int, int, Fraction]] = ()):
        self.gamma = as_rational(gamma)
        self.triples: list[tuple[int, int, int, Fraction]] = []
        for t in triples:
            self.add(*t)

    def add(self, stage: int, v: int, w: int, q: Fraction) -> None:
        q = as_rational(q)
        if v > w:
            v, w = w, v
        if not 0 <= q <= self.gamma:
            raise ValueError(f"q = {q} outside [0, {self.gamma}]")
        self.triples.append((stage, v, w, q))

    @classmethod
    def constant(cls, table: Sequence[Sequence[Fraction]], gamma: Fraction | None = None) -> "StagedPremetric":
        n = len(table)
        vals = [as_rational(table[v][w]) for v in range(n) for w in range(v + 1, n)]
        out = cls(gamma if gamma is not None else max(vals, default=Fraction(1)) or Fraction(1))
        for v in range(n):
            for w in range(v + 1, n):
                out.add(0, v, w, table[v][w])
        return out

    @property
    def points(self) -> int:
        return 1 + max((w for _, _, w, _ in self.triples), default=0)

    def table(self, t: int, n: int | None = None) -> Table:
        n = self.points if n is None else n
        h = [[Fraction(0)] * n for _ in range(n)]
        for stage, v, w, q in self.triples:
            if stage <= t and w < n and q > h[v][w]:
                h[v][w] = h[w][v] = q
        return h

    def dumps(self) -> str:
        rows = sorted(self.triples, key=lambda r: r[0])
        return "".join(f"{s} {v} {w} {rational_str(q)}\n" for s, v, w, q in rows)

    @classmethod
    def loads(cls, text: str, gamma: Fraction | None = None) -> "StagedPremetric":
        rows = []
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            s, v, w, q = line.split()
            rows.append((int(s), int(v), int(w), parse_rational(q)))
        g = gamma if gamma is not None else max((r[3] for r in rows), default=Fraction(1)) or Fraction(1)
        return cls(g, rows)


def shortest_paths(h: Table, upto: int) -> Table:
    """Chain-infimum over points 0..upto; chains of any length up to upto+1 points."""
    n = upto + 1
    d = [row[:n] for row in h[:n]]
    for k in range(n):
        dk = d[k]
        for i in range(n):
            di = d[i]
            via = di[k]
            for j in range(n):
                c = via + dk[j]
                if c < di[j]:
                    di[j] = c
    return d


def triangle_violation(d: Table, points: Iterable[int] | None = None) -> Optional[tuple[int, int, int]]:
    pts = list(range(len(d))) if points is None else list(points)
    for a in pts:
        for b in pts:
            for c in pts:
                if d[a][c] > d[a][b] + d[b][c]:
                    return (a, b, c)
    return None


@dataclass
class RepairResult:
    W: int  # W = [0, W)
    g: Table
    stages: list[int]
    trace: list[str] = field(default_factory=list)

    def distance(self, v: int, w: int) -> Fraction:
        if v >= self.W or w >= self.W:
            return Fraction(0)
        return self.g[v][w]


def triangle_repair(h: StagedPremetric, probe: int, stage_budget: int) -> RepairResult:
    """Run the stage search t_0 < t_1 < ... and return the accreted W and g.

    Points are restricted to [0, probe).  The comparison value for (ln-2) is
    the relaxation recorded when t_i itself was found.
    """
    if probe < 1:
        raise ValueError("probe must be >= 1")
    stages = [-1, 0]  # t_{-1}, t_0
    i = 0
    cap = lambda t: min(t, probe - 1)
    prev_tilde: Table = []  # relaxation recorded at t_i (for t_0: empty)
    g = [[Fraction(0)] * probe for _ in range(probe)]
    W = 0
    trace = ["chains restricted to points <= t_i"]
    t = stages[-1] + 1
    while t <= stage_budget and W < probe:
        ti, tprev = stages[-1], stages[-2]
        ht = h.table(t, probe)
        tilde = shortest_paths(ht, cap(ti))
        m = cap(ti) + 1
        bound = Fraction(1, 1 << i)
        ok = all(ht[v][w] - tilde[v][w] <= bound for v in range(m) for w in range(m))
        if ok and tprev >= 0:
            k = cap(tprev) + 1
            ok = all(tilde[v][w] >= prev_tilde[v][w] for v in range(k) for w in range(k))
        if ok:
            stages.append(t)
            W = min(ti, probe - 1) + 1
            for v in range(m):
                for w in range(m):
                    if tilde[v][w] > g[v][w]:
                        g[v][w] = tilde[v][w]
            trace.append(f"t_{i + 1} = {t}; W = [0, {W})")
            prev_tilde = tilde
            i += 1
        t += 1
    if W < probe:
        trace.append(f"stalled at i = {i} within budget {stage_budget}")
    return RepairResult(W, [row[:W] for row in g[:W]], stages[1:], trace)


# --- universal space ---------------------------------------------------------


def cantor_pair(a: int, b: int) -> int:
    return (a + b) * (a + b + 1) // 2 + b


def cantor_unpair(k: int) -> tuple[int, int]:
    from math import isqrt

    w = (isqrt(8 * k + 1) - 1) // 2
    b = k - w * (w + 1) // 2
    return w - b, b


class UniversalSpace:
    """Disjoint union of repaired components, at distance gamma from each other."""

    def __init__(self, components: Sequence[RepairResult], gamma: Fraction,
                 pairing: Callable[[int], tuple[int, int]] | None = None):
        self.gamma = as_rational(gamma)
        self.components = list(components)
        for p, comp in enumerate(self.components):
            diam = max((x for row in comp.g for x in row), default=Fraction(0))
            if diam > self.gamma:
                raise ValueError(f"component {p} has diameter {diam} > gamma")
        if pairing is None:
            cells = [(p, x) for p, c in enumerate(self.components) for x in range(c.W)]
            cells.sort(key=lambda px: cantor_pair(*px))
            self._cells = cells
            self.pairing = self._diagonal
        else:
            self._cells = None
            self.pairing = pairing

    def _diagonal(self, i: int) -> tuple[int, int]:
        if not 0 <= i < len(self._cells):
            raise IndexOutsideW(f"index {i} is not a point of any W_p")
        return self._cells[i]

    @property
    def size(self) -> Optional[int]:
        return None if self._cells is None else len(self._cells)

    def __call__(self, i: int, k: int) -> Fraction:
        p, x = self.pairing(i)
        q, y = self.pairing(k)
        if p != q:
            return self.gamma
        comp = self.components[p]
        if x >= comp.W or y >= comp.W:
            raise IndexOutsideW(f"local index outside W_{p}")
        return comp.g[x][y]


def universal_assemble(components: Sequence[RepairResult], gamma: Fraction,
                       pairing: Callable[[int], tuple[int, int]] | None = None) -> UniversalSpace:
    return UniversalSpace(components, gamma, pairing)


# --- ultrametric diagonalization ----------------------------------------------


@dataclass
class EmbeddingCandidate:
    """phi(k) appears at a stage; the domain at every stage is an initial segment."""

    values: dict[int, tuple[int, int]]  # k -> (target index, stage)

    def __call__(self, k: int, stage: int) -> Optional[int]:
        for j in range(k + 1):
            if j not in self.values or self.values[j][1] > stage:
                return None
        return self.values[k][0]

    def settled(self, k: int, stage: int) -> bool:
        return self(k, stage) is not None


@dataclass
class UltrametricResult:
    space: StagedPremetric
    tables: list[Table]  # stage s -> distances among q_0 .. q_{2m-1}
    log: list[dict]


def ultrametric_diagonalize(target: StagedPremetric, candidates: Sequence[EmbeddingCandidate],
                            stage_budget: int) -> UltrametricResult:
    m = len(candidates)
    n_target = target.points
    tables = []
    triples = []
    for s in range(stage_budget + 1):
        ds = target.table(s, n_target)
        v = []
        for n, phi in enumerate(candidates):
            a, b = phi(2 * n, s), phi(2 * n + 1, s)
            if n <= s and a is not None and b is not None:
                v.append(ds[a][b] + 3)
            else:
                v.append(Fraction(0))
        size = 2 * m
        d = [[Fraction(0)] * size for _ in range(size)]
        for x in range(size):
            for y in range(size):
                if x != y:
                    d[x][y] = v[x // 2] if x // 2 == y // 2 else max(v[x // 2], v[y // 2])
        tables.append(d)
        for x in range(size):
            for y in range(x + 1, size):
                if d[x][y]:
                    triples.append((s, x, y, d[x][y]))
    final = tables[-1]
    dT = target.table(stage_budget, n_target)
    log = []
    for n, phi in enumerate(candidates):
        a, b = phi(2 * n, stage_budget), phi(2 * n + 1, stage_budget)
        entry = {"n": n, "settled": a is not None and b is not None and n <= stage_budget}
        if entry["settled"]:
            entry["d_A"] = final[2 * n][2 * n + 1]
            entry["d_target"] = dT[a][b]
            entry["R"] = final[2 * n][2 * n + 1] > dT[a][b] + 2
        else:
            entry["R"] = None
        log.append(entry)
    gamma = max((t[3] for t in triples), default=Fraction(1))
    return UltrametricResult(StagedPremetric(gamma, triples), tables, log)


def ultrametric_violation(d: Table) -> Optional[tuple[int, int, int]]:
    n = len(d)
    for x in range(n):
        for y in range(n):
            for z in range(n):
                if d[x][z] > max(d[x][y], d[y][z]):
                    return (x, y, z)
    return None


# --- limit points --------------------------------------------------------------


@dataclass
class MetricPresentation:
    """Finitely many special points with an exact distance function."""

    size: int
    dist: Callable[[int, int], Fraction]

    @classmethod
    def rationals(cls, points: Sequence[Fraction]) -> "MetricPresentation":
        pts = [as_rational(p) for p in points]
        return cls(len(pts), lambda i, j: abs(pts[i] - pts[j]))

    def ball(self, k: int) -> tuple[int, Fraction]:
        i, j = cantor_unpair(k)
        return i, Fraction(1, 1 << j)


@dataclass
class LimitPointsResult:
    D: list[int]
    contributions: dict[int, list[int]]
    trace: list[tuple[int, int, int]]  # (stage, ball, point)


def limit_points_enumerate(space: MetricPresentation, listing: Callable[[int], set[int]], balls: int,
                           stage_budget: int) -> LimitPointsResult:
    """Each ball B_i adds at most one new special point per stage, up to 2^i in total."""
    contrib: dict[int, list[int]] = {i: [] for i in range(balls)}
    D: list[int] = []
    trace = []
    listed = [listing(s) for s in range(stage_budget + 1)]
    valid = [i for i in range(balls) if space.ball(i)[0] < space.size]
    for t in range(1, stage_budget + 1):
        for i in valid:
            if i >= t or len(contrib[i]) >= (1 << i):
                continue
            c, r = space.ball(i)
            constraints = [space.ball(j) for j in range(i + 1)
                           if space.ball(j)[0] < space.size and all(j in listed[s] for s in range(i, t + 1))]
            slack = Fraction(1, 1 << i)
            for q in range(space.size):
                if q in contrib[i] or not space.dist(q, c) < r:
                    continue
                if all(space.dist(q, c2) > r2 - slack for c2, r2 in constraints):
                    contrib[i].append(q)
                    if q not in D:
                        D.append(q)
                    trace.append((t, i, q))
                    break
    for i in valid:
        if contrib[i]:
            continue
        free = not any(all(j in listed[s] for s in range(i, stage_budget + 1)) for j in range(i + 1))
        if free:
            raise NotPerfectWitness(f"ball {i} found no point without constraints")
    return LimitPointsResult(D, contrib, trace)


@dataclass(frozen=True)
class CauchyReport:
    passed: bool
    violation: Optional[tuple[int, int]] = None


def cauchy_name_check(g: Sequence[int], dist: Callable[[int, int], Fraction]) -> CauchyReport:
    for i in range(len(g)):
        for k in range(i, len(g)):
            if dist(g[i], g[k]) > Fraction(1, 1 << i):
                return CauchyReport(False, (i, k))
    return CauchyReport(True)
