"""Command-line experiments: ``algrand <command> [options]``."""

from __future__ import annotations

import argparse
import json
import sys
import time
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

from . import equidist as ed
from . import equivalence as eq
from . import games as gm
from . import martingales as mg
from . import metric as mt
from .exact import DyadicInterval, champernowne_binary, parse_rational, rational_str


class ContractError(Exception):
    """Raised for inputs that parse but violate an operation's preconditions."""


# --- serialization ------------------------------------------------------------------


def to_wire(x: Any) -> Any:
    if isinstance(x, bool) or x is None or isinstance(x, str):
        return x
    if isinstance(x, int):
        return x
    if isinstance(x, Fraction):
        return rational_str(x)
    if isinstance(x, DyadicInterval):
        return [rational_str(x.lo), rational_str(x.hi)]
    if isinstance(x, dict):
        return {str(k): to_wire(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_wire(v) for v in x]
    if isinstance(x, float):
        raise TypeError("floating point values are not allowed in reports")
    return str(x)


def rationals(text: str) -> list[Fraction]:
    return [parse_rational(t) for t in text.split(",") if t.strip()]


def rational_arg(text: str) -> Fraction:
    try:
        return parse_rational(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(str(exc))


def rationals_arg(text: str) -> list[Fraction]:
    try:
        return rationals(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(str(exc))


def read_text(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ContractError(f"cannot read {path}: {exc}")


# --- commands -------------------------------------------------------------------------


def cmd_orbit(a) -> tuple[dict, dict]:
    if a.champernowne:
        seed: Any = champernowne_binary()
    elif a.x is not None:
        seed = a.x
    else:
        raise ContractError("give --x or --champernowne")
    spec = ed.OrbitSpec(seed, ed.PowerBase(a.base))
    sample = ed.orbit_frac(spec, a.n, a.precision)
    res: dict = {"points": sample.points}
    if sample.exact:
        v = ed.ud_defect(sample, a.bins)
        res["defect"] = v.defect
        res["counts"] = list(v.counts)
    else:
        res["defect"] = None
    res["normality_verdict"] = None
    return res, {}


def cmd_weyl(a):
    sample = ed.sample_from(a.points)
    re, im = ed.weyl_sum(sample, a.h, a.precision)
    sq = ed.weyl_abs_sq(sample, a.h, a.precision)
    cos = ed.weyl_sum_sq_cosine(sample, a.h, a.precision)
    residual = max(abs(sq.hi - cos.lo), abs(cos.hi - sq.lo))
    tol = Fraction(1, 1 << max(a.precision - 2, 0))
    res = {"re": re, "im": im, "abs_sq": sq, "cosine": cos, "identity_residual": residual}
    audit = {"enclosures_intersect": sq.intersects(cos), "residual_within_tolerance": residual <= tol}
    audit["pass"] = all(audit.values())
    return res, audit


def cmd_solovay(a):
    law = ed.integer_multipliers()
    member = ed.solovay_member(a.x, law, a.h, a.n, a.precision)
    budget = ed.solovay_measure_budget(a.nmax, a.h, a.k)
    return {"membership": member.value, "budget": budget}, {}


def cmd_koksma(a):
    bound = ed.koksma_bound(a.n, a.h, a.k)
    mc = ed.mean_square_weyl_mc(a.n, a.h, a.samples, a.seed, min(a.precision, 24))
    exact = Fraction(1, a.n)
    res = {"bound": bound, "exact_mean": exact, "mc_mean": mc.mean, "mc_variance": mc.variance,
           "samples": mc.samples}
    audit = {"exact_below_bound": exact <= bound, "mc_within_3se": mc.within(exact)}
    audit["pass"] = all(audit.values())
    return res, audit


def _load_premetric(path: str, gamma: Optional[Fraction] = None) -> mt.StagedPremetric:
    try:
        return mt.StagedPremetric.loads(read_text(path), gamma)
    except ValueError as exc:
        raise ContractError(str(exc))


def cmd_repair(a):
    h = _load_premetric(a.premetric)
    probe = a.probe or h.points
    r = mt.triangle_repair(h, probe, a.stages)
    res = {"W": r.W, "stages": r.stages, "g": r.g, "trace": r.trace}
    audit = {"triangle_on_W": mt.triangle_violation(r.g) is None}
    audit["pass"] = all(audit.values())
    return res, audit


def cmd_assemble(a):
    comps = []
    for path in a.premetric:
        h = _load_premetric(path)
        comps.append(mt.triangle_repair(h, a.probe or h.points, a.stages))
    U = mt.universal_assemble(comps, a.gamma)
    size = U.size if a.points is None else min(a.points, U.size)
    d = [[U(i, k) for k in range(size)] for i in range(size)]
    res = {"components": [c.W for c in comps], "points": size,
           "pairing": [list(U.pairing(i)) for i in range(size)], "distances": d}
    audit = {"triangle": mt.triangle_violation(d) is None}
    audit["pass"] = all(audit.values())
    return res, audit


def _load_candidates(path: str) -> list[mt.EmbeddingCandidate]:
    cands: dict[int, dict[int, tuple[int, int]]] = {}
    for line in read_text(path).splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        n, k, v, s = map(int, line.split())
        cands.setdefault(n, {})[k] = (v, s)
    return [mt.EmbeddingCandidate(cands.get(n, {})) for n in range(max(cands, default=-1) + 1)]


def cmd_diagonalize(a):
    target = _load_premetric(a.target)
    cands = _load_candidates(a.candidates)
    r = mt.ultrametric_diagonalize(target, cands, a.stages)
    ultra = all(mt.ultrametric_violation(t) is None for t in r.tables)
    res = {"final_distances": r.tables[-1], "requirements": r.log}
    audit = {"ultrametric_every_stage": ultra,
             "settled_requirements_met": all(e["R"] for e in r.log if e["settled"])}
    audit["pass"] = all(audit.values())
    return res, audit


def _load_listing(path: Optional[str]) -> Callable[[int], set[int]]:
    spans = []
    if path:
        for line in read_text(path).splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            lo, hi, ball = line.split()
            spans.append((int(lo), None if hi == "-" else int(hi), int(ball)))
    return lambda s: {b for lo, hi, b in spans if lo <= s and (hi is None or s <= hi)}


def cmd_limit_points(a):
    space = mt.MetricPresentation.rationals(a.points)
    listing = _load_listing(a.complement)
    r = mt.limit_points_enumerate(space, listing, a.balls, a.stages)
    res = {"D": [a.points[q] for q in r.D], "D_indices": r.D,
           "contributions": {str(i): v for i, v in r.contributions.items() if v}}
    audit = {"ball_cap": all(len(v) <= (1 << i) for i, v in r.contributions.items())}
    audit["pass"] = all(audit.values())
    return res, audit


MACHINES = {
    "constant": mg.constant_machine,
    "proportional": mg.proportional_machine,
    "never": mg.never_machine,
    "slow": mg.slow_machine,
}


def cmd_adversarial(a):
    names = [m for m in a.machines.split(",") if m]
    try:
        machines = [MACHINES[m]() for m in names]
    except KeyError as exc:
        raise ContractError(f"unknown machine {exc}")
    guess = None if a.guess is None else [c == "1" for c in a.guess]
    r = mg.adversarial_measure_build(machines, a.depth, a.stages, guess)
    limit = r.limit_measure()
    slices = all(sum(limit(s) for s in mg.strings_of_length(d)) == 1 for d in range(a.depth + 1))
    res = {
        "strategies": {t: {"sigma": n.sigma, "bit": n.bit, "state": n.state, "capital": n.capital_at_begin}
                       for t, n in sorted(r.strategies.items(), key=lambda kv: (len(kv[0]), kv[0]))},
        "epsilon": r.eps,
        "true_path_tau": r.true_path_tau,
        "true_path_prefix": r.true_path_prefix,
        "N_on_path": {t: r.N(r.strategies[t].sigma) for t in
                      (r.true_path_tau[:i] for i in range(1, len(r.true_path_tau) + 1))},
        "pending_threats": sorted(r.threats),
        "trace": [[e.stage, e.tau, e.event] for e in r.trace],
    }
    audit = dict(mg.audit_adversarial(r))
    audit["limit_slices_sum_to_one"] = slices
    audit["pass"] = all(audit.values())
    return res, audit


MARTINGALES = {
    "constant": lambda s: Fraction(1),
    "zeros": lambda s: Fraction(1 << len(s)) if "1" not in s else Fraction(0),
    "ones": lambda s: Fraction(1 << len(s)) if "0" not in s else Fraction(0),
}
MAPS = {"identity": mg.identity_map, "flip": mg.flip_first_bit, "shift": mg.zero_shift}


def cmd_pushforward(a):
    if a.martingale not in MARTINGALES or a.map not in MAPS:
        raise ContractError("unknown martingale or map")
    fn = MARTINGALES[a.martingale]
    b = mg.PartialMartingale.from_function(fn, a.depth + 1)
    phi = MAPS[a.map]()
    mu = mg.CylinderMeasure.fair_coin(a.depth + 1)
    value = mg.pushforward_martingale(b, phi, mu, a.sigma, a.depth + 1)
    n = mg.disjointness_witness(phi, a.sigma, a.depth + 1)
    closed = {"identity": lambda s: s, "flip": lambda s: phi.image(s), "shift": lambda s: "0" + s}[a.map](a.sigma)
    res = {"value": value, "witness_n": n, "closed_form": fn(closed)}
    audit = {"matches_closed_form": value == fn(closed)}
    audit["pass"] = all(audit.values())
    return res, audit


def cmd_slow_copy(a):
    try:
        E = eq.StagedRelation.loads(read_text(a.relation), a.domain)
    except ValueError as exc:
        raise ContractError(str(exc))
    r = eq.slow_copy_complete(E, a.stages)
    every = all(eq.verify_equivalence(F, E.m) for F in r.F.states)
    stabilized_er = bool(eq.verify_equivalence(E.at(a.stages), E.m))
    res = {"domain": E.m, "n_final": r.n_trace[-1], "n_trace": r.n_trace,
           "E_final_is_equivalence": stabilized_er, "F_equals_E_on_prefix": r.F_equals_E_on_prefix}
    audit = {"every_F_is_equivalence": every}
    audit["pass"] = all(audit.values())
    return res, audit


def _load_script(path: Optional[str]):
    lengths: dict[int, list] = {}
    feeds: dict[int, list] = {}
    if path:
        for line in read_text(path).splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            s, kind, x, y = line.split()
            if kind == "length":
                lengths.setdefault(int(s), []).append((int(x), parse_rational(y)))
            elif kind == "W":
                feeds.setdefault(int(s), []).append((int(x), int(y)))
            else:
                raise ContractError(f"unknown script line {line!r}")
    return lengths, feeds


def cmd_game(a):
    if a.variant == "ktrivial":
        lengths, feeds = _load_script(a.script)
        try:
            opp = gm.blind_opponent(lengths, feeds)
        except gm.ScriptExceedsCap as exc:
            raise ContractError(str(exc))
        player = gm.ktrivial_builder_strategy()
        result = gm.play(opp, player, a.stages, "ktrivial")
        report = gm.audit(result.transcript, "ktrivial")
        extra = {"A": sorted(result.state.A)}
    else:
        gamma = gm.ForcingMachine.everywhere() if a.gamma == "everywhere" else gm.ForcingMachine.nowhere()
        player = gm.strong_string_strategy(gamma, a.eps)
        result = gm.play(gm.MatchingOpponent(), player, a.stages, "strong")
        report = gm.audit(result.transcript, "strong", gamma=gamma, eps=a.eps)
        extra = {"terminated_at": player.terminated}
    if a.transcript:
        Path(a.transcript).write_text(result.transcript.dumps())
    res = {"moves": len(result.transcript.moves), "violations": len(result.violations),
           "state_hash": result.state.state_hash(), **extra}
    return res, report


# --- parser ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--precision", type=int, default=30, help="bits of working precision")
    common.add_argument("--stages", type=int, default=100)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--timing", action="store_true", help="record wall time in elapsed_ms")

    p = argparse.ArgumentParser(prog="algrand", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(fn=fn)
        return sp

    sp = add("orbit", cmd_orbit, "fractional parts of x r^j and their bin defect")
    sp.add_argument("--x", type=rational_arg)
    sp.add_argument("--champernowne", action="store_true", help="binary Champernowne seed")
    sp.add_argument("--base", type=rational_arg, default=Fraction(2))
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--bins", type=int, default=10)

    sp = add("weyl", cmd_weyl, "Weyl sum by direct and cosine routes")
    sp.add_argument("--points", type=rationals_arg, required=True)
    sp.add_argument("--h", type=int, required=True)

    sp = add("solovay", cmd_solovay, "Solovay-test membership and measure budget")
    sp.add_argument("--x", type=rational_arg, default=Fraction(0))
    sp.add_argument("--h", type=int, default=1)
    sp.add_argument("--n", type=int, default=2)
    sp.add_argument("--nmax", type=int, default=100)
    sp.add_argument("--k", type=rational_arg, default=Fraction(1))

    sp = add("koksma", cmd_koksma, "Koksma bound against a Monte-Carlo mean square")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--h", type=int, default=1)
    sp.add_argument("--k", type=rational_arg, default=Fraction(1))
    sp.add_argument("--samples", type=int, default=200)

    sp = add("repair-metric", cmd_repair, "triangle-inequality repair of a staged premetric")
    sp.add_argument("--premetric", required=True, help="file of 'stage v w q' lines")
    sp.add_argument("--probe", type=int)

    sp = add("assemble-universal", cmd_assemble, "disjoint union of repaired components")
    sp.add_argument("--premetric", action="append", required=True)
    sp.add_argument("--gamma", type=rational_arg, required=True)
    sp.add_argument("--probe", type=int)
    sp.add_argument("--points", type=int)

    sp = add("diagonalize-ultrametric", cmd_diagonalize, "ultrametric space defeating candidate embeddings")
    sp.add_argument("--target", required=True)
    sp.add_argument("--candidates", required=True, help="file of 'n arg value stage' lines")

    sp = add("limit-points", cmd_limit_points, "c.e. set of special points with prescribed limit points")
    sp.add_argument("--points", type=rationals_arg, required=True)
    sp.add_argument("--balls", type=int, default=16)
    sp.add_argument("--complement", help="file of 'from to ball' listing spans ('-' = forever)")

    sp = add("adversarial-measure", cmd_adversarial, "measure built against staged martingales")
    sp.add_argument("--machines", default="constant,proportional,never,slow")
    sp.add_argument("--depth", type=int, default=12)
    sp.add_argument("--guess", help="totality bits of the machines, e.g. 1101")

    sp = add("pushforward", cmd_pushforward, "martingale transported through a prefix map")
    sp.add_argument("--map", choices=sorted(MAPS), default="identity")
    sp.add_argument("--martingale", choices=sorted(MARTINGALES), default="zeros")
    sp.add_argument("--sigma", default="")
    sp.add_argument("--depth", type=int, default=8)

    sp = add("slow-copy", cmd_slow_copy, "effectively complete d.c.e. equivalence relation")
    sp.add_argument("--relation", required=True, help="file of 'stage op a b' lines")
    sp.add_argument("--domain", type=int)

    sp = add("game", cmd_game, "play and audit a weight game")
    sp.add_argument("--variant", choices=("ktrivial", "strong"), default="ktrivial")
    sp.add_argument("--script", help="opponent script: 'stage length n delta' or 'stage W n u'")
    sp.add_argument("--eps", type=rational_arg, default=Fraction(1, 10))
    sp.add_argument("--gamma", choices=("everywhere", "nowhere"), default="everywhere")
    sp.add_argument("--transcript", help="write the move transcript here")
    return p


CSV_FIELDS = {"orbit": "points", "limit-points": "D"}
CONTRACT_ERRORS = (ContractError, ValueError, ArithmeticError, RuntimeError, KeyError, IndexError)


def render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, indent=2) + "\n"
    values = report["results"][CSV_FIELDS[report["command"]]]
    rows = ["index,value"]
    for i, v in enumerate(values):
        rows.append(f"{i},{v if isinstance(v, str) else '[' + ';'.join(v) + ']'}")
    return "\n".join(rows) + "\n"


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.format == "csv" and args.command not in CSV_FIELDS:
            parser.error(f"--format csv is only available for {', '.join(sorted(CSV_FIELDS))}")
    except SystemExit as exc:
        return 0 if exc.code is None else int(exc.code)
    start = time.perf_counter()
    try:
        results, audit = args.fn(args)
    except CONTRACT_ERRORS as exc:
        print(f"algrand {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    params = {k: v for k, v in vars(args).items() if k not in ("fn", "command", "out", "format", "timing")}
    report = {
        "command": args.command,
        "params": to_wire(params),
        "results": to_wire(results),
        "audit": to_wire(audit),
        "elapsed_ms": round((time.perf_counter() - start) * 1000) if args.timing else None,
    }
    text = render(report, args.format)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
