"""Top-cn norm k-clustering (uncapacitated).

Pivots come from the seed facility set S and from representatives R drawn
proportionally to d(j, S).  Each guess fixes k balls (pivot, radius); the
pivot program is solved for every threshold t of the top-cn linearization
and its y-values are rounded independently per ball.

Guesses are formed over distinct balls.  Two (pivot, radius) pairs with the
same facility ball only differ in the radius-tying row, and the smaller
radius gives both the smaller program value and the tighter indirect
connection bound, so each ball keeps its smallest generating radius (the
distance from the pivot to its farthest member).
Guesses are visited in order of an exact lower bound on their program value
and dropped once that bound reaches the incumbent.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from normclust import lp as lpmod
from normclust.lp_seed import DEFAULT_C_PRIME, pseudo_approx, simple_three_approx, solve_cp_norm
from normclust.metric import Instance, ball, is_inf
from normclust.mnckc import radius_grid
from normclust.norms import NormSpec, as_exact, rat_str, top_l
from normclust.occurrence import OccurrenceVector
from normclust.rng import derive_rng
from normclust.solution import Solution, cost_vector, nearest_assignment

DEFAULT_ROUNDS_PER_GUESS = 32
DEFAULT_LP_BUDGET = 20_000
MAX_T_VALUES = 64


class InfeasibleGuess(Exception):
    pass


@dataclass(frozen=True)
class PivotGuess:
    P: tuple[int, ...]  # point ids, repeats allowed
    radii: tuple  # aligned with P

    def __post_init__(self):
        if len(self.P) != len(self.radii):
            raise ValueError("one radius per pivot")


@dataclass
class PivotLPSolution:
    guess: PivotGuess
    balls: tuple[tuple[int, ...], ...]
    y: dict  # (position, facility) -> value
    x: dict  # (position, facility, client) -> value, nonzero only
    delta: OccurrenceVector
    value: object
    t: object
    c: object
    certified: bool = False


def top_cn_norm(inst: Instance, c) -> NormSpec:
    return NormSpec.topl(as_exact(c) * inst.n_clients)


def gamma(eps) -> Fraction:
    eps = Fraction(as_exact(eps))
    return (1 + eps) / (1 - eps)


# ---------------------------------------------------------------------------
# representatives


def choose_R(S: Sequence[int], inst: Instance, k: int, rng: np.random.Generator) -> frozenset[int]:
    """k draws of clients with probability proportional to d(j, S)."""
    S = sorted(set(S))
    if not S:
        raise ValueError("S is empty")
    w = []
    for j in inst.clients:
        d = min(inst.d(i, j) for i in S)
        if is_inf(d):
            raise ValueError(f"client {j} is unreachable from S")
        w.append(d)
    total = sum(w, 0)
    if total == 0:
        return frozenset()
    p = np.array([float(Fraction(x) / total) for x in w])
    p /= p.sum()
    return frozenset(int(j) for j in rng.choice(inst.n_clients, size=k, replace=True, p=p))


# ---------------------------------------------------------------------------
# guesses


@dataclass(frozen=True)
class BallOption:
    pivot: int
    radius: object
    ball: tuple[int, ...]


def capped_grid(delta, eps, cap=None) -> tuple:
    grid = radius_grid(delta, eps)
    if cap is None:
        return grid
    cap = as_exact(cap)
    return tuple(sorted({g for g in grid if g <= cap} | {cap}))


def ball_options(inst: Instance, points: Sequence[int], grid: Sequence) -> list[BallOption]:
    """Distinct facility balls, each with its smallest generating radius.

    The radius kept is the farthest ball member from the pivot, which
    generates the same ball as the grid radius that found it.
    """
    best: dict[tuple[int, ...], BallOption] = {}
    for p in sorted(set(points)):
        for r in grid:
            B = tuple(ball(inst, inst.facilities, p, r))
            if not B:
                continue
            r = max(inst.dp(p, i) for i in B)
            old = best.get(B)
            if old is None or (r, p) < (old.radius, old.pivot):
                best[B] = BallOption(p, r, B)
    return sorted(best.values(), key=lambda o: (o.radius, o.ball, o.pivot))


def guess_lower_bound(inst: Instance, balls: Sequence[Sequence[int]], ell):
    """top-ell of d(j, union of balls): a lower bound on the pivot program value."""
    U = sorted(set().union(*balls))
    rows = inst.fc_int[U]
    if (rows < 0).all(axis=0).any():
        return math.inf
    big = np.where(rows >= 0, rows, np.iinfo(np.int64).max).min(axis=0)
    return as_exact(Fraction(top_l([int(v) for v in big], ell)) / inst.scale)


# ---------------------------------------------------------------------------
# pivot program


class PivotModel:
    def __init__(self, inst: Instance, balls: Sequence[Sequence[int]], radii: Sequence, eps):
        self.inst = inst
        g = gamma(eps)
        lp = lpmod.LinearProgram()
        self.yv: dict[tuple[int, int], int] = {}
        self.xv: dict[tuple[int, int, int], int] = {}
        for pos, B in enumerate(balls):
            for i in B:
                self.yv[(pos, i)] = lp.add_var(0, 0)
                for j in inst.clients:
                    if not is_inf(inst.d(i, j)):
                        self.xv[(pos, i, j)] = lp.add_var(0, 0)
        for pos, B in enumerate(balls):
            lp.add_row({self.yv[(pos, i)]: 1 for i in B}, 1, 1)
        for (pos, i, j), v in self.xv.items():
            lp.add_row({v: 1, self.yv[(pos, i)]: -1}, hi=0)
        per_client: dict[int, dict] = {j: {} for j in inst.clients}
        for (pos, i, j), v in self.xv.items():
            per_client[j][v] = 1
        for j in inst.clients:
            if not per_client[j]:
                raise InfeasibleGuess(f"client {j} sees no facility of the guessed balls")
            lp.add_row(per_client[j], 1, 1)
        for pos, B in enumerate(balls):
            r = as_exact(radii[pos])
            for i in B:
                row = {v: g * inst.d(i, j) - r for (q, f, j), v in self.xv.items() if q == pos and f == i}
                row = {v: a for v, a in row.items() if a != 0}
                if row:
                    lp.add_row(row, lo=0)
        self.lp = lp
        self.edges = [(key, inst.d(key[1], key[2])) for key in self.xv]
        self.session = lpmod.HighsSession(lp)

    def costs(self, t) -> list:
        cost = [0] * self.lp.n_cols
        for (key, d) in self.edges:
            cost[self.xv[key]] = max(d - t, 0)
        return cost

    def t_candidates(self, eps) -> list:
        ds = sorted({0} | {d for _, d in self.edges})
        if len(ds) <= MAX_T_VALUES:
            return ds
        return list(radius_grid(ds[-1], eps))


def solve_pivot_lp(
    guess: PivotGuess,
    inst: Instance,
    c,
    eps,
    *,
    balls: Sequence[Sequence[int]] | None = None,
    stop_at=None,
) -> PivotLPSolution:
    """Minimize sum_a (a - t)^+ delta_a + c n t over the pivot program for each t.

    ``stop_at`` ends the t sweep once c n t reaches it (the value can only
    grow from there).
    """
    c, eps = as_exact(c), as_exact(eps)
    if balls is None:
        balls = [tuple(ball(inst, inst.facilities, p, r)) for p, r in zip(guess.P, guess.radii)]
    for p, B in zip(guess.P, balls):
        if not B:
            raise InfeasibleGuess(f"empty ball around point {p}")
    model = PivotModel(inst, balls, guess.radii, eps)
    cn = c * inst.n_clients
    best = None
    for t in model.t_candidates(eps):
        limit = best[0] if best is not None else math.inf
        if stop_at is not None:
            limit = min(limit, float(stop_at))
        if float(cn * t) >= limit and best is not None:
            break
        model.session.set_costs(model.costs(t))
        status, obj = model.session.run_float()
        if status != "optimal":
            raise InfeasibleGuess(f"pivot program status {status}")
        val = obj + float(cn * t)
        if best is None or val < best[0]:
            best = (val, t)
    t = best[1]
    model.session.set_costs(model.costs(t))
    model.session.run_float()
    res = model.session.exact_result()
    if res is None:
        res = lpmod.solve_exact(model.lp)
    x = {key: res.x[v] for key, v in model.xv.items() if res.x[v]}
    y = {key: res.x[v] for key, v in model.yv.items()}
    mass: dict = {}
    for (pos, i, j), v in x.items():
        d = inst.d(i, j)
        mass[d] = mass.get(d, 0) + v
    return PivotLPSolution(
        guess, tuple(tuple(B) for B in balls), y, x, OccurrenceVector(mass), as_exact(res.objective + cn * t), t, c, res.certified
    )


def delta_prime(sol: PivotLPSolution) -> OccurrenceVector:
    """Each (pivot, facility) column collapsed to its mass at floor(r_p)."""
    mass: dict = {}
    for (pos, i, j), v in sol.x.items():
        a = math.floor(as_exact(sol.guess.radii[pos]))
        mass[a] = mass.get(a, 0) + v
    return OccurrenceVector(mass)


def _draw(weights: Sequence[tuple[int, object]], rng: np.random.Generator) -> int:
    U = Fraction(rng.random())
    acc = 0
    last = None
    for i, w in weights:
        if w <= 0:
            continue
        acc += w
        last = i
        if U < acc:
            return i
    return last


def round_open_set(sol: PivotLPSolution, rng: np.random.Generator) -> tuple[int, ...]:
    picks = []
    for pos, B in enumerate(sol.balls):
        picks.append(_draw([(i, sol.y[(pos, i)]) for i in B], rng))
    return tuple(sorted(set(picks)))


def round_pivot_lp(sol: PivotLPSolution, inst: Instance, rng: np.random.Generator) -> Solution:
    """One facility per ball drawn from y, clients to the nearest open facility."""
    T = round_open_set(sol, rng)
    a = nearest_assignment(inst, T)
    norm = top_cn_norm(inst, sol.c)
    from normclust.norms import eval_norm

    return Solution(T, a, eval_norm(norm, cost_vector(inst, a)), norm, {"algorithm": "pivot-rounding", "t": rat_str(sol.t)})


# ---------------------------------------------------------------------------
# cluster taxonomy (used by tests against an exact optimum)


def core(inst: Instance, i_star: int, J: Sequence[int], eps) -> tuple[int, ...]:
    size = math.ceil(as_exact(eps) * len(J))
    return tuple(sorted(J, key=lambda j: (inst.d(i_star, j), j))[:size])


def classify_clusters_testonly(inst: Instance, opt_clusters: Sequence[tuple[int, Sequence[int]]], S: Sequence[int], eps, k: int) -> list[int]:
    eps = as_exact(eps)
    dS = [min(inst.d(i, j) for i in S) for j in inst.clients]
    l1 = sum(dS, 0)
    out = []
    for i_star, J in opt_clusters:
        Jc = core(inst, i_star, J, eps)
        to_s = sum((dS[j] for j in Jc), 0)
        to_center = sum((inst.d(i_star, j) for j in Jc), 0)
        if to_s >= eps**3 / k * l1:
            out.append(1)
        elif to_center >= eps**2 / k * l1:
            out.append(2)
        else:
            out.append(3)
    return out


# ---------------------------------------------------------------------------
# driver


@dataclass
class TopCNConfig:
    eps: object = Fraction(1, 5)
    c_prime: int = DEFAULT_C_PRIME
    rounds_per_guess: int = DEFAULT_ROUNDS_PER_GUESS
    guess_budget: int = DEFAULT_LP_BUDGET


def _routes_to_three(c) -> bool:
    return float(as_exact(c)) <= math.exp(-1.0)


def run_topcn(
    inst: Instance,
    c,
    eps=None,
    seed: int = 0,
    *,
    config: TopCNConfig | None = None,
    extra_facilities: Sequence[int] = (),
    radius_cap=None,
    accept: Callable[[tuple[int, ...], list], bool] | None = None,
    label: str = "topcn",
) -> Solution:
    cfg = config or TopCNConfig()
    eps = as_exact(cfg.eps if eps is None else eps)
    c = as_exact(c)
    if not 0 < c <= 1:
        raise ValueError("c must lie in (0, 1]")
    if not inst.uncapacitated:
        raise ValueError("top-cn clustering is uncapacitated")
    norm = top_cn_norm(inst, c)
    if _routes_to_three(c):
        sol = simple_three_approx(
            inst, eps, derive_rng(seed, label, "seed3"), norm=norm, c_prime=cfg.c_prime, extra_facilities=extra_facilities, accept=accept
        )
        sol.meta.update({"algorithm": label, "route": "seed3", "c": rat_str(c)})
        return sol

    frac = solve_cp_norm(inst, norm)
    stars, attempts = pseudo_approx(inst, frac, eps, derive_rng(seed, label, "stars"), cfg.c_prime)
    S = sorted(set(stars.facilities) | set(extra_facilities))
    R = choose_R(S, inst, inst.k, derive_rng(seed, label, "R"))
    points = S + [inst.n_facilities + j for j in sorted(R)]
    grid = capped_grid(inst.max_finite_distance, eps, radius_cap)
    opts = ball_options(inst, points, grid)
    ell = c * inst.n_clients

    ranked = []
    for combo in itertools.combinations_with_replacement(range(len(opts)), inst.k):
        lb = guess_lower_bound(inst, [opts[q].ball for q in combo], ell)
        if lb != math.inf:
            ranked.append((lb, combo))
    ranked.sort()

    best = None  # (value, T, assignment, guess info)
    seen: dict[tuple[int, ...], object] = {}
    stats = {"lb_pruned": 0, "lp_solved": 0, "lp_infeasible": 0, "lp_pruned": 0, "rounded": 0}
    truncated = False
    for idx, (lb, combo) in enumerate(ranked):
        if best is not None and lb >= best[0]:
            stats["lb_pruned"] = len(ranked) - idx
            break
        if stats["lp_solved"] >= cfg.guess_budget:
            truncated = True
            break
        guess = PivotGuess(tuple(opts[q].pivot for q in combo), tuple(opts[q].radius for q in combo))
        try:
            sol = solve_pivot_lp(guess, inst, c, eps, balls=[opts[q].ball for q in combo], stop_at=None if best is None else best[0])
        except InfeasibleGuess:
            stats["lp_infeasible"] += 1
            continue
        stats["lp_solved"] += 1
        if best is not None and sol.value >= best[0]:
            stats["lp_pruned"] += 1
            continue
        rng = derive_rng(seed, label, "round", idx)
        for _ in range(cfg.rounds_per_guess):
            T = round_open_set(sol, rng)
            stats["rounded"] += 1
            if T in seen:
                continue
            a = nearest_assignment(inst, T)
            vec = cost_vector(inst, a)
            ok = accept is None or accept(T, vec)
            v = top_l(vec, ell) if ok else None
            seen[T] = v
            if v is not None and (best is None or v < best[0]):
                best = (v, T, a, {"P": list(guess.P), "radii": [rat_str(r) for r in guess.radii], "t": rat_str(sol.t), "lp_value": rat_str(sol.value)})
    meta = {
        "algorithm": label,
        "route": "pivots",
        "c": rat_str(c),
        "S": S,
        "R": sorted(R),
        "star_attempts": attempts,
        "ball_options": len(opts),
        "guesses": len(ranked),
        "distinct_outcomes": len(seen),
        "truncated": truncated,
        **stats,
    }
    if best is None:
        meta["failed"] = True
        return Solution((), (), None, norm, meta)
    v, T, a, info = best
    meta["winning_guess"] = info
    return Solution(T, tuple(a), as_exact(v), norm, meta)
