"""(3+eps)-approximation for minimum-norm capacitated k-clustering.

Pipeline per threshold t: LP seed stars S^t, representatives R^t, then guesses
of (coloring, types, pivots, radii) turned into facility sets T by
:func:`clustering_with_pivots`, each T evaluated with its best
capacity-respecting assignment.

The raw guess stream (:func:`enumerate_guesses`) is exponential even at desk
scale while the facility sets it produces are few.  The driver therefore
works per (coloring, type vector) with per-color *option sets* (the facility
each color contributes) and only forms the distinct sets T.  This is
lossless: the set of T produced equals the set produced by running
:func:`clustering_with_pivots` on every raw guess (checked in the tests).
"""

from __future__ import annotations

import bisect
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

import numpy as np

from normclust import lp as lpmod
from normclust.lp_seed import (
    DEFAULT_C_PRIME,
    CoverageFailure,
    CPModel,
    StarSet,
    pseudo_approx,
)
from normclust.metric import Instance, is_inf
from normclust.norms import NormSpec, as_exact, comparable
from normclust.oracle import ORDERED_EXACT_MAX_CLIENTS, optimal_assignment
from normclust.rng import derive_rng
from normclust.solution import Solution

DEFAULT_C_DOUBLE = 4
DEFAULT_GUESS_BUDGET = 3_000_000


@dataclass(frozen=True)
class ThresholdSet:
    values: tuple
    pipeline: str  # "topl": one t per run, "general": all t at once


@dataclass(frozen=True)
class GuessMNC:
    color: tuple[int, ...]  # facility -> color
    types: tuple[int, ...]  # color -> 1 | 2 | 3
    pivots: tuple  # color -> point id (types 1, 2) or None
    istar: tuple  # color -> facility (type 3) or None
    radii: tuple  # color -> radius (types 1, 2) or None


# ---------------------------------------------------------------------------
# thresholds, radii, representatives


def pipeline_for(norm: NormSpec) -> str:
    return "topl" if norm.kind in ("topl", "linf", "l1") else "general"


def power_ceiling(d, base) -> Fraction:
    """Smallest base**z (z integer) that is >= d > 0."""
    d = as_exact(d)
    z = 0
    v = Fraction(1)
    if d <= 1:
        while v / base >= d:
            v /= base
        return v
    while v < d:
        v *= base
    return v


def build_threshold_set(inst: Instance, eps, norm: NormSpec | None = None) -> ThresholdSet:
    norm = norm or inst.norm
    dists = inst.distinct_fc_distances()
    if pipeline_for(norm) == "topl":
        return ThresholdSet(tuple(dists), "topl")
    base = 1 + Fraction(as_exact(eps))
    vals = {0 if d == 0 else power_ceiling(d, base) for d in dists}
    return ThresholdSet(tuple(sorted(as_exact(v) for v in vals)), "general")


def radius_grid(delta, eps) -> tuple:
    """{0} U {(1+eps)^z >= 1} up to the first power >= delta."""
    base = 1 + Fraction(as_exact(eps))
    out = [0]
    v = Fraction(1)
    delta = as_exact(delta)
    while True:
        out.append(as_exact(v))
        if v >= delta:
            break
        v *= base
    return tuple(out)


def grid_overestimate(d, grid: Sequence) -> object | None:
    """Smallest grid radius >= d (None if d exceeds the grid)."""
    pos = bisect.bisect_left(grid, d)
    return grid[pos] if pos < len(grid) else None


def r1_sample_size(k: int, n: int, eps) -> int:
    return math.ceil(2 * k * math.log(max(k * n, 2)) / float(eps))


def r2_sample_size(k: int, n: int, eps, c_double=DEFAULT_C_DOUBLE) -> int:
    return math.ceil(c_double * k * math.log(max(n, 2)) / float(eps) ** 2)


def choose_R_t(star_set: StarSet, t, k: int, eps, rng: np.random.Generator, c_double=DEFAULT_C_DOUBLE) -> frozenset[int]:
    """Representatives: per-star uniform samples plus weight-proportional draws."""
    n = len(star_set.b)
    eps, t = as_exact(eps), as_exact(t)
    s1 = r1_sample_size(k, n, eps)
    R: set[int] = set()
    for st in star_set.stars:
        members = sorted(st.clients)
        m = min(len(members), s1)
        if m == len(members):
            R.update(members)
        else:
            R.update(int(x) for x in rng.choice(members, size=m, replace=False))
    w = [max((1 - eps) * b - t, 0) if b is not None else 0 for b in star_set.b]
    total = sum(w, 0)
    if total > 0:
        p = np.array([float(Fraction(x) / total) for x in w])
        p /= p.sum()
        draws = rng.choice(n, size=r2_sample_size(k, n, eps, c_double), replace=True, p=p)
        R.update(int(x) for x in draws)
    return frozenset(R)


# ---------------------------------------------------------------------------
# colorings


def canonical_colorings(nf: int, k: int) -> Iterator[tuple[int, ...]]:
    """Surjective colorings F -> [k] up to permutation of colors (restricted growth strings)."""
    if k > nf:
        return
    col = [0] * nf

    def rec(pos: int, used: int):
        if nf - pos < k - used:
            return
        if pos == nf:
            if used == k:
                yield tuple(col)
            return
        for c in range(min(used + 1, k)):
            col[pos] = c
            yield from rec(pos + 1, max(used, c + 1))

    yield from rec(0, 0)


def random_colorings(nf: int, k: int, count: int, rng: np.random.Generator) -> Iterator[tuple[int, ...]]:
    for _ in range(count):
        yield tuple(int(c) for c in rng.integers(0, k, size=nf))


def default_color_budget(k: int, n: int) -> int:
    return math.ceil(k**k * math.log(max(n, 2)))


def colorings_for(nf: int, k: int, rng: np.random.Generator, color_budget: int | None, n: int):
    """(colorings, exhaustive?)"""
    if k <= 3:
        cols = list(canonical_colorings(nf, k))
        if color_budget is not None and len(cols) > color_budget:
            return cols[:color_budget], False
        return cols, True
    budget = color_budget if color_budget is not None else default_color_budget(k, n)
    return list(random_colorings(nf, k, budget, rng)), False


# ---------------------------------------------------------------------------
# raw guesses and clustering with pivots


def _argmax_cap(inst: Instance, cand: Iterable[int]) -> int | None:
    best = None
    for i in cand:
        if best is None or inst.capacities[i] > inst.capacities[best] or (
            inst.capacities[i] == inst.capacities[best] and i < best
        ):
            best = i
    return best


def _ball_class(inst: Instance, S: frozenset, color: Sequence[int], c: int, p: int, r) -> list[int]:
    row = inst.space.dist[p]
    return [
        i
        for i in inst.facilities
        if i not in S and color[i] == c and not is_inf(row[i]) and row[i] <= r
    ]


def clustering_with_pivots(guess: GuessMNC, inst: Instance, S: Iterable[int]) -> frozenset[int] | None:
    """Facility set T for a guess, or None for an infeasible guess."""
    S = frozenset(S)
    T: set[int] = set()
    k = len(guess.types)
    for c in range(k):
        if guess.types[c] == 1:
            q = _argmax_cap(inst, _ball_class(inst, S, guess.color, c, guess.pivots[c], guess.radii[c]))
            if q is None:
                return None
            T.add(q)
    picks = {guess.istar[c] for c in range(k) if guess.types[c] == 3}
    T |= picks
    for c in range(k):
        if guess.types[c] == 2:
            p = guess.pivots[c]
            if p not in picks:
                T.add(p)
            else:
                g = _argmax_cap(inst, _ball_class(inst, S, guess.color, c, p, guess.radii[c]))
                if g is None:
                    return None
                T.add(g)
    return frozenset(T)


def enumerate_guesses(
    S: Sequence[int],
    R: Sequence[int],
    k: int,
    eps,
    delta,
    inst: Instance,
    colorings: Iterable[tuple[int, ...]],
) -> Iterator[GuessMNC]:
    """Raw guess stream: colorings x type vectors x pivots x radii, in a fixed order.

    R holds client indices; pivots are point ids (clients shifted by |F|).
    """
    S = sorted(S)
    Rp = [inst.client_point(j) for j in sorted(R)]
    grid = radius_grid(delta, eps)
    for color in colorings:
        for types in itertools.product((1, 2, 3), repeat=k):
            per_color = []
            for c, ty in enumerate(types):
                if ty == 1:
                    per_color.append([(p, None, r) for p in Rp for r in grid])
                elif ty == 2:
                    per_color.append([(p, None, r) for p in S for r in grid])
                else:
                    per_color.append([(None, i, None) for i in S if color[i] == c])
            for combo in itertools.product(*per_color):
                yield GuessMNC(
                    tuple(color),
                    tuple(types),
                    tuple(x[0] for x in combo),
                    tuple(x[1] for x in combo),
                    tuple(x[2] for x in combo),
                )


def raw_guess_count(S: Sequence[int], R: Sequence[int], k: int, grid_size: int, colorings: Iterable) -> int:
    total = 0
    s, m = len(S), len(R)
    Sset = set(S)
    for color in colorings:
        prod = 1
        for c in range(k):
            in_class = sum(1 for i in Sset if color[i] == c)
            prod *= m * grid_size + s * grid_size + in_class
        total += prod
    return total


# ---------------------------------------------------------------------------
# compressed enumeration


class _Options:
    """Per-(class, pivot) running argmax over grid balls, cached."""

    def __init__(self, inst: Instance, S: frozenset, grid: tuple):
        self.inst = inst
        self.S = S
        self.grid = grid
        self.cache: dict = {}

    def argmaxes(self, cls_mask: int, p: int) -> list[tuple[int, object]]:
        """Distinct (facility, smallest radius) outcomes of argmax over ball_{F\\S}(p, r) in the class."""
        key = (cls_mask, p)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        inst = self.inst
        row = inst.space.dist[p]
        cand = [
            (row[i], i)
            for i in inst.facilities
            if (cls_mask >> i) & 1 and i not in self.S and not is_inf(row[i])
        ]
        cand.sort()
        dists = [x for x, _ in cand]
        out = []
        seen = set()
        best = None
        pos = 0
        for r in self.grid:
            hi = bisect.bisect_right(dists, r)
            while pos < hi:
                i = cand[pos][1]
                if best is None or inst.capacities[i] > inst.capacities[best] or (
                    inst.capacities[i] == inst.capacities[best] and i < best
                ):
                    best = i
                pos += 1
            if best is not None and best not in seen:
                seen.add(best)
                out.append((best, r))
        self.cache[key] = out
        return out


@dataclass
class EnumStats:
    colorings: int = 0
    type_vectors: int = 0
    generated: int = 0
    distinct_sets: int = 0
    raw_guess_space: int = 0
    truncated: bool = False


def candidate_sets(
    inst: Instance,
    S: Iterable[int],
    R: Iterable[int],
    eps,
    colorings: Sequence[tuple[int, ...]],
    *,
    budget: int = DEFAULT_GUESS_BUDGET,
    found: dict | None = None,
) -> tuple[dict[frozenset, GuessMNC], EnumStats]:
    """All distinct T reachable by the raw guess stream, each with one witnessing guess."""
    S = frozenset(S)
    Rp = [inst.client_point(j) for j in sorted(R)]
    Sl = sorted(S)
    k = inst.k
    grid = radius_grid(inst.max_finite_distance, eps)
    opts = _Options(inst, S, grid)
    found = {} if found is None else found
    stats = EnumStats()
    stats.raw_guess_space = raw_guess_count(Sl, Rp, k, len(grid), colorings)
    seen_keys: set = set()
    for color in colorings:
        stats.colorings += 1
        masks = [0] * k
        for i, c in enumerate(color):
            masks[c] |= 1 << i
        # type-1 options per color: (facility, (pivot, radius))
        t1 = []
        for c in range(k):
            o = {}
            for p in Rp:
                for q, r in opts.argmaxes(masks[c], p):
                    o.setdefault(q, (p, r))
            t1.append(sorted(o.items()))
        t3 = [[i for i in Sl if color[i] == c] for c in range(k)]
        for types in itertools.product((1, 2, 3), repeat=k):
            stats.type_vectors += 1
            c3 = [c for c in range(k) if types[c] == 3]
            if any(not t3[c] for c in c3):
                continue
            for picks in itertools.product(*[t3[c] for c in c3]):
                pickset = set(picks)
                per_color: list[list] = []
                ok = True
                for c in range(k):
                    ty = types[c]
                    if ty == 1:
                        lst = [(q, ("1", p, r)) for q, (p, r) in t1[c]]
                    elif ty == 3:
                        i = picks[c3.index(c)]
                        lst = [(i, ("3", i))]
                    else:
                        o = {}
                        for p in Sl:
                            if p not in pickset:
                                o.setdefault(p, ("2", p, grid[0]))
                            else:
                                for g, r in opts.argmaxes(masks[c], p):
                                    o.setdefault(g, ("2", p, r))
                        lst = sorted(o.items())
                    if not lst:
                        ok = False
                        break
                    per_color.append(lst)
                if not ok:
                    continue
                key = tuple(tuple(q for q, _ in lst) for lst in per_color)
                if key in seen_keys:
                    continue
                seen_keys.add(key)
                for combo in itertools.product(*per_color):
                    stats.generated += 1
                    T = frozenset(q for q, _ in combo)
                    if T not in found:
                        found[T] = _witness(color, types, combo)
                if stats.generated >= budget:
                    stats.truncated = True
                    stats.distinct_sets = len(found)
                    return found, stats
    stats.distinct_sets = len(found)
    return found, stats


def _witness(color, types, combo) -> GuessMNC:
    piv, ist, rad = [], [], []
    for ty, (_, prov) in zip(types, combo):
        if prov[0] == "3":
            piv.append(None)
            ist.append(prov[1])
            rad.append(None)
        else:
            piv.append(prov[1])
            ist.append(None)
            rad.append(prov[2])
    return GuessMNC(tuple(color), tuple(types), tuple(piv), tuple(ist), tuple(rad))


# ---------------------------------------------------------------------------
# assignment for a fixed T


def best_assignment(T: Iterable[int], inst: Instance, norm: NormSpec | None = None, eps=Fraction(1, 4)):
    """(assignment, value) for the open set T, or None when capacities cannot cover C."""
    norm = norm or inst.norm
    T = sorted(set(T))
    if sum(min(inst.capacities[i], inst.n_clients) for i in T) < inst.n_clients:
        return None
    if norm.kind == "ordered" and inst.n_clients > ORDERED_EXACT_MAX_CLIENTS:
        from normclust.find_assignment import guess_and_match

        res = guess_and_match(inst, T, eps, norm=norm)
        return None if res is None else (res.assignment, res.value)
    return optimal_assignment(T, inst, norm)


# ---------------------------------------------------------------------------
# driver


@dataclass
class MNCkCConfig:
    eps: object = Fraction(1, 5)
    c_prime: int = DEFAULT_C_PRIME
    c_double: int = DEFAULT_C_DOUBLE
    color_budget: int | None = None
    guess_budget: int = DEFAULT_GUESS_BUDGET


def run_mnckc(inst: Instance, eps=None, seed: int = 0, *, norm: NormSpec | None = None, config: MNCkCConfig | None = None) -> Solution:
    cfg = config or MNCkCConfig()
    eps = as_exact(cfg.eps if eps is None else eps)
    norm = norm or inst.norm
    nc = inst.n_clients
    ts = build_threshold_set(inst, eps, norm)
    cp = CPModel(inst)
    per_t = []
    skipped = []
    for idx, t in enumerate(ts.values):
        cp.set_threshold(t)
        try:
            frac = cp.solve()
        except lpmod.InfeasibleError:
            return _infeasible(norm, "capacities cannot cover the clients")
        try:
            stars, _ = pseudo_approx(inst, frac, eps, derive_rng(seed, "mnckc", "stars", idx), cfg.c_prime)
        except CoverageFailure:
            skipped.append(str(t))
            continue
        R = choose_R_t(stars, t, inst.k, eps, derive_rng(seed, "mnckc", "R", idx), cfg.c_double)
        per_t.append((t, frozenset(stars.facilities), R))
    if not per_t:
        raise CoverageFailure("no threshold produced a covering star set")
    colorings, exhaustive = colorings_for(inst.n_facilities, inst.k, derive_rng(seed, "mnckc", "colors"), cfg.color_budget, nc)
    if ts.pipeline == "general":
        S = frozenset().union(*[s for _, s, _ in per_t])
        R = frozenset().union(*[r for _, _, r in per_t])
        jobs = [(None, S, R)]
    else:
        jobs = per_t
    found: dict[frozenset, GuessMNC] = {}
    origin: dict[frozenset, object] = {}
    done: set = set()
    totals = EnumStats()
    remaining = cfg.guess_budget
    for t, S, R in jobs:
        key = (S, R)
        if key in done:
            continue
        done.add(key)
        before = set(found)
        _, st = candidate_sets(inst, S, R, eps, colorings, budget=remaining, found=found)
        for T in set(found) - before:
            origin[T] = t
        totals.colorings += st.colorings
        totals.type_vectors += st.type_vectors
        totals.generated += st.generated
        totals.raw_guess_space += st.raw_guess_space
        remaining -= st.generated
        if st.truncated or remaining <= 0:
            totals.truncated = True
            break
    best = None
    evaluated = feasible = 0
    for T in sorted(found, key=lambda s: (len(s), sorted(s))):
        evaluated += 1
        res = best_assignment(T, inst, norm, eps)
        if res is None:
            continue
        feasible += 1
        a, v = res
        if best is None or comparable(v) < comparable(best[0]):
            best = (v, T, a)
    if best is None:
        return _infeasible(norm, "no guessed facility set admits a capacity-respecting assignment", totals.truncated)
    v, T, a = best
    g = found[T]
    meta = {
        "algorithm": "mnckc",
        "pipeline": ts.pipeline,
        "thresholds": len(ts.values),
        "thresholds_skipped": skipped,
        "colorings_exhaustive": exhaustive,
        "truncated": totals.truncated,
        "raw_guess_space": totals.raw_guess_space,
        "generated": totals.generated,
        "distinct_sets": len(found),
        "evaluated": evaluated,
        "feasible": feasible,
        "winning_guess": _guess_json(g, origin.get(T)),
    }
    return Solution(tuple(sorted(T)), tuple(a), v, norm, meta)


def _guess_json(g: GuessMNC, t) -> dict:
    from normclust.norms import rat_str

    return {
        "t": None if t is None else rat_str(t),
        "color": list(g.color),
        "types": list(g.types),
        "pivots": list(g.pivots),
        "istar": list(g.istar),
        "radii": [None if r is None else rat_str(r) for r in g.radii],
    }


def _infeasible(norm: NormSpec, why: str, truncated: bool = False) -> Solution:
    return Solution((), (), None, norm, {"algorithm": "mnckc", "infeasible": True, "reason": why, "truncated": truncated})
