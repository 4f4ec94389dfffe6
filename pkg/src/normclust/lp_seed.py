"""LP seed: the convex program over (x, y), dependent star rounding and the
pseudo-approximation built from it.

Clients are local indices ``0 .. |C|-1`` throughout.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from normclust import lp as lpmod
from normclust.metric import Instance, is_inf
from normclust.norms import Number, NormSpec, as_exact, comparable, eval_norm
from normclust.solution import Solution, cost_vector, nearest_assignment

DEFAULT_C_PRIME = 4


class CoverageFailure(Exception):
    pass


class UnsupportedNorm(Exception):
    pass


@dataclass
class FractionalSolution:
    x: dict[tuple[int, int], Number]  # nonzero entries only
    y: tuple[Number, ...]
    d_av: tuple[Number, ...]
    objective: Number
    t: Number | None
    capacities: tuple[int, ...]
    certified: bool = False

    def x_col(self, i: int, n_clients: int) -> list[Number]:
        return [self.x.get((i, j), 0) for j in range(n_clients)]


def norm_terms(norm: NormSpec, n: int) -> list[tuple[Number, Number]]:
    """[(ell, coeff)]: the norm as a nonnegative combination of top-ell norms."""
    if norm.kind == "lp":
        raise UnsupportedNorm("Lp objectives are not linear-program representable")
    if norm.kind == "topl":
        return [(norm.ell, 1)] if norm.ell > 0 else []
    if norm.kind == "l1":
        return [(n, 1)]
    return norm.top_l_decomposition(n)


class CPModel:
    """The program over x, y with either a threshold objective (re-solvable
    for several t) or a fixed LP-representable norm objective."""

    def __init__(self, inst: Instance, *, allowed: np.ndarray | None = None, capacities=None, norm: NormSpec | None = None):
        self.inst = inst
        nf, nc = inst.n_facilities, inst.n_clients
        self.caps = tuple(capacities if capacities is not None else inst.capacities)
        fin = inst.fc_finite if allowed is None else (inst.fc_finite & allowed)
        self.allowed = fin
        lp = lpmod.LinearProgram()
        self.y = [lp.add_var(0, 0, 1) for _ in range(nf)]
        self.xv: dict[tuple[int, int], int] = {}
        for i in range(nf):
            for j in range(nc):
                if fin[i, j]:
                    self.xv[(i, j)] = lp.add_var(0, 0, 1)
        lp.add_row({v: 1 for v in self.y}, inst.k, inst.k)
        for (i, j), v in self.xv.items():
            lp.add_row({v: 1, self.y[i]: -1}, hi=0)
        for j in range(nc):
            lp.add_row({self.xv[(i, j)]: 1 for i in range(nf) if (i, j) in self.xv}, 1, 1)
        for i in range(nf):
            row = {self.xv[(i, j)]: 1 for j in range(nc) if (i, j) in self.xv}
            row[self.y[i]] = -self.caps[i]
            lp.add_row(row, hi=0)
        self.dav_expr = [{self.xv[(i, j)]: inst.d(i, j) for i in range(nf) if (i, j) in self.xv} for j in range(nc)]
        self.z_rows: list[int] = []
        self.t = None
        if norm is None:
            # z_j >= d_av_j - t, z_j >= 0; objective sum z
            self.z = [lp.add_var(1, 0) for _ in range(nc)]
            for j in range(nc):
                row = {v: -a for v, a in self.dav_expr[j].items()}
                row[self.z[j]] = 1
                self.z_rows.append(lp.add_row(row, lo=0))
        else:
            for ell, coeff in norm_terms(norm, nc):
                tv = lp.add_var(coeff * ell, 0)
                for j in range(nc):
                    s = lp.add_var(coeff, 0)
                    row = {v: -a for v, a in self.dav_expr[j].items()}
                    row[s] = 1
                    row[tv] = 1
                    lp.add_row(row, lo=0)
        self.lp = lp
        self.session: lpmod.HighsSession | None = None

    def _session(self) -> lpmod.HighsSession:
        if self.session is None:
            self.session = lpmod.HighsSession(self.lp)
        return self.session

    def set_threshold(self, t) -> None:
        t = as_exact(t)
        sess = self._session()
        for r in self.z_rows:
            sess.set_row_bounds(r, -t, math.inf)
        self.t = t

    def solve(self) -> FractionalSolution:
        sess = self._session()
        status, _ = sess.run_float()
        if status == "infeasible":
            raise lpmod.InfeasibleError("CP infeasible")
        res = sess.exact_result() if status == "optimal" else None
        if res is None:
            res = lpmod.solve_exact(self.lp)
        return self._unpack(res)

    def _unpack(self, res: lpmod.LPResult) -> FractionalSolution:
        nc = self.inst.n_clients
        x = {key: res.x[v] for key, v in self.xv.items() if res.x[v]}
        y = tuple(res.x[v] for v in self.y)
        d_av = tuple(as_exact(sum((a * res.x[v] for v, a in self.dav_expr[j].items()), 0)) for j in range(nc))
        return FractionalSolution(x, y, d_av, res.objective, self.t, self.caps, res.certified)


def solve_cp(inst: Instance, t, *, allowed: np.ndarray | None = None, capacities=None) -> FractionalSolution:
    """min sum_j (d_av_j - t)^+ over the fractional k-facility program."""
    if as_exact(t) < 0:
        raise ValueError("t must be nonnegative")
    m = CPModel(inst, allowed=allowed, capacities=capacities)
    m.set_threshold(t)
    return m.solve()


def solve_cp_norm(inst: Instance, norm: NormSpec, *, allowed: np.ndarray | None = None, capacities=None) -> FractionalSolution:
    """min norm(d_av) for an LP-representable norm."""
    m = CPModel(inst, allowed=allowed, capacities=capacities, norm=norm)
    return m.solve()


# ---------------------------------------------------------------------------
# dependent rounding


def _check_marginals(marginals: Sequence[Number], u: int | None) -> list[Number]:
    pi = [as_exact(p) for p in marginals]
    for p in pi:
        if p < 0 or p > 1:
            raise ValueError(f"marginal {p} outside [0, 1]")
    if u is not None and sum(pi, 0) > u:
        raise ValueError(f"marginal sum {sum(pi, 0)} exceeds capacity {u}")
    return pi


def systematic_select(pi: Sequence[Number], U) -> frozenset[int]:
    """Indices j with an integer m such that S_{j-1} <= U + m < S_j."""
    U = Fraction(U)
    out = []
    prev = 0
    acc = 0
    for j, p in enumerate(pi):
        acc += p
        if math.ceil(acc - U) > math.ceil(prev - U):
            out.append(j)
        prev = acc
    return frozenset(out)


def systematic_distribution(marginals: Sequence[Number]) -> dict[frozenset[int], Fraction]:
    """Exact law of :func:`systematic_select` over U ~ Uniform[0, 1)."""
    pi = _check_marginals(marginals, None)
    cuts = {Fraction(0), Fraction(1)}
    acc = Fraction(0)
    for p in pi:
        acc += p
        cuts.add(acc - math.floor(acc))
    cuts = sorted(cuts)
    dist: dict[frozenset[int], Fraction] = {}
    for a, b in zip(cuts, cuts[1:]):
        if b > a:
            s = systematic_select(pi, (a + b) / 2)
            dist[s] = dist.get(s, Fraction(0)) + (b - a)
    return dist


def dependent_round_star(i: int, x_col: Sequence[Number], y_i, u_i: int, rng: np.random.Generator) -> frozenset[int]:
    """Client set J with P[j in J] = x_ij / y_i and |J| <= u_i (systematic sampling, ascending ids)."""
    y_i = as_exact(y_i)
    if y_i <= 0:
        raise ValueError(f"facility {i} has y = {y_i}")
    pi = _check_marginals([as_exact(x) / y_i for x in x_col], u_i)
    return systematic_select(pi, rng.random())


# ---------------------------------------------------------------------------
# stars


@dataclass(frozen=True)
class Star:
    facility: int
    clients: frozenset[int]


@dataclass
class StarSet:
    stars: list[Star]  # after dedupe, nonempty
    b: tuple  # per client: kept star distance or None
    star_facility: tuple  # per client: facility of kept star or None
    iterations: int
    raw_stars: list[Star] = field(default_factory=list)

    @property
    def uncovered(self) -> tuple[int, ...]:
        return tuple(j for j, f in enumerate(self.star_facility) if f is None)

    @property
    def covered(self) -> bool:
        return not self.uncovered

    @property
    def facilities(self) -> tuple[int, ...]:
        return tuple(sorted({s.facility for s in self.stars}))

    def to_json(self) -> dict:
        from normclust.metric import distance_str

        return {
            "stars": [{"facility": s.facility, "clients": sorted(s.clients)} for s in self.stars],
            "b": [None if v is None else distance_str(v) for v in self.b],
        }


def iteration_count(k: int, n: int, eps, c_prime=DEFAULT_C_PRIME) -> int:
    return max(1, math.ceil(c_prime * k * math.log(max(n, 2)) / float(eps)))


def _pick_facility(y: Sequence[Number], k: int, rng: np.random.Generator) -> int:
    U = Fraction(rng.random()) * k
    acc = 0
    last = None
    for i, v in enumerate(y):
        if v <= 0:
            continue
        acc += v
        last = i
        if U < acc:
            return i
    return last


def sample_stars(inst: Instance, frac: FractionalSolution, eps, rng: np.random.Generator, c_prime=DEFAULT_C_PRIME) -> StarSet:
    nc = inst.n_clients
    iters = iteration_count(inst.k, nc, eps, c_prime)
    raw: list[Star] = []
    for _ in range(iters):
        i = _pick_facility(frac.y, inst.k, rng)
        J = dependent_round_star(i, frac.x_col(i, nc), frac.y[i], frac.capacities[i], rng)
        raw.append(Star(i, J))
    # keep each client only in its closest sampled star (ties: lower facility id, then first)
    best: list = [None] * nc
    for idx, s in enumerate(raw):
        for j in s.clients:
            key = (inst.d(s.facility, j), s.facility, idx)
            if best[j] is None or key < best[j]:
                best[j] = key
    members: dict[int, list[int]] = {}
    for j, key in enumerate(best):
        if key is not None:
            members.setdefault(key[2], []).append(j)
    stars = [Star(raw[idx].facility, frozenset(js)) for idx, js in sorted(members.items())]
    b = tuple(None if key is None else key[0] for key in best)
    fac = tuple(None if key is None else key[1] for key in best)
    return StarSet(stars, b, fac, iters, raw)


def check_goodness(star_set: StarSet, frac: FractionalSolution, eps) -> tuple[bool, ...]:
    """Client j is good iff its kept star distance is at most d_av_j / (1 - eps)."""
    eps = as_exact(eps)
    return tuple(
        b is not None and (1 - eps) * b <= dav for b, dav in zip(star_set.b, frac.d_av)
    )


def property_p(star_set: StarSet, frac: FractionalSolution, eps, t) -> tuple[Number, Number, bool]:
    """(lhs, rhs, holds) for sum_j ((1-eps) b_j - t)^+ <= CP objective."""
    eps, t = as_exact(eps), as_exact(t)
    lhs = as_exact(sum((max((1 - eps) * b - t, 0) for b in star_set.b if b is not None), 0))
    return lhs, frac.objective, lhs <= frac.objective


def pseudo_approx(
    inst: Instance,
    frac: FractionalSolution,
    eps,
    rng: np.random.Generator,
    c_prime=DEFAULT_C_PRIME,
    retries: int | None = None,
) -> tuple[StarSet, int]:
    """Sample star sets until one covers every client with every client good.

    Returns (star set, attempts).  Raises CoverageFailure when no attempt covers C.
    """
    n = max(inst.n_clients, 2)
    retries = math.ceil(math.log2(n)) + 3 if retries is None else retries
    fallback = None
    for attempt in range(1, retries + 2):
        ss = sample_stars(inst, frac, eps, rng, c_prime)
        if ss.covered:
            if all(check_goodness(ss, frac, eps)):
                return ss, attempt
            if fallback is None:
                fallback = (ss, attempt)
    if fallback is not None:
        return fallback
    raise CoverageFailure(f"stars left clients uncovered after {retries + 1} attempts")


# ---------------------------------------------------------------------------
# simple (3 + eps) approximation for uncapacitated instances


def best_subset(
    inst: Instance,
    candidates: Sequence[int],
    norm: NormSpec,
    *,
    accept: Callable[[tuple[int, ...], list], bool] | None = None,
):
    """Best k-subset of candidates under nearest-facility assignment."""
    cand = sorted(set(candidates))
    size = min(inst.k, len(cand))
    best = None
    seen = 0
    for T in itertools.combinations(cand, size):
        a = nearest_assignment(inst, T)
        if a is None:
            continue
        vec = cost_vector(inst, a)
        if accept is not None and not accept(T, vec):
            continue
        seen += 1
        v = eval_norm(norm, vec)
        if best is None or comparable(v) < comparable(best[0]):
            best = (v, tuple(sorted(set(a))), a)
    return best, seen


def simple_three_approx(
    inst: Instance,
    eps,
    rng: np.random.Generator,
    *,
    norm: NormSpec | None = None,
    c_prime=DEFAULT_C_PRIME,
    extra_facilities: Sequence[int] = (),
    allowed: np.ndarray | None = None,
    accept: Callable | None = None,
) -> Solution:
    norm = norm or inst.norm
    unc = inst.uncapacitated_copy()
    cp_norm = norm if norm.kind != "lp" else NormSpec.l1()
    frac = solve_cp_norm(unc, cp_norm, allowed=allowed)
    stars, attempts = pseudo_approx(unc, frac, eps, rng, c_prime)
    S = sorted(set(stars.facilities) | set(extra_facilities))
    best, seen = best_subset(unc, S, norm, accept=accept)
    if best is None:
        raise CoverageFailure("no candidate subset passed the filter")
    v, T, a = best
    return Solution(
        T,
        a,
        v,
        norm,
        {"algorithm": "seed3", "S": list(S), "attempts": attempts, "subsets": seen, "lp_objective": str(frac.objective)},
    )
