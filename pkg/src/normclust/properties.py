"""Seeded exact-arithmetic property suites (used by ``normclust props`` and
the acceptance tests)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction


from normclust.lp_seed import systematic_distribution
from normclust.norms import top_l, top_l_min_threshold, top_l_via_threshold
from normclust.occurrence import (
    OccurrenceVector,
    breakpoints,
    dominates,
    domination_violation,
    mix_bound_check,
    occ_add_by_matching,
    occ_oplus,
    occ_top_l,
)
from normclust.rng import derive_rng


@dataclass
class SuiteResult:
    name: str
    trials: int
    violations: int = 0
    examples: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def fail(self, detail) -> None:
        self.violations += 1
        if len(self.examples) < 3:
            self.examples.append(detail)


def _rand_frac(rng, den_max=6) -> Fraction:
    den = int(rng.integers(1, den_max + 1))
    return Fraction(int(rng.integers(0, den + 1)), den)


def random_occ(rng, n: int, max_dist: int = 20, support: int | None = None) -> OccurrenceVector:
    """Random element of S_n: integer support, rational masses summing to n."""
    support = support or int(rng.integers(1, 6))
    pts = sorted({int(a) for a in rng.integers(0, max_dist + 1, size=support)})
    cuts = sorted(_rand_frac(rng) * n for _ in range(len(pts) - 1))
    bounds = [Fraction(0)] + cuts + [Fraction(n)]
    masses = {a: bounds[q + 1] - bounds[q] for q, a in enumerate(pts)}
    return OccurrenceVector({a: m for a, m in masses.items() if m > 0})


def _probe_ells(rng, *deltas) -> list:
    n = deltas[0].total_mass
    ells = set(breakpoints(*deltas)) | {Fraction(n)}
    ells |= {_rand_frac(rng, 7) * n for _ in range(3)}
    return sorted(ells)


def min_gamma(d_small: OccurrenceVector, d_big: OccurrenceVector):
    """Smallest gamma with d_small dominated by d_big (None if unbounded)."""
    g = Fraction(0)
    for ell in breakpoints(d_small, d_big):
        a, b = occ_top_l(d_small, ell), occ_top_l(d_big, ell)
        if a == 0:
            continue
        if b == 0:
            return None
        g = max(g, Fraction(a) / b)
    return g


def random_coupling(rng, d1: OccurrenceVector, d2: OccurrenceVector) -> dict:
    """A coupling with marginals d1, d2 built greedily over shuffled supports."""
    p1 = [list(x) for x in d1.pairs]
    p2 = [list(x) for x in d2.pairs]
    rng.shuffle(p1)
    rng.shuffle(p2)
    z: dict = {}
    i = j = 0
    while i < len(p1) and j < len(p2):
        m = min(p1[i][1], p2[j][1])
        if m > 0:
            key = (p1[i][0], p2[j][0])
            z[key] = z.get(key, 0) + m
        p1[i][1] -= m
        p2[j][1] -= m
        if p1[i][1] == 0:
            i += 1
        if p2[j][1] == 0:
            j += 1
    return z


def averaged(rng, delta: OccurrenceVector, gamma) -> OccurrenceVector:
    """Split delta into pieces and collapse some pieces to an integer <= gamma * their mean."""
    theta0: dict = {}
    pieces = []
    for a, m in delta.pairs:
        part = _rand_frac(rng) * m
        theta0[a] = m - part
        if part and rng.random() < 0.7:
            pieces.append((a, part))
        elif part:
            theta0[a] += part
    res = {a: m for a, m in theta0.items() if m}
    rng.shuffle(pieces)
    groups = [pieces[q : q + 2] for q in range(0, len(pieces), 2)]
    for grp in groups:
        mass = sum(m for _, m in grp)
        mean = Fraction(sum(a * m for a, m in grp)) / mass
        b = math.floor(gamma * mean)
        b = int(rng.integers(max(b - 2, 0), b + 1)) if b > 0 else 0
        res[b] = res.get(b, 0) + mass
    return OccurrenceVector(res)


# ---------------------------------------------------------------------------
# suites


def suite_linearization(trials: int, seed: int = 0) -> SuiteResult:
    r = SuiteResult("linearization", trials)
    rng = derive_rng(seed, "props", "linearization")
    for _ in range(trials):
        n = int(rng.integers(1, 10))
        v = [int(x) for x in rng.integers(0, 30, size=n)]
        for ell in range(0, n + 1):
            direct = top_l(v, ell)
            val, t = top_l_min_threshold(v, ell)
            if val != direct:
                r.fail((v, ell, val, direct))
            if top_l_via_threshold(v, ell, t) != direct:
                r.fail((v, ell, "argmin", t))
            for t2 in set(v) | {0}:
                if top_l_via_threshold(v, ell, t2) < direct:
                    r.fail((v, ell, "below", t2))
    return r


def suite_concavity(trials: int, seed: int = 0) -> SuiteResult:
    r = SuiteResult("concavity", trials)
    rng = derive_rng(seed, "props", "concavity")
    for _ in range(trials):
        n = int(rng.integers(1, 8))
        d1, d2 = random_occ(rng, n), random_occ(rng, n)
        lam = _rand_frac(rng)
        mix = d1.scale(lam) + d2.scale(1 - lam)
        for ell in _probe_ells(rng, d1, d2):
            if occ_top_l(mix, ell) < lam * occ_top_l(d1, ell) + (1 - lam) * occ_top_l(d2, ell):
                r.fail((d1, d2, lam, ell))
    return r


def suite_convex_domination(trials: int, seed: int = 0) -> SuiteResult:
    r = SuiteResult("convex_combination_domination", trials)
    rng = derive_rng(seed, "props", "convex")
    for _ in range(trials):
        n = int(rng.integers(1, 8))
        H = int(rng.integers(1, 4))
        big = [random_occ(rng, n) for _ in range(H)]
        small = [random_occ(rng, n) for _ in range(H)]
        gams = [min_gamma(s, b) for s, b in zip(small, big)]
        if any(g is None for g in gams):
            small = [b for b in big]
            gams = [Fraction(1)] * H
        gamma = max(max(gams), Fraction(1, 10))
        raw = [int(x) + 1 for x in rng.integers(0, 5, size=H)]
        beta = [Fraction(x, sum(raw)) for x in raw]
        mix_s = OccurrenceVector({})
        mix_b = OccurrenceVector({})
        for bh, s, b in zip(beta, small, big):
            mix_s = mix_s + s.scale(bh)
            mix_b = mix_b + b.scale(bh)
        if not dominates(mix_s, mix_b, gamma):
            r.fail((small, big, beta, gamma))
    return r


def suite_averaging(trials: int, seed: int = 0) -> SuiteResult:
    r = SuiteResult("averaging", trials)
    rng = derive_rng(seed, "props", "averaging")
    for _ in range(trials):
        n = int(rng.integers(1, 8))
        delta = random_occ(rng, n)
        gamma = 1 + _rand_frac(rng, 4)
        dp = averaged(rng, delta, gamma)
        if not dominates(dp, delta, gamma):
            r.fail((delta, dp, gamma, domination_violation(dp, delta, gamma)))
    return r


def suite_oplus(trials: int, seed: int = 0) -> SuiteResult:
    r = SuiteResult("oplus_domination", trials)
    rng = derive_rng(seed, "props", "oplus")
    for _ in range(trials):
        n = int(rng.integers(1, 8))
        d1, d2 = random_occ(rng, n), random_occ(rng, n)
        phi = occ_oplus(d1, d2)
        phi2 = occ_add_by_matching(d1, d2, random_coupling(rng, d1, d2))
        if not dominates(phi2, phi, 1):
            r.fail((d1, d2, phi2))
    return r


def suite_mix(trials: int, seed: int = 0) -> SuiteResult:
    r = SuiteResult("mix_bound", trials)
    rng = derive_rng(seed, "props", "mix")
    inv_e = Fraction(math.exp(-1.0)).limit_denominator(10**9)
    done = 0
    while done < trials:
        n = int(rng.integers(1, 8))
        delta = random_occ(rng, n)
        if occ_top_l(delta, n) == 0:
            continue
        gamma = 1 + _rand_frac(rng, 4)
        d2 = averaged(rng, delta, gamma) if rng.random() < 0.6 else random_occ(rng, n)
        g2 = min_gamma(d2, delta)
        if g2 is None:
            continue
        gamma = max(gamma, g2) if not dominates(d2, delta, gamma) else gamma
        c = inv_e + (1 - inv_e) * (Fraction(int(rng.integers(1, 101)), 100))
        alpha = c * _rand_frac(rng)
        lhs, rhs, holds = mix_bound_check(delta, d2, c, alpha, gamma)
        if not holds:
            r.fail((delta, d2, c, alpha, gamma, lhs, rhs))
        done += 1
    return r


def suite_dependent_rounding(trials: int, seed: int = 0) -> SuiteResult:
    r = SuiteResult("dependent_rounding", trials)
    rng = derive_rng(seed, "props", "rounding")
    for _ in range(trials):
        size = int(rng.integers(1, 13))
        u = int(rng.integers(1, size + 1))
        raw = [_rand_frac(rng, 8) for _ in range(size)]
        total = sum(raw)
        if total > u:
            raw = [x * u / total for x in raw]
        dist = systematic_distribution(raw)
        if sum(dist.values()) != 1:
            r.fail(("mass", raw))
        for J in dist:
            if len(J) > u:
                r.fail(("size", raw, J))
        for j, pj in enumerate(raw):
            if sum(p for J, p in dist.items() if j in J) != pj:
                r.fail(("marginal", raw, j))
    return r


SUITES = {
    "linearization": suite_linearization,
    "concavity": suite_concavity,
    "convex": suite_convex_domination,
    "averaging": suite_averaging,
    "oplus": suite_oplus,
    "mix": suite_mix,
    "rounding": suite_dependent_rounding,
}

OCCURRENCE_SUITES = ("concavity", "convex", "averaging", "oplus", "mix")


def run_suites(names=None, trials: int = 1000, seed: int = 0) -> list[SuiteResult]:
    names = list(SUITES) if not names else list(names)
    return [SUITES[nm](trials, seed) for nm in names]
