"""Occurrence-times vectors: mass per distance value.

An :class:`OccurrenceVector` stores pairs ``(a, m)`` sorted by distance ``a``
with positive exact masses ``m``.  A cost vector of length n maps to one of
total mass n; fractional solutions produce fractional masses.
"""

from __future__ import annotations

import math
from collections import defaultdict
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from normclust.norms import Number, as_exact


class OccurrenceVector:
    __slots__ = ("pairs",)

    def __init__(self, masses: Mapping | Iterable[tuple] = ()):
        acc: dict = defaultdict(int)
        items = masses.items() if isinstance(masses, Mapping) else masses
        for a, m in items:
            a, m = as_exact(a), as_exact(m)
            if a < 0 or m < 0:
                raise ValueError("distances and masses must be nonnegative")
            if m:
                acc[a] += m
        self.pairs: tuple[tuple[Number, Number], ...] = tuple(
            (a, as_exact(acc[a])) for a in sorted(acc) if acc[a]
        )

    # basic accessors
    @property
    def total_mass(self) -> Number:
        return as_exact(sum((m for _, m in self.pairs), 0))

    def as_dict(self) -> dict:
        return dict(self.pairs)

    def support(self) -> list:
        return [a for a, _ in self.pairs]

    def __eq__(self, other) -> bool:
        return isinstance(other, OccurrenceVector) and self.pairs == other.pairs

    def __hash__(self) -> int:
        return hash(self.pairs)

    def __repr__(self) -> str:
        body = ", ".join(f"{a}:{m}" for a, m in self.pairs)
        return f"Occ({{{body}}})"

    def to_json(self) -> list:
        from normclust.norms import rat_str

        return [[rat_str(a), rat_str(m)] for a, m in self.pairs]

    @classmethod
    def from_json(cls, obj) -> "OccurrenceVector":
        return cls((as_exact(a), as_exact(m)) for a, m in obj)

    # linear structure (mass-wise)
    def scale(self, beta) -> "OccurrenceVector":
        beta = as_exact(beta)
        return OccurrenceVector((a, beta * m) for a, m in self.pairs)

    def __add__(self, other: "OccurrenceVector") -> "OccurrenceVector":
        return OccurrenceVector(list(self.pairs) + list(other.pairs))

    def __rmul__(self, beta) -> "OccurrenceVector":
        return self.scale(beta)

    def scale_distances(self, lam) -> "OccurrenceVector":
        lam = as_exact(lam)
        return OccurrenceVector((lam * a, m) for a, m in self.pairs)

    def expand(self) -> list:
        """Sorted cost vector; only for integral masses."""
        out = []
        for a, m in self.pairs:
            if as_exact(m) != math.floor(m):
                raise ValueError("expand needs integral masses")
            out.extend([a] * int(m))
        return out


def occ_from_vector(v: Sequence) -> OccurrenceVector:
    return OccurrenceVector((x, 1) for x in v)


def point_mass(a, m=1) -> OccurrenceVector:
    return OccurrenceVector([(a, m)])


def occ_top_l(delta: OccurrenceVector, ell) -> Number:
    """Greedy optimum: take mass from the largest distances down until ell."""
    ell = as_exact(ell)
    if ell < 0 or ell > delta.total_mass:
        raise ValueError(f"ell={ell} outside [0, {delta.total_mass}]")
    rest = ell
    total = 0
    for a, m in reversed(delta.pairs):
        if rest <= 0:
            break
        take = m if m < rest else rest
        total += take * a
        rest -= take
    return as_exact(total)


def _check_mass(d1: OccurrenceVector, d2: OccurrenceVector) -> None:
    if d1.total_mass != d2.total_mass:
        raise ValueError(f"mass mismatch: {d1.total_mass} vs {d2.total_mass}")


def monotone_coupling(d1: OccurrenceVector, d2: OccurrenceVector) -> list[tuple[Number, Number, Number]]:
    """Co-sorted coupling as triples (a, a', mass)."""
    _check_mass(d1, d2)
    p1, p2 = list(d1.pairs), list(d2.pairs)
    out = []
    i = j = 0
    r1 = p1[0][1] if p1 else 0
    r2 = p2[0][1] if p2 else 0
    while i < len(p1) and j < len(p2):
        m = r1 if r1 < r2 else r2
        out.append((p1[i][0], p2[j][0], m))
        r1 -= m
        r2 -= m
        if r1 == 0:
            i += 1
            r1 = p1[i][1] if i < len(p1) else 0
        if r2 == 0:
            j += 1
            r2 = p2[j][1] if j < len(p2) else 0
    return out


def occ_oplus(d1: OccurrenceVector, d2: OccurrenceVector) -> OccurrenceVector:
    return OccurrenceVector((a + b, m) for a, b, m in monotone_coupling(d1, d2))


def occ_times2(d: OccurrenceVector) -> OccurrenceVector:
    return occ_oplus(d, d)


def occ_add_by_matching(d1: OccurrenceVector, d2: OccurrenceVector, z: Mapping) -> OccurrenceVector:
    """z maps (a, a') -> mass; its marginals must equal d1 and d2 exactly."""
    rows: dict = defaultdict(int)
    cols: dict = defaultdict(int)
    for (a, b), m in z.items():
        m = as_exact(m)
        if m < 0:
            raise ValueError("negative coupling mass")
        rows[as_exact(a)] += m
        cols[as_exact(b)] += m
    if OccurrenceVector(rows) != d1 or OccurrenceVector(cols) != d2:
        raise ValueError("coupling marginals do not match")
    return OccurrenceVector((as_exact(a) + as_exact(b), m) for (a, b), m in z.items())


def breakpoints(*deltas: OccurrenceVector) -> list[Number]:
    """Cumulative masses counted from the largest distance, plus 0."""
    pts = {0}
    for d in deltas:
        acc = 0
        for _, m in reversed(d.pairs):
            acc += m
            pts.add(as_exact(acc))
    return sorted(pts)


def domination_violation(d_small: OccurrenceVector, d_big: OccurrenceVector, gamma) -> Number | None:
    """First breakpoint ell with top_ell(d_small) > gamma*top_ell(d_big), else None."""
    _check_mass(d_small, d_big)
    gamma = as_exact(gamma)
    for ell in breakpoints(d_small, d_big):
        if occ_top_l(d_small, ell) > gamma * occ_top_l(d_big, ell):
            return ell
    return None


def dominates(d_small: OccurrenceVector, d_big: OccurrenceVector, gamma) -> bool:
    """True iff d_small is dominated by d_big with factor gamma."""
    if as_exact(gamma) <= 0:
        raise ValueError("gamma must be positive")
    return domination_violation(d_small, d_big, gamma) is None


INV_E = math.exp(-1.0)


def mix_bound_check(delta: OccurrenceVector, delta2: OccurrenceVector, c, alpha, gamma):
    """(lhs, rhs, holds) for top_cn((1-a)delta + a(delta (+) delta2 x2)) vs (1 + 2a*gamma/c) top_cn(delta)."""
    c, alpha, gamma = as_exact(c), as_exact(alpha), as_exact(gamma)
    if not (Fraction(c) > Fraction(INV_E) and c <= 1):
        raise ValueError("c must lie in (1/e, 1]")
    if not 0 <= alpha <= c:
        raise ValueError("alpha must lie in [0, c]")
    if not dominates(delta2, delta, gamma):
        raise ValueError("precondition: delta2 must be dominated by delta with factor gamma")
    n = delta.total_mass
    mixed = delta.scale(1 - alpha) + occ_oplus(delta, occ_times2(delta2)).scale(alpha)
    lhs = occ_top_l(mixed, c * n)
    rhs = as_exact((1 + 2 * alpha * gamma / c) * occ_top_l(delta, c * n))
    return lhs, rhs, lhs <= rhs
