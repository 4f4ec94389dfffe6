"""Clustering solutions and their exact evaluation."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from normclust.metric import Instance, is_inf
from normclust.norms import NormSpec, comparable, eval_norm


@dataclass
class Solution:
    open: tuple[int, ...]
    assignment: tuple[int, ...]  # client (local) -> facility
    value: object
    norm: NormSpec
    meta: dict = field(default_factory=dict)

    @property
    def key(self):
        return comparable(self.value)


def cost_vector(inst: Instance, assignment: Sequence[int]) -> list:
    return [inst.d(i, j) for j, i in enumerate(assignment)]


def check_assignment(inst: Instance, open_set: Sequence[int], assignment: Sequence[int]) -> list[str]:
    """Problems with (open, assignment): coverage, closed facilities, capacities, INF edges."""
    problems = []
    opened = set(open_set)
    if len(assignment) != inst.n_clients:
        problems.append(f"assignment covers {len(assignment)} of {inst.n_clients} clients")
    for j, i in enumerate(assignment):
        if i not in opened:
            problems.append(f"client {j} assigned to closed facility {i}")
        elif is_inf(inst.d(i, j)):
            problems.append(f"client {j} assigned over a removed edge to facility {i}")
    for i, cnt in sorted(Counter(assignment).items()):
        if 0 <= i < inst.n_facilities and cnt > inst.capacities[i]:
            problems.append(f"facility {i} serves {cnt} clients, capacity {inst.capacities[i]}")
    if len(opened) > inst.k:
        problems.append(f"{len(opened)} open facilities exceed k={inst.k}")
    return problems


def make_solution(inst: Instance, open_set, assignment, norm: NormSpec | None = None, **meta) -> Solution:
    norm = norm or inst.norm
    vec = cost_vector(inst, assignment)
    return Solution(tuple(sorted(set(open_set))), tuple(assignment), eval_norm(norm, vec), norm, dict(meta))


def nearest_assignment(inst: Instance, open_set: Sequence[int]) -> tuple[int, ...] | None:
    """Each client to its nearest open facility (ties to the lower id); None if some client sees only INF."""
    opened = sorted(open_set)
    out = []
    for j in inst.clients:
        best = None
        for i in opened:
            x = inst.d(i, j)
            if is_inf(x):
                continue
            if best is None or x < best[0]:
                best = (x, i)
        if best is None:
            return None
        out.append(best[1])
    return tuple(out)
