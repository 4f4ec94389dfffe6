"""Min-cost flow and capacitated assignment.

:class:`MinCostFlow` is successive shortest paths with queue-based
Bellman-Ford on exact costs (ints or Fractions).  It is the reference route.
:func:`assign_min_cost` uses ``scipy.optimize.linear_sum_assignment`` on
capacity-expanded slots when costs are integers below 2**53 (float64 is exact
there) and falls back to the exact SSP otherwise.
"""

from __future__ import annotations

import math
from collections import deque
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from normclust.norms import as_exact


class MinCostFlow:
    def __init__(self, n_nodes: int):
        self.n = n_nodes
        self.head: list[list[int]] = [[] for _ in range(n_nodes)]
        self.to: list[int] = []
        self.cap: list[int] = []
        self.cost: list = []

    def add_edge(self, u: int, v: int, cap: int, cost=0) -> int:
        eid = len(self.to)
        self.to += [v, u]
        self.cap += [int(cap), 0]
        self.cost += [cost, -cost]
        self.head[u].append(eid)
        self.head[v].append(eid + 1)
        return eid

    def flow_on(self, eid: int) -> int:
        return self.cap[eid ^ 1]

    def run(self, s: int, t: int, max_flow: int | None = None):
        """Push up to max_flow units along cheapest paths; returns (flow, cost)."""
        flow, total = 0, 0
        limit = math.inf if max_flow is None else max_flow
        while flow < limit:
            dist = [None] * self.n
            prev = [-1] * self.n
            inq = [False] * self.n
            dist[s] = 0
            q = deque([s])
            while q:
                u = q.popleft()
                inq[u] = False
                du = dist[u]
                for e in self.head[u]:
                    if self.cap[e] <= 0:
                        continue
                    v = self.to[e]
                    nd = du + self.cost[e]
                    if dist[v] is None or nd < dist[v]:
                        dist[v] = nd
                        prev[v] = e
                        if not inq[v]:
                            inq[v] = True
                            q.append(v)
            if dist[t] is None:
                break
            push = limit - flow
            v = t
            while v != s:
                e = prev[v]
                push = min(push, self.cap[e])
                v = self.to[e ^ 1]
            push = int(push)
            v = t
            while v != s:
                e = prev[v]
                self.cap[e] -= push
                self.cap[e ^ 1] += push
                v = self.to[e ^ 1]
            flow += push
            total += push * dist[t]
        return flow, total


def _is_inf(x) -> bool:
    return isinstance(x, float) and math.isinf(x)


def ssp_assignment(cost: Sequence[Sequence], caps: Sequence[int]):
    """Exact min-cost capacitated assignment.

    cost[i][j] for facility i and client j (INF = forbidden).  Returns
    (assignment, total) with assignment[j] = i, or None if infeasible.
    """
    nf = len(cost)
    nc = len(cost[0]) if nf else 0
    if nc == 0:
        return (), 0
    s, t = nf + nc, nf + nc + 1
    g = MinCostFlow(nf + nc + 2)
    for j in range(nc):
        g.add_edge(s, nf + j, 1, 0)
    edges = {}
    for i in range(nf):
        for j in range(nc):
            c = cost[i][j]
            if not _is_inf(c):
                edges[(i, j)] = g.add_edge(nf + j, i, 1, as_exact(c))
        if caps[i] > 0:
            g.add_edge(i, t, min(int(caps[i]), nc), 0)
    flow, total = g.run(s, t)
    if flow < nc:
        return None
    out = [-1] * nc
    for (i, j), e in edges.items():
        if g.flow_on(e):
            out[j] = i
    return tuple(out), as_exact(total)


_FLOAT_EXACT = 2**53


def assign_min_cost(cost: Sequence[Sequence], caps: Sequence[int]):
    """Same contract as :func:`ssp_assignment`, fast path via scipy for integer costs."""
    nf = len(cost)
    nc = len(cost[0]) if nf else 0
    if nc == 0:
        return (), 0
    finite_vals = [c for row in cost for c in row if not _is_inf(c)]
    if any(isinstance(c, Fraction) and c.denominator != 1 for c in finite_vals):
        den = 1
        for c in finite_vals:
            if isinstance(c, Fraction):
                den = math.lcm(den, c.denominator)
        scaled = [[c if _is_inf(c) else int(c * den) for c in row] for row in cost]
        res = assign_min_cost(scaled, caps)
        if res is None:
            return None
        return res[0], as_exact(Fraction(res[1], den))
    if not _fits(finite_vals, nc):
        return ssp_assignment(cost, caps)
    arr = np.array([[-1 if _is_inf(c) else int(c) for c in row] for row in cost], dtype=np.int64)
    return assign_min_cost_int(arr, caps)


def _fits(vals, nc) -> bool:
    return not vals or (max(vals) + 1) * (nc + 1) * 4 < _FLOAT_EXACT


def assign_min_cost_int(cost_int: np.ndarray, caps: Sequence[int]):
    """Integer costs (nf x nc), -1 = forbidden."""
    nf, nc = cost_int.shape
    if nc == 0:
        return (), 0
    slots = [i for i in range(nf) for _ in range(min(int(caps[i]), nc))]
    if len(slots) < nc:
        return None
    finite = cost_int >= 0
    max_c = int(cost_int[finite].max()) if finite.any() else 0
    if (max_c + 1) * (nc + 1) * 4 >= _FLOAT_EXACT:
        return ssp_assignment(_to_lists(cost_int), caps)
    big = (max_c + 1) * (nc + 1)
    c = np.where(finite, cost_int, big).astype(np.float64)  # nf x nc
    mat = c[slots, :].T  # nc x slots
    rows, cols = linear_sum_assignment(mat)
    out = [-1] * nc
    total = 0
    for r, col in zip(rows, cols):
        i = slots[col]
        if not finite[i, r]:
            return None
        out[r] = i
        total += int(cost_int[i, r])
    return tuple(out), total


def _to_lists(cost_int: np.ndarray):
    return [[math.inf if x < 0 else int(x) for x in row] for row in cost_int.tolist()]


def bipartite_feasible(allowed: np.ndarray | Sequence[Sequence[bool]], caps: Sequence[int]) -> tuple[int, ...] | None:
    """A capacity-respecting assignment using allowed edges (allowed[i][j]), or None.

    Augmenting paths over facility load lists.
    """
    allowed = np.asarray(allowed, dtype=bool)
    nf, nc = allowed.shape
    if nc == 0:
        return ()
    if sum(min(int(u), nc) for u in caps) < nc:
        return None
    nbrs = [np.flatnonzero(allowed[:, j]).tolist() for j in range(nc)]
    load: list[list[int]] = [[] for _ in range(nf)]
    owner = [-1] * nc

    def try_client(j: int, seen: list[bool]) -> bool:
        for i in nbrs[j]:
            if seen[i]:
                continue
            seen[i] = True
            if len(load[i]) < caps[i]:
                load[i].append(j)
                owner[j] = i
                return True
            for pos, j2 in enumerate(load[i]):
                if try_client(j2, seen):
                    load[i][pos] = j
                    owner[j] = i
                    return True
        return False

    for j in range(nc):
        if not nbrs[j] or not try_client(j, [False] * nf):
            return None
    return tuple(owner)
