"""Approximate assignment to a fixed open set under a general symmetric norm.

Clients are split into exclusive classes C_X (a tight facility group X far
from every other facility, seen from the client) and inclusive clients C_I.
A guess table fixes, on a (1+eps) grid, how many inclusive clients each
facility takes per discretized distance and how many clients of each class
leave their group for each outside facility.  Each table is turned into a
capacitated assignment by min-cost flow and evaluated under the true norm.

Tables are not enumerated in full.  They are seeded from the count profiles
of exact assignments for the norm's top-l components (plus L1 and L-inf)
and then improved one grid step at a time while a flow budget lasts.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from normclust.flow import MinCostFlow
from normclust.metric import Instance, is_inf
from normclust.mnckc import power_ceiling
from normclust.norms import NormSpec, as_exact, comparable, eval_norm
from normclust.solution import cost_vector

CLASSIFY_EPS_MAX = Fraction(9, 100)
DEFAULT_TABLE_BUDGET = 400


class EpsilonOutOfRange(ValueError):
    pass


def _le_ratio(a, b, eps) -> bool:
    """a / b <= eps with 0/0 = 0 and x/INF = 0 for finite x."""
    if is_inf(a):
        return False
    if is_inf(b):
        return True
    if b == 0:
        return a == 0
    return a <= eps * b


@dataclass
class ExclusiveStructure:
    facilities: tuple[int, ...]
    classes: dict  # frozenset X -> tuple of clients
    inclusive: tuple[int, ...]
    laminar_tree: dict = field(default_factory=dict)  # X -> parent X or None

    def class_of(self) -> dict[int, frozenset | None]:
        out: dict[int, frozenset | None] = {c: None for c in self.inclusive}
        for X, cs in self.classes.items():
            for c in cs:
                out[c] = X
        return out


def is_exclusive(inst: Instance, F: Sequence[int], c: int, X: frozenset, eps) -> bool:
    dcX = min(inst.d(f, c) for f in X)
    far = max(inst.d(f, c) for f in X)
    for f1, f2 in itertools.combinations(sorted(X), 2):
        if not _le_ratio(inst.dp(f1, f2), dcX, eps):
            return False
    for f in F:
        if f not in X and not _le_ratio(far, inst.d(f, c), eps):
            return False
    return True


def _check_eps(eps):
    eps = as_exact(eps)
    if not 0 < eps < Fraction(1, 10):
        raise EpsilonOutOfRange("classification needs 0 < eps < 1/10")
    return eps


def classify_clients(inst: Instance, F: Sequence[int], eps) -> ExclusiveStructure:
    """Exclusive classes and inclusive clients for the facility set F.

    Condition (ii) forces X to be a distance-sorted prefix of F around the
    client that does not split a tie, so only those prefixes are tested.
    When several pass (possible only with zero distances) the largest wins.
    """
    eps = _check_eps(eps)
    F = tuple(sorted(set(F)))
    classes: dict[frozenset, list[int]] = {}
    inclusive = []
    for c in inst.clients:
        order = sorted(F, key=lambda f: (inst.d(f, c), f))
        found = None
        for size in range(len(order), 0, -1):
            if size < len(order) and inst.d(order[size - 1], c) == inst.d(order[size], c):
                continue
            X = frozenset(order[:size])
            if is_exclusive(inst, F, c, X, eps):
                found = X
                break
        if found is None:
            inclusive.append(c)
        else:
            classes.setdefault(found, []).append(c)
    cls = {X: tuple(v) for X, v in sorted(classes.items(), key=lambda kv: (len(kv[0]), sorted(kv[0])))}
    return ExclusiveStructure(F, cls, tuple(inclusive), laminar_parents(list(cls)))


def classify_clients_bruteforce(inst: Instance, F: Sequence[int], eps) -> dict[int, list[frozenset]]:
    """Every X (all 2^|F| - 1 subsets) each client is exclusive for."""
    eps = _check_eps(eps)
    F = tuple(sorted(set(F)))
    subsets = [frozenset(s) for r in range(1, len(F) + 1) for s in itertools.combinations(F, r)]
    return {c: [X for X in subsets if is_exclusive(inst, F, c, X, eps)] for c in inst.clients}


def is_laminar(sets: Sequence[frozenset]) -> bool:
    for A, B in itertools.combinations(sets, 2):
        if A & B and not (A <= B or B <= A):
            return False
    return True


def laminar_parents(sets: Sequence[frozenset]) -> dict:
    out = {}
    for X in sets:
        sup = [Y for Y in sets if X < Y]
        out[X] = min(sup, key=lambda Y: (len(Y), sorted(Y))) if sup else None
    return out


def discretize(d, eps):
    d = as_exact(d)
    if is_inf(d) or d == 0:
        return d
    return power_ceiling(d, 1 + Fraction(as_exact(eps)))


def discretized_distances(inst: Instance, f: int, C_I: Sequence[int], eps) -> list:
    return sorted({discretize(inst.d(f, c), eps) for c in C_I if not is_inf(inst.d(f, c))})


def count_grid(n: int, eps) -> tuple:
    """{0} U {(1+eps)^r : 0 <= r <= ceil(log_{1+eps} n)}."""
    base = 1 + Fraction(as_exact(eps))
    top = math.ceil(math.log(max(n, 1)) / math.log(float(base))) if n > 1 else 0
    out = [Fraction(0)]
    v = Fraction(1)
    for _ in range(top + 1):
        out.append(v)
        v *= base
    while out[-1] < n:  # guard against float rounding in the log
        out.append(out[-1] * base)
    return tuple(out)


@dataclass(frozen=True)
class GuessTable:
    m_fd: tuple  # ((f, d), grid index) sorted
    m_Xf: tuple  # ((X sorted tuple, f), grid index) sorted

    def as_dicts(self):
        return dict(self.m_fd), dict(self.m_Xf)


@dataclass
class AssignmentResult:
    assignment: tuple[int, ...]
    value: object
    table: GuessTable | None
    structure: ExclusiveStructure
    tables_tried: int
    tables_feasible: int


class _Problem:
    def __init__(self, inst: Instance, F: Sequence[int], eps, eps_cls):
        self.inst = inst
        self.F = tuple(sorted(set(F)))
        self.eps = as_exact(eps)
        self.st = classify_clients(inst, self.F, eps_cls)
        self.cls_of = self.st.class_of()
        self.grid = count_grid(inst.n_clients, self.eps)
        self.fd_keys = sorted(
            {(f, discretize(inst.d(f, c), self.eps)) for c in self.st.inclusive for f in self.F if not is_inf(inst.d(f, c))}
        )
        self.xf_keys = sorted((tuple(sorted(X)), f) for X in self.st.classes for f in self.F if f not in X)

    def grid_index(self, n: int) -> int:
        for r, v in enumerate(self.grid):
            if v >= n:
                return r
        return len(self.grid) - 1

    def table_from_assignment(self, sigma: Sequence[int]) -> GuessTable:
        nfd = {key: 0 for key in self.fd_keys}
        nxf = {key: 0 for key in self.xf_keys}
        for c, f in enumerate(sigma):
            X = self.cls_of[c]
            if X is None:
                nfd[(f, discretize(self.inst.d(f, c), self.eps))] += 1
            elif f not in X:
                nxf[(tuple(sorted(X)), f)] += 1
        return GuessTable(
            tuple((k, self.grid_index(v)) for k, v in sorted(nfd.items())),
            tuple((k, self.grid_index(v)) for k, v in sorted(nxf.items())),
        )

    def cap(self, r: int) -> int:
        return math.floor(self.grid[r])

    def solve_table(self, table: GuessTable) -> tuple[int, ...] | None:
        inst, F = self.inst, self.F
        m_fd, m_xf = table.as_dicts()
        nc = inst.n_clients
        fac_node = {f: nc + q for q, f in enumerate(F)}
        nxt = nc + len(F)
        src, snk = nxt, nxt + 1
        nxt += 2
        g_node = {}
        for key in self.fd_keys:
            g_node[key] = nxt
            nxt += 1
        a_node = {}  # (X, f) -> (in node, out node); in -> out carries at most m_{X,f}
        for key in self.xf_keys:
            a_node[key] = (nxt, nxt + 1)
            nxt += 2
        g = MinCostFlow(nxt)
        for c in inst.clients:
            g.add_edge(src, c, 1, 0)
        for f in F:
            g.add_edge(fac_node[f], snk, min(inst.capacities[f], nc), 0)
        for key, node in g_node.items():
            g.add_edge(node, fac_node[key[0]], self.cap(m_fd[key]), 0)
        outs: dict[tuple, list[tuple[int, int]]] = {}
        for key, (a_in, a_out) in a_node.items():
            Xt, f = key
            g.add_edge(a_in, a_out, self.cap(m_xf[key]), 0)
            outs[key] = [(f2, g.add_edge(a_out, fac_node[f2], nc, 0)) for f2 in Xt + (f,)]
        direct: list[tuple[int, int, int]] = []  # (client, facility, edge)
        via: dict[tuple, list[tuple[int, int]]] = {}  # (X, f) -> [(client, edge)]
        for c in self.st.inclusive:
            for f in F:
                d = inst.d(f, c)
                if not is_inf(d):
                    direct.append((c, f, g.add_edge(c, g_node[(f, discretize(d, self.eps))], 1, d)))
        for X, members in self.st.classes.items():
            Xt = tuple(sorted(X))
            outside = [f for f in F if f not in X]
            t_X = max(0, len(members) - sum(self.cap(m_xf[(Xt, f)]) for f in outside))
            order = sorted(members, key=lambda c: (min(inst.d(f, c) for f in X), c))
            for pos, c in enumerate(order):
                if pos < t_X:
                    for f in Xt:
                        d = inst.d(f, c)
                        if not is_inf(d):
                            direct.append((c, f, g.add_edge(c, fac_node[f], 1, d)))
                else:
                    for f in outside:
                        d = inst.d(f, c)
                        if not is_inf(d):
                            via.setdefault((Xt, f), []).append((c, g.add_edge(c, a_node[(Xt, f)][0], 1, d)))
        flow, _ = g.run(src, snk)
        if flow < nc:
            return None
        sigma = [-1] * nc
        for c, f, e in direct:
            if g.flow_on(e):
                sigma[c] = f
        # clients allocated to f but routed into X: the ones nearest to X go to X
        for key, entries in via.items():
            Xt, _ = key
            inside = sorted((c for c, e in entries if g.flow_on(e)), key=lambda c: (min(inst.d(f, c) for f in Xt), c))
            targets = []
            for f2, e in outs[key]:
                targets += [f2] * g.flow_on(e)
            targets.sort(key=lambda f2: (f2 not in Xt, f2))
            for c, f2 in zip(inside, targets):
                sigma[c] = f2
        if -1 in sigma:
            return None
        return tuple(sigma)


def _surrogate_norms(norm: NormSpec, n: int) -> list[NormSpec]:
    out = [NormSpec.l1(), NormSpec.linf()]
    if norm.kind in ("topl", "ordered"):
        for ell, _ in (norm.top_l_decomposition(n) if norm.kind == "ordered" else [(norm.ell, 1)]):
            if 0 < ell <= n:
                out.append(NormSpec.topl(ell))
    elif norm.kind == "lp" and isinstance(norm.p, int):
        out.append(norm)
    return out


def guess_and_match(
    inst: Instance,
    F: Sequence[int],
    eps,
    *,
    norm: NormSpec | None = None,
    budget: int = DEFAULT_TABLE_BUDGET,
) -> AssignmentResult | None:
    """Best assignment of C to F over the explored guess tables, or None if none is feasible."""
    from normclust.oracle import optimal_assignment

    norm = norm or inst.norm
    eps = as_exact(eps)
    prob = _Problem(inst, F, eps, min(eps, CLASSIFY_EPS_MAX))
    if sum(min(inst.capacities[f], inst.n_clients) for f in prob.F) < inst.n_clients:
        return None
    seeds: list[GuessTable] = []
    for sn in _surrogate_norms(norm, inst.n_clients):
        res = optimal_assignment(prob.F, inst, sn)
        if res is not None:
            t = prob.table_from_assignment(res[0])
            if t not in seeds:
                seeds.append(t)
    tried: dict[GuessTable, object] = {}
    feasible = 0
    best = None

    def evaluate(table: GuessTable):
        nonlocal feasible, best
        if table in tried:
            return tried[table]
        sigma = prob.solve_table(table) if len(tried) < budget else None
        val = None
        if sigma is not None:
            feasible += 1
            val = eval_norm(norm, cost_vector(inst, sigma))
            if best is None or comparable(val) < comparable(best[1]):
                best = (sigma, val, table)
        tried[table] = val
        return val

    for t in seeds:
        evaluate(t)
    # grid-step local search from the best table
    improved = True
    while improved and best is not None and len(tried) < budget:
        improved = False
        base = best[2]
        for nb in _neighbours(base, len(prob.grid)):
            if len(tried) >= budget:
                break
            before = best[1]
            evaluate(nb)
            if comparable(best[1]) < comparable(before):
                improved = True
                break
    if best is None:
        return None
    return AssignmentResult(best[0], best[1], best[2], prob.st, len(tried), feasible)


def _neighbours(t: GuessTable, size: int):
    for part in ("m_fd", "m_Xf"):
        entries = getattr(t, part)
        for q, (key, r) in enumerate(entries):
            for dr in (-1, 1):
                if 0 <= r + dr < size:
                    new = entries[:q] + ((key, r + dr),) + entries[q + 1 :]
                    yield GuessTable(new, t.m_Xf) if part == "m_fd" else GuessTable(t.m_fd, new)
