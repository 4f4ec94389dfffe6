"""Exact brute-force solver for small instances.

Enumerates k-subsets of facilities in lexicographic order and solves the
assignment problem exactly for each.  Ties keep the first subset found.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from normclust.flow import assign_min_cost_int, bipartite_feasible
from normclust.metric import Instance, is_inf
from normclust.norms import NormSpec, as_exact, comparable, eval_norm
from normclust.solution import cost_vector

ORDERED_EXACT_MAX_CLIENTS = 10


class BudgetExceeded(Exception):
    pass


class UnsupportedExact(Exception):
    pass


@dataclass
class ExactResult:
    feasible: bool
    opt_value: object = None
    opt_open_set: tuple[int, ...] = ()
    opt_assignment: tuple[int, ...] = ()
    subsets_examined: int = 0
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class OracleBudget:
    max_facilities: int = 10
    max_clients: int = 14
    max_k: int = 4


def _sub(inst: Instance, open_set: Sequence[int], cap: object | None):
    """Integer cost rows for the open facilities (-1 = forbidden) and their capacities."""
    rows = inst.fc_int[list(open_set)]
    if cap is not None:
        limit = as_exact(cap) * inst.scale
        rows = np.where(rows > limit, -1, rows)
    caps = [inst.capacities[i] for i in open_set]
    return rows, caps


def _nearest(rows: np.ndarray) -> np.ndarray | None:
    big = np.where(rows >= 0, rows, np.iinfo(np.int64).max)
    if (rows < 0).all(axis=0).any():
        return None
    return big.argmin(axis=0)  # first minimum = lower position = lower id


def _uncapped(caps, nc) -> bool:
    return all(u >= nc for u in caps)


def _to_global(open_set: Sequence[int], local: Sequence[int]) -> tuple[int, ...]:
    return tuple(open_set[int(p)] for p in local)


def feasibility(open_set: Sequence[int], inst: Instance, *, linf_cap=None) -> bool:
    open_set = sorted(open_set)
    rows, caps = _sub(inst, open_set, linf_cap)
    return bipartite_feasible(rows >= 0, caps) is not None


def _linf(rows: np.ndarray, caps) -> tuple[tuple[int, ...], int] | None:
    vals = np.unique(rows[rows >= 0])
    lo, hi = 0, len(vals) - 1
    if hi < 0 or bipartite_feasible(rows >= 0, caps) is None:
        return None
    best = None
    while lo <= hi:
        mid = (lo + hi) // 2
        a = bipartite_feasible((rows >= 0) & (rows <= vals[mid]), caps)
        if a is not None:
            best = (a, int(vals[mid]))
            hi = mid - 1
        else:
            lo = mid + 1
    return best


def _threshold_flow(rows: np.ndarray, caps, t: int):
    cost = np.where(rows >= 0, np.maximum(rows - t, 0), -1)
    return assign_min_cost_int(cost, caps)


def _topl(rows: np.ndarray, caps, ell, scale: int):
    """Best (value, local assignment) over t in the distance set union {0}."""
    ts = sorted({0} | set(np.unique(rows[rows >= 0]).tolist()))
    best = None
    for t in ts:
        res = _threshold_flow(rows, caps, t)
        if res is None:
            return None
        val = Fraction(res[1], scale) + ell * Fraction(t, scale)
        if best is None or val < best[0]:
            best = (val, res[0])
    return best


def _ordered_enum(inst: Instance, open_set, norm: NormSpec, cap):
    nc = inst.n_clients
    if nc > ORDERED_EXACT_MAX_CLIENTS:
        raise UnsupportedExact(f"ordered exact assignment needs |C| <= {ORDERED_EXACT_MAX_CLIENTS}")
    rows, caps = _sub(inst, open_set, cap)
    w = norm.ordered_weights(nc)
    den = 1
    for x in w:
        den = math.lcm(den, Fraction(x).denominator)
    wi = np.array([int(x * den) for x in w], dtype=np.int64)
    k = len(open_set)
    best = None
    # chunks of assignments over the first clients keep memory bounded
    head = min(nc, 4)
    tail = nc - head
    if tail:
        tail_idx = np.array(list(itertools.product(range(k), repeat=tail)), dtype=np.int64)
    else:
        tail_idx = np.zeros((1, 0), dtype=np.int64)
    caps_arr = np.array(caps)
    for pre in itertools.product(range(k), repeat=head):
        pre = np.array(pre, dtype=np.int64)
        full = np.concatenate([np.broadcast_to(pre, (len(tail_idx), head)), tail_idx], axis=1)
        d = rows[full, np.arange(nc)]
        ok = (d >= 0).all(axis=1)
        counts = np.stack([(full == p).sum(axis=1) for p in range(k)], axis=1)
        ok &= (counts <= caps_arr).all(axis=1)
        if not ok.any():
            continue
        ds = -np.sort(-d[ok], axis=1)
        vals = ds @ wi
        idx = int(vals.argmin())
        v = int(vals[idx])
        if best is None or v < best[0]:
            best = (v, full[ok][idx])
    if best is None:
        return None
    return Fraction(best[0], den * inst.scale), tuple(int(x) for x in best[1])


def optimal_assignment(open_set: Sequence[int], inst: Instance, norm: NormSpec | None = None, *, linf_cap=None):
    """(assignment, value) optimal for the fixed open set, or None if infeasible.

    ``linf_cap`` forbids edges longer than the cap.
    """
    norm = norm or inst.norm
    open_set = sorted(set(open_set))
    nc = inst.n_clients
    if nc == 0:
        return (), eval_norm(norm, [])
    rows, caps = _sub(inst, open_set, linf_cap)
    if _uncapped(caps, nc):
        near = _nearest(rows)
        if near is None:
            return None
        a = _to_global(open_set, near)
        return a, eval_norm(norm, cost_vector(inst, a))
    kind = norm.kind
    if kind == "linf" or (kind == "topl" and norm.ell == 1):
        res = _linf(rows, caps)
        if res is None:
            return None
        a = _to_global(open_set, res[0])
    elif kind == "l1" or (kind == "topl" and norm.ell == nc):
        res = assign_min_cost_int(rows, caps)
        if res is None:
            return None
        a = _to_global(open_set, res[0])
    elif kind == "lp" and isinstance(norm.p, int):
        pw = np.where(rows >= 0, rows.astype(object) ** norm.p, -1)
        if max((int(x) for x in pw.ravel()), default=0) < 2**50:
            res = assign_min_cost_int(pw.astype(np.int64), caps)
        else:
            from normclust.flow import ssp_assignment

            res = ssp_assignment([[math.inf if x < 0 else int(x) for x in r] for r in pw.tolist()], caps)
        if res is None:
            return None
        a = _to_global(open_set, res[0])
    elif kind == "topl":
        res = _topl(rows, caps, norm.ell, inst.scale)
        if res is None:
            return None
        a = _to_global(open_set, res[1])
    elif kind == "ordered" or kind == "lp":
        res = _ordered_enum(inst, open_set, norm, linf_cap) if kind == "ordered" else _lp_enum(inst, open_set, norm, linf_cap)
        if res is None:
            return None
        a = _to_global(open_set, res[1])
    else:  # pragma: no cover
        raise UnsupportedExact(kind)
    return a, eval_norm(norm, cost_vector(inst, a))


def _lp_enum(inst: Instance, open_set, norm: NormSpec, cap):
    # non-integer p: plain enumeration on floats of the power sum
    nc = inst.n_clients
    if nc > ORDERED_EXACT_MAX_CLIENTS:
        raise UnsupportedExact("non-integer Lp exact assignment needs small |C|")
    rows, caps = _sub(inst, open_set, cap)
    best = None
    for a in itertools.product(range(len(open_set)), repeat=nc):
        if any(rows[p, j] < 0 for j, p in enumerate(a)):
            continue
        if any(a.count(p) > caps[p] for p in range(len(open_set))):
            continue
        v = eval_norm(norm, cost_vector(inst, _to_global(open_set, a)))
        if best is None or comparable(v) < comparable(best[0]):
            best = (v, a)
    return best


def exact_solve(inst: Instance, norm: NormSpec | None = None, *, linf_cap=None, budget: OracleBudget | None = None) -> ExactResult:
    norm = norm or inst.norm
    budget = budget or OracleBudget()
    if inst.n_facilities > budget.max_facilities or inst.n_clients > budget.max_clients or inst.k > budget.max_k:
        raise BudgetExceeded(
            f"oracle budget: |F|={inst.n_facilities}, |C|={inst.n_clients}, k={inst.k} "
            f"vs {budget.max_facilities}/{budget.max_clients}/{budget.max_k}"
        )
    best = None
    examined = 0
    for T in itertools.combinations(inst.facilities, inst.k):
        examined += 1
        caps = [inst.capacities[i] for i in T]
        if sum(min(u, inst.n_clients) for u in caps) < inst.n_clients:
            continue
        res = optimal_assignment(T, inst, norm, linf_cap=linf_cap)
        if res is None:
            continue
        a, v = res
        if best is None or comparable(v) < comparable(best[0]):
            best = (v, T, a)
    if best is None:
        return ExactResult(False, subsets_examined=examined)
    return ExactResult(True, best[0], tuple(best[1]), best[2], examined)


def brute_force_assignment(inst: Instance, open_set: Sequence[int], norm: NormSpec | None = None):
    """Plain enumeration of every assignment (test oracle)."""
    norm = norm or inst.norm
    open_set = sorted(open_set)
    best = None
    for a in itertools.product(open_set, repeat=inst.n_clients):
        if any(is_inf(inst.d(i, j)) for j, i in enumerate(a)):
            continue
        if any(a.count(i) > inst.capacities[i] for i in open_set):
            continue
        v = eval_norm(norm, cost_vector(inst, a))
        if best is None or comparable(v) < comparable(best[1]):
            best = (a, v)
    return best
