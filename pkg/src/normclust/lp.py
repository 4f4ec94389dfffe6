"""Linear programs with exact answers.

Models are built with exact coefficients in :class:`LinearProgram`.  Two
engines solve them:

* :func:`solve_exact` -- dense two-phase simplex over Fractions with Bland's
  rule.  Slow but exact; used as the fallback and as a test oracle.
* :class:`HighsSession` -- HiGHS through ``highspy`` in float arithmetic with
  warm re-solves.  Its primal point is turned back into rationals and checked
  exactly against every constraint (:func:`rationalize`); optimality is
  certified exactly from the rationalized duals when possible.  When that
  fails the final HiGHS basis is solved again in Fractions
  (:func:`basis_point`), which is exact up to the choice of basis.

:func:`solve` combines them: HiGHS first, exact simplex when neither
rational point verifies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import highspy
import numpy as np

from normclust.norms import Number, as_exact


class InfeasibleError(Exception):
    pass


class UnboundedError(Exception):
    pass


INF = math.inf


@dataclass
class LinearProgram:
    """min c.x  s.t.  row_lo <= A x <= row_hi,  col_lo <= x <= col_hi."""

    cost: list = field(default_factory=list)
    col_lo: list = field(default_factory=list)
    col_hi: list = field(default_factory=list)
    rows: list[dict[int, Number]] = field(default_factory=list)
    row_lo: list = field(default_factory=list)
    row_hi: list = field(default_factory=list)

    @property
    def n_cols(self) -> int:
        return len(self.cost)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def add_var(self, cost=0, lo=0, hi=INF) -> int:
        self.cost.append(as_exact(cost))
        self.col_lo.append(lo if lo == -INF else as_exact(lo))
        self.col_hi.append(hi if hi == INF else as_exact(hi))
        return len(self.cost) - 1

    def add_row(self, coeffs: dict[int, Number], lo=-INF, hi=INF) -> int:
        row = {j: as_exact(a) for j, a in coeffs.items() if a}
        self.rows.append(row)
        self.row_lo.append(lo if lo == -INF else as_exact(lo))
        self.row_hi.append(hi if hi == INF else as_exact(hi))
        return len(self.rows) - 1

    def objective(self, x: Sequence[Number]) -> Number:
        return as_exact(sum((c * v for c, v in zip(self.cost, x) if c and v), 0))

    def activity(self, r: int, x: Sequence[Number]) -> Number:
        return as_exact(sum((a * x[j] for j, a in self.rows[r].items()), 0))

    def violations(self, x: Sequence[Number]) -> list[str]:
        out = []
        for j, v in enumerate(x):
            if v < self.col_lo[j] or v > self.col_hi[j]:
                out.append(f"column {j} = {v} outside [{self.col_lo[j]}, {self.col_hi[j]}]")
        for r in range(self.n_rows):
            a = self.activity(r, x)
            if a < self.row_lo[r] or a > self.row_hi[r]:
                out.append(f"row {r} activity {a} outside [{self.row_lo[r]}, {self.row_hi[r]}]")
        return out

    def is_feasible(self, x: Sequence[Number]) -> bool:
        for j, v in enumerate(x):
            if v < self.col_lo[j] or v > self.col_hi[j]:
                return False
        for r in range(self.n_rows):
            a = self.activity(r, x)
            if a < self.row_lo[r] or a > self.row_hi[r]:
                return False
        return True


@dataclass
class LPResult:
    x: list  # exact
    objective: Number
    certified: bool  # exact optimality certificate available
    engine: str


# ---------------------------------------------------------------------------
# exact simplex


def solve_exact(lp: LinearProgram) -> LPResult:
    """Two-phase dense simplex with Bland's rule over Fractions."""
    n = lp.n_cols
    for j in range(n):
        if lp.col_lo[j] == -INF:
            raise ValueError("exact simplex needs finite lower bounds")
    # x = lo + x', x' >= 0.  Collect equality rows over x' plus slacks.
    eq_rows: list[tuple[dict[int, Fraction], Fraction]] = []
    n_var = n

    def shifted(row: dict[int, Number]) -> Number:
        return sum((a * lp.col_lo[j] for j, a in row.items()), 0)

    for j in range(n):
        if lp.col_hi[j] != INF:
            eq_rows.append(({j: Fraction(1), n_var: Fraction(1)}, Fraction(lp.col_hi[j] - lp.col_lo[j])))
            n_var += 1
    for r, row in enumerate(lp.rows):
        base = shifted(row)
        lo, hi = lp.row_lo[r], lp.row_hi[r]
        coeffs = {j: Fraction(a) for j, a in row.items()}
        if lo == hi:
            eq_rows.append((coeffs, Fraction(lo - base)))
            continue
        if hi != INF:
            c2 = dict(coeffs)
            c2[n_var] = Fraction(1)
            eq_rows.append((c2, Fraction(hi - base)))
            n_var += 1
        if lo != -INF:
            c2 = dict(coeffs)
            c2[n_var] = Fraction(-1)
            eq_rows.append((c2, Fraction(lo - base)))
            n_var += 1
    m = len(eq_rows)
    width = n_var + m + 1  # + artificials + rhs
    T = [[Fraction(0)] * width for _ in range(m)]
    for r, (coeffs, b) in enumerate(eq_rows):
        sign = -1 if b < 0 else 1
        for j, a in coeffs.items():
            T[r][j] = sign * a
        T[r][n_var + r] = Fraction(1)
        T[r][-1] = sign * b
    basis = [n_var + r for r in range(m)]

    def pivot(r: int, c: int) -> None:
        pr = T[r]
        inv = 1 / pr[c]
        T[r] = pr = [v * inv for v in pr]
        for rr in range(m):
            if rr != r:
                f = T[rr][c]
                if f:
                    row = T[rr]
                    T[rr] = [a - f * b for a, b in zip(row, pr)]
        basis[r] = c

    def run(cost: list[Fraction], allowed: int) -> None:
        while True:
            # reduced costs: cost_j - sum_r cost_basis[r] * T[r][j]
            cb = [cost[b] for b in basis]
            in_basis = set(basis)
            enter = -1
            for j in range(allowed):
                if j in in_basis:
                    continue
                rc = cost[j] - sum((cb[r] * T[r][j] for r in range(m) if T[r][j]), Fraction(0))
                if rc < 0:
                    enter = j
                    break
            if enter < 0:
                return
            leave, best = -1, None
            for r in range(m):
                a = T[r][enter]
                if a > 0:
                    ratio = T[r][-1] / a
                    if best is None or ratio < best or (ratio == best and basis[r] < basis[leave]):
                        leave, best = r, ratio
            if leave < 0:
                raise UnboundedError("LP is unbounded")
            pivot(leave, enter)

    # phase 1
    c1 = [Fraction(0)] * n_var + [Fraction(1)] * m
    run(c1, n_var + m)
    if sum((T[r][-1] for r in range(m) if basis[r] >= n_var), Fraction(0)) > 0:
        raise InfeasibleError("LP is infeasible")
    # drive artificials out of the basis
    for r in range(m):
        if basis[r] >= n_var:
            for j in range(n_var):
                if T[r][j] != 0:
                    pivot(r, j)
                    break
    keep = [r for r in range(m) if basis[r] < n_var]
    T[:] = [T[r] for r in keep]
    basis[:] = [basis[r] for r in keep]
    m = len(T)
    for r in range(m):
        T[r] = T[r][:n_var] + [T[r][-1]]
    c2 = [Fraction(lp.cost[j]) for j in range(n)] + [Fraction(0)] * (n_var - n)
    run(c2, n_var)
    xs = [Fraction(0)] * n_var
    for r, b in enumerate(basis):
        xs[b] = T[r][-1]
    x = [as_exact(lp.col_lo[j] + xs[j]) for j in range(n)]
    return LPResult(x, lp.objective(x), True, "exact-simplex")


# ---------------------------------------------------------------------------
# HiGHS session


def _f(x) -> float:
    if x == INF:
        return highspy.kHighsInf
    if x == -INF:
        return -highspy.kHighsInf
    return float(x)


class HighsSession:
    """A HiGHS model for one :class:`LinearProgram`; supports warm re-solves
    after cost or row-bound changes."""

    def __init__(self, lp: LinearProgram):
        self.lp = lp
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("primal_feasibility_tolerance", 1e-10)
        h.setOptionValue("dual_feasibility_tolerance", 1e-10)
        h.setOptionValue("random_seed", 0)
        h.setOptionValue("threads", 1)
        model = highspy.HighsLp()
        model.num_col_ = lp.n_cols
        model.num_row_ = lp.n_rows
        model.col_cost_ = np.array([float(c) for c in lp.cost], dtype=np.float64)
        model.col_lower_ = np.array([_f(v) for v in lp.col_lo], dtype=np.float64)
        model.col_upper_ = np.array([_f(v) for v in lp.col_hi], dtype=np.float64)
        model.row_lower_ = np.array([_f(v) for v in lp.row_lo], dtype=np.float64)
        model.row_upper_ = np.array([_f(v) for v in lp.row_hi], dtype=np.float64)
        cols: list[list[tuple[int, float]]] = [[] for _ in range(lp.n_cols)]
        for r, row in enumerate(lp.rows):
            for j, a in row.items():
                cols[j].append((r, float(a)))
        start, index, value = [0], [], []
        for col in cols:
            for r, a in col:
                index.append(r)
                value.append(a)
            start.append(len(index))
        model.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        model.a_matrix_.start_ = np.array(start, dtype=np.int32)
        model.a_matrix_.index_ = np.array(index, dtype=np.int32)
        model.a_matrix_.value_ = np.array(value, dtype=np.float64)
        h.passModel(model)
        self.h = h

    def set_costs(self, cost: Sequence[Number]) -> None:
        self.lp.cost = [as_exact(c) for c in cost]
        idx = np.arange(len(cost), dtype=np.int32)
        self.h.changeColsCost(len(cost), idx, np.array([float(c) for c in cost], dtype=np.float64))

    def set_row_bounds(self, r: int, lo, hi) -> None:
        self.lp.row_lo[r] = lo if lo == -INF else as_exact(lo)
        self.lp.row_hi[r] = hi if hi == INF else as_exact(hi)
        self.h.changeRowBounds(r, _f(lo), _f(hi))

    def run_float(self) -> tuple[str, float | None]:
        """Solve in floats; returns (status, objective)."""
        self.h.run()
        st = self.h.getModelStatus()
        if st == highspy.HighsModelStatus.kOptimal:
            return "optimal", self.h.getInfo().objective_function_value
        if st == highspy.HighsModelStatus.kInfeasible:
            return "infeasible", None
        if st in (highspy.HighsModelStatus.kUnbounded, highspy.HighsModelStatus.kUnboundedOrInfeasible):
            return "unbounded", None
        return str(st), None

    def float_solution(self):
        sol = self.h.getSolution()
        return list(sol.col_value), list(sol.row_dual), list(sol.col_dual)

    def exact_result(self) -> LPResult | None:
        """Rationalize the current optimal point; None if it fails exact checks."""
        xf, yf, _ = self.float_solution()
        x = rationalize(self.lp, xf)
        if x is not None:
            cert = certify_optimal(self.lp, x, yf)
            if cert:
                return LPResult(x, self.lp.objective(x), cert, "highs")
        basis = self.h.getBasis()
        got = basis_point(self.lp, list(basis.col_status), list(basis.row_status))
        if got is not None:
            xb, yb = got
            if self.lp.is_feasible(xb):
                return LPResult(xb, self.lp.objective(xb), _check_duals(self.lp, xb, yb), "highs-basis")
        if x is not None:
            return LPResult(x, self.lp.objective(x), False, "highs")
        return None


def _solve_square(rows: list[dict[int, Fraction]], rhs: list[Fraction], n: int) -> list[Fraction] | None:
    """Gaussian elimination over Fractions; None if singular."""
    rows = [dict(r) for r in rows]
    rhs = list(rhs)
    where = {}
    for col in range(n):
        piv = next((r for r in range(len(rows)) if r not in where.values() and rows[r].get(col)), None)
        if piv is None:
            return None
        where[col] = piv
        a = rows[piv][col]
        for r in range(len(rows)):
            f = rows[r].get(col)
            if r == piv or not f:
                continue
            f = f / a
            for j, v in rows[piv].items():
                nv = rows[r].get(j, 0) - f * v
                if nv:
                    rows[r][j] = nv
                else:
                    rows[r].pop(j, None)
            rhs[r] -= f * rhs[piv]
    return [rhs[where[col]] / rows[where[col]][col] for col in range(n)]


def basis_point(lp: LinearProgram, col_status, row_status):
    """Exact primal point and row duals of a HiGHS basis, or None."""
    B = highspy.HighsBasisStatus
    x: list = [Fraction(0)] * lp.n_cols
    basic = []
    for j, st in enumerate(col_status):
        if st == B.kBasic:
            basic.append(j)
        elif st in (B.kUpper, B.kLower):
            b = lp.col_hi[j] if st == B.kUpper else lp.col_lo[j]
            if b in (INF, -INF):
                return None
            x[j] = Fraction(b)
    tight = [r for r, st in enumerate(row_status) if st != B.kBasic]
    if len(tight) != len(basic):
        return None
    pos = {j: q for q, j in enumerate(basic)}
    eqs, rhs = [], []
    for r in tight:
        bound = lp.row_hi[r] if row_status[r] == B.kUpper else lp.row_lo[r]
        if bound in (INF, -INF):
            bound = lp.row_hi[r] if bound == -INF else lp.row_lo[r]
        if bound in (INF, -INF):
            return None
        row = lp.rows[r]
        eqs.append({pos[j]: Fraction(a) for j, a in row.items() if j in pos and a})
        rhs.append(Fraction(bound) - sum(Fraction(a) * x[j] for j, a in row.items() if j not in pos))
    xb = _solve_square(eqs, rhs, len(basic))
    if xb is None:
        return None
    for j, v in zip(basic, xb):
        x[j] = v
    # duals: reduced cost zero on basic columns, y = 0 on basic rows
    tpos = {r: q for q, r in enumerate(tight)}
    deqs = [dict() for _ in basic]
    for r in tight:
        for j, a in lp.rows[r].items():
            if j in pos and a:
                deqs[pos[j]][tpos[r]] = Fraction(a)
    yt = _solve_square(deqs, [Fraction(lp.cost[j]) for j in basic], len(tight))
    y = [Fraction(0)] * lp.n_rows
    if yt is not None:
        for r, v in zip(tight, yt):
            y[r] = v
    return [as_exact(v) for v in x], y


def _snap(v: float, lo, hi, den: int) -> Fraction:
    for b in (lo, hi):
        if b not in (INF, -INF) and abs(v - float(b)) <= 1e-9 * max(1.0, abs(float(b))):
            return Fraction(b)
    if abs(v) <= 1e-12:
        return Fraction(0)
    return Fraction(v).limit_denominator(den)


def rationalize(lp: LinearProgram, xf: Sequence[float]) -> list | None:
    """Nearby rational point that satisfies every constraint exactly, or None."""
    for den in (10**4, 10**6, 10**8):
        x = [as_exact(_snap(v, lp.col_lo[j], lp.col_hi[j], den)) for j, v in enumerate(xf)]
        if lp.is_feasible(x):
            return x
    return None


def certify_optimal(lp: LinearProgram, x: Sequence[Number], row_dual: Sequence[float]) -> bool:
    """Exact complementary-slackness check with rationalized row duals."""
    for den in (10**4, 10**6):
        y = [Fraction(0) if abs(v) <= 1e-11 else Fraction(v).limit_denominator(den) for v in row_dual]
        if _check_duals(lp, x, y):
            return True
    return False


def _check_duals(lp: LinearProgram, x, y) -> bool:
    n = lp.n_cols
    red = [Fraction(c) for c in lp.cost]
    for r, row in enumerate(lp.rows):
        yr = y[r]
        if not yr:
            continue
        act = lp.activity(r, x)
        if yr > 0 and act != lp.row_lo[r]:
            return False
        if yr < 0 and act != lp.row_hi[r]:
            return False
        for j, a in row.items():
            red[j] -= yr * a
    for j in range(n):
        if red[j] > 0 and x[j] != lp.col_lo[j]:
            return False
        if red[j] < 0 and x[j] != lp.col_hi[j]:
            return False
    return True


def solve(lp: LinearProgram, *, exact_fallback: bool = True) -> LPResult:
    """Optimal exact point; raises InfeasibleError / UnboundedError."""
    sess = HighsSession(lp)
    status, _ = sess.run_float()
    if status == "infeasible":
        raise InfeasibleError("LP is infeasible")
    if status == "unbounded":
        raise UnboundedError("LP is unbounded")
    res = sess.exact_result() if status == "optimal" else None
    if res is not None:
        return res
    if not exact_fallback:
        raise RuntimeError(f"HiGHS status {status}; rational reconstruction failed")
    return solve_exact(lp)
