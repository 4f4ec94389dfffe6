"""Top-cn clustering under an L-infinity budget L, allowing a 3L violation.

The facility seed set is extended with stars of the budget program: edges
longer than L are removed, the threshold program is solved at t = L and its
stars all use edges of length at most L, so every client is within L of that
set.  Pivot radii are capped at L and only rounded solutions with
L-infinity cost at most 3L are kept.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from normclust.lp_seed import CoverageFailure, pseudo_approx, solve_cp
from normclust.metric import Instance
from normclust.norms import NormSpec, as_exact, rat_str
from normclust.oracle import ExactResult, OracleBudget, exact_solve
from normclust.rng import derive_rng
from normclust.solution import Solution
from normclust.topcn import TopCNConfig, run_topcn, top_cn_norm


class NoCertifiedSolution(Exception):
    pass


@dataclass
class BiCriteriaResult:
    solution: Solution
    L: object
    linf_value: object
    topcn_value: object

    @property
    def linf_ratio(self):
        return Fraction(as_exact(self.linf_value)) / as_exact(self.L) if self.L else None

    @property
    def certified(self) -> bool:
        return self.linf_value <= 3 * as_exact(self.L)


def linf_seed_facilities(inst: Instance, L, eps, rng) -> tuple[int, ...]:
    """Facilities of stars sampled from the budget program (edges > L removed)."""
    allowed = inst.fc_finite & (inst.fc_int <= as_exact(L) * inst.scale)
    frac = solve_cp(inst, L, allowed=allowed)
    stars, _ = pseudo_approx(inst, frac, eps, rng)
    return stars.facilities


def run_bicriteria(inst: Instance, c, eps=None, seed: int = 0, *, L=None, config: TopCNConfig | None = None) -> BiCriteriaResult:
    L = inst.linf_budget if L is None else L
    if L is None:
        raise ValueError("an L-infinity budget is required")
    L = as_exact(L)
    cfg = config or TopCNConfig()
    eps = as_exact(cfg.eps if eps is None else eps)
    limit = 3 * L
    try:
        extra = linf_seed_facilities(inst, L, eps, derive_rng(seed, "bicriteria", "linf-seed"))
    except Exception as exc:  # infeasible budget program or uncovered stars
        raise NoCertifiedSolution(f"no facility set serves every client within L: {exc}") from exc

    def accept(T, vec) -> bool:
        return max(vec) <= limit

    try:
        sol = run_topcn(inst, c, eps, seed, config=cfg, extra_facilities=extra, radius_cap=L, accept=accept, label="bicriteria")
    except CoverageFailure as exc:
        raise NoCertifiedSolution(str(exc)) from exc
    if sol.value is None:
        raise NoCertifiedSolution("no rounded solution met the 3L budget")
    linf = max(inst.d(i, j) for j, i in enumerate(sol.assignment))
    sol.meta.update({"L": rat_str(L), "linf_seed": list(extra), "linf_value": rat_str(linf)})
    return BiCriteriaResult(sol, L, linf, sol.value)


def constrained_oracle(inst: Instance, L, norm: NormSpec | None = None, budget: OracleBudget | None = None) -> ExactResult:
    """Exact optimum using only edges of length at most L."""
    return exact_solve(inst, norm or inst.norm, linf_cap=as_exact(L), budget=budget)


def topcn_constrained_oracle(inst: Instance, c, L, budget: OracleBudget | None = None) -> ExactResult:
    return constrained_oracle(inst, L, top_cn_norm(inst, c), budget)
