import math
from fractions import Fraction

import pytest

from normclust.bicriteria import NoCertifiedSolution, constrained_oracle, run_bicriteria, topcn_constrained_oracle
from normclust.metric import generate_instance, instance_from_fc
from normclust.norms import NormSpec, eval_norm
from normclust.oracle import exact_solve
from normclust.solution import check_assignment, cost_vector
from normclust.topcn import run_topcn, top_cn_norm

EPS = Fraction(1, 5)


def _inst(seed, nf=5, nc=6, k=2):
    return generate_instance("euclidean", {"n_facilities": nf, "n_clients": nc, "k": k}, seed=seed)


def _linf_opt(inst):
    return exact_solve(inst, NormSpec.linf()).opt_value


def test_vacuous_budget_matches_topcn_quality():
    for seed in range(6):
        inst = _inst(seed)
        L = inst.max_finite_distance
        res = run_bicriteria(inst, 1, EPS, seed, L=L)
        plain = run_topcn(inst, 1, EPS, seed)
        opt = exact_solve(inst, top_cn_norm(inst, 1)).opt_value
        assert res.certified
        # a larger seed set can only add candidates, so both stay in the same band
        for v in (res.topcn_value, plain.value):
            assert v >= opt
            if opt:
                assert float(v / opt) <= 1 + 2 / math.e + 0.3


@pytest.mark.parametrize("seed", range(10))
def test_budget_at_linf_optimum_is_certified(seed):
    inst = _inst(seed)
    L = _linf_opt(inst)
    res = run_bicriteria(inst, 1, EPS, seed, L=L)
    sol = res.solution
    assert check_assignment(inst, sol.open, sol.assignment) == []
    assert res.certified
    assert res.linf_value == max(cost_vector(inst, sol.assignment)) <= 3 * L
    assert res.topcn_value == eval_norm(top_cn_norm(inst, 1), cost_vector(inst, sol.assignment))
    want = topcn_constrained_oracle(inst, 1, L).opt_value
    if want:
        assert float(res.topcn_value / want) <= 1 + 2 / math.e + 0.3


def test_budget_below_any_solution_fails_explicitly():
    inst = instance_from_fc([[4, 5], [6, 4]], k=1)
    with pytest.raises(NoCertifiedSolution):
        run_bicriteria(inst, 1, EPS, 0, L=1)


def test_missing_budget_rejected():
    with pytest.raises(ValueError):
        run_bicriteria(_inst(0), 1, EPS, 0)


def test_small_c_uses_three_approx_route():
    inst = _inst(3)
    L = _linf_opt(inst)
    res = run_bicriteria(inst, Fraction(1, 4), EPS, 3, L=L)
    assert res.solution.meta["route"] == "seed3"
    assert res.certified


def test_constrained_oracle_cases():
    for seed in range(10):
        inst = _inst(seed, nf=4, nc=5)
        L = _linf_opt(inst)
        below = max(d for d in inst.distinct_fc_distances() if d < L) if L > min(inst.distinct_fc_distances()) else None
        if below is not None:
            assert not constrained_oracle(inst, below).feasible
        free = exact_solve(inst)
        assert constrained_oracle(inst, inst.max_finite_distance).opt_value == free.opt_value
        values = [constrained_oracle(inst, t).opt_value for t in inst.distinct_fc_distances() if t >= L]
        assert all(b <= a for a, b in zip(values, values[1:]))
