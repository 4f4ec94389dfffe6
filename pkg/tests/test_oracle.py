import itertools
from fractions import Fraction

import pytest

from normclust.metric import INF, generate_instance, instance_from_fc
from normclust.norms import NormSpec, comparable, eval_norm
from normclust.oracle import (
    BudgetExceeded,
    OracleBudget,
    UnsupportedExact,
    exact_solve,
    feasibility,
    optimal_assignment,
)
from normclust.solution import check_assignment, cost_vector


def enumerate_all(inst, norm, open_sets=None):
    """Independent oracle: every k-subset, every assignment."""
    best = None
    sets = open_sets or itertools.combinations(inst.facilities, inst.k)
    for T in sets:
        for a in itertools.product(T, repeat=inst.n_clients):
            if any(a.count(i) > inst.capacities[i] for i in T):
                continue
            vec = [inst.d(i, j) for j, i in enumerate(a)]
            if any(x == INF for x in vec):
                continue
            v = eval_norm(norm, vec)
            if best is None or comparable(v) < comparable(best):
                best = v
    return best


def test_saturated_l1_is_nearest():
    inst = generate_instance("euclidean", {"n_facilities": 4, "n_clients": 6, "k": 4}, seed=3)
    res = exact_solve(inst, NormSpec.l1())
    nearest = sum(min(inst.d(i, j) for i in inst.facilities) for j in inst.clients)
    assert res.opt_value == nearest


def test_single_small_facility_infeasible():
    inst = instance_from_fc([[1, 2, 3]], k=1, capacities=[2])
    res = exact_solve(inst)
    assert not res.feasible and res.opt_value is None


@pytest.mark.parametrize("seed", range(4))
def test_topl3_matches_enumeration(seed):
    params = {"n_facilities": 6, "n_clients": 8, "k": 2, "capacity": [3, 6]}
    inst = generate_instance("random_metric", params, seed=seed)
    res = exact_solve(inst, NormSpec.topl(3))
    want = enumerate_all(inst, NormSpec.topl(3))
    assert res.feasible == (want is not None)
    if res.feasible:
        assert res.opt_value == want
        assert check_assignment(inst, res.opt_open_set, res.opt_assignment) == []
        assert eval_norm(NormSpec.topl(3), cost_vector(inst, res.opt_assignment)) == res.opt_value


def test_threshold_flow_matches_enumeration_200_seeds():
    norms = [NormSpec.topl(1), NormSpec.topl(2), NormSpec.topl(Fraction(5, 2)), NormSpec.l1(), NormSpec.linf()]
    for seed in range(200):
        params = {"n_facilities": 3, "n_clients": 5, "k": 2, "capacity": [1, 4]}
        inst = generate_instance("euclidean", params, seed=seed)
        norm = norms[seed % len(norms)]
        T = (0, 1, 2)
        got = optimal_assignment(T, inst, norm)
        want = enumerate_all(inst, norm, [T])
        assert (got is None) == (want is None)
        if got:
            assert got[1] == want


def test_linf_all_open_matches_threshold_enumeration():
    for seed in range(20):
        inst = generate_instance("random_metric", {"n_facilities": 3, "n_clients": 5, "capacity": [1, 3]}, seed=seed)
        T = tuple(inst.facilities)
        got = optimal_assignment(T, inst, NormSpec.linf())
        # smallest threshold admitting a feasible assignment
        values = sorted({inst.d(i, j) for i in T for j in inst.clients if inst.d(i, j) != INF})
        want = None
        for t in values:
            if feasibility(T, inst, linf_cap=t):
                want = t
                break
        assert (got is None) == (want is None)
        if got:
            assert got[1] == want


def test_top_n_is_l1_and_top_1_is_linf():
    for seed in range(20):
        inst = generate_instance("euclidean", {"n_facilities": 3, "n_clients": 6, "capacity": [2, 4]}, seed=seed)
        T = (0, 1, 2)
        n = inst.n_clients
        l1 = optimal_assignment(T, inst, NormSpec.l1())
        if l1 is None:
            continue
        assert optimal_assignment(T, inst, NormSpec.topl(n))[1] == l1[1]
        assert optimal_assignment(T, inst, NormSpec.topl(1))[1] == optimal_assignment(T, inst, NormSpec.linf())[1]


def test_ordered_and_lp_exact_small():
    inst = generate_instance("euclidean", {"n_facilities": 3, "n_clients": 5, "capacity": [2, 3]}, seed=11)
    for norm in (NormSpec.ordered((3, 2, 1)), NormSpec.lp(2)):
        got = optimal_assignment((0, 1, 2), inst, norm)
        want = enumerate_all(inst, norm, [(0, 1, 2)])
        if norm.kind == "lp":
            assert got[1].power_sum == want.power_sum
        else:
            assert got[1] == want


def test_ordered_large_reported_unsupported():
    inst = generate_instance("euclidean", {"n_facilities": 2, "n_clients": 11, "k": 2, "capacity": 6}, seed=0)
    with pytest.raises(UnsupportedExact):
        optimal_assignment((0, 1), inst, NormSpec.ordered((2, 1)))


def test_feasibility_cases():
    inst = instance_from_fc([[1, 2, 3], [1, 1, 1]], k=2, capacities=[1, 1])
    assert not feasibility((0, 1), inst)
    inst2 = instance_from_fc([[1, 2, 3], [1, 1, 1]], k=2, capacities=[2, 1])
    assert feasibility((0, 1), inst2)
    inst3 = instance_from_fc([[1, INF], [1, INF]], k=2)
    assert not feasibility((0, 1), inst3)


def test_topl_monotone_in_capacities():
    for seed in range(30):
        inst = generate_instance("euclidean", {"n_facilities": 3, "n_clients": 6, "capacity": [1, 3]}, seed=seed)
        T = (0, 1, 2)
        small = optimal_assignment(T, inst, NormSpec.topl(2))
        big = optimal_assignment(T, inst.with_capacity_all(6), NormSpec.topl(2))
        assert big is not None
        if small is not None:
            assert big[1] <= small[1]


def test_budget_enforced():
    inst = generate_instance("euclidean", {"n_facilities": 11, "n_clients": 4}, seed=0)
    with pytest.raises(BudgetExceeded):
        exact_solve(inst)
    exact_solve(inst, budget=OracleBudget(max_facilities=11))


def test_linf_cap_restricts_edges():
    inst = instance_from_fc([[1, 5], [4, 2]], k=1, norm=NormSpec.l1())
    assert exact_solve(inst).opt_value == 6
    assert exact_solve(inst, linf_cap=4).opt_open_set == (1,)
    assert not exact_solve(inst, linf_cap=3).feasible
