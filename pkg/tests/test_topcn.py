import math
from collections import Counter
from fractions import Fraction

import pytest

from normclust.metric import ball, generate_instance, instance_from_fc
from normclust.norms import NormSpec, eval_norm, top_l
from normclust.occurrence import OccurrenceVector, dominates, occ_from_vector, occ_oplus, occ_times2, occ_top_l
from normclust.oracle import exact_solve
from normclust.rng import derive_rng
from normclust.solution import cost_vector
from normclust.topcn import (
    InfeasibleGuess,
    PivotGuess,
    TopCNConfig,
    choose_R,
    classify_clusters_testonly,
    core,
    delta_prime,
    gamma,
    round_open_set,
    round_pivot_lp,
    run_topcn,
    solve_pivot_lp,
    top_cn_norm,
)

EPS = Fraction(1, 5)
INV_E = math.exp(-1)


def _inst(seed, nf=5, nc=6, k=2, kind="euclidean"):
    return generate_instance(kind, {"n_facilities": nf, "n_clients": nc, "k": k}, seed=seed)


def test_choose_R_single_positive_client():
    inst = instance_from_fc([[0, 0, 4], [0, 0, 5]], k=2)
    R = choose_R([0], inst, 3, derive_rng(0, "R"))
    assert R == {2}


def test_choose_R_all_zero():
    inst = instance_from_fc([[0, 0]], k=1)
    assert choose_R([0], inst, 1, derive_rng(0, "R")) == frozenset()


def test_choose_R_uniform_frequencies():
    inst = instance_from_fc([[3, 3, 3, 3]], k=1)
    rng = derive_rng(1, "Ru")
    trials = 10_000
    counts = Counter()
    for _ in range(trials):
        (j,) = choose_R([0], inst, 1, rng)
        counts[j] += 1
    p = 0.25
    sigma = math.sqrt(p * (1 - p) / trials)
    for j in range(4):
        assert abs(counts[j] / trials - p) <= 4 * sigma


def _planted():
    # two tight groups far apart; S is one facility near the first group
    fc = [
        [0, 1, 1, 30, 31, 31],
        [30, 31, 31, 0, 1, 1],
        [1, 2, 2, 29, 30, 30],
    ]
    return instance_from_fc(fc, k=2)


def test_cores_hit_rate_beats_bound():
    inst = _planted()
    opt = exact_solve(inst, top_cn_norm(inst, 1))
    clusters = [(f, [j for j, g in enumerate(opt.opt_assignment) if g == f]) for f in opt.opt_open_set]
    S = [2]
    eps = Fraction(1, 2)
    k = 2
    types = classify_clusters_testonly(inst, clusters, S, eps, k)
    t1 = [core(inst, f, J, eps) for (f, J), ty in zip(clusters, types) if ty == 1]
    assert t1, "planted instance should have a type-1 cluster"
    rng = derive_rng(2, "hit")
    trials = 4000
    hits = sum(all(set(Jc) & choose_R(S, inst, k, rng) for Jc in t1) for _ in range(trials))
    bound = float(eps) ** (3 * k) / k**k
    assert hits / trials >= bound


def test_classify_examples():
    inst = _planted()
    eps = Fraction(1, 2)
    clusters = [(0, [0, 1, 2]), (1, [3, 4, 5])]
    # S next to cluster 0 with zero-cost core: type 3; cluster 1 is far from S: type 1
    assert classify_clusters_testonly(inst, clusters, [0, 2], eps, 2)[0] == 3
    assert classify_clusters_testonly(inst, clusters, [2], eps, 2)[1] == 1
    assert core(inst, 0, [0, 1, 2], eps) == (0, 1)


def test_d_to_R_union_S_bound_when_cores_hit():
    inst = _planted()
    eps = Fraction(1, 2)
    clusters = [(0, [0, 1, 2]), (1, [3, 4, 5])]
    S = [2]
    types = classify_clusters_testonly(inst, clusters, S, eps, 2)
    rng = derive_rng(3, "dR")
    for _ in range(200):
        R = choose_R(S, inst, 2, rng)
        for (f, J), ty in zip(clusters, types):
            if ty == 3 or not set(core(inst, f, J, eps)) & R:
                continue
            dbar = Fraction(sum(inst.d(f, j) for j in J), len(J))
            pts = list(S) + [inst.client_point(j) for j in R]
            assert min(inst.dp(f, p) for p in pts) <= dbar / (1 - eps)


def test_zero_radius_singletons_force_integral_lp():
    inst = instance_from_fc([[1, 4, 6], [5, 2, 3]], k=2)
    g = PivotGuess((0, 1), (0, 0))
    sol = solve_pivot_lp(g, inst, 1, EPS)
    assert sol.y == {(0, 0): 1, (1, 1): 1}
    assert sol.delta == occ_from_vector([1, 2, 3])
    assert sol.value == 6


def test_c1_value_is_fractional_l1():
    for seed in range(5):
        inst = _inst(seed)
        g = PivotGuess((0, 1), (4, 4))
        try:
            sol = solve_pivot_lp(g, inst, 1, EPS)
        except InfeasibleGuess:
            continue
        # the best t for c = 1 is 0 since the mass is n
        assert sol.value == sum(a * m for a, m in sol.delta.pairs)


def test_desired_pivots_bound_by_oracle():
    for seed in range(8):
        inst = _inst(seed)
        for c in (1, Fraction(1, 2)):
            opt = exact_solve(inst, top_cn_norm(inst, c))
            P = tuple(opt.opt_open_set)
            sol = solve_pivot_lp(PivotGuess(P, (0,) * len(P)), inst, c, EPS)
            assert sol.value <= opt.opt_value


def test_empty_ball_is_infeasible_guess():
    inst = instance_from_fc([[2, 3]], k=1)
    with pytest.raises(InfeasibleGuess):
        solve_pivot_lp(PivotGuess((1,), (1,)), inst, 1, EPS)


def _fractional_solution(seed):
    inst = _inst(seed, nf=5, nc=5, k=2)
    pts = [inst.client_point(0), inst.client_point(3)]
    radii = []
    for p in pts:
        ds = sorted(inst.dp(p, i) for i in inst.facilities)
        radii.append(ds[2])
    sol = solve_pivot_lp(PivotGuess(tuple(pts), tuple(radii)), inst, 1, EPS)
    return inst, sol


@pytest.mark.parametrize("seed", range(10))
def test_lp_invariants_and_delta_prime_domination(seed):
    inst, sol = _fractional_solution(seed)
    n = inst.n_clients
    assert sol.delta.total_mass == n
    for pos, B in enumerate(sol.balls):
        assert sum(sol.y[(pos, i)] for i in B) == 1
        assert set(B) == set(ball(inst, inst.facilities, sol.guess.P[pos], sol.guess.radii[pos]))
    for j in range(n):
        assert sum(v for (p, i, jj), v in sol.x.items() if jj == j) == 1
    for (pos, i, j), v in sol.x.items():
        assert v <= sol.y[(pos, i)]
    g = gamma(EPS)
    for pos, B in enumerate(sol.balls):
        for i in B:
            col = [(j, v) for (p, f, j), v in sol.x.items() if p == pos and f == i]
            assert g * sum(inst.d(i, j) * v for j, v in col) >= sol.guess.radii[pos] * sum(v for _, v in col)
    assert dominates(delta_prime(sol), sol.delta, g)


def test_integral_y_rounds_deterministically():
    inst = instance_from_fc([[1, 4, 6], [5, 2, 3]], k=2)
    sol = solve_pivot_lp(PivotGuess((0, 1), (0, 0)), inst, 1, EPS)
    outs = {round_open_set(sol, derive_rng(s, "r")) for s in range(20)}
    assert outs == {(0, 1)}


def test_opening_frequencies_match_y():
    for seed in range(10):
        inst, sol = _fractional_solution(seed)
        if all(v in (0, 1) for v in sol.y.values()):
            continue
        rng = derive_rng(seed, "freq")
        trials = 10_000
        counts = Counter()
        for _ in range(trials):
            # one draw per ball, recorded per position
            for pos, B in enumerate(sol.balls):
                sub = type(sol)(sol.guess, (B,), {(0, i): sol.y[(pos, i)] for i in B}, {}, sol.delta, sol.value, sol.t, sol.c)
                (i,) = round_open_set(sub, rng)
                counts[(pos, i)] += 1
        for key, y in sol.y.items():
            p = float(y)
            sigma = math.sqrt(p * (1 - p) / trials)
            assert abs(counts[key] / trials - p) <= 4 * sigma + 1e-12
        return
    pytest.fail("no fractional pivot program found")


@pytest.mark.parametrize("seed", range(4))
def test_expected_rounding_cost_and_psi_domination(seed):
    inst, sol = _fractional_solution(seed)
    n = inst.n_clients
    c = 1
    g = gamma(EPS)
    rng = derive_rng(seed, "mc")
    trials = 2000
    vecs = [cost_vector(inst, round_pivot_lp(sol, inst, rng).assignment) for _ in range(trials)]
    costs = [float(top_l(v, c * n)) for v in vecs]
    mean = sum(costs) / trials
    sd = math.sqrt(sum((x - mean) ** 2 for x in costs) / (trials - 1))
    bound = (1 + 2 * float(g) / (math.e * c)) * float(occ_top_l(sol.delta, c * n))
    assert mean <= bound + 4 * sd / math.sqrt(trials)
    psi_sum: dict = {}
    for v in vecs:
        for a, m in occ_from_vector(v).pairs:
            psi_sum[a] = psi_sum.get(a, 0) + Fraction(m, trials)
    e_psi = OccurrenceVector(psi_sum)
    inv_e = Fraction(INV_E).limit_denominator(10**9)
    target = sol.delta.scale(1 - inv_e) + occ_oplus(sol.delta, occ_times2(delta_prime(sol))).scale(inv_e)
    for ell in [Fraction(q, 4) * n for q in range(1, 5)]:
        # concavity transfer holds exactly on the empirical law
        assert occ_top_l(e_psi, ell) >= sum(Fraction(top_l(v, ell)) for v in vecs) / trials
        # bound on E[psi], with sampling slack
        assert float(occ_top_l(e_psi, ell)) <= 1.05 * float(occ_top_l(target, ell)) + 1e-9


def test_run_topcn_ratios_small_sweep():
    limits = {1: 1 + 2 / math.e + 0.3, Fraction(1, 2): 1 + 4 / math.e + 0.3}
    for seed in range(6):
        inst = _inst(seed, nf=5, nc=5, k=2)
        for c, lim in limits.items():
            sol = run_topcn(inst, c, EPS, seed)
            opt = exact_solve(inst, top_cn_norm(inst, c)).opt_value
            assert sol.meta["route"] == "pivots"
            assert sol.value == eval_norm(top_cn_norm(inst, c), cost_vector(inst, sol.assignment))
            assert len(sol.open) <= inst.k
            if opt:
                assert float(sol.value / opt) <= lim


def test_small_c_routes_to_three_approx():
    for seed in range(5):
        inst = _inst(seed, nf=4, nc=5, k=2)
        sol = run_topcn(inst, Fraction(1, 4), EPS, seed)
        assert sol.meta["route"] == "seed3"
        opt = exact_solve(inst, top_cn_norm(inst, Fraction(1, 4))).opt_value
        if opt:
            assert float(sol.value / opt) <= 3.3


def test_run_topcn_deterministic():
    inst = _inst(11)
    a = run_topcn(inst, Fraction(3, 4), EPS, 5)
    b = run_topcn(inst, Fraction(3, 4), EPS, 5)
    assert (a.open, a.assignment, a.value) == (b.open, b.assignment, b.value)


def test_run_topcn_rejects_capacities():
    inst = generate_instance("euclidean", {"n_facilities": 3, "n_clients": 4, "capacity": 2}, seed=0)
    with pytest.raises(ValueError):
        run_topcn(inst, 1, EPS, 0, config=TopCNConfig())


def test_top_cn_norm_is_topl():
    inst = _inst(0)
    assert top_cn_norm(inst, Fraction(1, 2)) == NormSpec.topl(3)
