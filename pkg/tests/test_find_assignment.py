import itertools
import math
from fractions import Fraction

import pytest

from normclust.find_assignment import (
    EpsilonOutOfRange,
    classify_clients,
    classify_clients_bruteforce,
    count_grid,
    discretized_distances,
    guess_and_match,
    is_exclusive,
    is_laminar,
)
from normclust.metric import MetricSpace, Instance, generate_instance, instance_from_fc
from normclust.norms import NormSpec, comparable, eval_norm
from normclust.oracle import optimal_assignment
from normclust.solution import check_assignment, cost_vector

EPS = Fraction(1, 20)


def _points(coords, nf, k, capacities=None):
    # points on a line: facilities first, then clients
    n = len(coords)
    dist = [[abs(Fraction(coords[a]) - Fraction(coords[b])) for b in range(n)] for a in range(n)]
    nc = n - nf
    return Instance(MetricSpace(dist), nf, nc, k, tuple(capacities or [nc] * nf), NormSpec.l1(), None)


def test_far_client_is_exclusive_for_tight_pair():
    inst = _points([0, 1, 100], nf=2, k=2)
    st = classify_clients(inst, [0, 1], EPS)
    assert st.classes == {frozenset({0, 1}): (0,)}
    assert st.inclusive == ()


def test_equidistant_client_between_far_facilities_is_inclusive():
    inst = _points([0, 2, 1], nf=2, k=2)
    st = classify_clients(inst, [0, 1], EPS)
    assert st.inclusive == (0,)
    assert not st.classes
    assert not any(is_exclusive(inst, [0, 1], 0, frozenset(X), EPS) for X in ({0}, {1}, {0, 1}))


@pytest.mark.parametrize("eps", [Fraction(1, 10), Fraction(1, 4), 0, -1])
def test_eps_out_of_regime(eps):
    inst = _points([0, 1, 5], nf=2, k=2)
    with pytest.raises(EpsilonOutOfRange):
        classify_clients(inst, [0, 1], eps)


def _hierarchical(seed, k):
    # facilities in tight groups at several scales so exclusive classes actually appear
    import numpy as np

    rng = np.random.default_rng(seed)
    scales = [1, 40, 1600, 64000]
    fac = []
    for i in range(k):
        fac.append(sum(int(rng.integers(0, 2)) * s for s in scales[: int(rng.integers(1, 5))]))
    cli = [int(rng.integers(-70000, 130000)) for _ in range(8)]
    cli += [f + int(rng.integers(-3, 4)) for f in fac]
    return _points(fac + cli, nf=k, k=k)


@pytest.mark.parametrize("seed", range(40))
def test_classes_laminar_and_match_bruteforce(seed):
    k = 2 + seed % 3
    inst = _hierarchical(seed, k) if seed % 2 else generate_instance(
        "clustered", {"n_facilities": k, "n_clients": 10, "k": k, "centers": 2}, seed=seed
    )
    F = list(inst.facilities)
    st = classify_clients(inst, F, EPS)
    brute = classify_clients_bruteforce(inst, F, EPS)
    assert is_laminar(list(st.classes))
    seen = list(st.inclusive) + [c for cs in st.classes.values() for c in cs]
    assert sorted(seen) == list(inst.clients)
    for c, Xs in brute.items():
        # unique unless facilities coincide; ties resolve to the largest set
        if all(inst.dp(a, b) > 0 for a, b in itertools.combinations(F, 2)):
            assert len(Xs) <= 1
        assert st.class_of()[c] == (max(Xs, key=len) if Xs else None)
    for X, p in st.laminar_tree.items():
        assert p is None or X < p


def test_laminarity_sees_exclusive_classes():
    # sanity: the generator above produces nontrivial classes
    total = 0
    for seed in range(1, 40, 2):
        inst = _hierarchical(seed, 2 + seed % 3)
        total += len(classify_clients(inst, list(inst.facilities), EPS).classes)
    assert total > 10


def test_discretized_distances_trivial():
    inst = _points([0, 10, 3, 7], nf=2, k=2)
    assert discretized_distances(inst, 0, [], EPS) == []
    assert len(discretized_distances(inst, 0, [1], EPS)) == 1


@pytest.mark.parametrize("eps", [Fraction(1, 20), Fraction(9, 100)])
def test_discretized_distance_count_k3(eps):
    worst = 0
    for seed in range(30):
        inst = generate_instance("euclidean", {"n_facilities": 3, "n_clients": 12, "k": 3}, seed=seed)
        st = classify_clients(inst, [0, 1, 2], eps)
        for f in inst.facilities:
            vals = discretized_distances(inst, f, st.inclusive, eps)
            worst = max(worst, len(vals))
            # every value is a power of 1+eps covering a real distance
            for c in st.inclusive:
                d = inst.d(f, c)
                assert any(d <= v < d * (1 + eps) or v == d == 0 for v in vals)
    bound = 3 * math.ceil(math.log(4 / float(eps) ** 2) / math.log(1 + float(eps)))
    assert worst <= bound


def test_count_grid_covers_n():
    for n in range(1, 30):
        g = count_grid(n, Fraction(1, 4))
        assert g[0] == 0 and g[1] == 1 and g[-1] >= n
        assert all(b > a for a, b in zip(g, g[1:]))


def test_single_facility_forced():
    inst = generate_instance("random_metric", {"n_facilities": 3, "n_clients": 5, "k": 1}, seed=2)
    res = guess_and_match(inst, [1], Fraction(1, 4), norm=NormSpec.topl(2))
    assert res.assignment == (1,) * 5
    assert res.value == eval_norm(NormSpec.topl(2), [inst.d(1, j) for j in inst.clients])


def test_uncapacitated_pair_is_nearest():
    for seed in range(10):
        inst = generate_instance("euclidean", {"n_facilities": 4, "n_clients": 7, "k": 2}, seed=seed)
        res = guess_and_match(inst, [0, 3], Fraction(1, 4), norm=NormSpec.l1())
        assert res.value == sum(min(inst.d(0, j), inst.d(3, j)) for j in inst.clients)


def test_insufficient_capacity_returns_none():
    inst = instance_from_fc([[1, 2, 3], [2, 1, 1]], k=2, capacities=[1, 1])
    assert guess_and_match(inst, [0, 1], Fraction(1, 4)) is None


def test_capacitated_topl2_against_oracle_30_seeds():
    norm = NormSpec.topl(2)
    checked = 0
    for seed in range(30):
        k = 2 + seed % 2
        params = {"n_facilities": k, "n_clients": 8 + seed % 3, "k": k, "capacity": [2, 6]}
        inst = generate_instance("euclidean", params, seed=seed)
        F = list(inst.facilities)
        want = optimal_assignment(F, inst, norm)
        got = guess_and_match(inst, F, Fraction(1, 4), norm=norm)
        assert (got is None) == (want is None)
        if got is None:
            continue
        checked += 1
        assert check_assignment(inst, F, got.assignment) == []
        assert got.value == eval_norm(norm, cost_vector(inst, got.assignment))
        assert got.value >= want[1]
        assert got.value <= Fraction(19, 10) * want[1]
    assert checked >= 20


def test_other_norms_stay_above_optimum():
    for seed in range(8):
        inst = generate_instance("random_metric", {"n_facilities": 2, "n_clients": 7, "k": 2, "capacity": [3, 5]}, seed=seed)
        for norm in (NormSpec.linf(), NormSpec.ordered((3, 2, 1)), NormSpec.lp(2)):
            want = optimal_assignment([0, 1], inst, norm)
            got = guess_and_match(inst, [0, 1], Fraction(1, 4), norm=norm)
            if want is None:
                assert got is None
                continue
            assert check_assignment(inst, [0, 1], got.assignment) == []
            assert comparable(got.value) >= comparable(want[1])


def test_structure_reported_with_assignment():
    inst = generate_instance("clustered", {"n_facilities": 3, "n_clients": 9, "k": 3, "centers": 3}, seed=1)
    res = guess_and_match(inst, [0, 1, 2], Fraction(1, 4))
    assert res.tables_feasible >= 1 and res.tables_tried >= res.tables_feasible
    assert is_laminar(list(res.structure.classes))
    assert len(list(itertools.chain(res.structure.inclusive, *res.structure.classes.values()))) == 9
