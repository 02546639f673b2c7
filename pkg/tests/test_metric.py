import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from urlkit.mdp import random_mdp
from urlkit.metric import (
    INF, GenMetricSpace, check_gms, contraction_estimate, copresheaf_distance, finite_pairs, hausdorff_nonsym,
    hausdorff_space, hom_interval, interval_space, is_nonexpansive, metric_coinduct, prefix_metric, prefix_space,
    random_closed_table, space_from_json, space_to_json, yoneda_embed, yoneda_isometry_check,
)
from urlkit.solvers import bellman_optimal_backup, value_iteration

GRID = [Fraction(k, 2) for k in range(21)] + [INF]


def line(points=(0, 1, 2)):
    return GenMetricSpace.from_function(list(points), lambda a, b: abs(a - b))


def test_hom_interval_examples():
    assert hom_interval(3, 5) == 2 and hom_interval(5, 3) == 0
    assert hom_interval(INF, 7) == 0 and hom_interval(7, INF) == INF and hom_interval(INF, INF) == 0


def test_hom_interval_adjunction_grid():
    for t, s, r in itertools.product(GRID, repeat=3):
        lhs = (INF if INF in (t, s) else t + s) >= r
        assert lhs == (s >= hom_interval(t, r)), (t, s, r)


def test_prefix_examples():
    assert prefix_metric("ab", "abc") == 0
    assert prefix_metric("abc", "ab") == Fraction(1, 4)
    assert prefix_metric("x", "y") == 1


@given(st.lists(st.text(alphabet="ab", max_size=5), min_size=1, max_size=6, unique=True))
def test_prefix_metric_axioms(words):
    assert check_gms(prefix_space(words)).ok


def test_gms_examples():
    divides = GenMetricSpace.from_preorder([1, 2, 3, 4, 6, 12], lambda a, b: b % a == 0)
    assert check_gms(divides).ok
    bad = GenMetricSpace(["a", "b"], [[1, 0], [0, 0]])
    rep = check_gms(bad)
    assert not rep.ok and ("self", "a", 1) in rep.violations
    assert check_gms(random_closed_table(7, 3, symmetric=True)).ok
    broken = GenMetricSpace(["a", "b", "c"], [[0, 1, 5], [1, 0, 1], [5, 1, 0]])
    assert any(v[0] == "triangle" for v in check_gms(broken).violations)


def test_space_validation():
    with pytest.raises(ValueError):
        GenMetricSpace(["a"], [[0, 1]])
    with pytest.raises(ValueError):
        GenMetricSpace(["a", "b"], [[0, -1], [0, 0]])
    with pytest.raises(ValueError):
        GenMetricSpace(["a", "a"], [[0, 0], [0, 0]])


def test_hausdorff_examples():
    X = line()
    assert hausdorff_nonsym(X, {0, 1}, {0, 1}) == 0
    assert hausdorff_nonsym(X, {0}, {2}) == 2
    assert hausdorff_nonsym(X, {0, 2}, {1}) == 1
    with pytest.raises(ValueError):
        hausdorff_nonsym(X, set(), {1})


def test_hausdorff_monotone_and_metric():
    X = random_closed_table(5, 8)
    subsets = [set(c) for k in (1, 2, 3) for c in itertools.combinations(X.points, k)]
    for V in subsets:
        for W in subsets:
            for W2 in subsets:
                if W <= W2:
                    assert hausdorff_nonsym(X, V, W) >= hausdorff_nonsym(X, V, W2)
    assert check_gms(hausdorff_space(X, subsets)).ok


def test_contraction_bellman():
    M = random_mdp(4, 2, 0.5, seed=0)
    rng = np.random.default_rng(1)
    vecs = [rng.uniform(0, 2, 4) for _ in range(40)]
    est = contraction_estimate(lambda v: bellman_optimal_backup(M, v), list(itertools.combinations(vecs, 2)))
    assert est.n == 1 and est.c_hat <= 0.5


def test_contraction_rotation_not_detected():
    rot = lambda v: np.array([-v[1], v[0]])
    rng = np.random.default_rng(0)
    pairs = [(rng.normal(size=2), rng.normal(size=2)) for _ in range(20)]
    est = contraction_estimate(rot, pairs, n_max=6)
    assert not est.detected and all(abs(r - 1.0) < 1e-12 for r in est.ratios.values())


def test_contraction_needs_two_steps():
    swap_half = lambda v: (v[1], v[0] / 2)
    pts = [(a, b) for a in range(3) for b in range(3)]
    dist = lambda x, y: max(abs(x[0] - y[0]), abs(x[1] - y[1]))
    est = contraction_estimate(swap_half, list(itertools.combinations(pts, 2)), dist)
    assert est.n == 2 and est.ratios[1] == 1.0 and est.c_hat == 0.5


def test_contraction_on_finite_space():
    X = interval_space([0, 1, 2, 4])
    F = lambda p: p // 2
    est = contraction_estimate(F, finite_pairs(X), lambda a, b: max(X.dist(a, b), X.dist(b, a)))
    assert est.detected


def test_coinduct_halving():
    r = metric_coinduct(lambda x: 0.5 * x, 4.0, lambda x: x >= 0, lambda a, b: abs(a - b))
    assert r.phi_holds and abs(r.x_star) <= 1e-9


def test_coinduct_bellman_box():
    M = random_mdp(5, 2, 0.8, seed=3)
    cap = M.R.max() / (1 - M.gamma)
    inside = lambda v: bool(np.all(v >= -1e-12) and np.all(v <= cap + 1e-12))
    r = metric_coinduct(lambda v: bellman_optimal_backup(M, v), np.full(5, cap), inside, tol=1e-12)
    assert r.phi_holds and np.max(np.abs(r.x_star - value_iteration(M, tol=1e-13).values)) <= 1e-9


def test_coinduct_reports_witness():
    # the map dips below zero once before settling at 1
    F = lambda x: -1.0 if x == 5.0 else (1.0 if x == -1.0 else 0.5 * x + 0.5)
    r = metric_coinduct(F, 5.0, lambda x: x >= 0, lambda a, b: abs(a - b))
    assert not r.phi_holds and r.witness == -1.0


def test_coinduct_fixed_point_unique():
    M = random_mdp(4, 2, 0.7, seed=9)
    T = lambda v: bellman_optimal_backup(M, v)
    a = metric_coinduct(T, np.zeros(4), lambda v: True, tol=1e-10).x_star
    b = metric_coinduct(T, np.full(4, 50.0), lambda v: True, tol=1e-10).x_star
    assert np.max(np.abs(a - b)) <= 2e-10 / (1 - M.gamma)


def test_coinduct_cap():
    with pytest.raises(RuntimeError):
        metric_coinduct(lambda x: x + 1.0, 0.0, lambda x: True, lambda a, b: abs(a - b), max_iter=10)


def test_yoneda_examples():
    one = GenMetricSpace(["p"], [[0]])
    assert yoneda_embed(one) == [[0]]
    two = GenMetricSpace(["a", "b"], [[0, 1], [3, 0]])
    emb = yoneda_embed(two)
    assert emb[1] == [1, 0] and emb[0] == [0, 3]
    assert copresheaf_distance(emb[0], emb[1]) == 1
    assert yoneda_isometry_check(two).ok
    disc = GenMetricSpace.from_preorder(["x", "y", "z"], lambda a, b: a == b)
    assert yoneda_isometry_check(disc).ok


@pytest.mark.parametrize("seed", range(100))
def test_yoneda_random_tables(seed):
    X = random_closed_table(2 + seed % 6, seed, symmetric=seed % 3 == 0)
    assert check_gms(X).ok
    rep = yoneda_isometry_check(X)
    assert rep.ok and not rep.gaps
    assert all(is_nonexpansive(X, phi) for phi in yoneda_embed(X))


def test_yoneda_flags_non_metric_table():
    bad = GenMetricSpace(["a", "b", "c"], [[0, 1, 5], [1, 0, 1], [5, 1, 0]])
    assert not yoneda_isometry_check(bad).ok


def test_yoneda_interval_and_prefix():
    assert yoneda_isometry_check(interval_space([0, Fraction(1, 2), 3, INF])).ok
    assert yoneda_isometry_check(prefix_space(["", "a", "ab", "b", "ba", "abb"])).ok


def test_json_round_trip():
    X = GenMetricSpace(["a", "b"], [[0, Fraction(1, 3)], [INF, 0]])
    data = space_to_json(X)
    assert data == {"points": ["a", "b"], "d": [[0, "1/3"], ["inf", 0]]}
    Y = space_from_json(data)
    assert Y.d == X.d
    assert space_from_json({"points": ["a"], "d": [[0.0]]}).d == [[0]]
    with pytest.raises(ValueError):
        space_from_json({"points": ["a"], "d": [[None]]})
    assert math.isinf(space_from_json({"points": ["a", "b"], "d": [[0, "Infinity"], [0, 0]]}).d[0][1])
