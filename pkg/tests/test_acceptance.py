"""Acceptance suite: one PASS/FAIL line per criterion, at the stated tolerances."""
import io
import itertools
import json
import time
from fractions import Fraction

import numpy as np

from oracles import (
    brute_largest_bisimulation, dup_mdp, lambek_case, lifted_mdp, random_coalgebra, random_subobject, random_qobject,
)
from urlkit.async_engine import async_value_iteration, make_schedule, verify_act_conditions
from urlkit.cli import main
from urlkit.coalgebra import lambek_check, largest_bisimulation, quotient_coalgebra
from urlkit.learn import ParamFn, affine, functoriality_check, sigmoid, tanh, total_error, BackpropConfig
from urlkit.mdp import (
    chain_mdp, check_mdp_homomorphism, enumerate_mdp_homomorphisms, minimize_mdp, mdp_to_json,
    optimal_value_invariance, random_mdp,
)
from urlkit.metric import (
    GenMetricSpace, check_gms, interval_space, metric_coinduct, prefix_space, random_closed_table,
    yoneda_isometry_check, INF,
)
from urlkit.partition import Partition
from urlkit.rl import q_learning
from urlkit.solvers import bellman_optimal_backup, lp_solve, policy_iteration, q_from_v, value_iteration
from urlkit.topos import SizeGuard, check_classifier, exponential_q, small_test_objects, verify_exponential
from urlkit.udm import (
    check_causal, check_solvable, deadlock_pair, meet_fields, quotient_info_field, sequential_chain,
)


def test_01_solver_agreement(verdict):
    rng = np.random.default_rng(2024)
    worst, start = 0.0, time.perf_counter()
    for k in range(50):
        n, m = int(rng.integers(2, 21)), int(rng.integers(1, 5))
        M = random_mdp(n, m, float(rng.uniform(0.5, 0.95)), seed=k, density=float(rng.uniform(0.3, 1.0)))
        vi, pi, lp = value_iteration(M, tol=1e-9).values, policy_iteration(M).values, lp_solve(M)
        worst = max(worst, *(float(np.max(np.abs(x - y))) for x, y in ((vi, pi), (vi, lp), (pi, lp))))
    elapsed = time.perf_counter() - start
    ok = verdict(1, "VI, PI and LP agree on 50 random MDPs", worst <= 1e-6 and elapsed < 5.0,
                 f"max gap {worst:.2e}, {elapsed:.2f} s")
    assert ok


def test_02_async_convergence(verdict):
    failures, boxes = [], []
    for k, (p, D, seed) in enumerate(itertools.product((0.2, 0.5), (0, 3, 10), range(3))):
        M = random_mdp(10, 3, 0.9, seed=100 + k)
        V = value_iteration(M, tol=1e-13).values
        x, tr = async_value_iteration(M, make_schedule(10, 60_000, p, D, seed), tol=1e-10)
        rep = verify_act_conditions(tr, V, M.gamma, lambda v: bellman_optimal_backup(M, v))
        err = float(np.max(np.abs(x - V)))
        boxes.append(rep.final_box)
        if err > 1e-6 or rep.violations or not rep.grows or np.any(np.diff(rep.box_index) < 0):
            failures.append((p, D, seed, err, len(rep.violations), rep.final_box))
    # one component never updates
    M = random_mdp(10, 3, 0.9, seed=7)
    p = np.full(10, 0.5)
    p[4] = 0.0
    x, tr = async_value_iteration(M, make_schedule(10, 20_000, p, 3, 0), tol=1e-10)
    starved = verify_act_conditions(tr, value_iteration(M, tol=1e-13).values, M.gamma)
    stall_ok = starved.stalled and not tr.converged and 4 in starved.starved
    ok = verdict(2, "asynchronous Bellman iteration converges under bounded staleness; starvation stalls",
                 not failures and stall_ok, f"18 runs, boxes {min(boxes):.0f}-{max(boxes):.0f}, "
                 f"starved run stuck at box {starved.final_box:.0f}")
    assert ok, failures


def test_03_q_learning(verdict):
    worst = {}
    for n in (2, 3, 4, 5):
        M = chain_mdp(n, gamma=0.5, actions=2)
        Qs = q_from_v(M, value_iteration(M, tol=1e-13).values)
        errs = [float(np.max(np.abs(np.where(M.admissible, q_learning(M, steps=100_000, rate="1/(1+k)", seed=s).Q
                                             - Qs, 0.0)))) for s in range(5)]
        worst[n] = float(np.mean(errs))
    ok = verdict(3, "Q-learning on chains reaches Q* within 1e-2 after 1e5 steps", max(worst.values()) <= 1e-2,
                 ", ".join(f"{n} states {e:.1e}" for n, e in worst.items()))
    assert ok


def test_04_bisimulation_minimality(verdict):
    bad = []
    for k in range(100):
        kind = ("D", "P(A x _)", "(_ + 1)^A")[k % 3]
        A = random_coalgebra(kind, 2 + k % 5, seed=k)
        part = largest_bisimulation(A)
        if part != brute_largest_bisimulation(A):
            bad.append((kind, k, "not largest"))
            continue
        Q, _ = quotient_coalgebra(A, part)
        if not largest_bisimulation(Q).is_discrete():
            bad.append((kind, k, "quotient not minimal"))
    ok = verdict(4, "largest bisimulation matches exhaustive search; quotients are minimal", not bad,
                 f"100 systems, {len(bad)} mismatches")
    assert ok, bad


def test_05_mdp_hom_soundness(verdict):
    checked, bad, worst = 0, [], 0.0
    models = [dup_mdp()] + [lifted_mdp(s) for s in range(12)]
    for M in models:
        Q, _, _ = minimize_mdp(M)
        for target in (Q, M):
            if target is M and M.n_states > 5:
                continue
            for h in enumerate_mdp_homomorphisms(M, target):
                checked += 1
                gap = optimal_value_invariance(M, target, h).gap
                worst = max(worst, gap)
                if not check_mdp_homomorphism(M, target, h).ok or gap > 1e-6:
                    bad.append((M.states, h))
    ok = verdict(5, "every enumerated MDP homomorphism is valid and preserves V*", not bad and checked > 20,
                 f"{checked} homomorphisms, worst gap {worst:.1e}")
    assert ok


def test_06_yoneda_isometry(verdict):
    gaps = 0
    for seed in range(100):
        X = random_closed_table(2 + seed % 7, seed, symmetric=seed % 4 == 0)
        assert check_gms(X).ok
        gaps += len(yoneda_isometry_check(X).gaps)
    divides = GenMetricSpace.from_preorder([1, 2, 3, 4, 6, 12], lambda a, b: b % a == 0)
    prefix = prefix_space(["", "a", "b", "ab", "aab", "ba", "abb"])
    interval = interval_space([0, 1, Fraction(5, 2), 7, INF])
    named = [yoneda_isometry_check(S) for S in (divides, prefix, interval)]
    gaps += sum(len(r.gaps) for r in named)
    ok = verdict(6, "metric Yoneda embedding is an exact isometry", gaps == 0 and all(r.ok for r in named),
                 f"100 random tables + preorder, prefix and interval spaces, {gaps} gaps")
    assert ok


def test_07_metric_coinduction(verdict):
    bad = []
    for seed in range(20):
        M = random_mdp(6, 3, 0.85, seed=seed)
        cap = float(M.R.max()) / (1 - M.gamma)
        inside = lambda v: bool(np.all(v >= 0.0) and np.all(v <= cap))
        V0 = np.random.default_rng(seed).uniform(0.0, cap, M.n_states)
        res = metric_coinduct(lambda v: bellman_optimal_backup(M, v), V0, inside, tol=1e-12)
        err = float(np.max(np.abs(res.x_star - value_iteration(M, tol=1e-13).values)))
        if not res.phi_holds or err > 1e-6:
            bad.append((seed, res.phi_holds, err))
    ok = verdict(7, "Bellman iterates stay in the value box and converge to V*", not bad, "20 MDPs")
    assert ok, bad


def test_08_topos(verdict):
    cls_bad = [s for s in range(50) if not check_classifier(*random_subobject(s)).ok]
    exp_bad, exp_count = [], 0
    for seed in range(12):
        f = random_qobject(1 + seed % 3, 1 + seed % 2, seed)
        g = random_qobject(1 + (seed // 3) % 3, 1 + seed % 3, seed + 50, "y")
        exp = exponential_q(f, g)
        exp_count += 1
        if not verify_exponential(f, g, exp, small_test_objects()).ok:
            exp_bad.append(seed)
    guard_hit = False
    try:
        exponential_q(random_qobject(7, 1, 0), random_qobject(1, 1, 1))
    except SizeGuard:
        guard_hit = True
    lam_bad = [s for s in range(50) if lambek_check(lambek_case(s)[0]) != lambek_case(s)[1]]
    n_bij = sum(lambek_case(s)[1] for s in range(50))
    ok = verdict(8, "classifier pullbacks, exponential transposes and the Lambek check",
                 not cls_bad and not exp_bad and guard_hit and not lam_bad,
                 f"50 classifier instances, {exp_count} exponentials, Lambek suite {n_bij}/50 bijective")
    assert ok, (cls_bad, exp_bad, lam_bad)


def test_09_learn_functoriality(verdict):
    kinds = {"affine": ParamFn((affine(3, 3),)), "tanh": ParamFn((tanh(3),)), "sigmoid": ParamFn((sigmoid(3),))}
    worst = 0.0
    for k, (f, g) in enumerate(itertools.product(kinds.values(), repeat=2)):
        rep = functoriality_check(f, g, samples=100, seed=k)
        worst = max(worst, rep.max_implement, rep.max_update, rep.max_request)
    cfg = BackpropConfig()
    fd_worst = 0.0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        n_in, hidden, n_out = (int(x) for x in rng.integers(1, 9, 3))
        f = ParamFn((affine(n_in, hidden), (tanh, sigmoid)[seed % 2](hidden), affine(hidden, n_out)))
        p, a, b = rng.normal(size=f.p_dim), rng.normal(size=n_in), rng.normal(size=n_out)
        gp, ga = f.vjp(p, a, cfg.d_error(f(p, a), b))
        h = 1e-5
        fd_p = np.array([(total_error(f, cfg, p + h * e, a, b) - total_error(f, cfg, p - h * e, a, b)) / (2 * h)
                         for e in np.eye(f.p_dim)])
        fd_a = np.array([(total_error(f, cfg, p, a + h * e, b) - total_error(f, cfg, p, a - h * e, b)) / (2 * h)
                         for e in np.eye(n_in)])
        for g_, fd in ((gp, fd_p), (ga, fd_a)):
            fd_worst = max(fd_worst, float(np.max(np.abs(g_ - fd)) / max(1.0, float(np.max(np.abs(g_))))))
    ok = verdict(9, "backprop is functorial and its gradients match finite differences",
                 worst <= 1e-9 and fd_worst <= 1e-6, f"functor gap {worst:.1e}, finite-difference gap {fd_worst:.1e}")
    assert ok


def test_10_udm(verdict):
    dl = deadlock_pair()
    deadlock_ok = not check_solvable(dl).solvable and not check_causal(dl).causal
    chain_ok = True
    for n_agents, n_omega in itertools.product((1, 2, 3), (1, 2)):
        obj = sequential_chain(n_agents, 2, n_omega)
        if not (check_causal(obj).causal and check_solvable(obj).solvable):
            chain_ok = False
    rng = np.random.default_rng(10)
    laws_ok = True
    for _ in range(50):
        P, Q, R = (Partition.from_labels(range(8), lambda k, lab=rng.integers(0, 3, 8): int(lab[k])) for _ in range(3))
        j = lambda *fs: quotient_info_field(list(fs))
        laws_ok &= j(P, Q) == j(Q, P) and j(j(P, Q), R) == j(P, j(Q, R)) and j(P, P) == P
        # absorption, and the join refines both arguments
        laws_ok &= j(P, meet_fields(P, Q)) == P and j(P, Q).refines(P) and j(P, Q).refines(Q)
    ok = verdict(10, "deadlock is unsolvable and non-causal; chains are causal and solvable; join laws",
                 deadlock_ok and chain_ok and bool(laws_ok), "chains up to 3 agents, 50 partition triples")
    assert ok


def _run(argv):
    code = main([str(a) for a in argv], stdout=io.StringIO())
    assert code == 0, argv


def test_11_determinism(verdict, tmp_path):
    mdp = tmp_path / "m.json"
    mdp.write_text(json.dumps(mdp_to_json(random_mdp(5, 2, 0.8, seed=3))))
    net = tmp_path / "net.json"
    net.write_text(json.dumps({"layers": [{"type": "affine", "in": 2, "out": 3}, {"type": "tanh", "n": 3},
                                          {"type": "affine", "in": 3, "out": 1}]}))
    data = tmp_path / "d.csv"
    data.write_text("".join(f"{x},{y},{float(np.sin(x + y))!r}\n" for x, y in np.random.default_rng(0).uniform(-1, 1, (8, 2))))
    sched = '{"p":0.3,"D":5,"seed":7,"horizon":20000}'
    pipelines = {
        "async-bellman": ["async", "--mdp", mdp, "--schedule", sched],
        "async-q": ["async", "--mdp", mdp, "--method", "q", "--schedule", sched],
        "async-td": ["async", "--mdp", mdp, "--method", "td", "--schedule", sched],
        "q-learning": ["rl", "--mdp", mdp, "--algo", "q", "--steps", 20_000, "--seed", 4],
        "td0": ["rl", "--mdp", mdp, "--algo", "td", "--steps", 20_000, "--seed", 4],
        "learn": ["learn", "train", "--net", net, "--data", data, "--steps", 500, "--seed", 2],
        "solve": ["solve", "--mdp", mdp],
    }
    differ = []
    for name, argv in pipelines.items():
        a, b = tmp_path / f"{name}-1.csv", tmp_path / f"{name}-2.csv"
        _run(argv + ["--trace", a])
        _run(argv + ["--trace", b])
        if a.read_bytes() != b.read_bytes() or len(a.read_bytes()) == 0:
            differ.append(name)
    s1, s2 = make_schedule(6, 5000, 0.4, 6, 11), make_schedule(6, 5000, 0.4, 6, 11)
    if s1.updates.tobytes() != s2.updates.tobytes() or s1.delays.tobytes() != s2.delays.tobytes():
        differ.append("schedule")
    ok = verdict(11, "seeded pipelines write byte-identical traces", not differ,
                 f"{len(pipelines)} CLI pipelines + schedule generator")
    assert ok, differ
