"""Independent brute-force references used by the tests.

Nothing here calls the code paths under test for the quantity being checked;
each oracle recomputes it by enumeration or by a plain-Python loop.
"""
import itertools
import random

import numpy as np

from urlkit.coalgebra import FiniteCoalgebra, check_bisimulation
from urlkit.mdp import Mdp
from urlkit.functor import FSet, Fun, Inl, Inr, Lab, Pair, Pt, make_dist, parse_functor
from urlkit.partition import all_partitions


def brute_largest_bisimulation(A):
    """Coarsest equivalence whose pair set passes the relation-lifting check."""
    best = None
    for part in all_partitions(list(A.states)):
        pairs = [(x, y) for b in part.blocks for x in b for y in b]
        if check_bisimulation(A, A, pairs):
            if best is None or len(part) < len(best):
                best = part
    return best


def random_coalgebra(kind, n, seed):
    """Small systems with deliberate behavioural duplicates.

    ``kind`` is one of ``"D"``, ``"P(A x _)"`` or ``"(_ + 1)^A"``.
    """
    rng = random.Random(seed)
    labels = {"A": ["a", "b"]}
    F = parse_functor(kind, labels)
    states = [f"s{i}" for i in range(n)]
    alpha = {}
    n_proto = max(1, n // 2)
    for i, s in enumerate(states):
        if i >= n_proto and rng.random() < 0.6:
            # relabel a prototype through a random map of its targets onto equivalent states
            alpha[s] = alpha[states[rng.randrange(n_proto)]]
            continue
        if kind == "D":
            k = rng.randint(1, min(3, n))
            support = rng.sample(states, k)
            weights = [rng.choice([1, 2, 3]) for _ in support]
            tot = sum(weights)
            alpha[s] = make_dist((Pt(t), w / tot) for t, w in zip(support, weights))
        elif kind == "P(A x _)":
            items = set()
            for _ in range(rng.randint(0, 3)):
                items.add(Pair(Lab(rng.choice("ab")), Pt(rng.choice(states))))
            alpha[s] = FSet(frozenset(items))
        else:
            vals = []
            for lab in ("a", "b"):
                vals.append((lab, Inr(Lab("*")) if rng.random() < 0.3 else Inl(Pt(rng.choice(states)))))
            alpha[s] = Fun(tuple(vals))
    return FiniteCoalgebra(tuple(states), F, alpha)


def bellman_reference(P, R, adm, gamma, sweeps=4000):
    """Value iteration in plain Python floats, run far past convergence."""
    n, m = len(R), len(R[0])
    V = [0.0] * n
    for _ in range(sweeps):
        V = [max(R[s][a] + gamma * sum(P[s][a][t] * V[t] for t in range(n)) for a in range(m) if adm[s][a])
             for s in range(n)]
    return V


def brute_mdp_homs(M, M2, tol=1e-9):
    """Every (f, g) with surjective f and per-state surjective g satisfying both conditions."""
    import numpy as np

    out = []
    n, n2 = M.n_states, M2.n_states
    for f in itertools.product(range(n2), repeat=n):
        if set(f) != set(range(n2)):
            continue
        per_state = []
        for s in range(n):
            acts = M.admissible_actions(s)
            targets = M2.admissible_actions(f[s])
            per_state.append([g for g in itertools.product(targets, repeat=len(acts)) if set(g) == set(targets)])
        for choice in itertools.product(*per_state):
            ok = True
            for s in range(n):
                for a, b in zip(M.admissible_actions(s), choice[s]):
                    if abs(M.R[s, a] - M2.R[f[s], b]) > tol:
                        ok = False
                        break
                    mass = np.zeros(n2)
                    for t in range(n):
                        mass[f[t]] += M.P[s, a, t]
                    if np.max(np.abs(mass - M2.P[f[s], b])) > tol:
                        ok = False
                        break
                if not ok:
                    break
            if ok:
                out.append((f, choice))
    return out


def random_qobject(n_in, n_out, seed, prefix="x"):
    from urlkit.topos import QObject
    rng = np.random.default_rng(seed)
    ins = [f"{prefix}{k}" for k in range(n_in)]
    outs = [f"o{k}" for k in range(n_out)]
    return QObject.build(ins, outs, {x: outs[int(rng.integers(n_out))] for x in ins})


def random_subobject(seed):
    """A parent value function with a random sub-value-function included by inclusions."""
    from urlkit.topos import FinFn, QObject
    rng = np.random.default_rng(seed)
    parent = random_qobject(int(rng.integers(1, 5)), int(rng.integers(1, 4)), seed + 1000)
    J = [o for o in parent.outputs if rng.random() < 0.6]
    I = [x for x in parent.inputs if parent(x) in J and rng.random() < 0.6]
    sub = QObject.build(I, J, {x: parent(x) for x in I})
    return sub, parent, FinFn(I, parent.inputs, I), FinFn(J, parent.outputs, J)


def brute_arrow_count(f, g):
    """Commuting pairs (h, k) counted over all pairs of functions."""
    count = 0
    for hs in itertools.product(g.inputs, repeat=len(f.inputs)):
        for ks in itertools.product(g.outputs, repeat=len(f.outputs)):
            h, k = dict(zip(f.inputs, hs)), dict(zip(f.outputs, ks))
            if all(g(h[x]) == k[f(x)] for x in f.inputs):
                count += 1
    return count


def dup_mdp():
    """s0 splits evenly between two copies of the same state, which both pay 1 into s2."""
    S = ("s0", "s1", "s1b", "s2")
    P = np.zeros((4, 2, 4))
    R = np.zeros((4, 2))
    P[0, 0, 1] = P[0, 0, 2] = 0.5
    P[0, 1, 0] = 1.0
    for s in (1, 2):
        P[s, 0, 3] = 1.0
        P[s, 1, s] = 1.0
        R[s, 0] = 1.0
    P[3, :, 3] = 1.0
    return Mdp(S, ("go", "wait"), P, R, 0.9)


LAMBEK_KINDS = ("_", "A", "A x _", "_ + 1", "P(_)", "_^A")


def _listed_universe(kind, states, labels):
    """``F(X)`` written out by hand for each functor in the suite."""
    pts = [Pt(s) for s in states]
    if kind == "_":
        return pts
    if kind == "A":
        return [Lab(a) for a in labels]
    if kind == "A x _":
        return [Pair(Lab(a), p) for a in labels for p in pts]
    if kind == "_ + 1":
        return [Inl(p) for p in pts] + [Inr(Lab("*"))]
    if kind == "P(_)":
        return [FSet(frozenset(c)) for k in range(len(pts) + 1) for c in itertools.combinations(pts, k)]
    return [Fun(tuple(zip(labels, combo))) for combo in itertools.product(pts, repeat=len(labels))]


def lambek_case(seed):
    """A small coalgebra and whether its structure map is a bijection onto ``F(X)``."""
    rng = random.Random(seed)
    kind = LAMBEK_KINDS[seed % len(LAMBEK_KINDS)]
    n = rng.randint(1, 4)
    n_labels = {"A": rng.choice([n, n + 1]), "A x _": rng.choice([1, 2]), "_^A": rng.choice([1, 2])}.get(kind, 1)
    labels = [f"l{k}" for k in range(n_labels)]
    F = parse_functor(kind, {"A": labels})
    states = [f"x{k}" for k in range(n)]
    universe = _listed_universe(kind, states, labels)
    if len(universe) >= n and rng.random() < 0.6:
        images = rng.sample(universe, n)
    else:
        images = [rng.choice(universe) for _ in states]
    expected = len(universe) == n and len(set(images)) == n
    return FiniteCoalgebra(tuple(states), F, dict(zip(states, images))), expected


def lifted_mdp(seed, n_base=3, n_actions=2):
    """Random MDP whose states are copied 1-2 times, spreading incoming mass evenly over copies."""
    rng = np.random.default_rng(seed)
    P = rng.random((n_base, n_actions, n_base)) * (rng.random((n_base, n_actions, n_base)) < 0.7)
    P[P.sum(axis=2) == 0, 0] = 1.0
    P /= P.sum(axis=2, keepdims=True)
    R = np.round(rng.random((n_base, n_actions)), 2)
    copies = [int(c) for c in rng.integers(1, 3, n_base)]
    states = [(s, i) for s in range(n_base) for i in range(copies[s])]
    PM = np.zeros((len(states), n_actions, len(states)))
    for u, (s, _) in enumerate(states):
        for v, (t, _) in enumerate(states):
            PM[u, :, v] = P[s, :, t] / copies[t]
    RM = np.array([R[s] for s, _ in states])
    return Mdp(tuple(f"s{s}_{i}" for s, i in states), tuple(f"a{j}" for j in range(n_actions)), PM, RM, 0.9)
