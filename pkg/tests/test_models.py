import numpy as np
import pytest

from oracles import brute_mdp_homs, dup_mdp
from urlkit.coalgebra import check_homomorphism, largest_bisimulation
from urlkit.mdp import (
    InconsistentPartition, Mdp, MdpHom, ValidationError, chain_mdp, check_mdp_homomorphism,
    coalgebra_to_mdp, enumerate_mdp_homomorphisms, mdp_from_json, mdp_to_coalgebra, mdp_to_json,
    minimize_mdp, optimal_value_invariance, quotient_mdp, random_mdp,
)
from urlkit.partition import Partition
from urlkit.psr import (
    Psr, check_psr_homomorphism, map_by_history, psr_from_json, psr_from_mdp, psr_from_pomdp, psr_predict,
    psr_to_json, reachable_predictions,
)


def test_validation():
    with pytest.raises(ValidationError):
        Mdp(("a",), ("x",), [[[0.5]]], [[0.0]], 0.5)
    with pytest.raises(ValidationError):
        Mdp(("a",), ("x",), [[[1.0]]], [[0.0]], 1.0)
    with pytest.raises(ValidationError):
        Mdp(("a",), ("x",), [[[1.0]]], [[np.inf]], 0.5)


def test_json_roundtrip_and_reward_forms():
    M = dup_mdp()
    M2 = mdp_from_json(mdp_to_json(M))
    assert M.same_as(M2)
    data = {"states": ["a", "b"], "actions": ["x"], "gamma": 0.5,
            "transitions": [{"s": "a", "a": "x", "s2": "a", "p": 0.5, "r": 2.0},
                            {"s": "a", "a": "x", "s2": "b", "p": 0.5, "r": 0.0},
                            {"s": "b", "a": "x", "s2": "b", "p": 1.0}]}
    assert mdp_from_json(data).R[0, 0] == 1.0


def test_coalgebra_embedding_roundtrip():
    M = random_mdp(5, 3, 0.8, seed=4)
    C = mdp_to_coalgebra(M)
    assert len(C) == 5
    assert coalgebra_to_mdp(C, M.gamma).same_as(M)
    assert check_homomorphism(C, C, {s: s for s in C.states}).ok


def test_minimize_merges_duplicate():
    M = dup_mdp()
    Q, h, part = minimize_mdp(M)
    assert Q.n_states == 3
    assert check_mdp_homomorphism(M, Q, h).ok
    assert optimal_value_invariance(M, Q, h).gap <= 1e-6


def test_hom_examples():
    M = dup_mdp()
    assert check_mdp_homomorphism(M, M, MdpHom.identity(M)).ok
    Q, h = quotient_mdp(M, [["s0"], ["s1", "s1b"], ["s2"]])
    rep = check_mdp_homomorphism(M, Q, h)
    assert rep.ssp_ok and rep.reward_ok
    # collapse states with different rewards
    with pytest.raises(InconsistentPartition) as exc:
        quotient_mdp(M, [["s0", "s1"], ["s1b"], ["s2"]])
    assert exc.value.witness[0] in ("reward", "ssp")
    bad = MdpHom((0, 1, 1, 1), MdpHom.identity(M).g)
    Qb = Mdp(("s0", "s1"), M.actions, np.array([[[0, 1], [1, 0]], [[0, 1], [0, 1]]], dtype=float),
             np.array([[0, 0], [1, 0]], dtype=float), 0.9)
    rep = check_mdp_homomorphism(M, Qb, bad)
    assert not rep.ok and rep.witness is not None


def test_quotient_discrete_is_identity():
    M = random_mdp(4, 2, 0.7, seed=1)
    Q, h = quotient_mdp(M, Partition.discrete(range(4)))
    assert Q.same_as(M)


def test_non_surjective_hom_rejected():
    M = dup_mdp()
    with pytest.raises(ValueError):
        check_mdp_homomorphism(M, M, MdpHom((0, 0, 0, 0), MdpHom.identity(M).g))


@pytest.mark.parametrize("seed", range(5))
def test_enumeration_matches_brute_force(seed):
    M = dup_mdp() if seed == 0 else random_mdp(3, 2, 0.6, seed=seed)
    Q, _, _ = minimize_mdp(M)
    homs = enumerate_mdp_homomorphisms(M, Q)
    brute = brute_mdp_homs(M, Q)
    got = sorted((h.f, tuple(tuple(b for b in row if b >= 0) for row in h.g)) for h in homs)
    assert got == sorted(brute)
    for h in homs:
        assert check_mdp_homomorphism(M, Q, h).ok
        assert optimal_value_invariance(M, Q, h).gap <= 1e-6


def test_enumeration_examples():
    M = dup_mdp()
    assert MdpHom.identity(M) in enumerate_mdp_homomorphisms(M, M)
    Q, h, _ = minimize_mdp(M)
    assert h in enumerate_mdp_homomorphisms(M, Q)
    other = chain_mdp(2, gamma=0.9, actions=2)
    assert enumerate_mdp_homomorphisms(other, Q) == []


def test_enumeration_guard():
    M = random_mdp(9, 3, 0.5, seed=0)
    with pytest.raises(ValueError):
        enumerate_mdp_homomorphisms(M, M)


def test_broken_hom_reports_gap():
    M = chain_mdp(3, gamma=0.5)
    swap = MdpHom((1, 0, 2), MdpHom.identity(M).g)
    inv = optimal_value_invariance(M, M, swap)
    assert not inv.ok and inv.gap > 1e-6


def test_embedding_agrees_with_mdp_check():
    M = dup_mdp()
    C = mdp_to_coalgebra(M)
    part = largest_bisimulation(C)
    Q, h, _ = minimize_mdp(M)
    assert len(part) == Q.n_states
    assert check_mdp_homomorphism(M, Q, h).ok


# ------------------------------------------------------------------ PSR

def test_predict_dot_products():
    P1 = Psr(("a",), ("o",), [(("a", "o"),)], [1.0], m={(("a", "o"),): [1.0]})
    assert psr_predict(P1, "a/o") == 1.0
    P2 = Psr(("a",), ("o", "p"), [(("a", "o"),), (("a", "p"),)], [0.5, 0.5], m={(("a", "o"),): [1.0, 0.0]})
    assert psr_predict(P2, "a/o") == 0.5


def test_predict_from_deterministic_pomdp():
    # two hidden states that swap under the single action and emit their name on arrival
    T = [np.array([[0.0, 1.0], [1.0, 0.0]])]
    O = [np.eye(2)]
    P = psr_from_pomdp(T, O, [1.0, 0.0], ("a",), ("x", "y"))
    assert abs(psr_predict(P, "a/y") - 1.0) <= 1e-9
    assert abs(psr_predict(P, "a/y a/x") - 1.0) <= 1e-9
    assert abs(psr_predict(P, "a/x")) <= 1e-9


def test_predictions_in_unit_interval():
    M = random_mdp(4, 2, 0.9, seed=7, density=0.6)
    P = psr_from_mdp(M, 0)
    R = reachable_predictions(P, depth=3)
    for psi in R.vectors:
        for a in P.actions:
            for o in P.observations:
                p = float(psi @ P.projection(((a, o),)))
                assert -1e-9 <= p <= 1 + 1e-9


def test_psr_hom_identity_and_quotient():
    M = dup_mdp()
    P = psr_from_mdp(M, "s0")
    n = len(reachable_predictions(P).vectors)
    ident = {i: i for i in range(n)}
    v = {i: {a: a for a in P.actions} for i in range(n)}
    assert check_psr_homomorphism(P, P, ident, v).ok
    Q, h, _ = minimize_mdp(M)
    P2 = psr_from_mdp(Q, "s0")
    obs = {M.states[s]: Q.states[h.f[s]] for s in range(M.n_states)}
    f = map_by_history(P, P2, obs)
    assert check_psr_homomorphism(P, P2, f, v).ok
    scrambled = {i: {"go": "wait", "wait": "go"} for i in range(n)}
    rep = check_psr_homomorphism(P, P, ident, scrambled)
    assert not rep.ok and rep.witness is not None


def test_psr_json_roundtrip():
    P = psr_from_mdp(chain_mdp(3, actions=2, slip=0.2), 0)
    P2 = psr_from_json(psr_to_json(P))
    for t in ("a0/s1", "a1/s0 a0/s1", "a0/s2"):
        assert abs(psr_predict(P, t) - psr_predict(P2, t)) <= 1e-12
