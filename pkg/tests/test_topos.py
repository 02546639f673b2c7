import itertools
from fractions import Fraction

import pytest

from oracles import brute_arrow_count, random_qobject, random_subobject
from urlkit.topos import (
    HALF, OMEGA, TRUE, CommuteError, FinFn, FinPullback, NotMonic, QObject, SizeGuard, all_arrows, check_classifier,
    classify_subobject, coequalizer, exponential_q, identity_arrow, make_qarrow, pullback_finset, pullback_q,
    qobject_from_json, small_test_objects, verify_exponential, verify_pullback_finset, verify_pullback_q,
)


def reference_instance():
    parent = QObject.build(["x1", "x2", "x3"], ["o1", "o2"], {"x1": "o1", "x2": "o1", "x3": "o2"})
    sub = QObject.build(["x1"], ["o1"], {"x1": "o1"})
    return sub, parent, FinFn(["x1"], parent.inputs, ["x1"]), FinFn(["o1"], parent.outputs, ["o1"])


def test_finfn_validation():
    with pytest.raises(ValueError):
        FinFn([1, 2], [0], [0])
    with pytest.raises(ValueError):
        FinFn([1], [0], [5])
    f = FinFn([1, 2], ["a", "b"], ["a", "a"])
    assert f.image() == {"a"} and not f.is_injective()
    assert f.then(FinFn(["a", "b"], [0], [0, 0])).table == (0, 0)


def test_qarrow_examples():
    f = QObject.build(["p", "q"], ["lo", "hi"], {"p": "lo", "q": "lo"})
    g = QObject.build(["r"], ["lo", "hi"], {"r": "lo"})
    identity_arrow(f)
    a = make_qarrow(f, g, FinFn(f.inputs, g.inputs, ["r", "r"]), FinFn.identity(f.outputs))
    assert a.h.table == ("r", "r")
    swap = FinFn(["lo", "hi"], ["lo", "hi"], ["hi", "lo"])
    with pytest.raises(CommuteError) as exc:
        make_qarrow(f, f, FinFn.identity(f.inputs), swap)
    assert exc.value.witness == "p"


def test_qarrow_composition_is_checked():
    objs = [random_qobject(2, 2, s) for s in range(4)]
    for f, g, h in itertools.product(objs, repeat=3):
        for a in all_arrows(f, g)[:5]:
            for b in all_arrows(g, h)[:5]:
                c = a.then(b)
                assert all(h(c.h(x)) == c.k(f(x)) for x in f.inputs)


def test_pullback_finset_examples():
    X = FinFn.identity([1, 2, 3])
    pb = pullback_finset(X, X)
    assert pb.apex == ((1, 1), (2, 2), (3, 3))
    const_a = FinFn([1, 2], ["z"], ["z", "z"])
    const_b = FinFn(["u", "v", "w"], ["z"], ["z"] * 3)
    assert len(pullback_finset(const_a, const_b).apex) == 6


@pytest.mark.parametrize("seed", range(10))
def test_pullback_finset_random(seed):
    f = FinFn([0, 1, 2], ["o0", "o1", "o2"], random_qobject(3, 3, seed).f.table)
    g = FinFn(["u", "v", "w"], ["o0", "o1", "o2"], random_qobject(3, 3, seed + 50).f.table)
    pb = pullback_finset(f, g)
    brute = {(x, y) for x, y in itertools.product(f.domain, g.domain) if f(x) == g(y)}
    assert set(pb.apex) == brute
    assert verify_pullback_finset(f, g, pb, max_apex=3).ok


def test_pullback_finset_detects_wrong_apex():
    # a duplicated apex point gives two mediating maps for some cones
    f = FinFn([0, 1], ["a"], ["a", "a"])
    pairs = ((0, 0), (0, 0), (0, 1), (1, 0), (1, 1))
    apex = tuple(range(len(pairs)))
    cand = FinPullback(apex, FinFn(apex, f.domain, [p[0] for p in pairs]), FinFn(apex, f.domain, [p[1] for p in pairs]))
    assert not verify_pullback_finset(f, f, cand, max_apex=1).ok


def test_coequalizer():
    f = FinFn([0, 1], ["a", "b", "c", "d"], ["a", "b"])
    g = FinFn([0, 1], ["a", "b", "c", "d"], ["b", "c"])
    blocks, q = coequalizer(f, g)
    assert sorted(map(sorted, blocks)) == [["a", "b", "c"], ["d"]]
    assert all(q(f(x)) == q(g(x)) for x in f.domain)


def test_pullback_q_identity():
    f = random_qobject(3, 2, 4)
    pb = pullback_q(identity_arrow(f), identity_arrow(f))
    assert len(pb.apex.inputs) == 3 and len(pb.apex.outputs) == 2
    assert pb.p1.h.is_injective() and pb.p1.h.image() == set(f.inputs)


def test_pullback_q_along_inclusion_is_preimage():
    sub, parent, i, j = reference_instance()
    inc = make_qarrow(sub, parent, i, j)
    other = QObject.build(["y1", "y2"], ["o1", "o2"], {"y1": "o1", "y2": "o2"})
    a2 = make_qarrow(other, parent, FinFn(other.inputs, parent.inputs, ["x1", "x3"]), FinFn.identity(other.outputs))
    pb = pullback_q(inc, a2)
    assert {p[1] for p in pb.apex.inputs} == {"y1"}
    assert {p[1] for p in pb.apex.outputs} == {"o1"}


@pytest.mark.parametrize("seed", range(5))
def test_pullback_q_universal(seed):
    g = random_qobject(2, 2, seed)
    f1, f2 = random_qobject(2, 2, seed + 10, "y"), random_qobject(2, 1, seed + 20, "z")
    arrows1, arrows2 = all_arrows(f1, g), all_arrows(f2, g)
    if not arrows1 or not arrows2:
        pytest.skip("no arrows into the shared target")
    a1, a2 = arrows1[seed % len(arrows1)], arrows2[seed % len(arrows2)]
    pb = pullback_q(a1, a2)
    rep = verify_pullback_q(a1, a2, pb, small_test_objects())
    assert rep.ok and rep.cones > 0


def test_classifier_examples():
    sub, parent, i, j = reference_instance()
    psi = classify_subobject(sub, parent, i, j)
    assert psi.table == (1, HALF, 0)
    f = random_qobject(3, 2, 0)
    assert set(classify_subobject(f, f, FinFn.identity(f.inputs), FinFn.identity(f.outputs)).table) == {1}
    empty = QObject.build([], [], {})
    psi = classify_subobject(empty, f, FinFn([], f.inputs, []), FinFn([], f.outputs, []))
    assert 1 not in psi.table and set(psi.table) == {0}


def test_classifier_rejects_non_monic():
    parent = QObject.build(["a", "b"], ["o"], {"a": "o", "b": "o"})
    sub = QObject.build(["p", "q"], ["o"], {"p": "o", "q": "o"})
    with pytest.raises(NotMonic):
        classify_subobject(sub, parent, FinFn(["p", "q"], ["a", "b"], ["a", "a"]), FinFn.identity(["o"]))


@pytest.mark.parametrize("seed", range(20))
def test_classifier_square_is_pullback(seed):
    rep = check_classifier(*random_subobject(seed))
    assert rep.commutes and rep.recovers and rep.pullback and rep.unique


def test_omega_shape():
    assert OMEGA.f.as_dict() == {0: 0, Fraction(1, 2): 1, 1: 1}
    assert TRUE.h.table == (1,) and TRUE.k.table == (1,)


def test_exponential_singleton():
    one = QObject.build(["*"], ["v"], {"*": "v"})
    exp = exponential_q(one, one)
    assert len(exp.arrows) == 1


@pytest.mark.parametrize("seed", range(8))
def test_exponential_counts_and_transpose(seed):
    f = random_qobject(1 + seed % 2, 1 + seed % 2, seed)
    g = random_qobject(2, 2, seed + 7, "y")
    exp = exponential_q(f, g)
    assert len(exp.arrows) == brute_arrow_count(f, g)
    # the output of each arrow is its own k component
    assert all(exp.obj(a.key()) == a.k.table for a in exp.arrows)
    assert verify_exponential(f, g, exp, small_test_objects()[:5]).ok


def test_exponential_guard():
    big = random_qobject(7, 1, 0)
    with pytest.raises(SizeGuard):
        exponential_q(big, big)


def test_qobject_json():
    q = qobject_from_json({"inputs": ["a", "b"], "outputs": [0, 1], "f": {"a": 1, "b": 0}})
    assert q("a") == 1
    q = qobject_from_json({"inputs": [["s", "x"]], "outputs": ["v"], "f": ["v"]})
    assert q(("s", "x")) == "v"
