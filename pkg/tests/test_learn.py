import itertools

import numpy as np
import pytest

from urlkit.learn import (
    BackpropConfig, Learner, ParamFn, affine, backprop_functor, braiding, compose_par, compose_seq,
    functoriality_check, identity_learner, init_params, learners_equivalent, net_from_json, sigmoid, stream_loss,
    swap_params, tanh, total_error, train_coalgebra, zeroth_order_functor,
)


def scalar_learner(name):
    """``I(p, a) = p a`` with gradient-step update and request."""
    return Learner(1, 1, 1, lambda p, a: np.asarray(p) * np.asarray(a),
                   lambda p, a, b: np.asarray(p) - 0.1 * (np.asarray(p) * a - b) * a,
                   lambda p, a, b: np.asarray(a) - (np.asarray(p) * a - b) * np.asarray(p), name)


def random_net(seed):
    rng = np.random.default_rng(seed)
    n_in, hidden, n_out = (int(x) for x in rng.integers(1, 9, size=3))
    act = [tanh, sigmoid][seed % 2]
    return ParamFn((affine(n_in, hidden), act(hidden), affine(hidden, n_out)))


def test_param_fn_shapes():
    f = ParamFn((affine(3, 4), tanh(4), affine(4, 2)))
    assert (f.a_dim, f.b_dim, f.p_dim) == (3, 2, 16 + 10)
    with pytest.raises(ValueError):
        ParamFn((affine(3, 4), affine(5, 2)))
    with pytest.raises(ValueError):
        f(np.zeros(3), np.zeros(3))


def test_identity_composition():
    L = scalar_learner("s")
    for composite in (compose_seq(identity_learner(1), L), compose_seq(L, identity_learner(1))):
        assert learners_equivalent(L, composite, lambda p: p)


def test_scalar_composite_implement():
    L = compose_seq(scalar_learner("p"), scalar_learner("q"))
    rng = np.random.default_rng(0)
    for _ in range(20):
        p, q, a = rng.normal(size=3)
        assert L.implement([p, q], [a])[0] == pytest.approx(q * p * a, abs=1e-15)


def test_composite_update_and_request_follow_formula():
    L1, L2 = scalar_learner("p"), scalar_learner("q")
    L = compose_seq(L1, L2)
    p, q, a, c = 0.7, -1.3, 0.4, 2.0
    b = L1.implement(p, a)
    s = L2.request(q, b, c)
    assert np.allclose(L.update([p, q], a, c), [L1.update(p, a, s), L2.update(q, b, c)], rtol=0, atol=0)
    assert np.allclose(L.request([p, q], a, c), L1.request(p, a, s), rtol=0, atol=0)


def test_shape_mismatch():
    with pytest.raises(ValueError):
        compose_seq(backprop_functor(ParamFn((affine(2, 3),))), backprop_functor(ParamFn((affine(2, 1),))))


def test_associativity():
    f1, f2, f3 = ParamFn((affine(2, 3),)), ParamFn((tanh(3),)), ParamFn((affine(3, 2),))
    L1, L2, L3 = (backprop_functor(f) for f in (f1, f2, f3))
    left, right = compose_seq(compose_seq(L1, L2), L3), compose_seq(L1, compose_seq(L2, L3))
    assert learners_equivalent(left, right, lambda p: p, tol=1e-12)


def test_parallel_identities_and_dims():
    L = compose_par(identity_learner(2), identity_learner(3))
    assert learners_equivalent(identity_learner(5), L, lambda p: p)
    f, g = ParamFn((affine(2, 3),)), ParamFn((affine(1, 1), sigmoid(1)))
    P = compose_par(backprop_functor(f), backprop_functor(g))
    assert (P.p_dim, P.a_dim, P.b_dim) == (f.p_dim + g.p_dim, 3, 4)


def test_braiding():
    f, g = ParamFn((affine(2, 3),)), ParamFn((affine(1, 2), tanh(2)))
    L1, L2 = backprop_functor(f), backprop_functor(g)
    direct = compose_par(L1, L2)
    swapped = compose_seq(compose_seq(braiding(2, 1), compose_par(L2, L1)), braiding(2, 3))
    assert learners_equivalent(direct, swapped, swap_params(L1.p_dim, L2.p_dim), tol=1e-12)


def test_interchange():
    nets = [ParamFn((affine(2, 2),)), ParamFn((affine(1, 3),)), ParamFn((tanh(2), affine(2, 1))),
            ParamFn((affine(3, 2), sigmoid(2)))]
    L1, L2, L3, L4 = (backprop_functor(f) for f in nets)
    left = compose_seq(compose_par(L1, L2), compose_par(L3, L4))
    right = compose_par(compose_seq(L1, L3), compose_seq(L2, L4))
    n = [L.p_dim for L in (L1, L2, L3, L4)]
    cuts = np.cumsum([0] + n)

    def relabel(p):
        block = [p[cuts[k]:cuts[k + 1]] for k in range(4)]
        return np.concatenate([block[0], block[2], block[1], block[3]])

    assert learners_equivalent(left, right, relabel, tol=1e-12)


def test_backprop_hand_example():
    L = backprop_functor(ParamFn((affine(1, 1),)), BackpropConfig(eps=0.1))
    # parameters are (w, bias); with bias 0 this is the scalar p a
    p = L.update([1.0, 0.0], [1.0], [2.0])
    assert p[0] == pytest.approx(1.1, abs=1e-15)


def test_backprop_zero_error():
    f = random_net(3)
    L = backprop_functor(f)
    p, a = init_params(f, 1), np.linspace(-1, 1, f.a_dim)
    b = f(p, a)
    assert np.array_equal(L.update(p, a, b), p)
    assert np.array_equal(L.request(p, a, b), a)


@pytest.mark.parametrize("seed", range(10))
def test_gradients_match_central_differences(seed):
    f = random_net(seed)
    cfg = BackpropConfig()
    rng = np.random.default_rng(seed)
    p, a, b = rng.normal(size=f.p_dim), rng.normal(size=f.a_dim), rng.normal(size=f.b_dim)
    gp, ga = f.vjp(p, a, cfg.d_error(f(p, a), b))
    E = lambda pp, aa: total_error(f, cfg, pp, aa, b)
    h = 1e-5
    fd_p = np.array([(E(p + h * e, a) - E(p - h * e, a)) / (2 * h) for e in np.eye(f.p_dim)])
    fd_a = np.array([(E(p, a + h * e) - E(p, a - h * e)) / (2 * h) for e in np.eye(f.a_dim)])
    assert np.max(np.abs(gp - fd_p)) <= 1e-6 * max(1.0, np.max(np.abs(gp)))
    assert np.max(np.abs(ga - fd_a)) <= 1e-6 * max(1.0, np.max(np.abs(ga)))


LAYERS = {
    "affine": ParamFn((affine(3, 3),)),
    "tanh": ParamFn((tanh(3),)),
    "sigmoid": ParamFn((sigmoid(3),)),
    "affine+tanh": ParamFn((affine(3, 3), tanh(3))),
}


@pytest.mark.parametrize("first,second", list(itertools.product(LAYERS, repeat=2)))
def test_functoriality(first, second):
    rep = functoriality_check(LAYERS[first], LAYERS[second], samples=100)
    assert rep.ok, rep


def test_functoriality_wide_layers():
    rep = functoriality_check(ParamFn((affine(4, 8), tanh(8))), ParamFn((affine(8, 2), sigmoid(2))))
    assert rep.ok


def test_zeroth_order_zero_error():
    f = ParamFn((affine(2, 1),))
    L = zeroth_order_functor(f, 0.1, 0.01, seed=0)
    p = np.array([0.3, -0.2, 0.5])
    assert np.array_equal(L.update(p, [1.0, 2.0], f(p, [1.0, 2.0])), p)
    assert np.array_equal(L.request(p, [1.0, 2.0], [0.0]), [1.0, 2.0])


def test_zeroth_order_same_seed():
    f = ParamFn((affine(2, 1), tanh(1)))
    p = np.array([0.3, -0.2, 0.5])
    u1 = zeroth_order_functor(f, 0.1, 0.01, seed=4).update(p, [1.0, 2.0], [0.0])
    u2 = zeroth_order_functor(f, 0.1, 0.01, seed=4).update(p, [1.0, 2.0], [0.0])
    assert np.array_equal(u1, u2)


def test_zeroth_order_mean_direction():
    f = ParamFn((affine(1, 1),))
    p, a, b, eps = np.array([0.5, 0.1]), np.array([1.5]), np.array([2.0]), 0.1
    steps = np.array([(p - zeroth_order_functor(f, eps, 0.01, seed=s).update(p, a, b)) / eps for s in range(10_000)])
    grad, _ = f.vjp(p, a, f(p, a) - b)
    mean, se = steps.mean(axis=0), steps.std(axis=0, ddof=1) / np.sqrt(len(steps))
    assert np.all(np.abs(mean - grad) <= 3 * se)


def test_training_linear_model_to_zero_loss():
    f = ParamFn((affine(2, 1),))
    rng = np.random.default_rng(0)
    data = [(a, np.array([2 * a[0] - a[1] + 0.5])) for a in rng.uniform(-1, 1, (6, 2))]
    tr = train_coalgebra(backprop_functor(f, BackpropConfig(eps=0.1)), data, 6000, init_params(f, 0),
                         stream_loss(f, data))
    assert tr.losses[-1] <= 1e-6
    assert all(x >= y for x, y in zip(tr.losses, tr.losses[1:]))
    assert np.allclose(tr.params[-1], [2.0, -1.0, 0.5], atol=1e-3)


def test_training_with_identity_update():
    L = Learner(2, 1, 1, lambda p, a: a, lambda p, a, b: np.asarray(p), lambda p, a, b: a)
    tr = train_coalgebra(L, [([1.0], [2.0])], 10, [0.5, -0.5])
    assert np.all(tr.params == [0.5, -0.5])


def test_composed_training_matches_monolithic():
    f, g = ParamFn((affine(2, 4), tanh(4))), ParamFn((affine(4, 1),))
    cfg = BackpropConfig(eps=0.05)
    rng = np.random.default_rng(1)
    data = [(a, np.array([np.sin(a.sum())])) for a in rng.uniform(-1, 1, (5, 2))]
    p0 = init_params(f.then(g), 3)
    a = train_coalgebra(compose_seq(backprop_functor(f, cfg), backprop_functor(g, cfg)), data, 200, p0)
    b = train_coalgebra(backprop_functor(f.then(g), cfg), data, 200, p0)
    assert np.max(np.abs(a.params - b.params)) <= 1e-9


def test_learners_equivalent_detects_difference():
    f = ParamFn((affine(1, 1),))
    assert not learners_equivalent(backprop_functor(f, BackpropConfig(0.1)), backprop_functor(f, BackpropConfig(0.2)),
                                   lambda p: p)


def test_net_json():
    f = net_from_json({"layers": [{"type": "affine", "in": 2, "out": 3}, {"type": "tanh", "n": 3}]})
    assert f.p_dim == 9 and f.b_dim == 3
    with pytest.raises(ValueError):
        net_from_json({"layers": [{"type": "relu", "n": 2}]})


def test_config_validation():
    with pytest.raises(ValueError):
        BackpropConfig(eps=0.0)
