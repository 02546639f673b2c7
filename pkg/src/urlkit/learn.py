"""Compositional learners and gradient descent as a functor into them.

A learner ``A -> B`` is a parameter dimension plus three maps on real vectors:
``implement(p, a) -> b``, ``update(p, a, b) -> p`` and ``request(p, a, b) -> a``.
Sequential composition threads the downstream request back as the upstream
training target; parallel composition runs learners side by side.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


def _vec(x) -> np.ndarray:
    return np.atleast_1d(np.asarray(x, dtype=float))


@dataclass
class Learner:
    p_dim: int
    a_dim: int
    b_dim: int
    implement: Callable
    update: Callable
    request: Callable
    name: str = ""

    def __call__(self, p, a):
        return self.implement(p, a)


def identity_learner(n: int) -> Learner:
    return Learner(0, n, n, lambda p, a: _vec(a), lambda p, a, b: _vec(p), lambda p, a, b: _vec(b), "id")


def braiding(m: int, n: int) -> Learner:
    """Parameterless swap ``(a, b) -> (b, a)`` on ``R^m x R^n``."""

    def swap(v, first):
        v = _vec(v)
        return np.concatenate([v[first:], v[:first]])

    return Learner(0, m + n, m + n, lambda p, a: swap(a, m), lambda p, a, b: _vec(p),
                   lambda p, a, b: swap(b, n), "swap")


def compose_seq(L1: Learner, L2: Learner) -> Learner:
    """``L2 . L1``: parameters ``(p, q)``, with ``L2``'s request fed to ``L1`` as its target."""
    if L1.b_dim != L2.a_dim:
        raise ValueError(f"cannot feed output of dimension {L1.b_dim} into input of dimension {L2.a_dim}")
    n1 = L1.p_dim

    def implement(pq, a):
        pq = _vec(pq) if L1.p_dim + L2.p_dim else np.zeros(0)
        return L2.implement(pq[n1:], L1.implement(pq[:n1], a))

    def update(pq, a, c):
        pq = np.asarray(pq, dtype=float).reshape(-1)
        p, q = pq[:n1], pq[n1:]
        b = L1.implement(p, a)
        target = L2.request(q, b, c)
        return np.concatenate([_flat(L1.update(p, a, target)), _flat(L2.update(q, b, c))])

    def request(pq, a, c):
        pq = np.asarray(pq, dtype=float).reshape(-1)
        p, q = pq[:n1], pq[n1:]
        b = L1.implement(p, a)
        return L1.request(p, a, L2.request(q, b, c))

    return Learner(L1.p_dim + L2.p_dim, L1.a_dim, L2.b_dim, implement, update, request,
                   f"({L1.name};{L2.name})")


def _flat(x) -> np.ndarray:
    return np.asarray(x, dtype=float).reshape(-1)


def compose_par(L1: Learner, L2: Learner) -> Learner:
    """``L1 || L2`` on concatenated parameters, inputs and outputs."""
    n1, m1, k1 = L1.p_dim, L1.a_dim, L1.b_dim

    def split(pq, a):
        pq, a = np.asarray(pq, dtype=float).reshape(-1), _vec(a)
        return pq[:n1], pq[n1:], a[:m1], a[m1:]

    def implement(pq, a):
        p, q, a1, a2 = split(pq, a)
        return np.concatenate([_vec(L1.implement(p, a1)), _vec(L2.implement(q, a2))])

    def update(pq, a, b):
        p, q, a1, a2 = split(pq, a)
        b = _vec(b)
        return np.concatenate([_flat(L1.update(p, a1, b[:k1])), _flat(L2.update(q, a2, b[k1:]))])

    def request(pq, a, b):
        p, q, a1, a2 = split(pq, a)
        b = _vec(b)
        return np.concatenate([_vec(L1.request(p, a1, b[:k1])), _vec(L2.request(q, a2, b[k1:]))])

    return Learner(n1 + L2.p_dim, m1 + L2.a_dim, k1 + L2.b_dim, implement, update, request,
                   f"({L1.name}|{L2.name})")


# ---------------------------------------------------------------- parameterized functions

@dataclass(frozen=True)
class Layer:
    kind: str  # "affine", "tanh" or "sigmoid"
    n_in: int
    n_out: int

    @property
    def p_dim(self) -> int:
        return self.n_out * self.n_in + self.n_out if self.kind == "affine" else 0


def affine(n_in: int, n_out: int) -> Layer:
    return Layer("affine", n_in, n_out)


def tanh(n: int) -> Layer:
    return Layer("tanh", n, n)


def sigmoid(n: int) -> Layer:
    return Layer("sigmoid", n, n)


def _sig(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass(frozen=True)
class ParamFn:
    """A chain of smooth layers; parameters are the flattened ``W`` (row-major) then ``b`` of
    each affine layer, in layer order."""

    layers: tuple

    def __post_init__(self):
        layers = tuple(self.layers)
        object.__setattr__(self, "layers", layers)
        if not layers:
            raise ValueError("a parameterized function needs at least one layer")
        for k, (x, y) in enumerate(zip(layers, layers[1:])):
            if x.n_out != y.n_in:
                raise ValueError(f"layer {k} outputs {x.n_out} values but layer {k + 1} expects {y.n_in}")
        for layer in layers:
            if layer.kind not in ("affine", "tanh", "sigmoid"):
                raise ValueError(f"unknown layer kind {layer.kind!r}")

    @property
    def a_dim(self) -> int:
        return self.layers[0].n_in

    @property
    def b_dim(self) -> int:
        return self.layers[-1].n_out

    @property
    def p_dim(self) -> int:
        return sum(layer.p_dim for layer in self.layers)

    def then(self, g: "ParamFn") -> "ParamFn":
        """``g . self`` with parameters ``(p_self, p_g)``."""
        return ParamFn(self.layers + g.layers)

    def _unpack(self, p):
        p = np.asarray(p, dtype=float).reshape(-1)
        if p.shape[0] != self.p_dim:
            raise ValueError(f"expected {self.p_dim} parameters, got {p.shape[0]}")
        out, at = [], 0
        for layer in self.layers:
            if layer.kind == "affine":
                nW = layer.n_out * layer.n_in
                W = p[at:at + nW].reshape(layer.n_out, layer.n_in)
                b = p[at + nW:at + nW + layer.n_out]
                out.append((W, b))
                at += nW + layer.n_out
            else:
                out.append(None)
        return out

    def forward(self, p, a, keep: bool = False):
        params = self._unpack(p)
        x = _vec(a)
        if x.shape[0] != self.a_dim:
            raise ValueError(f"expected input of dimension {self.a_dim}")
        acts = [x]
        for layer, w in zip(self.layers, params):
            if layer.kind == "affine":
                x = w[0] @ x + w[1]
            elif layer.kind == "tanh":
                x = np.tanh(x)
            else:
                x = _sig(x)
            acts.append(x)
        return (x, acts, params) if keep else x

    def __call__(self, p, a):
        return self.forward(p, a)

    def vjp(self, p, a, gy):
        """Reverse accumulation of ``gy^T dI``: returns ``(grad_p, grad_a)``."""
        _, acts, params = self.forward(p, a, keep=True)
        g = _vec(gy).copy()
        grads = []
        for layer, w, x_in, x_out in zip(reversed(self.layers), reversed(params), reversed(acts[:-1]),
                                         reversed(acts[1:])):
            if layer.kind == "affine":
                grads.append(np.concatenate([np.outer(g, x_in).reshape(-1), g]))
                g = w[0].T @ g
            elif layer.kind == "tanh":
                g = g * (1.0 - x_out * x_out)
            else:
                g = g * x_out * (1.0 - x_out)
        grads.reverse()
        gp = np.concatenate(grads) if grads else np.zeros(0)
        return gp, g


def init_params(f: ParamFn, seed: int = 0) -> np.ndarray:
    return np.random.default_rng(seed).uniform(-0.5, 0.5, size=f.p_dim)


# ---------------------------------------------------------------- error functions and the functor

@dataclass(frozen=True)
class BackpropConfig:
    """Learning rate and error ``e(x, y)`` with its derivative in ``x`` and the inverse
    of ``y -> de/dx(x, y)``.  Defaults to ``e = (x - y)^2 / 2``."""

    eps: float = 0.01
    error: Callable = field(default=lambda x, y: 0.5 * (x - y) ** 2)
    d_error: Callable = field(default=lambda x, y: x - y)
    d_error_inverse: Callable = field(default=lambda x, v: x - v)

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("learning rate must be positive")


def total_error(f: ParamFn, cfg: BackpropConfig, p, a, b) -> float:
    return float(np.sum(cfg.error(f(p, a), _vec(b))))


def backprop_functor(f: ParamFn, cfg: BackpropConfig | None = None) -> Learner:
    """Learner of ``f``: update is a gradient step on the summed error, request inverts the
    error derivative at ``a`` on the input gradient."""
    cfg = BackpropConfig() if cfg is None else cfg

    def grads(p, a, b):
        y = f(p, a)
        return f.vjp(p, a, cfg.d_error(y, _vec(b)))

    def update(p, a, b):
        gp, _ = grads(p, a, b)
        return np.asarray(p, dtype=float).reshape(-1) - cfg.eps * gp

    def request(p, a, b):
        _, ga = grads(p, a, b)
        return cfg.d_error_inverse(_vec(a), ga)

    return Learner(f.p_dim, f.a_dim, f.b_dim, lambda p, a: f(p, a), update, request, "bp")


def zeroth_order_functor(f: ParamFn, eps: float, sigma: float, seed: int = 0,
                         cfg: BackpropConfig | None = None) -> Learner:
    """Learner whose update uses only forward evaluations of ``f`` in ``p``.

    Each call draws a direction ``z ~ N(0, I)`` from a generator seeded once, and steps
    ``p - eps * g`` with ``g = de/dx(I(p, a), b) . (I(p + sigma z, a) - I(p, a)) * z / sigma``,
    an estimate of the parameter gradient whose mean matches it for ``f`` linear in ``p``.
    Zero error gives ``g = 0``.  The request returns ``a`` unchanged.
    """
    if not (eps > 0 and sigma > 0):
        raise ValueError("eps and sigma must be positive")
    cfg = BackpropConfig(eps) if cfg is None else cfg
    rng = np.random.default_rng(seed)

    def update(p, a, b):
        p = np.asarray(p, dtype=float).reshape(-1)
        z = rng.standard_normal(p.shape[0])
        y = f(p, a)
        dy = f(p + sigma * z, a) - y
        g = float(np.dot(cfg.d_error(y, _vec(b)), dy)) * z / sigma
        return p - eps * g

    return Learner(f.p_dim, f.a_dim, f.b_dim, lambda p, a: f(p, a), update, lambda p, a, b: _vec(a), "zo")


# ---------------------------------------------------------------- checks

@dataclass
class FunctorialityReport:
    ok: bool
    max_implement: float
    max_update: float
    max_request: float
    samples: int


def functoriality_check(f: ParamFn, g: ParamFn, cfg: BackpropConfig | None = None, samples: int = 100,
                        seed: int = 0, tol: float = 1e-9, scale: float = 1.0) -> FunctorialityReport:
    """Compare ``L(f) ; L(g)`` with ``L(g . f)`` on random ``(p, q, a, c)``."""
    cfg = BackpropConfig() if cfg is None else cfg
    seq = compose_seq(backprop_functor(f, cfg), backprop_functor(g, cfg))
    mono = backprop_functor(f.then(g), cfg)
    rng = np.random.default_rng(seed)
    worst = [0.0, 0.0, 0.0]
    for _ in range(samples):
        pq = rng.uniform(-scale, scale, seq.p_dim)
        a = rng.uniform(-scale, scale, f.a_dim)
        c = rng.uniform(-scale, scale, g.b_dim)
        worst[0] = max(worst[0], float(np.max(np.abs(seq.implement(pq, a) - mono.implement(pq, a)))))
        worst[1] = max(worst[1], float(np.max(np.abs(seq.update(pq, a, c) - mono.update(pq, a, c)), initial=0.0)))
        worst[2] = max(worst[2], float(np.max(np.abs(seq.request(pq, a, c) - mono.request(pq, a, c)))))
    return FunctorialityReport(max(worst) <= tol, worst[0], worst[1], worst[2], samples)


def learners_equivalent(L1: Learner, L2: Learner, relabel: Callable, samples: int = 100, seed: int = 0,
                        tol: float = 1e-12) -> bool:
    """``L2`` is ``L1`` with parameters renamed by the bijection ``relabel``:
    ``I2(f p, a) = I1(p, a)``, ``U2(f p, a, b) = f(U1(p, a, b))``, ``r2(f p, a, b) = r1(p, a, b)``."""
    if (L1.p_dim, L1.a_dim, L1.b_dim) != (L2.p_dim, L2.a_dim, L2.b_dim):
        return False
    rng = np.random.default_rng(seed)
    for _ in range(samples):
        p = rng.uniform(-1, 1, L1.p_dim)
        a = rng.uniform(-1, 1, L1.a_dim)
        b = rng.uniform(-1, 1, L1.b_dim)
        fp = relabel(p)
        checks = [(L2.implement(fp, a), L1.implement(p, a)),
                  (L2.update(fp, a, b), relabel(L1.update(p, a, b))),
                  (L2.request(fp, a, b), L1.request(p, a, b))]
        for x, y in checks:
            if np.asarray(x).shape != np.asarray(y).shape or np.max(np.abs(np.asarray(x) - np.asarray(y)),
                                                                    initial=0.0) > tol:
                return False
    return True


def swap_params(n1: int, n2: int) -> Callable:
    """Bijection ``(p, q) -> (q, p)`` on ``R^(n1 + n2)``."""
    return lambda pq: np.concatenate([np.asarray(pq)[n1:n1 + n2], np.asarray(pq)[:n1]])


@dataclass
class TrainTrace:
    params: np.ndarray  # (steps + 1, p_dim)
    losses: list  # loss over the stream after each epoch (and at the start)


def train_coalgebra(L: Learner, data: Sequence, steps: int, p0, loss: Callable | None = None) -> TrainTrace:
    """Unfold ``p -> U(p, a_t, b_t)`` over the cycled stream of ``(a, b)`` pairs.

    ``loss(p)`` (if given) is recorded at the start and after every full pass.
    """
    data = list(data)
    p = np.asarray(p0, dtype=float).reshape(-1)
    params = [p.copy()]
    losses = [loss(p)] if loss is not None else []
    for t in range(steps):
        if not data:
            params.append(p.copy())
            continue
        a, b = data[t % len(data)]
        p = _flat(L.update(p, a, b))
        params.append(p.copy())
        if loss is not None and (t + 1) % len(data) == 0:
            losses.append(loss(p))
    return TrainTrace(np.array(params), losses)


def stream_loss(f: ParamFn, data: Sequence, cfg: BackpropConfig | None = None) -> Callable:
    cfg = BackpropConfig() if cfg is None else cfg
    return lambda p: sum(total_error(f, cfg, p, a, b) for a, b in data)


def net_from_json(data) -> ParamFn:
    layers = []
    for entry in data["layers"]:
        kind = entry["type"]
        if kind == "affine":
            layers.append(affine(int(entry["in"]), int(entry["out"])))
        elif kind in ("tanh", "sigmoid"):
            layers.append(Layer(kind, int(entry["n"]), int(entry["n"])))
        else:
            raise ValueError(f"unknown layer type {kind!r}")
    return ParamFn(tuple(layers))
