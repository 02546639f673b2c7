"""Stochastic-approximation learners: TD(0), Q-learning, linear TD and Monte Carlo.

All trajectories are driven by uniforms drawn up front from ``numpy.random.default_rng(seed)``,
so a seed fixes the run exactly and both kernel backends agree bit for bit.
Episodes restart uniformly over non-absorbing states after one update at an
absorbing state (a state whose admissible actions all self-loop with probability 1).
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from ._kernels_py import RATE_CONSTANT, RATE_HARMONIC, RATE_PER_VISIT
from .kernels import impl
from .mdp import Mdp
from .solvers import policy_table

FAMILIES = {"constant": RATE_CONSTANT, "harmonic": RATE_HARMONIC, "per-visit": RATE_PER_VISIT}


class UnsupportedRate(ValueError):
    pass


@dataclass(frozen=True)
class RateSchedule:
    """``alpha = a / (b + n^p)`` with ``n`` the step (from 1) or the prior visit count (from 0)."""

    family: str
    a: float
    b: float = 0.0
    p: float = 1.0

    @property
    def kind(self) -> int:
        return FAMILIES[self.family]

    def alpha(self, t: int = 1, k: int = 0) -> float:
        if self.family == "constant":
            return self.a
        n = t if self.family == "harmonic" else k
        return self.a / (self.b + float(n) ** self.p)

    @property
    def rm_valid(self) -> bool:
        return self.family != "constant" and 0.5 < self.p <= 1.0

    @property
    def verdict(self) -> str:
        if self.family == "constant":
            return "invalid: constant rate has divergent sum of squares"
        if self.p > 1.0:
            return "invalid: sum of rates converges"
        if self.p <= 0.5:
            return "invalid: sum of squared rates diverges"
        return "valid"


_NUM = r"[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?"
_RATE_RE = re.compile(
    rf"^\s*(?P<a>{_NUM})\s*/\s*\(?\s*(?:(?P<b>{_NUM})\s*\+\s*)?(?P<v>[tk])\s*(?:\^\s*(?P<p>{_NUM}))?\s*\)?\s*$")


def rate_schedule(given) -> RateSchedule:
    """Build a rate from ``"0.1"``, ``"1/t"``, ``"1/t^0.7"``, ``"1/(1+k)"``, ``"2/(10+t^0.8)"``
    or a mapping ``{"family": ..., "a": ..., "b": ..., "p": ...}``.

    ``t`` counts steps from 1, ``k`` counts earlier visits of the updated entry from 0.
    Rates must stay in ``(0, 1]``.
    """
    if isinstance(given, RateSchedule):
        rate = given
    elif isinstance(given, (int, float)):
        rate = RateSchedule("constant", float(given))
    elif isinstance(given, dict):
        family = given.get("family")
        if family not in FAMILIES:
            raise UnsupportedRate(f"unsupported rate family {family!r}")
        rate = RateSchedule(family, float(given.get("a", 1.0)), float(given.get("b", 0.0)), float(given.get("p", 1.0)))
    elif isinstance(given, str):
        text = given.strip()
        try:
            rate = RateSchedule("constant", float(text))
        except ValueError:
            m = _RATE_RE.match(text)
            if not m:
                raise UnsupportedRate(f"cannot read rate {given!r}") from None
            family = "harmonic" if m["v"] == "t" else "per-visit"
            rate = RateSchedule(family, float(m["a"]), float(m["b"] or 0.0), float(m["p"] or 1.0))
    else:
        raise UnsupportedRate(f"cannot read rate {given!r}")
    if rate.family == "constant":
        if not 0.0 < rate.a <= 1.0:
            raise UnsupportedRate("constant rate must lie in (0, 1]")
        return rate
    if rate.p <= 0:
        raise UnsupportedRate("rate exponent must be positive")
    first = 1.0 if rate.family == "harmonic" else 0.0
    denom = rate.b + first ** rate.p
    if denom <= 0 or rate.a <= 0:
        raise UnsupportedRate("rate must be positive and finite")
    if rate.a / denom > 1.0 + 1e-12:
        raise UnsupportedRate(f"rate exceeds 1 at the first step ({rate.a / denom})")
    return rate


def absorbing_states(M: Mdp) -> np.ndarray:
    idx = np.arange(M.n_states)
    loops = M.P[idx, :, idx]  # (S, A)
    return np.all(~M.admissible | (loops >= 1.0 - 1e-12), axis=1)


def _uniforms(seed, steps):
    rng = np.random.default_rng(seed)
    return rng.random(steps), rng.random(steps), rng.random(steps)


def _start(M: Mdp, s0):
    if s0 is None:
        return 0
    return M.state_index(s0) if isinstance(s0, str) else int(s0)


@dataclass
class TdResult:
    values: np.ndarray
    visits: np.ndarray
    states: np.ndarray
    trace: np.ndarray


def td0_learn(M: Mdp, policy, steps: int, rate="1/(1+k)", seed: int = 0, V0=None, s0=None,
              restart: bool = True) -> TdResult:
    """Tabular TD(0): ``V(s) += alpha * (r + gamma V(s') - V(s))`` along one trajectory."""
    rate = rate_schedule(rate)
    pi = policy_table(M, policy)
    V0 = np.zeros(M.n_states) if V0 is None else np.asarray(V0, dtype=float)
    absb = absorbing_states(M) if restart else np.zeros(M.n_states, dtype=bool)
    ua, un, ur = _uniforms(seed, steps)
    V, visits, ev_s, ev_v = impl.td0(M.P, M.R, pi, M.gamma, _start(M, s0), steps, rate.kind, rate.a, rate.b,
                                     rate.p, ua, un, ur, absb.astype(np.uint8), V0)
    return TdResult(np.asarray(V), np.asarray(visits), np.asarray(ev_s), np.asarray(ev_v))


@dataclass
class QResult:
    Q: np.ndarray
    visits: np.ndarray
    starved: list
    states: np.ndarray
    actions: np.ndarray
    trace: np.ndarray


def uniform_behavior(M: Mdp) -> np.ndarray:
    return M.admissible / M.admissible.sum(axis=1, keepdims=True)


def q_learning(M: Mdp, behavior=None, steps: int = 100_000, rate="1/(1+k)", seed: int = 0, Q0=None, s0=None,
               restart: bool = True) -> QResult:
    """Tabular Q-learning under a behaviour policy (uniform over admissible actions by default).

    ``starved`` lists admissible (state, action) names never updated.
    Inadmissible entries of ``Q`` are ``-inf``.
    """
    rate = rate_schedule(rate)
    beh = uniform_behavior(M) if behavior is None else policy_table(M, behavior)
    Q0 = np.zeros((M.n_states, M.n_actions)) if Q0 is None else np.asarray(Q0, dtype=float)
    absb = absorbing_states(M) if restart else np.zeros(M.n_states, dtype=bool)
    ua, un, ur = _uniforms(seed, steps)
    Q, visits, ev_s, ev_a, ev_v = impl.q_learning(M.P, M.R, M.admissible.astype(np.uint8), M.gamma, beh,
                                                  _start(M, s0), steps, rate.kind, rate.a, rate.b, rate.p,
                                                  ua, un, ur, absb.astype(np.uint8), Q0)
    Q = np.where(M.admissible, np.asarray(Q), -np.inf)
    visits = np.asarray(visits)
    starved = [(M.states[s], M.actions[a]) for s, a in zip(*np.nonzero(M.admissible & (visits == 0)))]
    return QResult(Q, visits, starved, np.asarray(ev_s), np.asarray(ev_a), np.asarray(ev_v))


@dataclass
class LinearTdResult:
    theta: np.ndarray
    visits: np.ndarray

    def values(self, Phi) -> np.ndarray:
        return np.asarray(Phi, dtype=float) @ self.theta


def td0_linear(M: Mdp, policy, Phi, steps: int, rate="1/(1+k)", seed: int = 0, theta0=None, s0=None,
               restart: bool = True) -> LinearTdResult:
    """Linear TD(0) on features ``Phi[s]`` (one row per state).

    With per-visit rates the count is that of the visited state.
    """
    rate = rate_schedule(rate)
    Phi = np.asarray(Phi, dtype=float)
    if Phi.ndim != 2 or Phi.shape[0] != M.n_states:
        raise ValueError("features need one row per state")
    if Phi.shape[1] > M.n_states:
        raise ValueError("more features than states")
    pi = policy_table(M, policy)
    theta0 = np.zeros(Phi.shape[1]) if theta0 is None else np.asarray(theta0, dtype=float)
    absb = absorbing_states(M) if restart else np.zeros(M.n_states, dtype=bool)
    ua, un, ur = _uniforms(seed, steps)
    theta, visits = impl.td0_linear(M.P, M.R, pi, M.gamma, Phi, _start(M, s0), steps, rate.kind, rate.a, rate.b,
                                    rate.p, ua, un, ur, absb.astype(np.uint8), theta0)
    return LinearTdResult(np.asarray(theta), np.asarray(visits))


@dataclass
class MonteCarloResult:
    mean: float
    std: float
    ci95: tuple
    returns: np.ndarray
    mode: str


def monte_carlo_eval(M: Mdp, policy, start, episodes: int, mode: str = "discounted", seed: int = 0,
                     horizon: int | None = None, terminal=None) -> MonteCarloResult:
    """Mean return over sampled episodes from ``start``.

    ``discounted`` sums ``gamma^t r_t``; ``average`` takes the plain mean of the rewards
    seen.  An episode ends on reaching an absorbing state (rewards collected while
    in it are not counted) or after ``horizon`` steps.  Discounted mode without an
    absorbing state defaults the horizon to where ``gamma^t`` drops below 1e-12.
    """
    if mode not in ("discounted", "average"):
        raise ValueError("mode must be 'discounted' or 'average'")
    pi = policy_table(M, policy)
    absb = absorbing_states(M) if terminal is None else np.isin(np.arange(M.n_states),
                                                                  [M.state_index(s) if isinstance(s, str) else s
                                                                   for s in terminal])
    s_start = M.state_index(start) if isinstance(start, str) else int(start)
    if horizon is None:
        if mode == "average" and not absb.any():
            raise ValueError("average mode needs an episodic MDP or a horizon")
        if mode == "discounted":
            horizon = 1 if M.gamma == 0 else int(math.ceil(math.log(1e-12) / math.log(M.gamma))) + 1
    rng = np.random.default_rng(seed)
    cum_pi = np.cumsum(pi, axis=1)
    cum_P = np.cumsum(M.P, axis=2)
    returns = np.zeros(episodes)
    for e in range(episodes):
        s = s_start
        total, disc, count, t = 0.0, 1.0, 0, 0
        while not absb[s] and (horizon is None or t < horizon):
            a = min(int(np.searchsorted(cum_pi[s], rng.random(), side="right")), M.n_actions - 1)
            r = M.R[s, a]
            s = min(int(np.searchsorted(cum_P[s, a], rng.random(), side="right")), M.n_states - 1)
            total += disc * r if mode == "discounted" else r
            disc *= M.gamma
            count += 1
            t += 1
        returns[e] = total if mode == "discounted" else (total / count if count else 0.0)
    mean = float(returns.mean()) if episodes else float("nan")
    std = float(returns.std(ddof=1)) if episodes > 1 else 0.0
    half = 1.96 * std / math.sqrt(episodes) if episodes else float("nan")
    return MonteCarloResult(mean, std, (mean - half, mean + half), returns, mode)
