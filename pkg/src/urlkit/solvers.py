"""Exact solution methods for tabular MDPs."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mdp import Mdp
from .simplex import simplex_min

LINEAR_TOL = 1e-10
VI_TOL = 1e-8
LP_MAX_STATES = 200


class SolverError(RuntimeError):
    pass


def q_from_v(M: Mdp, V) -> np.ndarray:
    """One-step lookahead ``Q(s,a) = R(s,a) + gamma * sum_s' P(s,a,s') V(s')``.

    Inadmissible pairs get ``-inf``.
    """
    Q = M.R + M.gamma * (M.P @ np.asarray(V, dtype=float))
    return np.where(M.admissible, Q, -np.inf)


def bellman_optimal_backup(M: Mdp, V) -> np.ndarray:
    return q_from_v(M, V).max(axis=1)


def bellman_policy_backup(M: Mdp, policy, V) -> np.ndarray:
    pi = policy_table(M, policy)
    Q = np.where(M.admissible, q_from_v(M, V), 0.0)
    return (pi * Q).sum(axis=1)


@dataclass
class GreedyResult:
    policy: np.ndarray
    ties: list


def greedy_policy(M: Mdp, V, tie_tol=1e-12) -> GreedyResult:
    """Argmax of the one-step lookahead, lowest action index on ties.

    ``ties[s]`` lists every action within ``tie_tol`` (relative) of the maximum.
    """
    Q = q_from_v(M, V)
    best = Q.max(axis=1)
    policy = np.argmax(Q, axis=1)
    scale = tie_tol * np.maximum(1.0, np.abs(best))
    ties = [[int(a) for a in np.flatnonzero(Q[s] >= best[s] - scale[s])] for s in range(M.n_states)]
    return GreedyResult(policy, ties)


def policy_table(M: Mdp, policy) -> np.ndarray:
    """Stochastic table ``pi[s, a]`` from a deterministic or stochastic policy."""
    policy = np.asarray(policy)
    if policy.ndim == 1:
        if policy.shape != (M.n_states,):
            raise ValueError("deterministic policy must give one action per state")
        pi = np.zeros((M.n_states, M.n_actions))
        pi[np.arange(M.n_states), policy.astype(int)] = 1.0
    else:
        pi = np.asarray(policy, dtype=float)
        if pi.shape != (M.n_states, M.n_actions):
            raise ValueError("stochastic policy must be an |S| x |A| table")
        if np.any(pi < 0) or np.any(np.abs(pi.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError("policy rows must be distributions")
    if np.any(pi[~M.admissible] > 0):
        raise ValueError("policy uses an inadmissible action")
    return pi


def policy_evaluation(M: Mdp, policy, tol=LINEAR_TOL) -> np.ndarray:
    """Solve ``(I - gamma P^pi) V = R^pi`` by LU with partial pivoting."""
    pi = policy_table(M, policy)
    P_pi = np.einsum("sa,sat->st", pi, M.P)
    R_pi = (pi * M.R).sum(axis=1)
    A = np.eye(M.n_states) - M.gamma * P_pi
    V = np.linalg.solve(A, R_pi)
    resid = np.max(np.abs(A @ V - R_pi), initial=0.0)
    if resid > tol:
        V = V + np.linalg.solve(A, R_pi - A @ V)
        resid = np.max(np.abs(A @ V - R_pi), initial=0.0)
    if resid > tol:
        raise SolverError(f"linear solve residual {resid:.3e} above {tol:.1e}")
    return V


@dataclass
class ValueIterationResult:
    values: np.ndarray
    iterations: int
    residuals: list
    error_bound: float


def value_iteration(M: Mdp, tol=VI_TOL, V0=None, max_iter=None) -> ValueIterationResult:
    """Iterate the optimal backup until a sweep changes V by at most ``tol``.

    The returned V satisfies ``||T V - V|| <= tol`` and ``||V - V*|| <= tol*gamma/(1-gamma)``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    V = np.zeros(M.n_states) if V0 is None else np.array(V0, dtype=float)
    residuals = []
    it = 0
    while True:
        TV = bellman_optimal_backup(M, V)
        res = float(np.max(np.abs(TV - V)))
        residuals.append(res)
        V = TV
        it += 1
        if res <= tol:
            break
        if max_iter is not None and it >= max_iter:
            raise SolverError(f"value iteration did not reach {tol} in {max_iter} sweeps")
    return ValueIterationResult(V, it, residuals, tol * M.gamma / (1.0 - M.gamma))


@dataclass
class PolicyIterationResult:
    policy: np.ndarray
    values: np.ndarray
    sweeps: int
    residuals: list = field(default_factory=list)


def policy_iteration(M: Mdp, policy=None) -> PolicyIterationResult:
    """Alternate exact evaluation and greedy improvement until the policy is stable.

    A state keeps its current action unless another is strictly better beyond
    rounding noise, which rules out cycling between tied actions.
    """
    if policy is None:
        policy = np.array([M.admissible_actions(s)[0] for s in range(M.n_states)])
    policy = np.asarray(policy, dtype=int).copy()
    residuals = []
    sweeps = 0
    limit = M.n_actions ** M.n_states + 1
    while True:
        V = policy_evaluation(M, policy)
        Q = q_from_v(M, V)
        best = Q.max(axis=1)
        residuals.append(float(np.max(np.abs(best - V))))
        sweeps += 1
        current = Q[np.arange(M.n_states), policy]
        slack = 1e-12 * np.maximum(1.0, np.abs(best))
        improve = current < best - slack
        if not improve.any():
            return PolicyIterationResult(policy, V, sweeps, residuals)
        policy[improve] = np.argmax(Q[improve], axis=1)
        if sweeps > limit:
            raise SolverError("policy iteration failed to stabilise")


@dataclass
class LpProblem:
    """``min c.V`` subject to ``A V >= b`` with ``V`` free; ``rows[k]`` is the (s, a) of row k."""

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    rows: list


def build_lp(M: Mdp, weights=None) -> LpProblem:
    """One constraint ``V(s) >= R(s,a) + gamma sum P V`` per admissible pair."""
    n = M.n_states
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (n,) or np.any(w <= 0):
        raise ValueError("state weights must be positive, one per state")
    rows = [(s, a) for s in range(n) for a in M.admissible_actions(s)]
    A = np.zeros((len(rows), n))
    b = np.zeros(len(rows))
    for k, (s, a) in enumerate(rows):
        A[k] = -M.gamma * M.P[s, a]
        A[k, s] += 1.0
        b[k] = M.R[s, a]
    return LpProblem(w, A, b, rows)


def lp_solve(M: Mdp, weights=None) -> np.ndarray:
    """Optimal values from the linear program.

    The simplex runs on the standard-form dual (one variable per admissible
    state-action pair, one equality per state), started from the basis of the
    first-admissible-action policy, which is always feasible.  The optimal values
    are the simplex multipliers of that problem.
    """
    if M.n_states > LP_MAX_STATES:
        raise ValueError(f"LP solver limited to {LP_MAX_STATES} states")
    lp = build_lp(M, weights)
    start = []
    seen = set()
    for k, (s, _) in enumerate(lp.rows):
        if s not in seen:
            seen.add(s)
            start.append(k)
    res = simplex_min(-lp.b, lp.A.T, lp.c, basis=start)
    return -res.multipliers
