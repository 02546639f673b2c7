"""Linear predictive state representations and their homomorphisms.

A test is a tuple of ``(action, observation)`` pairs.  A PSR stores the core tests,
the initial prediction vector, the vector ``m_empty`` with ``psi . m_empty = 1``,
and one update matrix ``M_ao`` per action-observation pair, from which every
projection vector follows: ``m_{ao t} = M_ao m_t``.
"""
from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .mdp import Mdp

PRED_TOL = 1e-9


class UnknownTest(KeyError):
    pass


def parse_test(text: str) -> tuple:
    """``"a/o b/p"`` -> ``(("a", "o"), ("b", "p"))``."""
    out = []
    for step in text.split():
        a, sep, o = step.partition("/")
        if not sep:
            raise ValueError(f"test step {step!r} is not of the form action/observation")
        out.append((a, o))
    return tuple(out)


def format_test(test) -> str:
    return " ".join(f"{a}/{o}" for a, o in test)


@dataclass
class Psr:
    actions: tuple
    observations: tuple
    core_tests: tuple
    psi0: np.ndarray
    m: dict = field(default_factory=dict)
    updates: dict = field(default_factory=dict)
    m_empty: np.ndarray = None

    def __post_init__(self):
        self.actions = tuple(self.actions)
        self.observations = tuple(self.observations)
        self.core_tests = tuple(tuple(tuple(step) for step in q) for q in self.core_tests)
        self.psi0 = np.asarray(self.psi0, dtype=float)
        k = len(self.core_tests)
        if self.psi0.shape != (k,):
            raise ValueError(f"prediction vector must have length {k}")
        self.m = {tuple(tuple(step) for step in t): np.asarray(v, dtype=float) for t, v in self.m.items()}
        self.updates = {tuple(ao): np.asarray(M, dtype=float) for ao, M in self.updates.items()}
        if self.m_empty is not None:
            self.m_empty = np.asarray(self.m_empty, dtype=float)
        for t, v in self.m.items():
            if v.shape != (k,):
                raise ValueError(f"projection vector for {format_test(t)!r} must have length {k}")
        for ao, M in self.updates.items():
            if M.shape != (k, k):
                raise ValueError(f"update matrix for {ao!r} must be {k}x{k}")

    def projection(self, test) -> np.ndarray:
        test = tuple(tuple(step) for step in test)
        if test in self.m:
            return self.m[test]
        if not test:
            if self.m_empty is None:
                raise UnknownTest(test)
            return self.m_empty
        if test[0] not in self.updates:
            raise UnknownTest(format_test(test))
        return self.updates[test[0]] @ self.projection(test[1:])

    def step_probability(self, psi, a, o) -> float:
        return float(psi @ self.projection(((a, o),)))

    def update(self, psi, a, o) -> np.ndarray:
        """Prediction vector after taking ``a`` and observing ``o``."""
        denom = self.step_probability(psi, a, o)
        if denom <= PRED_TOL:
            raise ValueError(f"observation {o!r} after {a!r} has zero probability")
        return (psi @ self.updates[(a, o)]) / denom


def psr_predict(P: Psr, test, psi=None) -> float:
    """``P(test | h) = psi_h . m_test``; values just outside [0, 1] are clamped with a warning."""
    if isinstance(test, str):
        test = parse_test(test)
    psi = P.psi0 if psi is None else np.asarray(psi, dtype=float)
    value = float(psi @ P.projection(test))
    if value < -PRED_TOL or value > 1 + PRED_TOL:
        warnings.warn(f"prediction {value!r} for {format_test(test)!r} lies outside [0, 1]", stacklevel=2)
    return min(1.0, max(0.0, value))


# --------------------------------------------------------------- construction

def _outcome(T, O, test, n):
    """Outcome vector u(test)[s] = probability the test succeeds from hidden state s."""
    u = np.ones(n)
    for a, o in reversed(test):
        u = T[a] @ (O[a][:, o] * u)
    return u


def psr_from_pomdp(T, O, b0, actions, observations, tol=1e-10) -> Psr:
    """Linear PSR of a finite POMDP.

    ``T[a][s, s']`` are transition probabilities and ``O[a][s', o]`` observation
    probabilities on arrival.  Core tests are found breadth-first by extending
    accepted tests one step at a time, keeping those with linearly independent
    outcome vectors.
    """
    T = [np.asarray(t, dtype=float) for t in T]
    O = [np.asarray(x, dtype=float) for x in O]
    n = T[0].shape[0]
    na, no = len(actions), len(observations)
    core, cols = [], []
    queue = deque([((a, o),) for a in range(na) for o in range(no)])
    while queue and len(core) < n:
        t = queue.popleft()
        u = _outcome(T, O, t, n)
        trial = np.column_stack(cols + [u])
        if np.linalg.matrix_rank(trial, tol=tol) > len(cols):
            core.append(t)
            cols.append(u)
            queue.extend(((a, o),) + t for a in range(na) for o in range(no))
    U = np.column_stack(cols) if cols else np.zeros((n, 0))

    def solve(u):
        x, *_ = np.linalg.lstsq(U, u, rcond=None)
        return x

    m_empty = solve(np.ones(n))
    updates = {}
    for a in range(na):
        for o in range(no):
            cols_ao = [solve(_outcome(T, O, ((a, o),) + q, n)) for q in core]
            updates[(actions[a], observations[o])] = (
                np.column_stack(cols_ao) if cols_ao else np.zeros((0, 0)))
    named = tuple(tuple((actions[a], observations[o]) for a, o in q) for q in core)
    return Psr(tuple(actions), tuple(observations), named, np.asarray(b0, dtype=float) @ U,
               updates=updates, m_empty=m_empty)


def mdp_as_pomdp(M: Mdp):
    """Fully observed POMDP of ``M``: the observation is the state just entered."""
    n = M.n_states
    T = [M.P[:, a, :] for a in range(M.n_actions)]
    O = [np.eye(n) for _ in range(M.n_actions)]
    return T, O


def psr_from_mdp(M: Mdp, start) -> Psr:
    T, O = mdp_as_pomdp(M)
    b0 = np.zeros(M.n_states)
    b0[M.state_index(start) if isinstance(start, str) else start] = 1.0
    return psr_from_pomdp(T, O, b0, M.actions, M.states)


# ------------------------------------------------------------ reachable space

@dataclass
class ReachableSet:
    vectors: list
    depth: list
    history: list
    transitions: list  # transitions[i][a] = {j: probability}


def reachable_predictions(P: Psr, depth: int = 4, tol=PRED_TOL) -> ReachableSet:
    """Prediction vectors reachable from ``psi0`` in at most ``depth`` steps (breadth first)."""
    vectors, depths, histories, trans = [P.psi0], [0], [()], []

    def find(v):
        for j, w in enumerate(vectors):
            if np.max(np.abs(w - v)) <= tol:
                return j
        return -1

    i = 0
    while i < len(vectors):
        row = {}
        if depths[i] < depth:
            for a in P.actions:
                out = {}
                for o in P.observations:
                    p = P.step_probability(vectors[i], a, o)
                    if p <= tol:
                        continue
                    v = P.update(vectors[i], a, o)
                    j = find(v)
                    if j < 0:
                        vectors.append(v)
                        depths.append(depths[i] + 1)
                        histories.append(histories[i] + ((a, o),))
                        j = len(vectors) - 1
                    out[j] = out.get(j, 0.0) + p
                row[a] = out
        trans.append(row)
        i += 1
    return ReachableSet(vectors, depths, histories, trans)


@dataclass
class PsrHomReport:
    ok: bool
    witness: tuple = None


def check_psr_homomorphism(P: Psr, P2: Psr, f, v, depth: int = 4, tol=PRED_TOL) -> PsrHomReport:
    """Check ``P2(psi' | f(psi), v_psi(a)) = P(f^-1(psi') | psi, a)`` on the reachable sets.

    ``f`` maps indices of ``reachable_predictions(P, depth)`` to indices of
    ``reachable_predictions(P2, depth)``; ``v[i][a]`` recodes actions at vector ``i``.
    """
    R1 = reachable_predictions(P, depth, tol)
    R2 = reachable_predictions(P2, depth, tol)
    f = [f[i] for i in range(len(R1.vectors))]
    if set(f) != set(range(len(R2.vectors))):
        raise ValueError("prediction-vector map is not surjective onto the reachable set of the target")

    def locate(w):
        for j, u in enumerate(R2.vectors):
            if np.max(np.abs(u - w)) <= tol:
                return j
        return -1

    for i in range(len(R1.vectors)):
        if R1.depth[i] >= depth:
            continue
        psi2 = R2.vectors[f[i]]
        for a in P.actions:
            b = v[i][a]
            lhs = {}
            for o in P2.observations:
                p = P2.step_probability(psi2, b, o)
                if p <= tol:
                    continue
                j = locate(P2.update(psi2, b, o))
                if j < 0:
                    return PsrHomReport(False, (i, a, None, p, 0.0))
                lhs[j] = lhs.get(j, 0.0) + p
            rhs = {}
            for j, p in R1.transitions[i][a].items():
                rhs[f[j]] = rhs.get(f[j], 0.0) + p
            for j in sorted(set(lhs) | set(rhs)):
                if abs(lhs.get(j, 0.0) - rhs.get(j, 0.0)) > tol:
                    return PsrHomReport(False, (i, a, j, lhs.get(j, 0.0), rhs.get(j, 0.0)))
    return PsrHomReport(True)


def map_by_history(P: Psr, P2: Psr, observation_map, action_map=None, depth: int = 4, tol=PRED_TOL):
    """Induced map on reachable vectors: replay each representative history in ``P2``."""
    R1 = reachable_predictions(P, depth, tol)
    R2 = reachable_predictions(P2, depth, tol)
    amap = action_map or {a: a for a in P.actions}
    out = {}
    for i, hist in enumerate(R1.history):
        psi = P2.psi0
        for a, o in hist:
            psi = P2.update(psi, amap[a], observation_map[o])
        j = -1
        for k, u in enumerate(R2.vectors):
            if np.max(np.abs(u - psi)) <= tol:
                j = k
                break
        if j < 0:
            raise ValueError(f"history {format_test(hist)!r} leaves the reachable set of the target")
        out[i] = j
    return out


# ----------------------------------------------------------------------- JSON

def psr_from_json(data) -> Psr:
    return Psr(
        actions=tuple(data["actions"]),
        observations=tuple(data["observations"]),
        core_tests=tuple(parse_test(t) for t in data["core_tests"]),
        psi0=data["psi0"],
        m={parse_test(t): v for t, v in data.get("m", {}).items()},
        updates={parse_test(k)[0]: v for k, v in data.get("updates", {}).items()},
        m_empty=data.get("m_empty"),
    )


def psr_to_json(P: Psr, depth: int = 4) -> dict:
    out = {
        "actions": list(P.actions),
        "observations": list(P.observations),
        "core_tests": [format_test(q) for q in P.core_tests],
        "psi0": P.psi0.tolist(),
        "m": {format_test(t): v.tolist() for t, v in P.m.items()},
        "updates": {format_test((ao,)): M.tolist() for ao, M in P.updates.items()},
        "depth": depth,
    }
    if P.m_empty is not None:
        out["m_empty"] = P.m_empty.tolist()
    return out
