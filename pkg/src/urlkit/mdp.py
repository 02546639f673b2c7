"""Tabular MDPs, their homomorphisms, quotients and coalgebra embedding."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .coalgebra import FiniteCoalgebra, largest_bisimulation
from .functor import Fun, Inl, Inr, Lab, Pair, Pt, make_dist, parse_functor
from .partition import Partition

PROB_TOL = 1e-9
HOM_SEARCH_LIMIT = 10**7


class ValidationError(ValueError):
    """Input violates a model invariant (CLI exit code 2)."""


class InconsistentPartition(ValueError):
    def __init__(self, message, witness):
        super().__init__(message)
        self.witness = witness


@dataclass
class Mdp:
    """Finite MDP with kernel ``P[s, a, s']``, expected reward ``R[s, a]`` and discount ``gamma``.

    ``admissible[s, a]`` marks the actions available in each state; rows of ``P``
    for inadmissible pairs are zero.
    """

    states: tuple
    actions: tuple
    P: np.ndarray
    R: np.ndarray
    gamma: float
    admissible: np.ndarray = None

    def __post_init__(self):
        self.states = tuple(str(s) for s in self.states)
        self.actions = tuple(str(a) for a in self.actions)
        n, m = len(self.states), len(self.actions)
        if n == 0 or m == 0:
            raise ValidationError("an MDP needs at least one state and one action")
        if len(set(self.states)) != n or len(set(self.actions)) != m:
            raise ValidationError("duplicate state or action names")
        self.P = np.array(self.P, dtype=float)
        self.R = np.array(self.R, dtype=float)
        if self.P.shape != (n, m, n) or self.R.shape != (n, m):
            raise ValidationError(f"expected P of shape {(n, m, n)} and R of shape {(n, m)}")
        if self.admissible is None:
            self.admissible = np.ones((n, m), dtype=bool)
        self.admissible = np.array(self.admissible, dtype=bool)
        if not (0.0 <= float(self.gamma) < 1.0):
            raise ValidationError(f"discount must lie in [0, 1), got {self.gamma!r}")
        self.gamma = float(self.gamma)
        if not np.all(np.isfinite(self.P)) or np.any(self.P < 0):
            raise ValidationError("transition probabilities must be finite and nonnegative")
        if not np.all(np.isfinite(self.R[self.admissible])):
            raise ValidationError("rewards must be finite")
        if not self.admissible.any(axis=1).all():
            s = int(np.flatnonzero(~self.admissible.any(axis=1))[0])
            raise ValidationError(f"state {self.states[s]!r} has no admissible action")
        sums = self.P.sum(axis=2)
        bad = self.admissible & (np.abs(sums - 1.0) > PROB_TOL)
        if bad.any():
            s, a = map(int, np.argwhere(bad)[0])
            raise ValidationError(
                f"row ({self.states[s]!r}, {self.actions[a]!r}) sums to {sums[s, a]!r}, not 1")
        self.P[~self.admissible] = 0.0
        self.R[~self.admissible] = 0.0

    @property
    def n_states(self):
        return len(self.states)

    @property
    def n_actions(self):
        return len(self.actions)

    def state_index(self, s):
        return self.states.index(str(s))

    def action_index(self, a):
        return self.actions.index(str(a))

    def admissible_actions(self, s: int):
        return [int(a) for a in np.flatnonzero(self.admissible[s])]

    def same_as(self, other, tol=0.0) -> bool:
        return (self.states == other.states and self.actions == other.actions
                and self.gamma == other.gamma
                and np.array_equal(self.admissible, other.admissible)
                and np.allclose(self.P, other.P, rtol=0, atol=tol)
                and np.allclose(self.R, other.R, rtol=0, atol=tol))


def random_mdp(n_states, n_actions, gamma, seed, density=1.0, reward_range=(0.0, 1.0)) -> Mdp:
    """Seeded random MDP; ``density`` is the chance that a successor gets nonzero mass."""
    rng = np.random.default_rng(seed)
    P = rng.random((n_states, n_actions, n_states))
    if density < 1.0:
        mask = rng.random(P.shape) < density
        pick = rng.integers(0, n_states, size=(n_states, n_actions))
        mask[np.arange(n_states)[:, None], np.arange(n_actions)[None, :], pick] = True
        P = P * mask
    P /= P.sum(axis=2, keepdims=True)
    lo, hi = reward_range
    R = lo + (hi - lo) * rng.random((n_states, n_actions))
    return Mdp(tuple(f"s{i}" for i in range(n_states)), tuple(f"a{j}" for j in range(n_actions)), P, R, gamma)


# ------------------------------------------------------------------ JSON form

def mdp_from_json(data) -> Mdp:
    """Parse the JSON model form.

    Transitions may carry a per-successor reward ``"r"``; it is folded into the
    expected reward ``R(s, a)`` together with any ``"rewards"`` entries.
    """
    states = [str(s) for s in data["states"]]
    actions = [str(a) for a in data["actions"]]
    si = {s: i for i, s in enumerate(states)}
    ai = {a: i for i, a in enumerate(actions)}
    n, m = len(states), len(actions)
    P = np.zeros((n, m, n))
    R = np.zeros((n, m))
    seen = np.zeros((n, m), dtype=bool)

    def lookup(table, key, what):
        if str(key) not in table:
            raise ValidationError(f"unknown {what} {key!r}")
        return table[str(key)]

    for tr in data["transitions"]:
        s = lookup(si, tr["s"], "state")
        a = lookup(ai, tr["a"], "action")
        s2 = lookup(si, tr["s2"], "state")
        p = float(tr["p"])
        P[s, a, s2] += p
        seen[s, a] = True
        if "r" in tr:
            R[s, a] += p * float(tr["r"])
    for rw in data.get("rewards", []):
        s = lookup(si, rw["s"], "state")
        a = lookup(ai, rw["a"], "action")
        R[s, a] += float(rw["r"])
    if "admissible" in data:
        adm = np.zeros((n, m), dtype=bool)
        for s, acts in data["admissible"].items():
            for a in acts:
                adm[lookup(si, s, "state"), lookup(ai, a, "action")] = True
    else:
        adm = seen
    return Mdp(tuple(states), tuple(actions), P, R, float(data["gamma"]), adm)


def mdp_to_json(M: Mdp) -> dict:
    out = {"states": list(M.states), "actions": list(M.actions), "gamma": M.gamma, "transitions": [], "rewards": []}
    for s in range(M.n_states):
        for a in M.admissible_actions(s):
            for s2 in np.flatnonzero(M.P[s, a]):
                out["transitions"].append(
                    {"s": M.states[s], "a": M.actions[a], "s2": M.states[s2], "p": float(M.P[s, a, s2])})
            out["rewards"].append({"s": M.states[s], "a": M.actions[a], "r": float(M.R[s, a])})
    if not M.admissible.all():
        out["admissible"] = {M.states[s]: [M.actions[a] for a in M.admissible_actions(s)] for s in range(M.n_states)}
    return out


# -------------------------------------------------------------- homomorphisms

@dataclass(frozen=True)
class MdpHom:
    """State map ``f`` and per-state action maps ``g[s][a]`` (index form, -1 where inadmissible)."""

    f: tuple
    g: tuple

    @classmethod
    def identity(cls, M: Mdp):
        return cls(tuple(range(M.n_states)),
                   tuple(tuple(a if M.admissible[s, a] else -1 for a in range(M.n_actions))
                         for s in range(M.n_states)))

    @classmethod
    def from_names(cls, M: Mdp, M2: Mdp, f: dict, g: dict | None = None):
        """Build from name mappings; ``g`` defaults to keeping action names."""
        fi = tuple(M2.state_index(f[s]) for s in M.states)
        rows = []
        for s in range(M.n_states):
            row = []
            for a in range(M.n_actions):
                if not M.admissible[s, a]:
                    row.append(-1)
                    continue
                name = M.actions[a] if g is None else g[M.states[s]][M.actions[a]]
                row.append(M2.action_index(name))
            rows.append(tuple(row))
        return cls(fi, tuple(rows))

    def to_json(self, M: Mdp, M2: Mdp) -> dict:
        return {
            "f": {M.states[s]: M2.states[t] for s, t in enumerate(self.f)},
            "g": {M.states[s]: {M.actions[a]: M2.actions[b] for a, b in enumerate(row) if b >= 0}
                  for s, row in enumerate(self.g)},
        }


@dataclass
class MdpHomReport:
    ssp_ok: bool
    reward_ok: bool
    witness: tuple = None
    details: dict = field(default_factory=dict)

    @property
    def ok(self):
        return self.ssp_ok and self.reward_ok


def _validate_hom(M: Mdp, M2: Mdp, h: MdpHom):
    if len(h.f) != M.n_states or len(h.g) != M.n_states:
        raise ValueError("homomorphism does not cover the source states")
    if any(not 0 <= t < M2.n_states for t in h.f):
        raise ValueError("state map leaves the target")
    if set(h.f) != set(range(M2.n_states)):
        raise ValueError("state map is not surjective")
    for s in range(M.n_states):
        t = h.f[s]
        image = set()
        for a in M.admissible_actions(s):
            b = h.g[s][a]
            if not (0 <= b < M2.n_actions) or not M2.admissible[t, b]:
                raise ValueError(f"action map at {M.states[s]!r} leaves the admissible set of {M2.states[t]!r}")
            image.add(b)
        if image != set(M2.admissible_actions(t)):
            raise ValueError(f"action map at {M.states[s]!r} is not surjective")


def _state_violation(M, M2, f, s, g_s, tol):
    """First SSP and reward violations at source state ``s`` (or ``None``)."""
    ssp = reward = None
    t = f[s]
    nt = M2.n_states
    for a in M.admissible_actions(s):
        b = g_s[a]
        block_mass = np.bincount(f, weights=M.P[s, a], minlength=nt)
        diff = np.abs(block_mass - M2.P[t, b])
        if ssp is None and diff.max() > tol:
            t2 = int(np.argmax(diff > tol))
            s2 = int(np.flatnonzero(np.asarray(f) == t2)[0])
            ssp = (s, a, s2)
        if reward is None and abs(M.R[s, a] - M2.R[t, b]) > tol:
            reward = (s, a)
        if ssp is not None and reward is not None:
            break
    return ssp, reward


def check_mdp_homomorphism(M: Mdp, M2: Mdp, h: MdpHom, tol=PROB_TOL) -> MdpHomReport:
    """Check the stochastic substitution property and reward preservation."""
    _validate_hom(M, M2, h)
    f = np.asarray(h.f)
    first_ssp = first_rew = None
    for s in range(M.n_states):
        ssp, rew = _state_violation(M, M2, f, s, h.g[s], tol)
        first_ssp = first_ssp or ssp
        first_rew = first_rew or rew
    witness = None
    if first_ssp is not None:
        s, a, s2 = first_ssp
        witness = ("ssp", M.states[s], M.actions[a], M.states[s2])
    elif first_rew is not None:
        s, a = first_rew
        witness = ("reward", M.states[s], M.actions[a])
    return MdpHomReport(first_ssp is None, first_rew is None, witness)


def quotient_mdp(M: Mdp, partition, tol=PROB_TOL):
    """Collapse states along a reward- and transition-consistent partition.

    Blocks are ordered by first appearance in ``M.states`` and named by that first
    member, so the discrete partition returns ``M`` unchanged.  Actions are kept.
    """
    blocks = [list(b) for b in (partition.blocks if isinstance(partition, Partition) else partition)]
    index = {}
    for k, b in enumerate(blocks):
        for s in b:
            s = M.state_index(s) if not isinstance(s, (int, np.integer)) else int(s)
            if s in index:
                raise ValueError(f"state {M.states[s]!r} appears in two blocks")
            index[s] = k
    if len(index) != M.n_states:
        raise ValueError("partition does not cover the states")
    order = sorted(range(len(blocks)), key=lambda k: min(s for s, kk in index.items() if kk == k))
    renum = {k: i for i, k in enumerate(order)}
    f = np.array([renum[index[s]] for s in range(M.n_states)])
    nb = len(blocks)
    reps = [int(np.flatnonzero(f == i)[0]) for i in range(nb)]
    P2 = np.zeros((nb, M.n_actions, nb))
    R2 = np.zeros((nb, M.n_actions))
    adm2 = np.zeros((nb, M.n_actions), dtype=bool)
    for i, r in enumerate(reps):
        adm2[i] = M.admissible[r]
        R2[i] = M.R[r]
        for a in M.admissible_actions(r):
            P2[i, a] = np.bincount(f, weights=M.P[r, a], minlength=nb)
    for s in range(M.n_states):
        i, r = f[s], reps[f[s]]
        if not np.array_equal(M.admissible[s], adm2[i]):
            raise InconsistentPartition(
                f"{M.states[s]!r} and {M.states[r]!r} have different admissible actions",
                ("admissible", M.states[r], M.states[s]))
        for a in M.admissible_actions(s):
            if abs(M.R[s, a] - R2[i, a]) > tol:
                raise InconsistentPartition(
                    f"{M.states[s]!r} and {M.states[r]!r} differ in reward under {M.actions[a]!r}",
                    ("reward", M.states[r], M.states[s], M.actions[a]))
            if np.abs(np.bincount(f, weights=M.P[s, a], minlength=nb) - P2[i, a]).max() > tol:
                raise InconsistentPartition(
                    f"{M.states[s]!r} and {M.states[r]!r} differ in block mass under {M.actions[a]!r}",
                    ("ssp", M.states[r], M.states[s], M.actions[a]))
    Q = Mdp(tuple(M.states[r] for r in reps), M.actions, P2, R2, M.gamma, adm2)
    g = tuple(tuple(a if M.admissible[s, a] else -1 for a in range(M.n_actions)) for s in range(M.n_states))
    return Q, MdpHom(tuple(int(x) for x in f), g)


def enumerate_mdp_homomorphisms(M: Mdp, M2: Mdp, cap=None, tol=PROB_TOL) -> list:
    """Every homomorphism ``M -> M2``, lexicographic in ``(f, g_0, g_1, ...)``."""
    space = M2.n_states ** M.n_states * M2.n_actions ** int(M.admissible.sum())
    if space > HOM_SEARCH_LIMIT:
        raise ValueError(f"search space {space} exceeds {HOM_SEARCH_LIMIT}")
    out = []
    n2 = M2.n_states
    for f in itertools.product(range(n2), repeat=M.n_states):
        if len(set(f)) != n2:
            continue
        farr = np.asarray(f)
        per_state = []
        for s in range(M.n_states):
            acts = M.admissible_actions(s)
            targets = M2.admissible_actions(f[s])
            valid = []
            for choice in itertools.product(targets, repeat=len(acts)):
                if set(choice) != set(targets):
                    continue
                g_s = [-1] * M.n_actions
                for a, b in zip(acts, choice):
                    g_s[a] = b
                ssp, rew = _state_violation(M, M2, farr, s, g_s, tol)
                if ssp is None and rew is None:
                    valid.append(tuple(g_s))
            if not valid:
                break
            per_state.append(valid)
        else:
            for g in itertools.product(*per_state):
                out.append(MdpHom(tuple(f), tuple(g)))
                if cap is not None and len(out) >= cap:
                    return out
    return out


@dataclass
class InvarianceReport:
    gap: float
    ok: bool
    values: np.ndarray
    image_values: np.ndarray


def optimal_value_invariance(M: Mdp, M2: Mdp, h: MdpHom, tol=1e-6) -> InvarianceReport:
    """Compare optimal values of ``M`` with those of ``M2`` pulled back along ``h.f``."""
    from .solvers import policy_iteration

    V = policy_iteration(M).values
    V2 = policy_iteration(M2).values
    gap = float(np.max(np.abs(V - V2[np.asarray(h.f)])))
    return InvarianceReport(gap, gap <= tol, V, V2)


# ---------------------------------------------------------- coalgebra embedding

def _reward_label(r: float) -> str:
    return repr(float(r))


def mdp_to_coalgebra(M: Mdp) -> FiniteCoalgebra:
    """Embed ``M`` as a coalgebra of ``(D x R)^A``.

    Rewards become constant labels.  When some actions are inadmissible the
    functor is ``(D x R + 1)^A`` and missing actions map to the unit.
    """
    labels = sorted({_reward_label(M.R[s, a]) for s in range(M.n_states) for a in M.admissible_actions(s)})
    partial = not M.admissible.all()
    text = "(D x R + 1)^A" if partial else "(D x R)^A"
    F = parse_functor(text, {"A": M.actions, "R": labels})
    alpha = {}
    for s in range(M.n_states):
        row = []
        for a in range(M.n_actions):
            if not M.admissible[s, a]:
                row.append((M.actions[a], Inr(Lab("*"))))
                continue
            mu = make_dist((Pt(M.states[t]), M.P[s, a, t]) for t in np.flatnonzero(M.P[s, a]))
            val = Pair(mu, Lab(_reward_label(M.R[s, a])))
            row.append((M.actions[a], Inl(val) if partial else val))
        alpha[M.states[s]] = Fun(tuple(row))
    return FiniteCoalgebra(M.states, F, alpha)


def coalgebra_to_mdp(C: FiniteCoalgebra, gamma: float) -> Mdp:
    """Inverse of :func:`mdp_to_coalgebra`."""
    states = C.states
    first = C.alpha[states[0]]
    actions = tuple(k for k, _ in first.items)
    n, m = len(states), len(actions)
    si = {s: i for i, s in enumerate(states)}
    P = np.zeros((n, m, n))
    R = np.zeros((n, m))
    adm = np.zeros((n, m), dtype=bool)
    for s in states:
        for a, (_, val) in enumerate(C.alpha[s].items):
            if isinstance(val, Inr):
                continue
            if isinstance(val, Inl):
                val = val.value
            adm[si[s], a] = True
            for pt, mass in val.first.items:
                P[si[s], a, si[pt.name]] = mass
            R[si[s], a] = float(val.second.label)
    return Mdp(states, actions, P, R, gamma, adm)


def minimize_mdp(M: Mdp):
    """Quotient by the largest bisimulation.  Returns ``(quotient, hom, partition)``."""
    part = largest_bisimulation(mdp_to_coalgebra(M))
    Q, h = quotient_mdp(M, part)
    return Q, h, part


def chain_mdp(n_states: int = 2, gamma: float = 0.5, actions: int = 1, slip: float = 0.0) -> Mdp:
    """Chain ``s0 -> s1 -> ... -> s{n-1}`` with an absorbing, rewardless last state.

    Moving into the last state pays 1.  With two actions the second one stays put
    and pays nothing.  ``slip`` is the chance that an action has the other effect.
    """
    if n_states < 2 or actions not in (1, 2):
        raise ValueError("a chain needs at least two states and one or two actions")
    n = n_states
    P = np.zeros((n, actions, n))
    R = np.zeros((n, actions))
    for s in range(n - 1):
        fwd, stay = np.zeros(n), np.zeros(n)
        fwd[s + 1] = 1.0
        stay[s] = 1.0
        moves = [fwd, stay][:actions]
        for a in range(actions):
            other = moves[1 - a] if actions == 2 else moves[a]
            P[s, a] = (1.0 - slip) * moves[a] + slip * other
            R[s, a] = P[s, a, n - 1] if s == n - 2 else 0.0
    P[n - 1, :, n - 1] = 1.0
    return Mdp(tuple(f"s{i}" for i in range(n)), tuple(f"a{j}" for j in range(actions)), P, R, gamma)
