"""Deterministic simulation of asynchronous fixed-point iteration with stale reads.

Time is a single logical clock.  At step ``t`` every component ``i`` with
``updates[t, i]`` set recomputes its value from a vector whose entry ``j`` is the
value component ``j`` held at time ``tau = max(0, t - delays[t, i, j])``; all other
components keep their value.  The new vector is ``x(t + 1)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .kernels import impl
from .mdp import Mdp
from .solvers import bellman_optimal_backup

MAX_DELAY = 255
STARVATION_WINDOW = 0.1


@dataclass(frozen=True)
class Schedule:
    """Update times and read staleness for ``n`` components over ``horizon`` steps."""

    updates: np.ndarray  # bool (horizon, n)
    delays: np.ndarray  # uint8 (horizon, n, n); entry [t, i, j] is how stale i's read of j is
    max_staleness: int
    seed: int | None = None

    @property
    def n(self) -> int:
        return self.updates.shape[1]

    @property
    def horizon(self) -> int:
        return self.updates.shape[0]

    def tau(self, t: int, i: int, j: int) -> int:
        return max(0, t - int(self.delays[t, i, j]))

    def max_gap(self) -> np.ndarray:
        """Longest run of consecutive steps without an update, per component."""
        gaps = np.zeros(self.n, dtype=np.int64)
        for i in range(self.n):
            times = np.flatnonzero(self.updates[:, i])
            edges = np.concatenate(([-1], times, [self.horizon]))
            gaps[i] = int(np.max(np.diff(edges)) - 1)
        return gaps

    def starved(self, until: int | None = None) -> list[int]:
        """Components with no update in the final tenth of ``[0, until)``."""
        until = self.horizon if until is None else until
        start = int(math.floor(until * (1.0 - STARVATION_WINDOW)))
        if until <= 0:
            return []
        window = self.updates[start:until]
        return [int(i) for i in np.flatnonzero(~window.any(axis=0))]


def make_schedule(n: int, horizon: int, p_update=1.0, D: int = 0, seed: int | None = 0) -> Schedule:
    """Random schedule: each ``(t, i)`` is an update time with probability ``p_update``
    (scalar or one per component) and every read is stale by a uniform ``0..D`` steps."""
    p = np.broadcast_to(np.asarray(p_update, dtype=float), (n,))
    if np.any(p < 0) or np.any(p > 1):
        raise ValueError("update probabilities must lie in [0, 1]")
    if not 0 <= D <= MAX_DELAY:
        raise ValueError(f"staleness bound must be in 0..{MAX_DELAY}")
    rng = np.random.default_rng(seed)
    updates = rng.random((horizon, n)) < p
    if D == 0:
        delays = np.zeros((horizon, n, n), dtype=np.uint8)
    else:
        delays = rng.integers(0, D + 1, size=(horizon, n, n), dtype=np.uint8)
    return Schedule(updates, delays, int(D), seed)


def synchronous_schedule(n: int, horizon: int) -> Schedule:
    return make_schedule(n, horizon, 1.0, 0, None)


@dataclass
class Trace:
    """Per-update events plus the sup-residual after every step.

    ``residuals[t]`` is the residual of ``x(t)``; ``states[t]`` is ``x(t)`` when
    recorded.  ``box_index`` labels each event with the largest ``k`` such that the
    step ends at or after the start of box ``k``.
    """

    t: np.ndarray
    component: np.ndarray
    value: np.ndarray
    residual: np.ndarray
    box_index: np.ndarray
    residuals: np.ndarray
    states: np.ndarray | None
    converged: bool
    steps: int
    box_starts: list
    schedule: Schedule
    read_sets: list
    names: list = field(default_factory=list)

    def __len__(self):
        return len(self.t)

    def rows(self):
        for k in range(len(self.t)):
            yield (int(self.t[k]), int(self.component[k]), float(self.value[k]),
                   float(self.residual[k]), int(self.box_index[k]))


def box_starts(schedule: Schedule, read_sets: Sequence[Sequence[int]] | None = None, until: int | None = None) -> list:
    """Start times ``t_0 = 0 < t_1 < ...`` of the nested boxes.

    Box ``k + 1`` starts once every component has made an update whose reads, and
    the reads of all its later updates, come from times at or after ``t_k``.  The
    list stops when some component never satisfies that within ``until`` steps.
    """
    n = schedule.n
    until = schedule.horizon if until is None else until
    if read_sets is None:
        read_sets = [list(range(n))] * n
    upd = schedule.updates[:until]
    # earliest time read by each (t, i)
    min_read = np.zeros((until, n), dtype=np.int64)
    steps = np.arange(until)
    for i in range(n):
        rs = list(read_sets[i])
        if rs:
            worst = schedule.delays[:until, i, rs].max(axis=1).astype(np.int64)
        else:
            worst = np.zeros(until, dtype=np.int64)
        min_read[:, i] = np.maximum(0, steps - worst)
    times = [np.flatnonzero(upd[:, i]) for i in range(n)]
    starts = [0]
    while True:
        tk = starts[-1]
        nxt = 0
        for i in range(n):
            ti = times[i]
            pos = int(np.searchsorted(ti, tk))
            # the last update at or after tk that still reads before tk
            last_bad = pos - 1
            q = pos
            while q < len(ti) and ti[q] < tk + schedule.max_staleness:
                if min_read[ti[q], i] < tk:
                    last_bad = q
                q += 1
            good = last_bad + 1
            if good >= len(ti):
                return starts
            nxt = max(nxt, int(ti[good]) + 1)
        if nxt > until:
            return starts
        starts.append(nxt)


def _label_boxes(ev_t, starts) -> np.ndarray:
    if len(ev_t) == 0:
        return np.zeros(0, dtype=np.int64)
    return np.searchsorted(np.asarray(starts), np.asarray(ev_t) + 1, side="right").astype(np.int64) - 1


def _distance(a, b) -> float:
    if isinstance(a, (int, float, np.floating, np.integer)) and isinstance(b, (int, float, np.floating, np.integer)):
        return abs(float(a) - float(b))
    return 0.0 if a == b else 1.0


def _run(update_fns, read_sets, x0, schedule: Schedule, tol, record_states, gather, distance=_distance, names=()):
    """Shared engine for the generic drivers.

    ``gather(i, lookup)`` builds the argument of ``update_fns[i]`` where
    ``lookup(j)`` returns component ``j``'s stale value.
    """
    n = schedule.n
    if len(update_fns) != n or len(x0) != n:
        raise ValueError("schedule, components and initial value disagree on the number of components")
    depth = schedule.max_staleness + 1
    x = list(x0)
    ring = [list(x) for _ in range(depth)]
    fresh = lambda cur: (lambda j: cur[j])

    def residual(cur):
        look = fresh(cur)
        return max((distance(update_fns[i](gather(i, look)), cur[i]) for i in range(n)), default=0.0)

    ev_t, ev_i, ev_v, ev_r = [], [], [], []
    residuals = [residual(x)]
    states = [list(x)] if record_states else None
    steps = 0
    converged = residuals[0] <= tol
    if not converged:
        for t in range(schedule.horizon):
            new = list(x)
            touched = np.flatnonzero(schedule.updates[t]).tolist()
            for i in touched:
                di = schedule.delays[t, i]

                def look(j, t=t, di=di):
                    return ring[max(0, t - int(di[j])) % depth][j]

                new[i] = update_fns[i](gather(i, look))
            x = new
            ring[(t + 1) % depth] = list(x)
            r = residual(x)
            steps = t + 1
            residuals.append(r)
            if record_states:
                states.append(list(x))
            for i in touched:
                ev_t.append(t)
                ev_i.append(i)
                ev_v.append(x[i])
                ev_r.append(r)
            if r <= tol:
                converged = True
                break
    starts = box_starts(schedule, read_sets, until=steps)
    try:
        values = np.asarray(ev_v, dtype=float)
        state_arr = np.asarray(states, dtype=float) if record_states else None
    except (TypeError, ValueError):
        values = np.asarray(ev_v, dtype=object)
        state_arr = np.asarray(states, dtype=object) if record_states else None
    trace = Trace(np.asarray(ev_t, dtype=np.int64), np.asarray(ev_i, dtype=np.int64), values,
                  np.asarray(ev_r, dtype=float), _label_boxes(ev_t, starts), np.asarray(residuals, dtype=float),
                  state_arr, converged, steps, starts, schedule, [list(r) for r in read_sets], list(names))
    return x, trace


def async_fixed_point(components: Sequence[Callable], x0, schedule: Schedule, tol: float = 1e-8,
                      record_states: bool = True):
    """Run the asynchronous recursion for ``x_i <- f_i(x)``.

    Each ``f_i`` receives the full (stale) vector as a numpy array.  Returns the last
    iterate and the trace; ``trace.converged`` is false when the horizon ran out.
    """
    n = schedule.n
    read_sets = [list(range(n))] * n
    gather = lambda i, look: np.array([look(j) for j in range(n)], dtype=float)
    x, trace = _run(list(components), read_sets, [float(v) for v in x0], schedule, tol, record_states, gather)
    return np.asarray(x, dtype=float), trace


@dataclass(frozen=True)
class Component:
    """One node of a dependency diagram: ``update`` maps ``{name: value}`` over ``reads``."""

    reads: tuple
    update: Callable


def async_final_coalgebra(diagram: Mapping[str, Component], x0: Mapping, schedule: Schedule, tol: float = 1e-8,
                          distance: Callable = _distance, record_states: bool = True):
    """Asynchronous iteration over a diagram of components with declared read-sets.

    Components are ordered as in ``diagram``; component ``c`` sees only the stale
    values of ``diagram[c].reads``.  Returns ``({name: value}, Trace)``.
    """
    names = list(diagram)
    index = {c: k for k, c in enumerate(names)}
    read_sets = []
    for c in names:
        comp = diagram[c]
        unknown = [r for r in comp.reads if r not in index]
        if unknown:
            raise KeyError(f"component {c!r} reads unknown component(s) {unknown}")
        read_sets.append([index[r] for r in comp.reads])
    missing = [c for c in names if c not in x0]
    if missing:
        raise KeyError(f"no initial value for {missing}")
    fns = [diagram[c].update for c in names]

    def gather(i, look):
        return {names[j]: look(j) for j in read_sets[i]}

    x, trace = _run(fns, read_sets, [x0[c] for c in names], schedule, tol, record_states, gather, distance, names)
    return dict(zip(names, x)), trace


def product_diagram(components: Sequence[Callable]) -> dict:
    """Diagram in which every component reads every other (vector fixed point)."""
    names = [f"x{i}" for i in range(len(components))]

    def wrap(f):
        return lambda vals: f(np.array([vals[c] for c in names], dtype=float))

    return {c: Component(tuple(names), wrap(f)) for c, f in zip(names, components)}


def bellman_components(M: Mdp) -> list:
    """Per-state optimal Bellman updates, each mapping the full vector to one value."""
    P, R, adm, g = M.P, M.R, M.admissible, M.gamma

    def make(s):
        acts = [a for a in range(M.n_actions) if adm[s, a]]

        def f(x):
            return max(float(R[s, a] + g * (P[s, a] @ x)) for a in acts)

        return f

    return [make(s) for s in range(M.n_states)]


def bellman_read_sets(M: Mdp) -> list:
    """States each Bellman component actually reads: the support of its transitions."""
    support = (M.P * M.admissible[:, :, None]).any(axis=1)
    return [np.flatnonzero(support[s]).tolist() for s in range(M.n_states)]


def bellman_diagram(M: Mdp) -> dict:
    reads = bellman_read_sets(M)
    names = list(M.states)
    diagram = {}
    for s in range(M.n_states):
        acts = [a for a in range(M.n_actions) if M.admissible[s, a]]
        support = reads[s]

        def f(vals, s=s, acts=acts, support=support):
            x = np.array([vals[names[j]] for j in support], dtype=float)
            return max(float(M.R[s, a] + M.gamma * (M.P[s, a, support] @ x)) for a in acts)

        diagram[names[s]] = Component(tuple(names[j] for j in support), f)
    return diagram


def async_value_iteration(M: Mdp, schedule: Schedule, tol: float = 1e-10, V0=None, record_states: bool = True):
    """Asynchronous Bellman iteration on the compiled inner loop.

    Returns ``(V, Trace)``.
    """
    if schedule.n != M.n_states:
        raise ValueError("schedule size does not match the number of states")
    x0 = np.zeros(M.n_states) if V0 is None else np.asarray(V0, dtype=float)
    (x, steps, states, ev_t, ev_i, ev_v, ev_r, residuals, converged) = impl.async_bellman(
        M.P, M.R, M.admissible.astype(np.uint8), M.gamma, x0, schedule.updates.astype(np.uint8),
        schedule.delays, tol, record_states)
    reads = bellman_read_sets(M)
    starts = box_starts(schedule, reads, until=steps)
    trace = Trace(np.asarray(ev_t), np.asarray(ev_i), np.asarray(ev_v), np.asarray(ev_r), _label_boxes(ev_t, starts),
                  np.asarray(residuals), np.asarray(states) if record_states else None, bool(converged), int(steps),
                  starts, schedule, reads, list(M.states))
    return np.asarray(x), trace


@dataclass
class ActReport:
    box_starts: list
    box_index: np.ndarray
    final_box: float
    violations: list
    stalled: bool
    starved: list
    radius0: float

    @property
    def grows(self) -> bool:
        return not self.stalled

    @property
    def ok(self) -> bool:
        return not self.violations and not self.stalled


def verify_act_conditions(trace: Trace, x_star, gamma: float, operator: Callable | None = None,
                          tol: float = 1e-8, slack: float = 1e-9) -> ActReport:
    """Check the nested-box picture on a recorded run.

    The boxes are ``X(k) = {x : ||x - x*|| <= gamma^k ||x(0) - x*||}`` in the sup
    norm.  For every recorded step ``t >= t_k`` the iterate must lie in ``X(k)``.
    ``stalled`` is set when no new box starts during the final tenth of the run.
    If ``operator`` is given, ``x_star`` must be its fixed point to within ``tol``.
    """
    if not 0 <= gamma < 1:
        raise ValueError("gamma must lie in [0, 1)")
    x_star = np.asarray(x_star, dtype=float)
    if operator is not None:
        r = float(np.max(np.abs(np.asarray(operator(x_star), dtype=float) - x_star), initial=0.0))
        if r > tol:
            raise ValueError(f"x_star is not a fixed point: residual {r:.3e}")
    if trace.states is None:
        raise ValueError("trace has no recorded states")
    states = np.asarray(trace.states, dtype=float)
    errs = np.max(np.abs(states - x_star), axis=1)
    r0 = float(errs[0])
    starved = trace.schedule.starved(trace.steps)
    if r0 == 0.0:
        return ActReport([0], np.full(len(trace), np.inf), math.inf, [], False, starved, 0.0)
    starts = trace.box_starts
    violations = []
    k = 0
    for t in range(len(errs)):
        while k + 1 < len(starts) and starts[k + 1] <= t:
            k += 1
        bound = gamma ** k * r0
        if errs[t] > bound + slack * max(1.0, r0):
            violations.append((t, k, float(errs[t]), bound))
    cutoff = trace.steps * (1.0 - STARVATION_WINDOW)
    stalled = trace.steps > 0 and starts[-1] < cutoff
    return ActReport(list(starts), trace.box_index, float(len(starts) - 1), violations, bool(stalled), starved, r0)


def q_value_diagram(M: Mdp) -> dict:
    """One component per admissible ``(s, a)``: ``Q(s,a) <- R + gamma sum_s' P max_a' Q(s', a')``."""
    pairs = [(s, a) for s in range(M.n_states) for a in M.admissible_actions(s)]
    name = {p: f"{M.states[p[0]]}|{M.actions[p[1]]}" for p in pairs}
    by_state = {s: [name[(s, a)] for a in M.admissible_actions(s)] for s in range(M.n_states)}
    diagram = {}
    for s, a in pairs:
        succ = np.flatnonzero(M.P[s, a]).tolist()
        reads = tuple(n for s2 in succ for n in by_state[s2])

        def f(vals, s=s, a=a, succ=succ):
            return float(M.R[s, a] + M.gamma * sum(M.P[s, a, s2] * max(vals[n] for n in by_state[s2]) for s2 in succ))

        diagram[name[(s, a)]] = Component(reads, f)
    return diagram


def policy_evaluation_diagram(M: Mdp, pi: np.ndarray) -> dict:
    """Per-state components of ``V <- R_pi + gamma P_pi V`` for a stochastic table ``pi[s, a]``."""
    names = list(M.states)
    P_pi = np.einsum("sa,sat->st", pi, M.P)
    R_pi = np.einsum("sa,sa->s", pi, M.R)
    diagram = {}
    for s in range(M.n_states):
        support = np.flatnonzero(P_pi[s]).tolist()

        def f(vals, s=s, support=support):
            x = np.array([vals[names[j]] for j in support], dtype=float)
            return float(R_pi[s] + M.gamma * (P_pi[s, support] @ x))

        diagram[names[s]] = Component(tuple(names[j] for j in support), f)
    return diagram
