"""Finite decision models with information fields.

``H = Omega x U_1 x ... x U_n`` is enumerated in lexicographic order (nature first,
then agents in declaration order); a point of ``H`` is referred to by its index.
Sigma-fields on finite sets are represented by their atoms, i.e. partitions of
the index set, and the field generated by several fields is their common refinement.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Mapping, Sequence

from .partition import Partition

H_GUARD = 1_000_000
AGENT_GUARD = 8
PROFILE_GUARD = 1_000_000


class GuardExceeded(ValueError):
    pass


class NotMeasurable(ValueError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


@dataclass
class UdmObject:
    agents: tuple
    omega: tuple
    decisions: dict  # agent -> tuple of decisions
    info: dict  # agent -> Partition of H indices
    prob: dict = None  # omega -> probability
    fields: dict = None  # agent -> Partition of its decisions (power set when absent)

    def __post_init__(self):
        self.agents = tuple(self.agents)
        self.omega = tuple(self.omega)
        if len(set(self.agents)) != len(self.agents):
            raise ValueError("duplicate agent names")
        self.decisions = {a: tuple(self.decisions[a]) for a in self.agents}
        size = len(self.omega)
        for a in self.agents:
            if not self.decisions[a]:
                raise ValueError(f"agent {a!r} has no decisions")
            size *= len(self.decisions[a])
        if size > H_GUARD:
            raise GuardExceeded(f"|H| = {size} exceeds {H_GUARD}")
        self.points = tuple(itertools.product(self.omega, *(self.decisions[a] for a in self.agents)))
        self._index = {h: k for k, h in enumerate(self.points)}
        if self.prob is None:
            self.prob = {w: Fraction(1, len(self.omega)) for w in self.omega}
        if self.fields is None:
            self.fields = {a: Partition.discrete(self.decisions[a]) for a in self.agents}
        all_h = set(range(len(self.points)))
        for a in self.agents:
            part = self.info[a]
            if not isinstance(part, Partition):
                part = Partition(part)
                self.info[a] = part
            if not part.covers(all_h):
                raise ValueError(f"information field of {a!r} is not a partition of H")

    @property
    def size(self) -> int:
        return len(self.points)

    def index(self, h) -> int:
        return self._index[tuple(h)]

    def coord(self, h: int, agent) -> object:
        return self.points[h][1 + self.agents.index(agent)]

    def nature(self, h: int):
        return self.points[h][0]


def field_from_coords(points: Sequence, agents: Sequence, coords: Sequence, include_omega: bool = True) -> Partition:
    """Atoms of the field generated by nature (optionally) and the named agents' decisions."""
    pos = [1 + list(agents).index(c) for c in coords]

    def label(k):
        h = points[k]
        return ((h[0],) if include_omega else ()) + tuple(h[p] for p in pos)

    return Partition.from_labels(range(len(points)), label)


def make_udm(agents: Sequence, omega: Sequence, decisions: Mapping, observes: Mapping, prob=None,
             include_omega: bool = True) -> UdmObject:
    """Build a model whose information fields are generated by observed coordinates.

    ``observes[a]`` lists the agents whose decisions ``a`` sees; nature is seen
    by every agent unless ``include_omega`` is false.
    """
    agents = tuple(agents)
    points = tuple(itertools.product(tuple(omega), *(tuple(decisions[a]) for a in agents)))
    if len(points) > H_GUARD:
        raise GuardExceeded(f"|H| = {len(points)} exceeds {H_GUARD}")
    info = {a: field_from_coords(points, agents, observes.get(a, ()), include_omega) for a in agents}
    return UdmObject(agents, tuple(omega), dict(decisions), info, prob)


def product_field(obj: UdmObject, B: Sequence, include_omega: bool = True) -> Partition:
    """Field induced on ``H`` by projecting onto nature and the decisions of ``B``."""
    unknown = [b for b in B if b not in obj.agents]
    if unknown:
        raise KeyError(f"unknown agents {unknown}")
    return field_from_coords(obj.points, obj.agents, list(B), include_omega)


@dataclass
class MeasurabilityReport:
    ok: bool
    witness: tuple | None = None  # (block, h1, h2) on which the policy is not constant


def check_measurable(policy: Callable | Sequence, info: Partition, decision_field: Partition | None = None
                     ) -> MeasurabilityReport:
    """A policy on ``H`` is measurable iff every information atom maps into a single
    atom of the decision field (constant on atoms when that field is the power set)."""
    value = policy if callable(policy) else (lambda h: policy[h])
    cls = (lambda u: u) if decision_field is None else decision_field.block_of
    for block in info:
        first = cls(value(block[0]))
        for h in block[1:]:
            if cls(value(h)) != first:
                return MeasurabilityReport(False, (block, block[0], h))
    return MeasurabilityReport(True)


@dataclass
class PolicyProfile:
    """Per-agent policy tables indexed by points of ``H``."""

    obj: UdmObject
    tables: dict
    enforce_measurable: bool = True

    def __post_init__(self):
        tables = {}
        for a in self.obj.agents:
            pol = self.tables[a]
            if callable(pol):
                tab = tuple(pol(self.obj.points[h]) for h in range(self.obj.size))
            else:
                tab = tuple(pol)
            if len(tab) != self.obj.size:
                raise ValueError(f"policy of {a!r} must give one decision per point of H")
            allowed = set(self.obj.decisions[a])
            if not set(tab) <= allowed:
                raise ValueError(f"policy of {a!r} uses unknown decisions")
            if self.enforce_measurable:
                rep = check_measurable(tab, self.obj.info[a], self.obj.fields[a])
                if not rep.ok:
                    raise NotMeasurable(f"policy of {a!r} is not measurable from its information field",
                                        rep.witness)
            tables[a] = tab
        self.tables = tables

    def __call__(self, agent, h: int):
        return self.tables[agent][h]


def solutions(obj: UdmObject, profile: PolicyProfile, w) -> list:
    """Joint decisions ``u`` with ``u_a = pi_a(w, u)`` for every agent."""
    out = []
    for u in itertools.product(*(obj.decisions[a] for a in obj.agents)):
        h = obj.index((w,) + u)
        if all(profile(a, h) == u[k] for k, a in enumerate(obj.agents)):
            out.append(u)
    return out


@dataclass
class SolvabilityReport:
    solvable: bool
    witness: tuple | None = None  # (omega, profile tables, solution count)
    profiles: int = 0


def measurable_profiles(obj: UdmObject):
    """Every profile whose policies are constant on information atoms."""
    total = 1
    for a in obj.agents:
        total *= len(obj.decisions[a]) ** len(obj.info[a])
        if total > PROFILE_GUARD:
            raise GuardExceeded(f"more than {PROFILE_GUARD} measurable profiles")
    per_agent = []
    for a in obj.agents:
        blocks = obj.info[a].blocks
        choices = []
        for assign in itertools.product(obj.decisions[a], repeat=len(blocks)):
            tab = [None] * obj.size
            for blk, u in zip(blocks, assign):
                for h in blk:
                    tab[h] = u
            choices.append(tuple(tab))
        per_agent.append(choices)
    for combo in itertools.product(*per_agent):
        yield PolicyProfile(obj, dict(zip(obj.agents, combo)), enforce_measurable=False)


def check_solvable(obj: UdmObject, profile: PolicyProfile | None = None) -> SolvabilityReport:
    """Unique joint fixed point for every state of nature; with no profile, for every
    measurable profile."""
    profiles = [profile] if profile is not None else measurable_profiles(obj)
    count = 0
    for prof in profiles:
        count += 1
        for w in obj.omega:
            sols = solutions(obj, prof, w)
            if len(sols) != 1:
                return SolvabilityReport(False, (w, prof.tables, len(sols)), count)
    return SolvabilityReport(True, None, count)


@dataclass
class CausalityReport:
    causal: bool
    static_order: tuple | None = None
    ordering: dict | None = None  # h index -> tuple of agents


def check_causal(obj: UdmObject) -> CausalityReport:
    """Search for an ordering function ``phi: H -> orderings`` meeting the causality condition.

    At a stage with earlier agents ``P``, the points of ``H`` sharing one prefix form a
    union of atoms of the field generated by nature and ``P``.  The next agent may be
    chosen per atom, and must have an information field that does not split that atom.
    Success therefore depends only on ``(set(P), atom)``, which is memoised.  Orderings
    that are the same for every point are tried first.
    """
    n = len(obj.agents)
    if n > AGENT_GUARD:
        raise GuardExceeded(f"causality search limited to {AGENT_GUARD} agents")
    agents = obj.agents
    pos = {a: 1 + k for k, a in enumerate(agents)}
    info_label = {a: [obj.info[a].block_of(h) for h in range(obj.size)] for a in agents}
    all_h = tuple(range(obj.size))

    def visible(a, atom) -> bool:
        lab = info_label[a]
        first = lab[atom[0]]
        return all(lab[h] == first for h in atom)

    def split(atom, a):
        groups = {}
        for h in atom:
            groups.setdefault(obj.points[h][pos[a]], []).append(h)
        return [tuple(g) for g in groups.values()]

    def roots():
        groups = {}
        for h in all_h:
            groups.setdefault(obj.points[h][0], []).append(h)
        return [tuple(g) for g in groups.values()]

    # fast path: one ordering for all points
    for order in itertools.permutations(agents):
        ok = True
        atoms = roots()
        for a in order:
            if not all(visible(a, atom) for atom in atoms):
                ok = False
                break
            atoms = [sub for atom in atoms for sub in split(atom, a)]
        if ok:
            return CausalityReport(True, tuple(order), {h: tuple(order) for h in all_h})

    @lru_cache(maxsize=None)
    def solve(done: frozenset, atom: tuple):
        if len(done) == n:
            return ()
        for a in agents:
            if a in done or not visible(a, atom):
                continue
            subs = split(atom, a)
            plan = []
            for sub in subs:
                rest = solve(done | {a}, sub)
                if rest is None:
                    break
                plan.append((sub, rest))
            else:
                return (a, tuple(plan))
        return None

    ordering = {}

    def unfold(prefix, atom, plan):
        if plan == ():
            for h in atom:
                ordering[h] = prefix
            return
        a, subs = plan
        for sub, rest in subs:
            unfold(prefix + (a,), sub, rest)

    for atom in roots():
        plan = solve(frozenset(), atom)
        if plan is None:
            return CausalityReport(False)
        unfold((), atom, plan)
    return CausalityReport(True, None, ordering)


def quotient_info_field(fields: Sequence[Partition]) -> Partition:
    """Join of information fields: the field generated by their union (common refinement)."""
    fields = list(fields)
    if not fields:
        raise ValueError("need at least one field")
    out = fields[0]
    for f in fields[1:]:
        out = out.join(f)
    return out


def meet_fields(a: Partition, b: Partition) -> Partition:
    """Largest field contained in both: the finest common coarsening."""
    if a.elements != b.elements:
        raise ValueError("partitions are over different sets")
    parent = {x: x for x in a.elements}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for part in (a, b):
        for blk in part:
            for x in blk[1:]:
                ra, rb = find(blk[0]), find(x)
                if ra != rb:
                    parent[rb] = ra
    return Partition.from_labels(a.elements, find)


# ---------------------------------------------------------------- standard instances

def deadlock_pair(n_values: int = 2) -> UdmObject:
    """Two agents each observing the other's decision (and nature)."""
    vals = tuple(range(n_values))
    return make_udm(("alpha", "beta"), ("w",), {"alpha": vals, "beta": vals}, {"alpha": ["beta"], "beta": ["alpha"]})


def sequential_chain(n_agents: int = 3, n_values: int = 2, n_omega: int = 2) -> UdmObject:
    """Agent ``k`` observes nature and the decisions of agents ``0..k-1``."""
    agents = tuple(f"a{k}" for k in range(n_agents))
    vals = tuple(range(n_values))
    return make_udm(agents, tuple(f"w{i}" for i in range(n_omega)), {a: vals for a in agents},
                    {a: list(agents[:k]) for k, a in enumerate(agents)})


def static_model(n_agents: int = 2, n_values: int = 2, n_omega: int = 2) -> UdmObject:
    agents = tuple(f"a{k}" for k in range(n_agents))
    vals = tuple(range(n_values))
    return make_udm(agents, tuple(f"w{i}" for i in range(n_omega)), {a: vals for a in agents}, {})


# ---------------------------------------------------------------- JSON

def udm_from_json(data) -> UdmObject:
    """``agents``, ``omega`` (list, or mapping to probabilities), ``decisions`` and
    ``info`` per agent, either ``{"observes": [...]}`` or ``{"blocks": [[h, ...], ...]}``."""
    agents = tuple(data["agents"])
    om = data["omega"]
    if isinstance(om, dict):
        omega = tuple(om)
        prob = {w: Fraction(str(p)) for w, p in om.items()}
    else:
        omega, prob = tuple(om), None
    decisions = {a: tuple(data["decisions"][a]) for a in agents}
    points = tuple(itertools.product(omega, *(decisions[a] for a in agents)))
    if len(points) > H_GUARD:
        raise GuardExceeded(f"|H| = {len(points)} exceeds {H_GUARD}")
    info = {}
    for a in agents:
        entry = data["info"][a]
        if "blocks" in entry:
            info[a] = Partition(entry["blocks"])
        else:
            seen = entry.get("observes", entry.get("depends-on", entry.get("depends_on", [])))
            info[a] = field_from_coords(points, agents, seen, entry.get("nature", True))
    return UdmObject(agents, omega, decisions, info, prob)


def udm_to_json(obj: UdmObject) -> dict:
    return {"agents": list(obj.agents), "omega": {w: str(p) for w, p in obj.prob.items()},
            "decisions": {a: list(v) for a, v in obj.decisions.items()},
            "info": {a: {"blocks": [list(b) for b in obj.info[a]]} for a in obj.agents}}
