"""Finite coalgebras: homomorphisms, bisimulations, minimization, coproducts."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .functor import (
    DIST_TOL,
    Pt,
    ShapeError,
    apply_functor_map,
    approx_equal,
    check_shape,
    element_from_json,
    element_to_json,
    enumerate_image,
    fmap,
    format_functor,
    label_sets,
    lift_relation,
    parse_functor,
)
from .partition import Partition


class FunctorMismatch(ValueError):
    pass


@dataclass(frozen=True)
class FiniteCoalgebra:
    """A finite carrier with a transition map ``alpha: state -> F(carrier)``."""

    states: tuple
    functor: object
    alpha: Mapping

    def __post_init__(self):
        states = tuple(self.states)
        if len(set(states)) != len(states):
            raise ValueError("duplicate state names")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "alpha", dict(self.alpha))
        missing = [s for s in states if s not in self.alpha]
        if missing:
            raise ValueError(f"alpha undefined on {missing[0]!r}")
        extra = [s for s in self.alpha if s not in set(states)]
        if extra:
            raise ValueError(f"alpha defined on unknown state {extra[0]!r}")
        carrier = set(states)
        for s in states:
            try:
                check_shape(self.functor, self.alpha[s], carrier)
            except ShapeError as exc:
                raise ShapeError(f"alpha({s!r}): {exc}") from None

    def __len__(self):
        return len(self.states)

    def sorted_states(self):
        return sorted(self.states, key=str)


@dataclass(frozen=True)
class HomReport:
    ok: bool
    failing_state: object = None


def _same_functor(A, B):
    if A.functor != B.functor:
        raise FunctorMismatch(f"{format_functor(A.functor)} vs {format_functor(B.functor)}")


def check_homomorphism(A: FiniteCoalgebra, B: FiniteCoalgebra, f: Mapping, tol=DIST_TOL) -> HomReport:
    """Does ``F(f) . alpha_A == alpha_B . f`` hold at every state of ``A``?"""
    _same_functor(A, B)
    for s in A.sorted_states():
        if s not in f or f[s] not in B.alpha:
            raise ValueError(f"map must send {s!r} to a state of the target")
        if not approx_equal(apply_functor_map(A.functor, f, A.alpha[s]), B.alpha[f[s]], tol):
            return HomReport(False, s)
    return HomReport(True)


def check_bisimulation(A: FiniteCoalgebra, B: FiniteCoalgebra, relation, tol=DIST_TOL) -> bool:
    """Is ``relation`` (pairs of A-states and B-states) a bisimulation?"""
    _same_functor(A, B)
    rel = set(relation)
    for s, t in rel:
        if s not in A.alpha or t not in B.alpha:
            raise ValueError(f"pair {(s, t)!r} is not in A x B")

    def related(x, y):
        return (x.name, y.name) in rel

    return all(lift_relation(A.functor, related, A.alpha[s], B.alpha[t], tol) for s, t in sorted(rel, key=str))


def largest_bisimulation(A: FiniteCoalgebra, tol=DIST_TOL) -> Partition:
    """Coarsest bisimulation equivalence, by splitting blocks until stable."""
    if not A.states:
        return Partition([])
    part = Partition.trivial(A.states)
    while True:
        block = {s: part.block_of(s) for s in A.states}

        def to_block(x):
            return Pt(block[x.name])

        sig = {s: fmap(A.functor, to_block, A.alpha[s]) for s in A.states}
        groups = []
        for b in part.blocks:
            local = []
            for s in b:
                for g in local:
                    if approx_equal(sig[g[0]], sig[s], tol):
                        g.append(s)
                        break
                else:
                    local.append([s])
            groups.extend(local)
        refined = Partition(groups)
        if len(refined) == len(part):
            return refined
        part = refined


def quotient_coalgebra(A: FiniteCoalgebra, part: Partition, tol=DIST_TOL):
    """Collapse ``A`` along a bisimulation equivalence.

    Each block is named by its smallest member.  Returns ``(quotient, map)``.
    Raises ``ValueError`` if some block is not behaviourally uniform.
    """
    if not part.covers(A.states):
        raise ValueError("partition does not cover the carrier")
    q = {s: b[0] for b in part.blocks for s in b}
    alpha = {}
    for b in part.blocks:
        image = apply_functor_map(A.functor, q, A.alpha[b[0]])
        for s in b[1:]:
            if not approx_equal(apply_functor_map(A.functor, q, A.alpha[s]), image, tol):
                raise ValueError(f"states {b[0]!r} and {s!r} are not bisimilar under this partition")
        alpha[b[0]] = image
    return FiniteCoalgebra(tuple(b[0] for b in part.blocks), A.functor, alpha), q


def coproduct(A: FiniteCoalgebra, B: FiniteCoalgebra):
    """Disjoint union with its two injections (states tagged ``inl:``/``inr:``)."""
    _same_functor(A, B)
    inl = {s: f"inl:{s}" for s in A.states}
    inr = {t: f"inr:{t}" for t in B.states}
    alpha = {inl[s]: apply_functor_map(A.functor, inl, A.alpha[s]) for s in A.states}
    alpha.update({inr[t]: apply_functor_map(B.functor, inr, B.alpha[t]) for t in B.states})
    states = tuple(inl[s] for s in A.states) + tuple(inr[t] for t in B.states)
    return FiniteCoalgebra(states, A.functor, alpha), inl, inr


def lambek_check(A: FiniteCoalgebra) -> bool:
    """Is ``alpha`` a bijection from the carrier onto the whole of ``F(carrier)``?"""
    universe = enumerate_image(A.functor, [Pt(s) for s in A.sorted_states()])
    if len(universe) != len(A.states):
        return False
    images = {A.alpha[s] for s in A.states}
    return len(images) == len(A.states) and images == set(universe)


def coalgebra_from_json(data: Mapping) -> FiniteCoalgebra:
    F = parse_functor(data["functor"], data.get("labels", {}))
    states = [str(s) for s in data["states"]]
    alpha = {str(s): element_from_json(F, e) for s, e in data["alpha"].items()}
    return FiniteCoalgebra(tuple(states), F, alpha)


def coalgebra_to_json(A: FiniteCoalgebra) -> dict:
    return {
        "functor": format_functor(A.functor),
        "labels": {k: list(v) for k, v in sorted(label_sets(A.functor).items()) if k != "1"},
        "states": list(A.states),
        "alpha": {s: element_to_json(A.alpha[s]) for s in A.states},
    }
