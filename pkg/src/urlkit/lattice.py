"""Finite lattices and extremal fixed points of monotone maps."""
from __future__ import annotations

from itertools import combinations
from typing import Callable, Sequence


class NotMonotone(ValueError):
    def __init__(self, x, y):
        super().__init__(f"map is not monotone: {x!r} <= {y!r} but images are not ordered")
        self.witness = (x, y)


class FiniteLattice:
    """Elements with an order ``leq``; validated as a bounded lattice on construction."""

    def __init__(self, elements: Sequence, leq: Callable):
        self.elements = list(elements)
        n = len(self.elements)
        if n == 0:
            raise ValueError("a lattice needs at least one element")
        self._index = {x: i for i, x in enumerate(self.elements)}
        self.table = [[bool(leq(a, b)) for b in self.elements] for a in self.elements]
        t = self.table
        for i in range(n):
            if not t[i][i]:
                raise ValueError(f"order is not reflexive at {self.elements[i]!r}")
            for j in range(n):
                if i != j and t[i][j] and t[j][i]:
                    raise ValueError("order is not antisymmetric")
                for k in range(n):
                    if t[i][j] and t[j][k] and not t[i][k]:
                        raise ValueError("order is not transitive")
        tops = [i for i in range(n) if all(t[j][i] for j in range(n))]
        bots = [i for i in range(n) if all(t[i][j] for j in range(n))]
        if not tops or not bots:
            raise ValueError("lattice needs a top and a bottom")
        self.top = self.elements[tops[0]]
        self.bottom = self.elements[bots[0]]
        for i, j in combinations(range(n), 2):
            if self._extremum(i, j, upper=True) is None or self._extremum(i, j, upper=False) is None:
                raise ValueError(f"{self.elements[i]!r} and {self.elements[j]!r} lack a join or meet")

    def _extremum(self, i, j, upper):
        t = self.table
        n = len(self.elements)
        if upper:
            cands = [k for k in range(n) if t[i][k] and t[j][k]]
            best = [k for k in cands if all(t[k][m] for m in cands)]
        else:
            cands = [k for k in range(n) if t[k][i] and t[k][j]]
            best = [k for k in cands if all(t[m][k] for m in cands)]
        return best[0] if best else None

    @classmethod
    def powerset(cls, base):
        base = sorted(base)
        elems = [frozenset(c) for r in range(len(base) + 1) for c in combinations(base, r)]
        return cls(elems, lambda a, b: a <= b)

    def leq(self, a, b) -> bool:
        return self.table[self._index[a]][self._index[b]]

    def join(self, a, b):
        return self.elements[self._extremum(self._index[a], self._index[b], upper=True)]

    def meet(self, a, b):
        return self.elements[self._extremum(self._index[a], self._index[b], upper=False)]


def fixed_points_lattice(L: FiniteLattice, f) -> dict:
    """Greatest and least fixed points of a monotone ``f`` (callable or mapping).

    The greatest is reached by iterating ``f`` downward from the top, the least by
    iterating upward from the bottom.
    """
    fn = f.__getitem__ if isinstance(f, dict) else f
    image = {x: fn(x) for x in L.elements}
    for y in image.values():
        if y not in L._index:
            raise ValueError(f"map leaves the lattice: {y!r}")
    for a in L.elements:
        for b in L.elements:
            if L.leq(a, b) and not L.leq(image[a], image[b]):
                raise NotMonotone(a, b)

    def iterate(x):
        while image[x] != x:
            x = image[x]
        return x

    return {"gfp": iterate(L.top), "lfp": iterate(L.bottom)}
