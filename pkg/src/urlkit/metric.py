"""Generalized metric spaces: distances in [0, inf], no symmetry required.

Table entries are kept exact (``Fraction`` or ``int``) whenever they come from
files or generators, so the isometry check can use plain equality.  ``math.inf``
is a first-class distance; sums involving it saturate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

INF = math.inf


def add(a, b):
    if a == INF or b == INF:
        return INF
    return a + b


def hom_interval(u, v):
    """Internal hom of ``[0, inf]``: the least ``s`` with ``u + s >= v``."""
    if u >= v:
        return 0
    if v == INF:
        return INF
    return v - u


def prefix_metric(u: str, v: str):
    """0 when ``u`` is a prefix of ``v``, otherwise ``2^-n`` with ``n`` the common-prefix length."""
    if v.startswith(u):
        return Fraction(0)
    n = 0
    for a, b in zip(u, v):
        if a != b:
            break
        n += 1
    return Fraction(1, 2 ** n)


@dataclass
class GenMetricSpace:
    points: list
    d: list  # d[i][j] is the distance from points[i] to points[j]

    def __post_init__(self):
        self.points = list(self.points)
        self.d = [list(row) for row in self.d]
        n = len(self.points)
        if len(self.d) != n or any(len(row) != n for row in self.d):
            raise ValueError("distance table must be square with one row per point")
        if len(set(map(repr, self.points))) != n:
            raise ValueError("duplicate points")
        for row in self.d:
            for v in row:
                if not (v == INF or v >= 0):
                    raise ValueError(f"distance {v!r} is not in [0, inf]")
        self._index = {repr(p): i for i, p in enumerate(self.points)}

    def __len__(self):
        return len(self.points)

    def index(self, p) -> int:
        return self._index[repr(p)]

    def dist(self, x, y):
        return self.d[self.index(x)][self.index(y)]

    @classmethod
    def from_function(cls, points: Sequence, dist: Callable):
        return cls(points, [[dist(x, y) for y in points] for x in points])

    @classmethod
    def from_preorder(cls, points: Sequence, leq: Callable):
        """``d(x, y) = 0`` when ``x <= y`` and ``inf`` otherwise."""
        return cls.from_function(points, lambda x, y: 0 if leq(x, y) else INF)


@dataclass
class GmsReport:
    ok: bool
    violations: list = field(default_factory=list)


def check_gms(space: GenMetricSpace, limit: int | None = 1000) -> GmsReport:
    """Check ``d(x, x) = 0`` and ``d(x, z) <= d(x, y) + d(y, z)`` for all triples."""
    d = space.d
    n = len(space)
    out = []
    for i in range(n):
        if d[i][i] != 0:
            out.append(("self", space.points[i], d[i][i]))
    for i in range(n):
        for j in range(n):
            for k in range(n):
                rhs = add(d[i][j], d[j][k])
                if d[i][k] > rhs:
                    out.append(("triangle", space.points[i], space.points[j], space.points[k], d[i][k], rhs))
                    if limit is not None and len(out) >= limit:
                        return GmsReport(False, out)
    return GmsReport(not out, out)


def hausdorff_nonsym(space: GenMetricSpace, V, W):
    """``max_{v in V} min_{w in W} d(v, w)``."""
    V, W = list(V), list(W)
    if not V or not W:
        raise ValueError("Hausdorff distance needs nonempty sets")
    return max(min(space.dist(v, w) for w in W) for v in V)


def hausdorff_space(space: GenMetricSpace, subsets: Sequence) -> GenMetricSpace:
    """The space of the given nonempty subsets under the one-sided Hausdorff distance."""
    subsets = [frozenset(s) for s in subsets]
    return GenMetricSpace([tuple(sorted(s, key=repr)) for s in subsets],
                          [[hausdorff_nonsym(space, a, b) for b in subsets] for a in subsets])


# ---------------------------------------------------------------- example spaces

def interval_space(values: Sequence) -> GenMetricSpace:
    """Points of ``[0, inf]`` with ``d(u, v) = hom_interval(u, v)`` (truncated difference)."""
    return GenMetricSpace.from_function(values, hom_interval)


def prefix_space(strings: Sequence[str]) -> GenMetricSpace:
    return GenMetricSpace.from_function(strings, prefix_metric)


def random_closed_table(n: int, seed: int, max_weight: int = 10, p_inf: float = 0.2,
                        symmetric: bool = False) -> GenMetricSpace:
    """Seeded random table closed under the triangle inequality.

    Rational edge weights (some missing, i.e. infinite) are closed by shortest
    paths, so every entry is an exact ``Fraction`` or ``inf``.
    """
    rng = np.random.default_rng(seed)
    d = [[0 if i == j else INF for j in range(n)] for i in range(n)]
    for i in range(n):
        for j in range(n):
            if i != j and rng.random() >= p_inf:
                d[i][j] = Fraction(int(rng.integers(0, 12 * max_weight + 1)), int(rng.integers(1, 13)))
    if symmetric:
        for i in range(n):
            for j in range(i):
                d[i][j] = d[j][i] = min(d[i][j], d[j][i])
    for k in range(n):
        for i in range(n):
            for j in range(n):
                via = add(d[i][k], d[k][j])
                if via < d[i][j]:
                    d[i][j] = via
    return GenMetricSpace([f"p{i}" for i in range(n)], d)


# ---------------------------------------------------------------- Yoneda

def is_nonexpansive(space: GenMetricSpace, phi: Sequence) -> bool:
    """``phi(y) <= d(y, y') + phi(y')`` for all ``y, y'``."""
    n = len(space)
    return all(phi[i] <= add(space.d[i][j], phi[j]) for i in range(n) for j in range(n))


def yoneda_embed(space: GenMetricSpace) -> list:
    """One copresheaf per point ``x``: the column ``y -> d(y, x)``."""
    n = len(space)
    return [[space.d[y][x] for y in range(n)] for x in range(n)]


def copresheaf_distance(phi: Sequence, psi: Sequence):
    """``sup_y hom_interval(phi(y), psi(y))``."""
    return max((hom_interval(a, b) for a, b in zip(phi, psi)), default=0)


@dataclass
class IsometryReport:
    ok: bool
    gaps: list = field(default_factory=list)
    nonexpansive: bool = True


def yoneda_isometry_check(space: GenMetricSpace) -> IsometryReport:
    """Compare ``d(x, x')`` with the copresheaf distance of their embeddings, exactly."""
    emb = yoneda_embed(space)
    gaps = []
    n = len(space)
    for i in range(n):
        for j in range(n):
            got = copresheaf_distance(emb[i], emb[j])
            if got != space.d[i][j]:
                gaps.append((space.points[i], space.points[j], space.d[i][j], got))
    nonexp = all(is_nonexpansive(space, phi) for phi in emb)
    return IsometryReport(not gaps and nonexp, gaps, nonexp)


# ---------------------------------------------------------------- contraction and coinduction

def sup_distance(x, y) -> float:
    return float(np.max(np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)), initial=0.0))


@dataclass
class ContractionEstimate:
    c_hat: float
    n: int | None
    ratios: dict

    @property
    def detected(self) -> bool:
        return self.n is not None


def contraction_estimate(F: Callable, pairs, dist: Callable = sup_distance, n_max: int = 5) -> ContractionEstimate:
    """Least ``n <= n_max`` for which ``max d(F^n x, F^n y) / d(x, y) < 1`` over ``pairs``.

    Pairs at distance 0 or inf are skipped.  ``ratios[n]`` keeps the worst ratio seen.
    """
    pairs = [(x, y) for x, y in pairs]
    base = [dist(x, y) for x, y in pairs]
    keep = [k for k, b in enumerate(base) if 0 < b < INF]
    cur = [pairs[k] for k in keep]
    ratios = {}
    for n in range(1, n_max + 1):
        cur = [(F(x), F(y)) for x, y in cur]
        worst = max((dist(x, y) / base[k] for (x, y), k in zip(cur, keep)), default=0.0)
        ratios[n] = float(worst)
        if worst < 1:
            return ContractionEstimate(float(worst), n, ratios)
    return ContractionEstimate(float(max(ratios.values(), default=0.0)), None, ratios)


def finite_pairs(space: GenMetricSpace):
    return [(x, y) for x in space.points for y in space.points if x != y]


@dataclass
class CoinductResult:
    x_star: object
    phi_holds: bool
    iterations: int
    witness: object = None


def metric_coinduct(F: Callable, x0, phi: Callable, dist: Callable = sup_distance, tol: float = 1e-10,
                    max_iter: int = 100_000) -> CoinductResult:
    """Iterate ``F`` from ``x0`` until ``d(F x, x) <= tol`` while checking ``phi`` on every iterate.

    ``phi_holds`` is false with ``witness`` the first iterate outside ``phi``.
    """
    x = x0
    witness = None if phi(x) else x
    for it in range(1, max_iter + 1):
        y = F(x)
        if witness is None and not phi(y):
            witness = y
        if dist(y, x) <= tol:
            return CoinductResult(y, witness is None, it, witness)
        x = y
    raise RuntimeError(f"no fixed point within {max_iter} iterations")


# ---------------------------------------------------------------- JSON

def _read_value(v):
    if isinstance(v, str):
        if v.strip().lower() in ("inf", "infinity", "+inf"):
            return INF
        return Fraction(v)
    if isinstance(v, bool) or v is None:
        raise ValueError(f"bad distance {v!r}")
    if isinstance(v, int):
        return v
    if isinstance(v, float):
        if math.isinf(v):
            return INF
        return Fraction(repr(v))
    raise ValueError(f"bad distance {v!r}")


def space_from_json(data) -> GenMetricSpace:
    return GenMetricSpace(data["points"], [[_read_value(v) for v in row] for row in data["d"]])


def value_to_json(v):
    if v == INF:
        return "inf"
    if isinstance(v, Fraction):
        return v.numerator if v.denominator == 1 else str(v)
    return v


def space_to_json(space: GenMetricSpace) -> dict:
    return {"points": list(space.points), "d": [[value_to_json(v) for v in row] for row in space.d]}
