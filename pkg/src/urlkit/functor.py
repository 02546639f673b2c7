"""Polynomial-style functor expressions and the values they produce on a finite carrier.

A functor expression is built from the identity ``_``, constant label sets, exponents
``F^A``, the finite powerset ``P``, finitely supported distributions ``D``,
composition, binary product and binary sum.  Elements of ``F(X)`` are small immutable
trees (:class:`Pt`, :class:`Lab`, :class:`Fun`, :class:`FSet`, :class:`FDist`,
:class:`Pair`, :class:`Inl`, :class:`Inr`).
"""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

DIST_TOL = 1e-9
ENUM_LIMIT = 1_000_000

UNIT_NAME = "1"
UNIT_LABELS = ("*",)


class ParseError(ValueError):
    def __init__(self, message, offset):
        super().__init__(f"{message} at byte {offset}")
        self.offset = offset


class ShapeError(ValueError):
    pass


class NotEnumerableError(ValueError):
    pass


# ---------------------------------------------------------------- expressions

@dataclass(frozen=True)
class Identity:
    pass


@dataclass(frozen=True)
class Const:
    name: str
    labels: tuple


@dataclass(frozen=True)
class Power:
    """Functions from a finite label set into the carrier: ``_^A``."""
    name: str
    labels: tuple


@dataclass(frozen=True)
class Powerset:
    pass


@dataclass(frozen=True)
class Dist:
    pass


@dataclass(frozen=True)
class Compose:
    outer: object
    inner: object


@dataclass(frozen=True)
class Product:
    left: object
    right: object


@dataclass(frozen=True)
class Sum:
    left: object
    right: object


def compose(outer, inner):
    """Composition normalized: identities dropped, nesting to the right."""
    if isinstance(outer, Identity):
        return inner
    if isinstance(inner, Identity):
        return outer
    if isinstance(outer, Compose):
        return compose(outer.outer, compose(outer.inner, inner))
    return Compose(outer, inner)


def contains_dist(F) -> bool:
    if isinstance(F, Dist):
        return True
    if isinstance(F, Compose):
        return contains_dist(F.outer) or contains_dist(F.inner)
    if isinstance(F, (Product, Sum)):
        return contains_dist(F.left) or contains_dist(F.right)
    return False


def label_sets(F) -> dict:
    """All label sets mentioned in ``F``, by name."""
    out = {}

    def walk(G):
        if isinstance(G, (Const, Power)):
            out[G.name] = G.labels
        elif isinstance(G, Compose):
            walk(G.outer)
            walk(G.inner)
        elif isinstance(G, (Product, Sum)):
            walk(G.left)
            walk(G.right)

    walk(F)
    return out


# --------------------------------------------------------------------- parser

_TOKEN = re.compile(r"\s*(?:(?P<name>[A-Za-z][A-Za-z0-9_]*)|(?P<one>1)|(?P<sym>[_^()+.]))")


def _tokenize(text: str):
    tokens = []
    pos = 0
    while True:
        m = _TOKEN.match(text, pos)
        if m is None:
            rest = text[pos:]
            if not rest.strip():
                break
            bad = pos + len(rest) - len(rest.lstrip())
            raise ParseError(f"unexpected character {text[bad]!r}", len(text[:bad].encode("utf-8")))
        start = m.start() + len(m.group(0)) - len(m.group(0).lstrip())
        offset = len(text[:start].encode("utf-8"))
        if m.group("name") is not None:
            word = m.group("name")
            tokens.append(({"x": "x", "P": "P", "D": "D"}.get(word, "name"), word, offset))
        elif m.group("one") is not None:
            tokens.append(("name", UNIT_NAME, offset))
        else:
            tokens.append((m.group("sym"), m.group("sym"), offset))
        pos = m.end()
    tokens.append(("end", "", len(text.encode("utf-8"))))
    return tokens


class _Parser:
    def __init__(self, text, labels):
        self.tokens = _tokenize(text)
        self.i = 0
        self.labels = labels

    def peek(self):
        return self.tokens[self.i]

    def take(self, kind):
        tok = self.tokens[self.i]
        if tok[0] != kind:
            what = tok[1] or "end of input"
            raise ParseError(f"expected {kind!r}, found {what!r}", tok[2])
        self.i += 1
        return tok

    def labelset(self, tok):
        name = tok[1]
        if name == UNIT_NAME:
            return UNIT_LABELS
        if name not in self.labels:
            raise ParseError(f"unknown label set {name!r}", tok[2])
        labels = tuple(str(x) for x in self.labels[name])
        if not labels:
            raise ParseError(f"label set {name!r} is empty", tok[2])
        if len(set(labels)) != len(labels):
            raise ParseError(f"label set {name!r} has duplicates", tok[2])
        return labels

    def parse(self):
        expr = self.sum()
        self.take("end")
        return expr

    def sum(self):
        left = self.prod()
        while self.peek()[0] == "+":
            self.i += 1
            left = Sum(left, self.prod())
        return left

    def prod(self):
        left = self.comp()
        while self.peek()[0] == "x":
            self.i += 1
            left = Product(left, self.comp())
        return left

    def comp(self):
        outer = self.post()
        if self.peek()[0] == ".":
            self.i += 1
            return compose(outer, self.comp())
        return outer

    def post(self):
        expr = self.atom()
        while self.peek()[0] == "^":
            self.i += 1
            tok = self.take("name")
            expr = compose(Power(tok[1], self.labelset(tok)), expr)
        return expr

    def atom(self):
        kind, value, offset = self.peek()
        if kind == "_":
            self.i += 1
            return Identity()
        if kind == "name":
            self.i += 1
            return Const(value, self.labelset((kind, value, offset)))
        if kind in ("P", "D"):
            self.i += 1
            base = Powerset() if kind == "P" else Dist()
            if self.peek()[0] == "(":
                self.i += 1
                inner = self.sum()
                self.take(")")
                return compose(base, inner)
            return base
        if kind == "(":
            self.i += 1
            inner = self.sum()
            self.take(")")
            return inner
        raise ParseError(f"unexpected {value or 'end of input'!r}", offset)


def parse_functor(text: str, labels: Mapping[str, Sequence] | None = None):
    """Parse a functor expression such as ``"P(A x _)"`` or ``"(_ + 1)^A"``.

    ``labels`` maps label-set names to their members; ``1`` is predefined as a
    singleton.  Raises :class:`ParseError` (with a byte offset) on bad syntax or an
    unknown label-set name.
    """
    return _Parser(text, dict(labels or {})).parse()


_PREC_SUM, _PREC_PROD, _PREC_COMP, _PREC_POST, _PREC_ATOM = 1, 2, 3, 4, 5


def _prec(F):
    if isinstance(F, Sum):
        return _PREC_SUM
    if isinstance(F, Product):
        return _PREC_PROD
    if isinstance(F, Power):
        return _PREC_POST
    if isinstance(F, Compose):
        if isinstance(F.outer, (Powerset, Dist)):
            return _PREC_ATOM
        if isinstance(F.outer, Power):
            return _PREC_POST
        return _PREC_COMP
    return _PREC_ATOM


def format_functor(F) -> str:
    """Canonical text; ``parse_functor(format_functor(F)) == F`` for normalized ``F``."""

    def at(G, need):
        s = fmt(G)
        return f"({s})" if _prec(G) < need else s

    def fmt(G):
        if isinstance(G, Identity):
            return "_"
        if isinstance(G, Const):
            return G.name
        if isinstance(G, Power):
            return f"_^{G.name}"
        if isinstance(G, Powerset):
            return "P"
        if isinstance(G, Dist):
            return "D"
        if isinstance(G, Compose):
            if isinstance(G.outer, (Powerset, Dist)):
                return f"{fmt(G.outer)}({fmt(G.inner)})"
            if isinstance(G.outer, Power):
                return f"{at(G.inner, _PREC_POST)}^{G.outer.name}"
            return f"{at(G.outer, _PREC_POST)} . {at(G.inner, _PREC_COMP)}"
        if isinstance(G, Product):
            return f"{at(G.left, _PREC_PROD)} x {at(G.right, _PREC_COMP)}"
        if isinstance(G, Sum):
            return f"{at(G.left, _PREC_SUM)} + {at(G.right, _PREC_PROD)}"
        raise TypeError(f"not a functor expression: {G!r}")

    return fmt(F)


# ------------------------------------------------------------------- elements

@dataclass(frozen=True)
class Pt:
    name: object


@dataclass(frozen=True)
class Lab:
    label: str


@dataclass(frozen=True)
class Fun:
    items: tuple  # ((label, element), ...) in label-set order

    def __getitem__(self, label):
        for k, v in self.items:
            if k == label:
                return v
        raise KeyError(label)


@dataclass(frozen=True)
class FSet:
    items: frozenset


@dataclass(frozen=True)
class FDist:
    items: tuple  # ((element, mass), ...) sorted by element key

    def mass(self, x) -> float:
        for k, v in self.items:
            if k == x:
                return v
        return 0.0

    def total(self) -> float:
        return sum(v for _, v in self.items)


@dataclass(frozen=True)
class Pair:
    first: object
    second: object


@dataclass(frozen=True)
class Inl:
    value: object


@dataclass(frozen=True)
class Inr:
    value: object


def elem_key(e):
    """Total sort key over elements (deterministic output ordering)."""
    if isinstance(e, Pt):
        return (0, str(e.name))
    if isinstance(e, Lab):
        return (1, e.label)
    if isinstance(e, Fun):
        return (2, tuple((k, elem_key(v)) for k, v in e.items))
    if isinstance(e, FSet):
        return (3, tuple(sorted(elem_key(x) for x in e.items)))
    if isinstance(e, FDist):
        return (4, tuple((elem_key(x), m) for x, m in e.items))
    if isinstance(e, Pair):
        return (5, elem_key(e.first), elem_key(e.second))
    if isinstance(e, Inl):
        return (6, elem_key(e.value))
    if isinstance(e, Inr):
        return (7, elem_key(e.value))
    raise TypeError(f"not an element: {e!r}")


def make_dist(pairs) -> FDist:
    """Build a distribution, merging repeated support points and dropping zero mass."""
    acc = {}
    for x, m in pairs:
        m = float(m)
        if m < 0:
            raise ShapeError(f"negative mass {m}")
        acc[x] = acc.get(x, 0.0) + m
    items = sorted(((x, m) for x, m in acc.items() if m > 0.0), key=lambda xm: elem_key(xm[0]))
    return FDist(tuple(items))


def fmap(F, g: Callable, e):
    """Apply ``F`` to the map ``g`` (acting on identity positions) at element ``e``."""
    if isinstance(F, Identity):
        return g(e)
    if isinstance(F, Const):
        if not isinstance(e, Lab):
            raise ShapeError(f"expected a label, got {e!r}")
        return e
    if isinstance(F, Power):
        if not isinstance(e, Fun):
            raise ShapeError(f"expected a function table, got {e!r}")
        return Fun(tuple((k, g(v)) for k, v in e.items))
    if isinstance(F, Powerset):
        if not isinstance(e, FSet):
            raise ShapeError(f"expected a set, got {e!r}")
        return FSet(frozenset(g(x) for x in e.items))
    if isinstance(F, Dist):
        if not isinstance(e, FDist):
            raise ShapeError(f"expected a distribution, got {e!r}")
        return make_dist((g(x), m) for x, m in e.items)
    if isinstance(F, Compose):
        return fmap(F.outer, lambda x: fmap(F.inner, g, x), e)
    if isinstance(F, Product):
        if not isinstance(e, Pair):
            raise ShapeError(f"expected a pair, got {e!r}")
        return Pair(fmap(F.left, g, e.first), fmap(F.right, g, e.second))
    if isinstance(F, Sum):
        if isinstance(e, Inl):
            return Inl(fmap(F.left, g, e.value))
        if isinstance(e, Inr):
            return Inr(fmap(F.right, g, e.value))
        raise ShapeError(f"expected inl/inr, got {e!r}")
    raise TypeError(f"not a functor expression: {F!r}")


def apply_functor_map(F, f: Mapping, e):
    """``F(f)(e)`` for a state map ``f`` given as a mapping on carrier names."""

    def on_point(x):
        if not isinstance(x, Pt):
            raise ShapeError(f"expected a carrier point, got {x!r}")
        if x.name not in f:
            raise ShapeError(f"map undefined on {x.name!r}")
        return Pt(f[x.name])

    return fmap(F, on_point, e)


def check_shape(F, e, carrier=None) -> None:
    """Raise :class:`ShapeError` unless ``e`` is an element of ``F(carrier)``."""

    def on_point(x):
        if not isinstance(x, Pt):
            raise ShapeError(f"expected a carrier point, got {x!r}")
        if carrier is not None and x.name not in carrier:
            raise ShapeError(f"point {x.name!r} is not in the carrier")

    def walk(G, inner, x):
        if isinstance(G, Identity):
            inner(x)
        elif isinstance(G, Const):
            if not isinstance(x, Lab) or x.label not in G.labels:
                raise ShapeError(f"expected a label of {G.name}, got {x!r}")
        elif isinstance(G, Power):
            if not isinstance(x, Fun) or tuple(k for k, _ in x.items) != G.labels:
                raise ShapeError(f"function table must cover {G.name} in order, got {x!r}")
            for _, v in x.items:
                inner(v)
        elif isinstance(G, Powerset):
            if not isinstance(x, FSet):
                raise ShapeError(f"expected a set, got {x!r}")
            for v in x.items:
                inner(v)
        elif isinstance(G, Dist):
            if not isinstance(x, FDist):
                raise ShapeError(f"expected a distribution, got {x!r}")
            if any(m < 0 for _, m in x.items) or abs(x.total() - 1.0) > DIST_TOL:
                raise ShapeError(f"distribution masses must be nonnegative and sum to 1, got {x!r}")
            for v, _ in x.items:
                inner(v)
        elif isinstance(G, Compose):
            walk(G.outer, lambda y: walk(G.inner, inner, y), x)
        elif isinstance(G, Product):
            if not isinstance(x, Pair):
                raise ShapeError(f"expected a pair, got {x!r}")
            walk(G.left, inner, x.first)
            walk(G.right, inner, x.second)
        elif isinstance(G, Sum):
            if isinstance(x, Inl):
                walk(G.left, inner, x.value)
            elif isinstance(x, Inr):
                walk(G.right, inner, x.value)
            else:
                raise ShapeError(f"expected inl/inr, got {x!r}")
        else:
            raise TypeError(f"not a functor expression: {G!r}")

    walk(F, on_point, e)


def points_of(e) -> set:
    """Carrier points occurring anywhere inside ``e``."""
    if isinstance(e, Pt):
        return {e.name}
    if isinstance(e, Lab):
        return set()
    if isinstance(e, Fun):
        return set().union(*(points_of(v) for _, v in e.items))
    if isinstance(e, FSet):
        return set().union(*(points_of(v) for v in e.items))
    if isinstance(e, FDist):
        return set().union(*(points_of(v) for v, _ in e.items))
    if isinstance(e, Pair):
        return points_of(e.first) | points_of(e.second)
    if isinstance(e, (Inl, Inr)):
        return points_of(e.value)
    raise TypeError(f"not an element: {e!r}")


def approx_equal(a, b, tol: float = DIST_TOL) -> bool:
    """Structural equality with distribution masses compared per atom within ``tol``."""
    if type(a) is not type(b):
        return False
    if isinstance(a, (Pt, Lab)):
        return a == b
    if isinstance(a, Fun):
        return len(a.items) == len(b.items) and all(
            ka == kb and approx_equal(va, vb, tol) for (ka, va), (kb, vb) in zip(a.items, b.items))
    if isinstance(a, FSet):
        if a == b:
            return True
        return all(any(approx_equal(x, y, tol) for y in b.items) for x in a.items) and all(
            any(approx_equal(x, y, tol) for x in a.items) for y in b.items)
    if isinstance(a, FDist):
        ma = dict(a.items)
        mb = dict(b.items)
        return all(abs(ma.get(k, 0.0) - mb.get(k, 0.0)) <= tol for k in set(ma) | set(mb))
    if isinstance(a, Pair):
        return approx_equal(a.first, b.first, tol) and approx_equal(a.second, b.second, tol)
    if isinstance(a, (Inl, Inr)):
        return approx_equal(a.value, b.value, tol)
    raise TypeError(f"not an element: {a!r}")


# ------------------------------------------------------------ relation lifting

def _max_flow_coupling(mu, nu, allowed, tol):
    """Is there a coupling of masses ``mu`` and ``nu`` supported on ``allowed`` pairs?

    Bipartite max-flow by shortest augmenting paths.  Nodes: 0 source, 1..n left,
    n+1..n+m right, n+m+1 sink.
    """
    n, m = len(mu), len(nu)
    if abs(sum(mu) - sum(nu)) > tol:
        return False
    size = n + m + 2
    sink = size - 1
    cap = [[0.0] * size for _ in range(size)]
    big = sum(mu) + 1.0
    for i in range(n):
        cap[0][1 + i] = mu[i]
        for j in range(m):
            if allowed[i][j]:
                cap[1 + i][1 + n + j] = big
    for j in range(m):
        cap[1 + n + j][sink] = nu[j]
    flow = 0.0
    eps = tol * 1e-3
    while True:
        parent = [-1] * size
        parent[0] = 0
        queue = [0]
        head = 0
        while head < len(queue) and parent[sink] < 0:
            u = queue[head]
            head += 1
            for v in range(size):
                if parent[v] < 0 and cap[u][v] > eps:
                    parent[v] = u
                    queue.append(v)
        if parent[sink] < 0:
            break
        push = float("inf")
        v = sink
        while v != 0:
            push = min(push, cap[parent[v]][v])
            v = parent[v]
        v = sink
        while v != 0:
            u = parent[v]
            cap[u][v] -= push
            cap[v][u] += push
            v = u
        flow += push
    return flow >= sum(mu) - tol


def lift_relation(F, related: Callable, a, b, tol: float = DIST_TOL) -> bool:
    """Relation lifting of ``F``: is ``(a, b)`` in the lifting of ``related``?"""
    if isinstance(F, Identity):
        return bool(related(a, b))
    if isinstance(F, Const):
        return a == b
    if isinstance(F, Power):
        return all(ka == kb and related(va, vb) for (ka, va), (kb, vb) in zip(a.items, b.items))
    if isinstance(F, Powerset):
        xs, ys = list(a.items), list(b.items)
        return all(any(related(x, y) for y in ys) for x in xs) and all(
            any(related(x, y) for x in xs) for y in ys)
    if isinstance(F, Dist):
        xs = [x for x, _ in a.items]
        ys = [y for y, _ in b.items]
        allowed = [[bool(related(x, y)) for y in ys] for x in xs]
        return _max_flow_coupling([m for _, m in a.items], [m for _, m in b.items], allowed, tol)
    if isinstance(F, Compose):
        return lift_relation(F.outer, lambda x, y: lift_relation(F.inner, related, x, y, tol), a, b, tol)
    if isinstance(F, Product):
        return lift_relation(F.left, related, a.first, b.first, tol) and lift_relation(
            F.right, related, a.second, b.second, tol)
    if isinstance(F, Sum):
        if isinstance(a, Inl) and isinstance(b, Inl):
            return lift_relation(F.left, related, a.value, b.value, tol)
        if isinstance(a, Inr) and isinstance(b, Inr):
            return lift_relation(F.right, related, a.value, b.value, tol)
        return False
    raise TypeError(f"not a functor expression: {F!r}")


# ---------------------------------------------------------------- enumeration

def enumerate_image(F, base: Sequence) -> list:
    """All elements of ``F(base)`` for a Dist-free expression, in canonical order."""
    if contains_dist(F):
        raise NotEnumerableError("distribution functor has infinitely many elements")

    def guard(n):
        if n > ENUM_LIMIT:
            raise NotEnumerableError(f"F(X) has {n} elements, above the {ENUM_LIMIT} limit")

    def enum(G, inner):
        if isinstance(G, Identity):
            return list(inner)
        if isinstance(G, Const):
            return [Lab(x) for x in G.labels]
        if isinstance(G, Power):
            guard(len(inner) ** len(G.labels))
            return [Fun(tuple(zip(G.labels, combo))) for combo in itertools.product(inner, repeat=len(G.labels))]
        if isinstance(G, Powerset):
            guard(2 ** len(inner))
            out = []
            for r in range(len(inner) + 1):
                out.extend(FSet(frozenset(c)) for c in itertools.combinations(inner, r))
            return out
        if isinstance(G, Compose):
            return enum(G.outer, enum(G.inner, inner))
        if isinstance(G, Product):
            left, right = enum(G.left, inner), enum(G.right, inner)
            guard(len(left) * len(right))
            return [Pair(x, y) for x in left for y in right]
        if isinstance(G, Sum):
            return [Inl(x) for x in enum(G.left, inner)] + [Inr(y) for y in enum(G.right, inner)]
        raise TypeError(f"not a functor expression: {G!r}")

    return sorted(enum(F, list(base)), key=elem_key)


# ----------------------------------------------------------------------- JSON

def element_from_json(F, data):
    """Decode the JSON form of an element of ``F(X)``."""

    def point(x):
        if isinstance(x, str):
            return Pt(x)
        if isinstance(x, dict) and set(x) == {"pt"}:
            return Pt(x["pt"])
        raise ShapeError(f"expected a carrier point, got {x!r}")

    def dec(G, inner, x):
        if isinstance(G, Identity):
            return inner(x)
        if isinstance(G, Const):
            if isinstance(x, dict) and set(x) == {"const"}:
                return Lab(str(x["const"]))
            if isinstance(x, str):
                return Lab(x)
            raise ShapeError(f"expected a constant label, got {x!r}")
        if isinstance(G, Power):
            if not (isinstance(x, dict) and set(x) == {"fun"} and isinstance(x["fun"], dict)):
                raise ShapeError(f"expected a function table, got {x!r}")
            table = x["fun"]
            if set(table) != set(G.labels):
                raise ShapeError(f"function table must cover exactly {G.name}")
            return Fun(tuple((k, inner(table[k])) for k in G.labels))
        if isinstance(G, Powerset):
            if not (isinstance(x, dict) and set(x) == {"set"} and isinstance(x["set"], list)):
                raise ShapeError(f"expected a set, got {x!r}")
            return FSet(frozenset(inner(y) for y in x["set"]))
        if isinstance(G, Dist):
            if not (isinstance(x, dict) and set(x) == {"dist"}):
                raise ShapeError(f"expected a distribution, got {x!r}")
            body = x["dist"]
            pairs = body.items() if isinstance(body, dict) else body
            out = []
            for item in pairs:
                y, m = item
                if not isinstance(m, (int, float)) or isinstance(m, bool):
                    raise ShapeError(f"mass must be a number, got {m!r}")
                out.append((inner(y), float(m)))
            return make_dist(out)
        if isinstance(G, Compose):
            return dec(G.outer, lambda y: dec(G.inner, inner, y), x)
        if isinstance(G, Product):
            if not (isinstance(x, dict) and set(x) == {"pair"} and len(x["pair"]) == 2):
                raise ShapeError(f"expected a pair, got {x!r}")
            return Pair(dec(G.left, inner, x["pair"][0]), dec(G.right, inner, x["pair"][1]))
        if isinstance(G, Sum):
            if isinstance(x, dict) and set(x) == {"inl"}:
                return Inl(dec(G.left, inner, x["inl"]))
            if isinstance(x, dict) and set(x) == {"inr"}:
                return Inr(dec(G.right, inner, x["inr"]))
            raise ShapeError(f"expected inl/inr, got {x!r}")
        raise TypeError(f"not a functor expression: {G!r}")

    return dec(F, point, data)


def element_to_json(e):
    if isinstance(e, Pt):
        return {"pt": e.name}
    if isinstance(e, Lab):
        return {"const": e.label}
    if isinstance(e, Fun):
        return {"fun": {k: element_to_json(v) for k, v in e.items}}
    if isinstance(e, FSet):
        return {"set": [element_to_json(x) for x in sorted(e.items, key=elem_key)]}
    if isinstance(e, FDist):
        if all(isinstance(x, Pt) for x, _ in e.items):
            return {"dist": {x.name: m for x, m in e.items}}
        return {"dist": [[element_to_json(x), m] for x, m in e.items]}
    if isinstance(e, Pair):
        return {"pair": [element_to_json(e.first), element_to_json(e.second)]}
    if isinstance(e, Inl):
        return {"inl": element_to_json(e.value)}
    if isinstance(e, Inr):
        return {"inr": element_to_json(e.value)}
    raise TypeError(f"not an element: {e!r}")
