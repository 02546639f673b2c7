"""Finite-set constructions and the category of finite action-value functions.

An object of the value-function category is a function ``f: I -> O`` between finite
sets (state-action pairs to value labels).  An arrow ``f -> g`` is a pair ``(h, k)``
with ``g . h = k . f``.  Limits are computed levelwise from finite-set limits;
universal properties are checked by exhaustive enumeration under size guards.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Hashable, Iterable, Sequence

EXP_GUARD = 6
ENUM_GUARD = 1_000_000
HALF = Fraction(1, 2)


class CommuteError(ValueError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class NotMonic(ValueError):
    pass


class SizeGuard(ValueError):
    pass


# ---------------------------------------------------------------- finite functions

@dataclass(frozen=True)
class FinFn:
    domain: tuple
    codomain: tuple
    table: tuple  # image of domain[k] at position k

    def __post_init__(self):
        object.__setattr__(self, "domain", tuple(self.domain))
        object.__setattr__(self, "codomain", tuple(self.codomain))
        object.__setattr__(self, "table", tuple(self.table))
        if len(set(self.domain)) != len(self.domain) or len(set(self.codomain)) != len(self.codomain):
            raise ValueError("domain and codomain must not repeat elements")
        if len(self.table) != len(self.domain):
            raise ValueError("function table must give one value per domain element")
        cod = set(self.codomain)
        for x, y in zip(self.domain, self.table):
            if y not in cod:
                raise ValueError(f"value {y!r} of {x!r} is outside the codomain")
        object.__setattr__(self, "_lookup", dict(zip(self.domain, self.table)))

    @classmethod
    def from_mapping(cls, domain: Sequence, codomain: Sequence, mapping) -> "FinFn":
        if callable(mapping):
            return cls(domain, codomain, [mapping(x) for x in domain])
        missing = [x for x in domain if x not in mapping]
        if missing:
            raise ValueError(f"function undefined on {missing}")
        return cls(domain, codomain, [mapping[x] for x in domain])

    @classmethod
    def identity(cls, elems: Sequence) -> "FinFn":
        return cls(elems, elems, elems)

    def __call__(self, x):
        return self._lookup[x]

    def then(self, g: "FinFn") -> "FinFn":
        """``g . self``."""
        if tuple(g.domain) != self.codomain and not set(self.table) <= set(g.domain):
            raise ValueError("functions do not compose")
        return FinFn(self.domain, g.codomain, [g(y) for y in self.table])

    def image(self) -> set:
        return set(self.table)

    def is_injective(self) -> bool:
        return len(set(self.table)) == len(self.table)

    def as_dict(self) -> dict:
        return dict(zip(self.domain, self.table))


def compose(g: FinFn, f: FinFn) -> FinFn:
    return f.then(g)


def all_functions(domain: Sequence, codomain: Sequence) -> Iterable[FinFn]:
    domain, codomain = tuple(domain), tuple(codomain)
    if len(codomain) ** len(domain) > ENUM_GUARD:
        raise SizeGuard(f"{len(codomain)}^{len(domain)} functions exceed the enumeration guard")
    for table in itertools.product(codomain, repeat=len(domain)):
        yield FinFn(domain, codomain, table)


# ---------------------------------------------------------------- finite-set limits

@dataclass
class FinPullback:
    apex: tuple
    p1: FinFn
    p2: FinFn


def pullback_finset(f: FinFn, g: FinFn) -> FinPullback:
    """``P = {(x, y) : f(x) = g(y)}`` with its two projections."""
    if set(f.codomain) != set(g.codomain):
        raise ValueError("pullback needs a shared codomain")
    apex = tuple((x, y) for x in f.domain for y in g.domain if f(x) == g(y))
    return FinPullback(apex, FinFn(apex, f.domain, [p[0] for p in apex]), FinFn(apex, g.domain, [p[1] for p in apex]))


@dataclass
class UniversalReport:
    ok: bool
    cones: int
    failures: list


def verify_pullback_finset(f: FinFn, g: FinFn, pb: FinPullback, max_apex: int = 4) -> UniversalReport:
    """Every cone over ``f, g`` with apex ``{0..n-1}`` (``n <= max_apex``) has exactly one mediating map.

    Cones are enumerated in full; mediating maps are counted pointwise, which is
    exhaustive because a map out of a finite set is a choice per point.
    """
    if any(f(pb.p1(p)) != g(pb.p2(p)) for p in pb.apex):
        return UniversalReport(False, 0, ["projections do not commute"])
    cones = 0
    failures = []
    for n in range(max_apex + 1):
        apex = tuple(range(n))
        for xs in itertools.product(f.domain, repeat=n):
            for ys in itertools.product(g.domain, repeat=n):
                if any(f(a) != g(b) for a, b in zip(xs, ys)):
                    continue
                cones += 1
                count = 1
                for a, b in zip(xs, ys):
                    count *= sum(1 for p in pb.apex if pb.p1(p) == a and pb.p2(p) == b)
                if count != 1:
                    failures.append((apex, xs, ys, count))
    return UniversalReport(not failures, cones, failures)


def coequalizer(f: FinFn, g: FinFn):
    """Quotient of the codomain by the equivalence generated by ``f(x) ~ g(x)``.

    Returns ``(blocks, q)`` with ``q: codomain -> blocks``; blocks are frozensets.
    """
    if f.domain != g.domain or set(f.codomain) != set(g.codomain):
        raise ValueError("coequalizer needs parallel functions")
    parent = {y: y for y in f.codomain}

    def find(y):
        while parent[y] != y:
            parent[y] = parent[parent[y]]
            y = parent[y]
        return y

    for x in f.domain:
        a, b = find(f(x)), find(g(x))
        if a != b:
            parent[b] = a
    groups = {}
    for y in f.codomain:
        groups.setdefault(find(y), []).append(y)
    blocks = tuple(frozenset(v) for v in groups.values())
    where = {y: blk for blk in blocks for y in blk}
    return blocks, FinFn(f.codomain, blocks, [where[y] for y in f.codomain])


# ---------------------------------------------------------------- value-function objects

@dataclass(frozen=True)
class QObject:
    """A value function ``f: inputs -> outputs``."""

    f: FinFn

    @property
    def inputs(self) -> tuple:
        return self.f.domain

    @property
    def outputs(self) -> tuple:
        return self.f.codomain

    @classmethod
    def build(cls, inputs: Sequence, outputs: Sequence, mapping) -> "QObject":
        return cls(FinFn.from_mapping(inputs, outputs, mapping))

    def __call__(self, x):
        return self.f(x)


@dataclass(frozen=True)
class QArrow:
    source: QObject
    target: QObject
    h: FinFn  # inputs -> inputs
    k: FinFn  # outputs -> outputs

    def then(self, other: "QArrow") -> "QArrow":
        """``other . self``, checked again."""
        return make_qarrow(self.source, other.target, self.h.then(other.h), self.k.then(other.k))

    @property
    def is_monic(self) -> bool:
        return self.h.is_injective() and self.k.is_injective()

    def key(self) -> tuple:
        return (self.h.table, self.k.table)


def _commute_witness(f: QObject, g: QObject, h: FinFn, k: FinFn):
    for x in f.inputs:
        if g(h(x)) != k(f(x)):
            return x
    return None


def make_qarrow(f: QObject, g: QObject, h: FinFn, k: FinFn) -> QArrow:
    """Arrow ``(h, k): f -> g``; raises ``CommuteError`` with the first input where
    ``g(h(x)) != k(f(x))``."""
    if set(h.domain) != set(f.inputs) or not set(h.table) <= set(g.inputs):
        raise ValueError("input map does not run between the input sets")
    if set(k.domain) != set(f.outputs) or not set(k.table) <= set(g.outputs):
        raise ValueError("output map does not run between the output sets")
    h = FinFn(f.inputs, g.inputs, [h(x) for x in f.inputs])
    k = FinFn(f.outputs, g.outputs, [k(o) for o in f.outputs])
    w = _commute_witness(f, g, h, k)
    if w is not None:
        raise CommuteError(f"square does not commute at input {w!r}", w)
    return QArrow(f, g, h, k)


def identity_arrow(f: QObject) -> QArrow:
    return make_qarrow(f, f, FinFn.identity(f.inputs), FinFn.identity(f.outputs))


def all_arrows(f: QObject, g: QObject, guard: int = ENUM_GUARD) -> list:
    """Every arrow ``f -> g``: enumerate ``k``, then ``h`` pointwise over the admissible fibres."""
    if len(g.outputs) ** len(f.outputs) > guard:
        raise SizeGuard("too many output maps to enumerate")
    fibre = {}
    for y in g.inputs:
        fibre.setdefault(g(y), []).append(y)
    out = []
    for k in all_functions(f.outputs, g.outputs):
        choices = [fibre.get(k(f(x)), []) for x in f.inputs]
        total = 1
        for c in choices:
            total *= len(c)
        if total == 0:
            continue
        if len(out) + total > guard:
            raise SizeGuard("too many arrows to enumerate")
        for table in itertools.product(*choices):
            out.append(QArrow(f, g, FinFn(f.inputs, g.inputs, table), k))
    return out


def product_q(a: QObject, b: QObject) -> QObject:
    ins = tuple(itertools.product(a.inputs, b.inputs))
    outs = tuple(itertools.product(a.outputs, b.outputs))
    return QObject(FinFn(ins, outs, [(a(x), b(y)) for x, y in ins]))


@dataclass
class QPullback:
    apex: QObject
    p1: QArrow
    p2: QArrow


def pullback_q(a1: QArrow, a2: QArrow) -> QPullback:
    """Levelwise pullback: inputs from ``(h1, h2)``, outputs from ``(k1, k2)``."""
    if a1.target != a2.target:
        raise ValueError("pullback needs arrows into the same object")
    pin = pullback_finset(a1.h, a2.h)
    pout = pullback_finset(a1.k, a2.k)
    f1, f2 = a1.source, a2.source
    apex = QObject(FinFn(pin.apex, pout.apex, [(f1(x), f2(y)) for x, y in pin.apex]))
    p1 = make_qarrow(apex, f1, pin.p1, pout.p1)
    p2 = make_qarrow(apex, f2, pin.p2, pout.p2)
    return QPullback(apex, p1, p2)


def _arrow_eq(a: QArrow, b: QArrow) -> bool:
    return a.h.as_dict() == b.h.as_dict() and a.k.as_dict() == b.k.as_dict()


def verify_pullback_q(a1: QArrow, a2: QArrow, pb: QPullback, tests: Sequence[QObject]) -> UniversalReport:
    """For each test apex ``T``: every cone ``(c1, c2)`` with ``a1 c1 = a2 c2`` has exactly
    one arrow ``m: T -> apex`` with ``p1 m = c1`` and ``p2 m = c2``."""
    if not _arrow_eq(pb.p1.then(a1), pb.p2.then(a2)):
        return UniversalReport(False, 0, ["pullback square does not commute"])
    cones = 0
    failures = []
    for T in tests:
        mediators = all_arrows(T, pb.apex)
        images = {}
        for m in mediators:
            key = (m.then(pb.p1).key(), m.then(pb.p2).key())
            images[key] = images.get(key, 0) + 1
        for c1 in all_arrows(T, a1.source):
            via1 = c1.then(a1)
            for c2 in all_arrows(T, a2.source):
                if not _arrow_eq(via1, c2.then(a2)):
                    continue
                cones += 1
                count = images.get((c1.key(), c2.key()), 0)
                if count != 1:
                    failures.append((T, c1.key(), c2.key(), count))
    return UniversalReport(not failures, cones, failures)


def small_test_objects() -> list:
    """Apexes used for brute-force universal-property checks."""
    return [
        QObject.build((), (), {}),
        QObject.build((0,), (0,), {0: 0}),
        QObject.build((), (0,), {}),
        QObject.build((0, 1), (0,), {0: 0, 1: 0}),
        QObject.build((0, 1), (0, 1), {0: 0, 1: 1}),
        QObject.build((0,), (0, 1), {0: 0}),
    ]


# ---------------------------------------------------------------- subobject classifier

TRUTH = (0, HALF, 1)
TERMINAL = QObject.build((0,), (0,), {0: 0})
OMEGA = QObject.build(TRUTH, (0, 1), {0: 0, HALF: 1, 1: 1})
TRUE = make_qarrow(TERMINAL, OMEGA, FinFn((0,), TRUTH, (1,)), FinFn((0,), (0, 1), (1,)))


def _check_monic(i: FinFn, j: FinFn):
    if not i.is_injective() or not j.is_injective():
        raise NotMonic("subobject maps must be injective")


def characteristic_arrow(sub: QObject, parent: QObject, i: FinFn, j: FinFn) -> QArrow:
    """The arrow ``parent -> Omega``: ``psi`` on inputs and the indicator of ``image(j)`` on outputs."""
    _check_monic(i, j)
    inc = make_qarrow(sub, parent, i, j)
    im_i, im_j = inc.h.image(), inc.k.image()

    def psi(x):
        if x in im_i:
            return 1
        if parent(x) in im_j:
            return HALF
        return 0

    h = FinFn.from_mapping(parent.inputs, TRUTH, psi)
    k = FinFn.from_mapping(parent.outputs, (0, 1), lambda o: 1 if o in im_j else 0)
    return make_qarrow(parent, OMEGA, h, k)


def classify_subobject(sub: QObject, parent: QObject, i: FinFn, j: FinFn) -> FinFn:
    """Three-valued characteristic function of a subobject on the parent's inputs."""
    return characteristic_arrow(sub, parent, i, j).h


@dataclass
class ClassifierReport:
    psi: FinFn
    commutes: bool
    recovers: bool
    pullback: bool
    unique: bool | None

    @property
    def ok(self) -> bool:
        return self.commutes and self.recovers and self.pullback and self.unique is not False


def check_classifier(sub: QObject, parent: QObject, i: FinFn, j: FinFn, tests=None,
                     check_unique: bool = True) -> ClassifierReport:
    """Check that ``sub`` is the pullback of ``true`` along its characteristic arrow.

    ``recovers``: the pulled-back subobject has exactly the images of ``i`` and ``j``.
    ``pullback``: the square ``sub -> 1, sub -> parent`` satisfies the universal
    property against ``tests`` (brute force).  ``unique``: no other arrow
    ``parent -> Omega`` pulls back to the same subobject.
    """
    chi = characteristic_arrow(sub, parent, i, j)
    inc = make_qarrow(sub, parent, i, j)
    pb = pullback_q(chi, TRUE)
    recovers = pb.p1.h.image() == inc.h.image() and pb.p1.k.image() == inc.k.image()
    # the square with apex ``sub``
    bang = make_qarrow(sub, TERMINAL, FinFn(sub.inputs, (0,), [0] * len(sub.inputs)),
                       FinFn(sub.outputs, (0,), [0] * len(sub.outputs)))
    square = QPullback(sub, inc, bang)
    commutes = _arrow_eq(inc.then(chi), bang.then(TRUE))
    universal = verify_pullback_q(chi, TRUE, square, small_test_objects() if tests is None else tests)
    unique = None
    if check_unique:
        target = (inc.h.image(), inc.k.image())
        hits = 0
        for arrow in all_arrows(parent, OMEGA):
            pba = pullback_q(arrow, TRUE)
            if (pba.p1.h.image(), pba.p1.k.image()) == target:
                hits += 1
        unique = hits == 1
    return ClassifierReport(chi.h, commutes, recovers, universal.ok, unique)


def _self_check():
    # classifying ``true`` itself must give the identity on Omega
    chi = characteristic_arrow(TERMINAL, OMEGA, TRUE.h, TRUE.k)
    if chi.h.as_dict() != {x: x for x in TRUTH} or chi.k.as_dict() != {0: 0, 1: 1}:
        raise AssertionError("classifier base square is inconsistent")
    if not TRUE.is_monic:
        raise AssertionError("true is not monic")
    if not verify_pullback_q(chi, TRUE, QPullback(TERMINAL, TRUE, identity_arrow(TERMINAL)),
                             small_test_objects()).ok:
        raise AssertionError("classifier base square is not a pullback")


_self_check()


# ---------------------------------------------------------------- exponentials

@dataclass
class Exponential:
    arrows: list  # E as QArrow objects
    obj: QObject  # g^f : E -> F
    product: QObject  # g^f x f
    eval: QArrow  # g^f x f -> g


def _fn_key(fn: FinFn) -> tuple:
    return fn.table


def exponential_q(f: QObject, g: QObject) -> Exponential:
    """Exponential ``g^f``: inputs are the arrows ``f -> g``, outputs all maps ``O -> O'``,
    and ``(h, k) -> k``.  Evaluation sends ``((h, k), x)`` to ``h(x)`` and ``(k, o)`` to ``k(o)``."""
    for side in (f.inputs, f.outputs, g.inputs, g.outputs):
        if len(side) > EXP_GUARD:
            raise SizeGuard(f"exponential limited to sets of at most {EXP_GUARD} elements")
    arrows = all_arrows(f, g)
    E = tuple(a.key() for a in arrows)
    F = tuple(_fn_key(k) for k in all_functions(f.outputs, g.outputs))
    obj = QObject(FinFn(E, F, [e[1] for e in E]))
    prod = product_q(obj, f)
    out_index = {o: n for n, o in enumerate(f.outputs)}
    in_index = {x: n for n, x in enumerate(f.inputs)}
    u = FinFn(prod.inputs, g.inputs, [e[0][in_index[x]] for e, x in prod.inputs])
    v = FinFn(prod.outputs, g.outputs, [k[out_index[o]] for k, o in prod.outputs])
    ev = make_qarrow(prod, g, u, v)
    return Exponential(arrows, obj, prod, ev)


def _times_f(alpha: QArrow, f: QObject, prod: QObject) -> QArrow:
    """``alpha x id_f`` from ``c x f`` to ``g^f x f``."""
    c = alpha.source
    cf = product_q(c, f)
    h = FinFn(cf.inputs, prod.inputs, [(alpha.h(a), x) for a, x in cf.inputs])
    k = FinFn(cf.outputs, prod.outputs, [(alpha.k(d), o) for d, o in cf.outputs])
    return make_qarrow(cf, prod, h, k)


@dataclass
class TransposeReport:
    ok: bool
    arrows_in: int
    arrows_out: int
    failures: list


def verify_exponential(f: QObject, g: QObject, exp: Exponential, tests: Sequence[QObject]) -> TransposeReport:
    """Currying by enumeration: for each test object ``c``, composing with ``eval`` must be
    a bijection from arrows ``c -> g^f`` onto arrows ``c x f -> g``."""
    failures = []
    n_in = n_out = 0
    for c in tests:
        counts = {}
        for alpha in all_arrows(c, exp.obj):
            key = _times_f(alpha, f, exp.product).then(exp.eval).key()
            counts[key] = counts.get(key, 0) + 1
            n_in += 1
        targets = all_arrows(product_q(c, f), g)
        n_out += len(targets)
        for beta in targets:
            hits = counts.get(beta.key(), 0)
            if hits != 1:
                failures.append((c, beta.key(), hits))
        if sum(counts.values()) != len(targets):
            failures.append((c, "count", sum(counts.values()), len(targets)))
    return TransposeReport(not failures, n_in, n_out, failures)


# ---------------------------------------------------------------- JSON instances

def _tupleize(v):
    return tuple(_tupleize(x) for x in v) if isinstance(v, list) else v


def qobject_from_json(data) -> QObject:
    ins = [_tupleize(x) for x in data["inputs"]]
    outs = [_tupleize(x) for x in data["outputs"]]
    table = data["f"]
    if isinstance(table, dict):
        mapping = {x: _tupleize(table[str(x)]) for x in ins}
    else:
        mapping = dict(zip(ins, (_tupleize(v) for v in table)))
    return QObject.build(ins, outs, mapping)


def finfn_from_json(domain, codomain, data) -> FinFn:
    if isinstance(data, dict):
        return FinFn.from_mapping(domain, codomain, {x: _tupleize(data[str(x)]) for x in domain})
    return FinFn(domain, codomain, [_tupleize(v) for v in data])


def value_to_json(v):
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, tuple):
        return [value_to_json(x) for x in v]
    return v
