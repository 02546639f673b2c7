"""Partitions of finite sets, used for bisimulation quotients and information fields."""
from itertools import product as _product


class Partition:
    """Disjoint nonempty blocks covering a finite set.

    Blocks are stored in canonical order: members sorted inside each block,
    blocks sorted by their smallest member.
    """

    __slots__ = ("blocks", "_index")

    def __init__(self, blocks):
        canon = []
        seen = set()
        for b in blocks:
            b = tuple(sorted(set(b)))
            if not b:
                raise ValueError("partition blocks must be nonempty")
            for x in b:
                if x in seen:
                    raise ValueError(f"element {x!r} appears in two blocks")
                seen.add(x)
            canon.append(b)
        canon.sort()
        self.blocks = tuple(canon)
        self._index = {x: i for i, b in enumerate(self.blocks) for x in b}

    @classmethod
    def from_labels(cls, elements, label):
        """Group ``elements`` by ``label(x)``."""
        groups = {}
        for x in elements:
            groups.setdefault(label(x), []).append(x)
        return cls(groups.values())

    @classmethod
    def discrete(cls, elements):
        return cls([x] for x in elements)

    @classmethod
    def trivial(cls, elements):
        elements = list(elements)
        return cls([elements]) if elements else cls([])

    @property
    def elements(self):
        return tuple(sorted(self._index))

    def block_of(self, x):
        return self._index[x]

    def block_containing(self, x):
        return self.blocks[self._index[x]]

    def covers(self, elements):
        return set(self._index) == set(elements)

    def is_discrete(self):
        return all(len(b) == 1 for b in self.blocks)

    def same_block(self, x, y):
        return self._index[x] == self._index[y]

    def pairs(self):
        """The equivalence relation as a set of ordered pairs."""
        return {(x, y) for b in self.blocks for x, y in _product(b, b)}

    def refines(self, other):
        """True if every block of ``self`` lies inside a block of ``other``."""
        return all(len({other.block_of(x) for x in b}) == 1 for b in self.blocks)

    def join(self, other):
        """Common refinement (the generated field when blocks are atoms)."""
        if set(self._index) != set(other._index):
            raise ValueError("partitions are over different sets")
        return Partition.from_labels(self._index, lambda x: (self._index[x], other._index[x]))

    def __len__(self):
        return len(self.blocks)

    def __iter__(self):
        return iter(self.blocks)

    def __eq__(self, other):
        return isinstance(other, Partition) and self.blocks == other.blocks

    def __hash__(self):
        return hash(self.blocks)

    def __repr__(self):
        return f"Partition({[list(b) for b in self.blocks]})"


def all_partitions(elements):
    """Every partition of ``elements`` (restricted growth strings)."""
    elements = list(elements)
    n = len(elements)
    if n == 0:
        yield Partition([])
        return

    def grow(i, labels, m):
        if i == n:
            groups = [[] for _ in range(m)]
            for x, k in zip(elements, labels):
                groups[k].append(x)
            yield Partition(groups)
            return
        for k in range(m + 1):
            labels.append(k)
            yield from grow(i + 1, labels, max(m, k + 1))
            labels.pop()

    yield from grow(0, [], 0)
