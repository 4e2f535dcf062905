"""Oriented finite partial automorphisms of M and their increasing chains.

An oriented map carries a bit so that inversion never fixes anything:
``invert`` flips both the map and the bit.  A chain is a strictly
increasing sequence of oriented maps sharing one bit; its own inverse is
taken itemwise.  ``enumerate_chains`` produces the fixed interleaved
listing that drives the stage builder: index 0 is the empty chain, chains
come in inverse pairs at indices (2l+1, 2l+2), and every chain of length
above one extends the even member of an earlier pair, so prefixes always
appear first.  The listing is fair: rounds sweep a growing finite part of
M, so every chain over every finite part eventually shows up.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .keq import is_partial_automorphism, m_relation


@dataclass(frozen=True)
class PartialAuto:
    """A finite nonempty partial automorphism of M with an orientation bit."""

    pairs: tuple[tuple[int, int], ...]  # sorted by source
    orient: int

    def __post_init__(self):
        if not self.pairs:
            raise ValueError("the map must be nonempty")
        if self.orient not in (0, 1):
            raise ValueError("orientation bit must be 0 or 1")
        if list(self.pairs) != sorted(self.pairs):
            raise ValueError("pairs must be source-sorted")
        if not is_partial_automorphism(dict(self.pairs)):
            raise ValueError(f"{self.pairs} does not preserve the relations of M")

    @classmethod
    def make(cls, mapping: dict[int, int], orient: int = 0) -> "PartialAuto":
        return cls(tuple(sorted(mapping.items())), orient)

    @property
    def mapping(self) -> dict[int, int]:
        return dict(self.pairs)

    @property
    def dom(self) -> frozenset[int]:
        return frozenset(x for x, _ in self.pairs)

    @property
    def rng(self) -> frozenset[int]:
        return frozenset(y for _, y in self.pairs)

    def invert(self) -> "PartialAuto":
        return PartialAuto(tuple(sorted((y, x) for x, y in self.pairs)), 1 - self.orient)

    def extends(self, other: "PartialAuto") -> bool:
        return self.orient == other.orient and set(other.pairs) < set(self.pairs)


@dataclass(frozen=True)
class Chain:
    """A strictly increasing chain of oriented maps (possibly empty)."""

    items: tuple[PartialAuto, ...]

    def __post_init__(self):
        for g0, g1 in zip(self.items, self.items[1:]):
            if not g1.extends(g0):
                raise ValueError("chain items must strictly extend with equal bit")

    def __len__(self) -> int:
        return len(self.items)

    @property
    def dom(self) -> frozenset[int]:
        return self.items[-1].dom if self.items else frozenset()

    @property
    def rng(self) -> frozenset[int]:
        return self.items[-1].rng if self.items else frozenset()

    @property
    def last(self) -> PartialAuto:
        return self.items[-1]

    def invert(self) -> "Chain":
        return Chain(tuple(g.invert() for g in self.items))

    def prefix(self, j: int) -> "Chain":
        return Chain(self.items[:j])

    def extend(self, g: PartialAuto) -> "Chain":
        return Chain(self.items + (g,))

    def is_prefix_of(self, other: "Chain") -> bool:
        return len(self) < len(other) and other.items[: len(self)] == self.items

    def apply(self, xs: tuple[int, ...]) -> tuple[int, ...]:
        """Apply the last item pointwise; empty tuples map to empty tuples."""
        if not xs:
            return ()
        m = self.items[-1].mapping if self.items else {}
        try:
            return tuple(m[x] for x in xs)
        except KeyError as exc:
            raise KeyError(f"point {exc.args[0]} outside the chain domain") from exc

    def point_label(self, u: int) -> int:
        """Image of the model point u under the last item."""
        return self.items[-1].mapping[u]

    def serial(self):
        return (
            len(self.items),
            self.items[0].orient if self.items else -1,
            tuple(g.pairs for g in self.items),
        )

    def to_json(self) -> dict:
        return {
            "orient": self.items[0].orient if self.items else None,
            "maps": [[list(p) for p in g.pairs] for g in self.items],
        }

    @classmethod
    def from_json(cls, data: dict) -> "Chain":
        orient = data["orient"]
        return cls(
            tuple(
                PartialAuto(tuple((x, y) for x, y in m), orient)
                for m in data["maps"]
            )
        )


EMPTY_CHAIN = Chain(())


def chain_invert(c: Chain) -> Chain:
    return c.invert()


def chain_apply(c: Chain, xs: tuple[int, ...]) -> tuple[int, ...]:
    return c.apply(xs)


def invert(g: PartialAuto) -> PartialAuto:
    return g.invert()


def _maps_over(points: list[int]):
    """All valid nonempty partial automorphism maps within a point set,
    in canonical (size, pairs) order."""
    out = []
    for size in range(1, len(points) + 1):
        for dom in itertools.combinations(points, size):
            for img in itertools.permutations(points, size):
                mapping = dict(zip(dom, img))
                if len(set(mapping.values())) != size:
                    continue
                if _preserves(mapping):
                    out.append(tuple(sorted(mapping.items())))
    out.sort(key=lambda pairs: (len(pairs), pairs))
    return out


def _preserves(mapping: dict[int, int]) -> bool:
    items = list(mapping.items())
    for i in range(len(items)):
        a, fa = items[i]
        for j in range(i, len(items)):
            b, fb = items[j]
            for rel in range(3):
                if m_relation(rel, a, b) != m_relation(rel, fa, fb):
                    return False
    return True


def iter_chains():
    """The fixed enumeration of all chains; see the module docstring.

    Yields the empty chain, then inverse pairs.  Every proper prefix of a
    yielded chain has been yielded before it, and the immediate prefix of
    each odd-indexed chain of length > 1 is an earlier even-indexed chain.
    """
    yield EMPTY_CHAIN
    seen = {EMPTY_CHAIN.serial()}
    pairs: list[tuple[Chain, Chain]] = []  # (odd member, even member)

    def emit(odd: Chain):
        even = odd.invert()
        seen.add(odd.serial())
        seen.add(even.serial())
        pairs.append((odd, even))
        return odd, even

    bound = 0
    while True:
        bound += 1
        points = list(range(bound))
        maps = _maps_over(points)
        point_set = set(points)
        # fresh length-1 pairs, bit 0 on the odd side
        for pairs_t in maps:
            cand = Chain((PartialAuto(pairs_t, 0),))
            if cand.serial() in seen:
                continue
            yield from emit(cand)
        # extension sweep: grow even members of already-emitted pairs
        idx = 0
        while idx < len(pairs):
            _, even = pairs[idx]
            last = even.last
            if last.dom | last.rng <= point_set:
                base = set(last.pairs)
                for pairs_t in maps:
                    if not base < set(pairs_t):
                        continue
                    g = PartialAuto(pairs_t, last.orient)
                    cand = even.extend(g)
                    if cand.serial() in seen:
                        continue
                    yield from emit(cand)
            idx += 1


def enumerate_chains(n: int) -> list[Chain]:
    """First n entries of the fixed enumeration."""
    if n < 1:
        raise ValueError("need at least one chain")
    return list(itertools.islice(iter_chains(), n))
