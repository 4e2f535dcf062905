"""Two-equivalence-relation structures and their homogeneous universal model.

The universe here is the class of structures carrying equivalence relations
``E0``, ``E1``, ``E2`` where ``E2`` is forced to be equality.  The countable
homogeneous universal model ``M`` is presented computably on the naturals:
a point ``n`` decodes through an iterated Cantor pairing into a triple
``(row, col, fiber)``; ``E0`` compares rows, ``E1`` compares columns, ``E2``
is equality.  Every finite structure embeds (points sharing both classes go
to distinct fibers of one cell) and every finite partial automorphism
extends one point at a time, because rows, columns and cells are all
infinite.  ``greedy_embed`` exploits exactly this: it sends the n-th point
of a finite structure to the least natural number that keeps the map a
partial isomorphism into ``M``.

Graphs enter through a star/edge-token encoding: each edge contributes two
tokens, ``E0`` groups every vertex with its incident tokens, ``E1`` pairs
the two tokens of each edge.  Vertices are recoverable as the points whose
``E1`` block is a singleton, so the encoding preserves and reflects
isomorphism.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from math import isqrt


def cantor_pair(x: int, y: int) -> int:
    return (x + y) * (x + y + 1) // 2 + y


def cantor_unpair(z: int) -> tuple[int, int]:
    w = (isqrt(8 * z + 1) - 1) // 2
    y = z - w * (w + 1) // 2
    return w - y, y


def code_point(row: int, col: int, fiber: int) -> int:
    """The point of M sitting at (row, col, fiber)."""
    return cantor_pair(cantor_pair(row, col), fiber)


@lru_cache(maxsize=None)
def decode_point(n: int) -> tuple[int, int, int]:
    rc, fiber = cantor_unpair(n)
    row, col = cantor_unpair(rc)
    return row, col, fiber


def m_relation(i: int, a: int, b: int) -> bool:
    """Whether points a, b of M are related under the i-th equivalence."""
    if i == 0:
        return decode_point(a)[0] == decode_point(b)[0]
    if i == 1:
        return decode_point(a)[1] == decode_point(b)[1]
    if i == 2:
        return a == b
    raise IndexError(f"relation index must be < 3, got {i}")


def is_partial_automorphism(mapping: dict[int, int]) -> bool:
    """Exhaustive check that a finite point map preserves all three relations."""
    items = list(mapping.items())
    if len(set(mapping.values())) != len(items):
        return False
    for (a, fa), (b, fb) in itertools.combinations_with_replacement(items, 2):
        for i in range(3):
            if m_relation(i, a, b) != m_relation(i, fa, fb):
                return False
    return True


# ---------------------------------------------------------------------------
# finite structures


class DecodeError(ValueError):
    """Raised when a structure is not of the image shape of encode_graph."""


def _freeze_id(obj):
    if isinstance(obj, list):
        return tuple(_freeze_id(x) for x in obj)
    return obj


@dataclass(frozen=True)
class FiniteKeqStructure:
    """A finite structure: a domain with two stored partitions (E2 is equality)."""

    domain: tuple
    e0: tuple[tuple, ...]
    e1: tuple[tuple, ...]

    def __post_init__(self):
        if len(set(self.domain)) != len(self.domain):
            raise ValueError("domain ids must be pairwise distinct")
        for blocks in (self.e0, self.e1):
            seen = [p for block in blocks for p in block]
            if sorted(map(repr, seen)) != sorted(map(repr, self.domain)):
                raise ValueError("relation blocks must partition the domain")

    def _block_map(self, blocks) -> dict:
        out = {}
        for idx, block in enumerate(blocks):
            for p in block:
                out[p] = idx
        return out

    def relation(self, i: int, a, b) -> bool:
        if i == 2:
            return a == b
        blocks = self.e0 if i == 0 else self.e1
        bm = self._block_map(blocks)
        return bm[a] == bm[b]

    @classmethod
    def from_partitions(cls, domain, e0_blocks, e1_blocks) -> "FiniteKeqStructure":
        order = {p: i for i, p in enumerate(domain)}
        norm = lambda blocks: tuple(
            tuple(sorted(b, key=order.__getitem__))
            for b in sorted((list(b) for b in blocks), key=lambda b: min(order[p] for p in b))
        )
        return cls(tuple(domain), norm(e0_blocks), norm(e1_blocks))

    def to_json(self) -> dict:
        unfreeze = lambda x: list(map(unfreeze, x)) if isinstance(x, tuple) else x
        return {
            "domain": [unfreeze(p) for p in self.domain],
            "e0": [[unfreeze(p) for p in b] for b in self.e0],
            "e1": [[unfreeze(p) for p in b] for b in self.e1],
        }

    @classmethod
    def from_json(cls, data: dict) -> "FiniteKeqStructure":
        dom = [_freeze_id(p) for p in data["domain"]]
        e0 = [[_freeze_id(p) for p in b] for b in data["e0"]]
        e1 = [[_freeze_id(p) for p in b] for b in data["e1"]]
        return cls.from_partitions(dom, e0, e1)


@dataclass(frozen=True)
class GraphAdj:
    """A finite simple graph given by vertex list and unordered edges."""

    vertices: tuple
    edges: frozenset  # of frozensets {u, v}

    def __post_init__(self):
        vs = set(self.vertices)
        if len(vs) != len(self.vertices):
            raise ValueError("duplicate vertices")
        for e in self.edges:
            if len(e) != 2:
                raise ValueError(f"edge {set(e)} is not a 2-set")
            if not e <= vs:
                raise ValueError(f"edge {set(e)} leaves the vertex set")

    @classmethod
    def make(cls, vertices, edges) -> "GraphAdj":
        return cls(tuple(vertices), frozenset(frozenset(e) for e in edges))

    def adjacent(self, u, v) -> bool:
        return frozenset((u, v)) in self.edges

    def to_json(self) -> dict:
        order = {v: i for i, v in enumerate(self.vertices)}
        edges = sorted(
            sorted(e, key=order.__getitem__) for e in self.edges
        )
        return {"vertices": list(self.vertices), "edges": [list(e) for e in edges]}

    @classmethod
    def from_json(cls, data: dict) -> "GraphAdj":
        vs = [_freeze_id(v) for v in data["vertices"]]
        return cls.make(vs, [(_freeze_id(u), _freeze_id(v)) for u, v in data["edges"]])


def encode_graph(h: GraphAdj) -> FiniteKeqStructure:
    """Star/edge-token encoding of a graph as a two-partition structure.

    Domain: vertices plus two tokens ('e', u, v, w) per edge {u, v}, w the
    endpoint.  E0 blocks: each vertex with its incident tokens.  E1 blocks:
    the two tokens of each edge; vertices stay singletons.
    """
    order = {v: i for i, v in enumerate(h.vertices)}
    edges = sorted((sorted(e, key=order.__getitem__) for e in h.edges),
                   key=lambda e: (order[e[0]], order[e[1]]))
    domain = list(h.vertices)
    star: dict = {v: [v] for v in h.vertices}
    e1_blocks = []
    for u, v in edges:
        tu, tv = ("e", u, v, u), ("e", u, v, v)
        domain += [tu, tv]
        star[u].append(tu)
        star[v].append(tv)
        e1_blocks.append([tu, tv])
    e1_blocks += [[v] for v in h.vertices]
    return FiniteKeqStructure.from_partitions(domain, list(star.values()), e1_blocks)


def decode_keq(s: FiniteKeqStructure) -> GraphAdj:
    """Inverse of encode_graph; raises DecodeError off the image shape."""
    e1_map = s._block_map(s.e1)
    e1_sizes = {p: sum(1 for q in s.domain if e1_map[q] == e1_map[p]) for p in s.domain}
    vertices = [p for p in s.domain if e1_sizes[p] == 1]
    tokens = [p for p in s.domain if e1_sizes[p] != 1]
    if any(e1_sizes[t] != 2 for t in tokens):
        raise DecodeError("a non-singleton equivalence-1 block is not a pair")
    e0_map = s._block_map(s.e0)
    owner = {}
    for t in tokens:
        owners = [v for v in vertices if e0_map[v] == e0_map[t]]
        if len(owners) != 1:
            raise DecodeError(f"token {t!r} does not sit in exactly one vertex star")
        owner[t] = owners[0]
    edges = set()
    for t in tokens:
        mates = [q for q in tokens if q != t and e1_map[q] == e1_map[t]]
        mate = mates[0]
        u, v = owner[t], owner[mate]
        if u == v:
            raise DecodeError("edge tokens collapse to a loop")
        edges.add(frozenset((u, v)))
    return GraphAdj(tuple(vertices), frozenset(edges))


def is_isomorphic_finite(a: FiniteKeqStructure, b: FiniteKeqStructure):
    """Backtracking search for a partition-respecting bijection, or None."""
    if len(a.domain) != len(b.domain):
        return None
    a0, a1 = a._block_map(a.e0), a._block_map(a.e1)
    b0, b1 = b._block_map(b.e0), b._block_map(b.e1)

    def profile(p, m0, m1, dom):
        return (
            sum(1 for q in dom if m0[q] == m0[p]),
            sum(1 for q in dom if m1[q] == m1[p]),
        )

    prof_a = {p: profile(p, a0, a1, a.domain) for p in a.domain}
    prof_b = {p: profile(p, b0, b1, b.domain) for p in b.domain}
    assignment: dict = {}
    used: set = set()

    def extend(i: int):
        if i == len(a.domain):
            return True
        p = a.domain[i]
        for q in b.domain:
            if q in used or prof_a[p] != prof_b[q]:
                continue
            ok = all(
                (a0[p] == a0[p2]) == (b0[q] == b0[assignment[p2]])
                and (a1[p] == a1[p2]) == (b1[q] == b1[assignment[p2]])
                for p2 in assignment
            )
            if not ok:
                continue
            assignment[p] = q
            used.add(q)
            if extend(i + 1):
                return True
            del assignment[p]
            used.discard(q)
        return False

    return dict(assignment) if extend(0) else None


def greedy_embed(s: FiniteKeqStructure, n: int | None = None) -> list[int]:
    """Least-witness embedding of the first n points of s into M.

    Point m goes to the least k making the map so far, plus (m, k), a
    partial isomorphism.  Deterministic; a witness always exists because
    M is universal.
    """
    count = len(s.domain) if n is None else min(n, len(s.domain))
    images: list[int] = []
    for m in range(count):
        p = s.domain[m]
        k = 0
        while True:
            if all(
                s.relation(i, s.domain[l], p) == m_relation(i, images[l], k)
                for l in range(m)
                for i in range(3)
            ):
                images.append(k)
                break
            k += 1
    return images


def pad_graph(h: GraphAdj, pad: int) -> GraphAdj:
    """Append pad isolated vertices with fresh ids."""
    extra = tuple(("pad", i) for i in range(pad))
    return GraphAdj(h.vertices + extra, h.edges)
