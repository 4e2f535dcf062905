"""Independent brute-force oracles shared by the test suite.

Everything here deliberately avoids the package's own decision procedures:
graph isomorphism goes through permutation-minimal canonical forms, and
hull membership through bounded integer combinations of explicit
generators with valuation pruning.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

from tfabred.groups import GroupElement
from tfabred.keq import GraphAdj


def all_graphs(n: int):
    """Every graph on vertices 0..n-1, deterministically ordered."""
    vs = list(range(n))
    pairs = list(itertools.combinations(vs, 2))
    for mask in range(2 ** len(pairs)):
        edges = [pairs[i] for i in range(len(pairs)) if mask >> i & 1]
        yield GraphAdj.make(vs, edges)


def canon_graph(g: GraphAdj) -> frozenset:
    """Brute-force canonical form: minimal edge set over all relabelings."""
    vs = list(g.vertices)
    best = None
    for perm in itertools.permutations(range(len(vs))):
        relabel = {v: perm[i] for i, v in enumerate(vs)}
        edges = frozenset(
            frozenset((relabel[u], relabel[v])) for e in g.edges for u, v in [tuple(e)]
        )
        key = tuple(sorted(tuple(sorted(e)) for e in edges))
        if best is None or key < best[0]:
            best = (key, edges)
    return best[1] if best else frozenset()


def graphs_isomorphic(g1: GraphAdj, g2: GraphAdj) -> bool:
    if len(g1.vertices) != len(g2.vertices):
        return False
    return canon_graph(g1) == canon_graph(g2)


def _vp(p: int, q: Fraction) -> bool:
    return q.denominator % p != 0


def g1_combination_oracle(
    a: GroupElement,
    prime_groups: list[tuple[int, list[GroupElement]]],
    coeff_bound: int,
) -> bool:
    """Bounded brute force: does some integer combination of the fractional
    generators, plus an integer vector, reach the element?

    prime_groups lists, per prime, the fractional generators (already of the
    form weight-vector divided by a p power).  The search runs depth first,
    one prime group at a time; after a group is exhausted every coordinate
    must have lost its p from the denominator, which prunes hard.
    """

    def prime_done(p: int, residual: dict) -> bool:
        return all(_vp(p, q) for q in residual.values())

    def rec(groups: list, residual: dict) -> bool:
        if not groups:
            return all(q.denominator == 1 for q in residual.values() if q != 0)
        (p, gens), rest = groups[0], groups[1:]

        def walk(idx: int, res: dict) -> bool:
            if idx == len(gens):
                return prime_done(p, res) and rec(rest, res)
            g = gens[idx]
            later = {x for gg in gens[idx + 1 :] for x in gg}
            for c in range(-coeff_bound, coeff_bound + 1):
                nxt = dict(res)
                for x, q in g.items():
                    v = nxt.get(x, Fraction(0)) - c * q
                    if v == 0:
                        nxt.pop(x, None)
                    else:
                        nxt[x] = v
                # coords no later generator touches must already be p-clean
                if all(_vp(p, q) for x, q in nxt.items() if x not in later):
                    if walk(idx + 1, nxt):
                        return True
            return False

        return walk(0, dict(residual))

    return rec(prime_groups, dict(a))


def search_point_maps_passing(stage_u, stage_v, u_points, v_points, check) -> bool:
    """Literal pruned-exhaustive search over injective point maps; returns
    True as soon as any total map passes the given pairwise check."""
    u_points, v_points = list(u_points), list(v_points)
    if len(u_points) != len(v_points):
        return False
    assign: dict[int, int] = {}
    used: set[int] = set()

    def extend(i: int) -> bool:
        if i == len(u_points):
            return True
        x = u_points[i]
        for y in v_points:
            if y in used:
                continue
            if not all(check(x2, assign[x2], x, y) for x2 in assign):
                continue
            assign[x] = y
            used.add(y)
            if extend(i + 1):
                return True
            del assign[x]
            used.discard(y)
        return False

    return extend(0)
