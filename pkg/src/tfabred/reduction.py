"""End-to-end map from graphs to group-presentation prefixes, and the
inverse analysis that pulls a model-part isomorphism back out of a
candidate group isomorphism.

The forward direction composes the graph encoder, the greedy embedding
into the homogeneous model, and a stage-truncated harvest of generators of
the pure subgroup anchored on the embedded image: its realized basis
points plus the prime-divisibility generators of the stable tuple classes
sitting inside the image.

The inverse direction consumes a candidate map on realized basis points
with group-element values.  Either some image fails to be a rational
multiple of a single same-class basis point (a structured refutation), or
the candidate induces a point map of blocks whose preservation of the
model relations is then checked pairwise; scalars are validated
separately.  At desk scale this is exactly the finitely checkable content
of the uniqueness analysis: candidates from genuine transfers pass with
unit scalar, and for non-isomorphic cores the block-level search finds no
passing map at all.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

from .chains import Chain, PartialAuto
from .groups import (
    DivisibilityCertificate,
    GroupElement,
    in_g1,
    in_g1u,
    lift_fhat,
)
from .keq import GraphAdj, encode_graph, greedy_embed, m_relation, pad_graph
from .primes import PrimeRegistry, canonical_class_key
from .system import FullSystem, Report, class_of, seq_classes, tuple_birth


@dataclass
class PresentationPrefix:
    stage: int
    u_label: tuple[int, ...]
    generators: list[GroupElement]
    divisibility_facts: list[DivisibilityCertificate]
    dependency_bound: int  # prefix depends only on embedding below this model point

    def to_json(self) -> dict:
        return {
            "stage": self.stage,
            "u_label": list(self.u_label),
            "generators": [g.to_json() for g in self.generators],
            "divisibility_facts": [c.to_json() for c in self.divisibility_facts],
            "dependency_bound": self.dependency_bound,
        }


@dataclass
class IsoAnalysis:
    pi_map: dict[int, GroupElement]
    pi1: dict[int, int]
    scalars: dict[int, Fraction]
    q_star: Fraction | None = None


@dataclass
class Refutation:
    witness: int
    reason: str

    def __bool__(self) -> bool:
        return False


def reduce_graph(
    system: FullSystem,
    registry: PrimeRegistry,
    h: GraphAdj,
    pad: int,
    stage_idx: int,
    max_classes_per_arity: int = 12,
) -> PresentationPrefix:
    """Stage-truncated presentation prefix of the group attached to a graph."""
    if stage_idx < 1:
        raise ValueError("stage must be at least 1")
    padded = pad_graph(h, pad)
    structure = encode_graph(padded)
    u_points = greedy_embed(structure)
    u_set = set(u_points)
    stage = system.stage(stage_idx)

    basis = [
        GroupElement.unit(x) for x in range(stage.x_count) if stage.part[x] in u_set
    ]
    generators = list(basis)
    facts: list[DivisibilityCertificate] = []
    for k in (1, 2):
        classes = seq_classes(stage, k, ())
        eligible = []
        for cls in {c for c in classes.values()}:
            members = sorted(
                t for t in cls if all(stage.part[x] in u_set for x in t)
            )
            if not members:
                continue
            # order by the stage at which the class first met the image blocks,
            # so a longer build only appends to the harvest
            birth = min(
                (tuple_birth(system, stage_idx, t) or stage_idx) for t in members
            )
            eligible.append((birth, members[0]))
        eligible.sort()
        for _, member in eligible[:max_classes_per_arity]:
            key = canonical_class_key(system, stage_idx, member, (1,) * k)
            p = registry.assign_prime(key)
            gen = GroupElement((x, Fraction(1, p)) for x in member)
            res = in_g1(system, registry, gen)
            if not res.member or not in_g1u(system, registry, u_set, gen):
                continue
            generators.append(gen)
            facts.extend(res.certificates)

    return PresentationPrefix(
        stage=stage_idx,
        u_label=tuple(sorted(u_set)),
        generators=generators,
        divisibility_facts=facts,
        dependency_bound=max(stage.part) + 1,
    )


class TransferMap:
    """Union of the lifted bijections along one forced chain."""

    def __init__(self, system: FullSystem, chain: Chain, stage_idx: int):
        self.system = system
        self.chain = chain
        self.stage_idx = stage_idx

    @property
    def point_map(self) -> dict[int, int]:
        return self.system.stage(self.stage_idx).f(self.chain)

    def apply(self, a: GroupElement) -> GroupElement:
        return lift_fhat(self.system, self.chain, a, self.stage_idx)


def transfer_iso(
    system: FullSystem, h_iso: dict[int, int], upto: int
) -> TransferMap:
    """Force the restriction chain of a model-part isomorphism and lift it."""
    if len(set(h_iso.values())) != len(h_iso):
        raise ValueError("the part isomorphism must be injective")
    pts = list(h_iso.items())
    for (a, fa), (b, fb) in itertools.combinations_with_replacement(pts, 2):
        for i in range(3):
            if m_relation(i, a, b) != m_relation(i, fa, fb):
                raise ValueError(
                    f"pairs ({a},{fa}),({b},{fb}) break model relation {i}"
                )
    cuts = sorted({max(a, b) + 1 for a, b in h_iso.items()})
    items = []
    for cut in cuts:
        g = {a: b for a, b in h_iso.items() if a < cut and b < cut}
        if g:
            items.append(PartialAuto.make(g, 1))
    chain = Chain(tuple(items))
    at = system.force_chain(chain)
    stage_idx = max(at, upto)
    system.ensure_stage(stage_idx)
    return TransferMap(system, chain, stage_idx)


def extract_pointwise_map(
    system: FullSystem,
    registry: PrimeRegistry,
    candidate: dict[int, GroupElement],
    stage_idx: int,
):
    """Pull scalars and a point map out of a candidate, or refute it."""
    stage = system.stage(stage_idx)
    pi_map: dict[int, GroupElement] = {}
    pi1: dict[int, int] = {}
    scalars: dict[int, Fraction] = {}
    for x in sorted(candidate):
        b = candidate[x]
        res = in_g1(system, registry, b, stage_idx)
        if not res.member:
            return Refutation(x, f"image outside the group: {res.reason}")
        if len(b) != 1:
            return Refutation(x, f"image support has size {len(b)}, not 1")
        (y, q), = b.items()
        if (y,) not in class_of(stage, 1, (x,)):
            return Refutation(x, "image point leaves the basis point's class")
        pi_map[x] = b
        pi1[x] = y
        scalars[x] = q
    return IsoAnalysis(pi_map, pi1, scalars)


def check_ei_preservation(
    stage, analysis: IsoAnalysis, target_labels=None
) -> Report:
    """Check the induced relations on blocks and emit the point map.

    The report's ``induced_map`` attribute carries the block-level map when
    every clause passes.  When ``target_labels`` is given the map must also
    be onto those labels.
    """
    rep = Report()
    pi1 = analysis.pi1

    vals = list(pi1.values())
    rep.add(
        "pointwise-map-injective",
        len(set(vals)) == len(vals),
        "" if len(set(vals)) == len(vals) else "two points share an image",
    )

    ok, wit = True, ""
    for x, y in itertools.combinations(sorted(pi1), 2):
        for i in range(3):
            before = m_relation(i, stage.part[x], stage.part[y])
            after = m_relation(i, stage.part[pi1[x]], stage.part[pi1[y]])
            if before != after:
                ok, wit = False, f"pair ({x},{y}) flips block relation {i}"
    rep.add("block-relations-preserved", ok, wit)

    induced: dict[int, int] = {}
    ok, wit = True, ""
    for x, y in pi1.items():
        u, v = stage.part[x], stage.part[y]
        if induced.get(u, v) != v:
            ok, wit = False, f"block {u} maps two ways"
        induced[u] = v
    rep.add("induced-point-map-function", ok, wit)

    inj = len(set(induced.values())) == len(induced)
    rep.add("induced-point-map-injective", inj)

    ok, wit = True, ""
    for u, v in itertools.combinations(sorted(induced), 2):
        for i in range(3):
            if m_relation(i, u, v) != m_relation(i, induced[u], induced[v]):
                ok, wit = False, f"blocks ({u},{v}) flip model relation {i}"
    rep.add("model-relations-preserved", ok, wit)

    if target_labels is not None:
        onto = set(induced.values()) == set(target_labels)
        rep.add("induced-point-map-onto", onto)

    rep.induced_map = induced if rep.passed else None
    return rep


def validate_scalar(analysis: IsoAnalysis, genuine: bool = False) -> Report:
    """Check scalar constancy; for genuine transfers also integrality and unit."""
    rep = Report()
    values = set(analysis.scalars.values())
    rep.add("scalars-present", bool(values))
    constant = len(values) == 1
    rep.add(
        "scalar-constant",
        constant,
        "" if constant else f"distinct scalars {sorted(values)}",
    )
    if constant:
        q = next(iter(values))
        analysis.q_star = q
        if genuine:
            rep.add("scalar-integer", q.denominator == 1, f"q*={q}")
            rep.add("scalar-unit", q in (1, -1), f"q*={q}")
    return rep


def search_block_isomorphism(
    stage_u, stage_v, u_labels, v_labels
) -> dict[int, int] | None:
    """Backtracking search for a relation-preserving block bijection that
    lifts to an injective map on realized points (capacity per block).

    Pruned depth-first search over all injective assignments; logically
    exhaustive because every rejected partial assignment extends to no
    passing total map.
    """
    us, vs = sorted(u_labels), sorted(v_labels)
    if len(us) != len(vs):
        return None
    cap_u = {u: sum(1 for x in range(stage_u.x_count) if stage_u.part[x] == u) for u in us}
    cap_v = {v: sum(1 for x in range(stage_v.x_count) if stage_v.part[x] == v) for v in vs}
    assign: dict[int, int] = {}
    used: set[int] = set()

    def extend(i: int) -> bool:
        if i == len(us):
            return True
        u = us[i]
        for v in vs:
            if v in used or cap_u[u] > cap_v[v]:
                continue
            if any(
                m_relation(rel, u, u2) != m_relation(rel, v, assign[u2])
                for u2 in assign
                for rel in range(3)
            ):
                continue
            assign[u] = v
            used.add(v)
            if extend(i + 1):
                return True
            del assign[u]
            used.discard(v)
        return False

    return dict(assign) if extend(0) else None


def lift_block_map_to_points(stage_u, stage_v, block_map: dict[int, int]) -> dict[int, int]:
    """Injective point map realizing a block bijection (least points first)."""
    out: dict[int, int] = {}
    for u, v in sorted(block_map.items()):
        src = [x for x in range(stage_u.x_count) if stage_u.part[x] == u]
        dst = [y for y in range(stage_v.x_count) if stage_v.part[y] == v]
        for x, y in zip(src, dst):
            out[x] = y
    return out
