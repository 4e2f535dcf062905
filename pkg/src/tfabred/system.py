"""Finite approximation stages of the chain-indexed bijection system.

A stage holds a finite run of realized basis points (always ``0..N-1``,
allocated least-first), a label per point naming its partition block (one
block per point of the model M, materialized lazily), a finite family of
chains arranged in levels with one coherent partial bijection per chain,
a trap set Y covering every point any bijection touches, and the level
counter.  Stages grow one inverse pair of chains at a time.

The successor step for a chain extension g over prefix p takes as domain
the Y-trapped points of the blocks named by dom(g), extends the prefix
map, and sends every new domain point to the least fresh class-correct
point outside Y.  Two wrinkles relative to the obvious reading, both
forced by fresh regions of M (see the build notes outside the package):

* when the trapped domain adds nothing beyond the prefix map, the block
  minima outside Y for the newly named blocks are pulled into the domain,
  so the new bijection always strictly extends the prefix and is never
  empty for a nonempty chain;
* the updated trap set absorbs the full range of the new bijection, not
  only the image of the old trap set, so the inverse chain's domain stays
  trapped.

Both keep every checkable clause intact: fresh images stay outside Y, so
new tuples still meet exactly one class edge and classes of tuples already
inside a bijection never merge later.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping

from .chains import Chain, EMPTY_CHAIN, PartialAuto, iter_chains


class SuccessorError(ValueError):
    """A successor step was attempted from an illegal configuration."""

    def __init__(self, clause: str, detail: str):
        self.clause = clause
        super().__init__(f"{clause}: {detail}")


@dataclass(frozen=True)
class SystemStage:
    """One immutable finite approximation."""

    x_count: int
    part: tuple[int, ...]  # part[x] = model point labelling x's block
    i_levels: tuple[frozenset[Chain], ...]
    f_maps: Mapping[Chain, tuple[tuple[int, int], ...]]
    y_set: frozenset[int]
    n_of_m: int

    @property
    def x_set(self) -> range:
        return range(self.x_count)

    def chains(self) -> list[Chain]:
        return sorted(self.f_maps, key=lambda c: c.serial())

    def f(self, chain: Chain) -> dict[int, int]:
        return dict(self.f_maps[chain])

    def has_chain(self, chain: Chain) -> bool:
        return chain in self.f_maps

    def block_points(self, label: int) -> list[int]:
        return [x for x in range(self.x_count) if self.part[x] == label]

    def labels_of(self, xs: Iterable[int]) -> set[int]:
        return {self.part[x] for x in xs}

    def to_json(self) -> dict:
        chains = self.chains()
        ids = {c: f"g{i:03d}" for i, c in enumerate(chains)}
        return {
            "x_set": list(range(self.x_count)),
            "part": {str(x): self.part[x] for x in range(self.x_count)},
            "chains": {ids[c]: c.to_json() for c in chains},
            "i_levels": [sorted(ids[c] for c in level) for level in self.i_levels],
            "f_maps": {ids[c]: [list(p) for p in self.f_maps[c]] for c in chains},
            "y_set": sorted(self.y_set),
            "n_of_m": self.n_of_m,
        }

    @classmethod
    def from_json(cls, data: dict) -> "SystemStage":
        chains = {cid: Chain.from_json(cj) for cid, cj in data["chains"].items()}
        part_map = {int(x): u for x, u in data["part"].items()}
        x_count = len(data["x_set"])
        return cls(
            x_count=x_count,
            part=tuple(part_map[x] for x in range(x_count)),
            i_levels=tuple(
                frozenset(chains[cid] for cid in level) for level in data["i_levels"]
            ),
            f_maps=MappingProxyType(
                {chains[cid]: tuple(tuple(p) for p in pairs) for cid, pairs in data["f_maps"].items()}
            ),
            y_set=frozenset(data["y_set"]),
            n_of_m=data["n_of_m"],
        )


def base_stage() -> SystemStage:
    """The one-level stage: only the empty chain, Y meeting the first two blocks."""
    return SystemStage(
        x_count=2,
        part=(0, 1),
        i_levels=(frozenset({EMPTY_CHAIN}),),
        f_maps=MappingProxyType({EMPTY_CHAIN: ()}),
        y_set=frozenset({0, 1}),
        n_of_m=1,
    )


class _Alloc:
    """Mutable point allocator used while building one successor stage."""

    def __init__(self, stage: SystemStage):
        self.part = list(stage.part)

    @property
    def x_count(self) -> int:
        return len(self.part)

    def block_min_outside(self, label: int, excluded: set[int]) -> int:
        for x, u in enumerate(self.part):
            if u == label and x not in excluded:
                return x
        self.part.append(label)
        return len(self.part) - 1


def successor_stage(stage: SystemStage, chain: Chain) -> SystemStage:
    """Extend a stage by one chain (and its inverse)."""
    if len(chain) == 0:
        raise SuccessorError("extension-shape", "cannot extend by the empty chain")
    g = chain.last
    prefix = chain.prefix(len(chain) - 1)
    for item in prefix.items:
        if not g.extends(item):
            raise SuccessorError(
                "extension-shape", "the new map must strictly extend every chain item"
            )
    if not stage.has_chain(prefix):
        raise SuccessorError("prefix-missing", "the chain prefix has no bijection yet")
    if stage.has_chain(chain):
        raise SuccessorError("already-present", "the chain already has a bijection")

    alloc = _Alloc(stage)
    f_old = stage.f(prefix)
    y_old = set(stage.y_set)
    s_star = sorted(g.dom)
    u_star = {x for x in y_old if alloc.part[x] in g.dom}

    # fresh region: pull in block minima so the bijection strictly grows
    if u_star <= set(f_old):
        for u in sorted(g.dom - prefix.dom):
            u_star.add(alloc.block_min_outside(u, y_old))

    f_star = dict(f_old)
    taken = set(f_star.values())
    for x in sorted(u_star - set(f_old)):
        target = g.mapping[alloc.part[x]]
        img = alloc.block_min_outside(target, y_old | u_star | taken | set(f_star))
        f_star[x] = img
        taken.add(img)

    inverse = chain.invert()
    f_inv = {y: x for x, y in f_star.items()}
    n = stage.n_of_m
    levels = list(stage.i_levels) + [frozenset({chain, inverse})]
    maps = dict(stage.f_maps)
    maps[chain] = tuple(sorted(f_star.items()))
    maps[inverse] = tuple(sorted(f_inv.items()))

    y_new = y_old | set(f_star.values())
    s_plus = sorted(g.dom | g.rng)
    for u in s_plus:
        y_new.add(alloc.block_min_outside(u, y_old))

    return SystemStage(
        x_count=alloc.x_count,
        part=tuple(alloc.part),
        i_levels=tuple(levels),
        f_maps=MappingProxyType(maps),
        y_set=frozenset(y_new),
        n_of_m=n + 1,
    )


class FullSystem:
    """A lazily extended stage sequence fed by the fixed chain enumeration.

    Extra chains can be forced in (prefix by prefix); the default build
    then resumes from the enumeration cursor.  All growth is append-only,
    so earlier stage snapshots stay valid.
    """

    def __init__(self):
        self._stages: list[SystemStage] = [base_stage()]
        self._applied: list[Chain | None] = [None]
        self._birth: dict = {EMPTY_CHAIN.serial(): 0}
        self._enum = iter_chains()
        next(self._enum)  # index 0 = empty chain, realized by the base stage
        self._consumed = 0

    @property
    def latest(self) -> SystemStage:
        return self._stages[-1]

    @property
    def stage_count(self) -> int:
        return len(self._stages)

    def stage(self, idx: int) -> SystemStage:
        self.ensure_stage(idx)
        return self._stages[idx]

    def applied_at(self, idx: int) -> Chain | None:
        return self._applied[idx]

    def birth(self, chain: Chain) -> int | None:
        """Stage index at which a chain's bijection appeared."""
        return self._birth.get(chain.serial())

    def _append(self, chain: Chain) -> None:
        nxt = successor_stage(self._stages[-1], chain)
        self._stages.append(nxt)
        self._applied.append(chain)
        idx = len(self._stages) - 1
        self._birth[chain.serial()] = idx
        self._birth[chain.invert().serial()] = idx

    def ensure_stage(self, upto: int) -> SystemStage:
        while len(self._stages) - 1 < upto:
            chain = next(self._enum)
            self._consumed += 1
            if self.latest.has_chain(chain):
                self._stages.append(self.latest)
                self._applied.append(None)
            else:
                self._append(chain)
        return self._stages[upto]

    def force_chain(self, chain: Chain) -> int:
        """Bring a chain (and all its prefixes) into the system; return stage index."""
        for j in range(1, len(chain) + 1):
            pref = chain.prefix(j)
            if not self.latest.has_chain(pref):
                self._append(pref)
        return len(self._stages) - 1


def build_to_stage(sys: FullSystem, upto: int) -> SystemStage:
    return sys.ensure_stage(upto)


# ---------------------------------------------------------------------------
# tuple classes


def touched_tuples(stage: SystemStage, k: int) -> set[tuple[int, ...]]:
    """Injective k-tuples lying inside the domain of some bijection."""
    out: set[tuple[int, ...]] = set()
    for chain in stage.f_maps:
        dom = [x for x, _ in stage.f_maps[chain]]
        out.update(itertools.permutations(dom, k))
    return out


def class_of(stage: SystemStage, k: int, start: tuple[int, ...]) -> frozenset:
    """Connected component of a tuple under coordinatewise bijection edges."""
    if len(set(start)) != len(start):
        raise ValueError("tuple entries must be pairwise distinct")
    maps = [dict(pairs) for pairs in stage.f_maps.values() if pairs]
    seen = {start}
    frontier = [start]
    while frontier:
        t = frontier.pop()
        for m in maps:
            if all(x in m for x in t):
                img = tuple(m[x] for x in t)
                if img != t and img not in seen:
                    seen.add(img)
                    frontier.append(img)
    return frozenset(seen)


def seq_classes(
    stage: SystemStage, k: int, universe: Iterable[int]
) -> dict[tuple[int, ...], frozenset]:
    """E_k classes restricted to tuples over the universe.

    Components are computed over all touched tuples (paths may run through
    tuples outside the universe) and then restricted.  Untouched tuples
    are singleton classes and are reported as such.
    """
    uni = set(universe)
    parent: dict = {}

    def find(t):
        while parent[t] != t:
            parent[t] = parent[parent[t]]
            t = parent[t]
        return t

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra

    for chain, pairs in stage.f_maps.items():
        if not pairs:
            continue
        m = dict(pairs)
        dom = list(m)
        for t in itertools.permutations(dom, k):
            img = tuple(m[x] for x in t)
            parent.setdefault(t, t)
            parent.setdefault(img, img)
            union(t, img)

    groups: dict = {}
    for t in parent:
        groups.setdefault(find(t), set()).add(t)

    out: dict[tuple[int, ...], frozenset] = {}
    for members in groups.values():
        cls = frozenset(members)
        for t in members:
            if all(x in uni for x in t):
                out[t] = cls
    for t in itertools.permutations(sorted(uni), k):
        out.setdefault(t, frozenset({t}))
    return out


def tuple_birth(system: FullSystem, stage_idx: int, t: tuple[int, ...]) -> int | None:
    """First stage at which the tuple sits inside some bijection's domain."""
    stage = system.stage(stage_idx)
    best = None
    pts = set(t)
    for chain, pairs in stage.f_maps.items():
        if not pairs:
            continue
        if pts <= {x for x, _ in pairs}:
            b = system.birth(chain)
            if b is not None and (best is None or b < best):
                best = b
    return best


# ---------------------------------------------------------------------------
# invariant checking


@dataclass
class ClauseResult:
    clause: str
    passed: bool
    witness: str = ""


@dataclass
class Report:
    results: list[ClauseResult] = field(default_factory=list)

    def add(self, clause: str, passed: bool, witness: str = "") -> None:
        self.results.append(ClauseResult(clause, passed, witness))

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def failures(self) -> list[ClauseResult]:
        return [r for r in self.results if not r.passed]

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "clauses": [
                {"clause": r.clause, "passed": r.passed, "witness": r.witness}
                for r in self.results
            ],
        }


def check_stage_invariants(stage: SystemStage) -> Report:
    """Itemized pass/fail for every per-stage clause; failures carry witnesses."""
    rep = Report()

    rep.add("points-are-initial-run", len(stage.part) == stage.x_count)

    bad_label = [x for x in range(stage.x_count) if stage.part[x] < 0]
    rep.add("blocks-are-labelled", not bad_label, f"points {bad_label}" if bad_label else "")

    lg_ok, wit = True, ""
    for n, level in enumerate(stage.i_levels):
        for c in level:
            if len(c) > n and not (n == 0 and len(c) == 0):
                lg_ok, wit = False, f"chain of length {len(c)} at level {n}"
    rep.add("levels-bound-chain-length", lg_ok, wit)

    seen: dict = {}
    dup = ""
    for n, level in enumerate(stage.i_levels):
        for c in level:
            if c.serial() in seen:
                dup = f"chain at levels {seen[c.serial()]} and {n}"
            seen[c.serial()] = n
    rep.add("levels-pairwise-disjoint", not dup, dup)

    valid, wit = True, ""
    for c in stage.f_maps:
        try:
            Chain(c.items)
        except ValueError as exc:
            valid, wit = False, str(exc)
    rep.add("chains-are-model-automorphisms", valid, wit)

    ok, wit = True, ""
    level_of = {c.serial(): n for n, level in enumerate(stage.i_levels) for c in level}
    for c in stage.f_maps:
        for j in range(len(c)):
            pref = c.prefix(j)
            if pref.serial() not in level_of:
                ok, wit = False, f"prefix of length {j} missing"
            elif level_of[pref.serial()] >= level_of[c.serial()]:
                ok, wit = False, f"prefix of length {j} not at an earlier level"
    rep.add("prefix-closure", ok, wit)

    ok, wit = True, ""
    for c, pairs in stage.f_maps.items():
        ys = [y for _, y in pairs]
        if len(set(ys)) != len(ys):
            ok, wit = False, f"non-injective map for chain of length {len(c)}"
        if (len(pairs) == 0) != (len(c) == 0):
            ok, wit = False, f"map empty-ness disagrees with chain length {len(c)}"
    rep.add("map-empty-iff-trivial-chain", ok, wit)

    ok, wit = True, ""
    for c, pairs in stage.f_maps.items():
        if not pairs:
            continue
        for x, y in pairs:
            if stage.part[x] not in c.dom or stage.part[y] not in c.rng:
                ok, wit = False, f"pair ({x},{y}) leaves the chain's named blocks"
    rep.add("map-domain-in-named-blocks", ok, wit)

    ok, wit = True, ""
    for c, pairs in stage.f_maps.items():
        if not pairs:
            continue
        for x, y in pairs:
            if c.point_label(stage.part[x]) != stage.part[y]:
                ok, wit = False, f"pair ({x},{y}) breaks block equivariance"
    rep.add("map-respects-blocks", ok, wit)

    ok, wit = True, ""
    for c, pairs in stage.f_maps.items():
        inv = c.invert()
        if inv not in stage.f_maps:
            ok, wit = False, "inverse chain missing"
            continue
        if level_of.get(inv.serial()) != level_of.get(c.serial()):
            ok, wit = False, "inverse chain at a different level"
        if stage.f_maps[inv] != tuple(sorted((y, x) for x, y in pairs)):
            ok, wit = False, f"inverse map mismatch for chain of length {len(c)}"
    rep.add("inverse-pairing", ok, wit)

    ok, wit = True, ""
    for c in stage.f_maps:
        for j in range(len(c)):
            pref = c.prefix(j)
            if pref in stage.f_maps:
                fp, fc = set(stage.f_maps[pref]), set(stage.f_maps[c])
                if not fp < fc:
                    ok, wit = False, f"prefix map does not strictly extend at length {j}"
    rep.add("prefix-maps-strictly-extend", ok, wit)

    dom_pts = {x for pairs in stage.f_maps.values() for x, _ in pairs}
    ran_pts = {y for pairs in stage.f_maps.values() for _, y in pairs}
    missing = (dom_pts | ran_pts) - stage.y_set
    rep.add("trap-set-covers-maps", not missing, f"points {sorted(missing)}" if missing else "")
    rep.add("trap-set-nonempty", bool(stage.y_set))

    return rep


def check_successor_invariants(prev: SystemStage, nxt: SystemStage, k_max: int = 3) -> Report:
    """Pass/fail for the clauses tying two consecutive stages together."""
    rep = Report()

    if prev is nxt or prev == nxt:
        rep.add("skip-step-identical", True)
        return rep

    rep.add("points-monotone", nxt.x_count >= prev.x_count)
    rep.add(
        "block-labels-stable",
        nxt.part[: prev.x_count] == prev.part,
    )
    rep.add("level-counter-increments", nxt.n_of_m == prev.n_of_m + 1)

    ok = len(nxt.i_levels) == len(prev.i_levels) + 1 and all(
        a == b for a, b in zip(prev.i_levels, nxt.i_levels)
    )
    rep.add("old-levels-preserved", ok)

    ok, wit = True, ""
    for c in prev.f_maps:
        if nxt.f_maps.get(c) != prev.f_maps[c]:
            ok, wit = False, f"map changed for chain of length {len(c)}"
    rep.add("old-maps-preserved", ok, wit)

    new_level = nxt.i_levels[-1]
    new_chains = sorted(new_level, key=lambda c: c.serial())
    ok = len(new_level) == 2 and new_chains[0].invert() in new_level
    rep.add("new-level-is-inverse-pair", ok)
    ok, wit = True, ""
    for c in new_level:
        if len(c) > len(nxt.i_levels) - 1:
            ok, wit = False, f"new chain of length {len(c)} too long for its level"
        for j in range(len(c)):
            if c.prefix(j) not in prev.f_maps:
                ok, wit = False, f"prefix of length {j} was not already present"
    rep.add("new-chain-prefixes-present", ok, wit)

    y_prev = prev.y_set
    ok, wit = True, ""
    for k in range(1, k_max + 1):
        prev_touched = touched_tuples(prev, k)
        classes_prev = seq_classes(prev, k, range(prev.x_count))
        classes_next = seq_classes(nxt, k, range(prev.x_count))
        for t in prev_touched:
            a = classes_prev[t] & prev_touched
            b = classes_next[t] & prev_touched
            if a != b:
                ok, wit = False, f"class of {t} changed on touched {k}-tuples"
                break
        if not ok:
            break
    rep.add("classes-stable-on-touched-tuples", ok, wit)

    ok, wit = True, ""
    all_maps = [dict(pairs) for pairs in nxt.f_maps.values() if pairs]
    for k in range(1, k_max + 1):
        doms = {tuple(sorted(m)) for m in all_maps}
        checked: set = set()
        for dom in doms:
            for base in itertools.combinations(dom, k):
                if base in checked or set(base) <= y_prev:
                    continue
                checked.add(base)
                # valency is invariant under permuting the tuple
                neighbors = set()
                for m in all_maps:
                    if all(x in m for x in base):
                        neighbors.add(tuple(m[x] for x in base))
                if len(neighbors) > 1:
                    ok, wit = False, f"fresh tuple {base} meets more than one edge"
    rep.add("fresh-tuples-have-valency-one", ok, wit)

    return rep


def limit_condition_witness(
    system: FullSystem, chain_prefix: list[PartialAuto], upto: int
) -> Report:
    """Finite trace of the limit coverage law along one increasing chain.

    Each build step hands the trapped domain to the chain it was applied
    to; its inverse receives the trapped set as its range.  So for earlier
    prefix i and later prefix j the early trap set restricted to the early
    blocks must sit inside dom(f_j) when j was the applied side, and
    inside ran(f_j) when the inverse was.  Ditto for the block minima
    recorded at step i.  Along any infinite chain the applied side
    alternates, which is what makes the union of the domains exhaust the
    blocks in the limit.
    """
    rep = Report()
    for g0, g1 in zip(chain_prefix, chain_prefix[1:]):
        if not g1.extends(g0):
            rep.add("prefix-strictly-increasing", False, "items do not strictly extend")
            return rep
    rep.add("prefix-strictly-increasing", True)

    chains = [Chain(tuple(chain_prefix[: j + 1])) for j in range(len(chain_prefix))]
    stage = system.stage(upto)
    births = []
    for c in chains:
        b = system.birth(c)
        if b is None or b > upto:
            rep.add("prefixes-realized", False, f"prefix of length {len(c)} not built by {upto}")
            return rep
        births.append(b)
    rep.add("prefixes-realized", True)

    def covered_side(j: int):
        """dom(f_j) if chain j was the applied side, else ran(f_j)."""
        f_late = dict(stage.f_maps[chains[j]])
        if system.applied_at(births[j]) == chains[j]:
            return set(f_late), chains[j].dom
        return set(f_late.values()), chains[j].rng

    ok, wit = True, ""
    for i in range(len(chains)):
        early = system.stage(births[i])
        for j in range(i + 1, len(chains)):
            covered, blocks_j = covered_side(j)
            blocks_i = chains[i].dom & blocks_j | chains[i].rng & blocks_j
            trapped = {x for x in early.y_set if early.part[x] in blocks_i}
            if not trapped <= covered:
                ok, wit = False, f"trapped points of prefix {i} escape prefix {j}"
    rep.add("trapped-points-covered-later", ok, wit)

    ok, wit = True, ""
    for i in range(len(chains)):
        if births[i] == 0:
            continue
        early = system.stage(births[i])
        before = system.stage(births[i] - 1)
        for j in range(i + 1, len(chains)):
            covered, blocks_j = covered_side(j)
            for u in sorted((chains[i].dom | chains[i].rng) & blocks_j):
                mins = [
                    x
                    for x in range(early.x_count)
                    if early.part[x] == u and x not in before.y_set
                ]
                if mins and min(mins) not in covered:
                    ok, wit = False, f"block minimum {min(mins)} missed by prefix {j}"
    rep.add("block-minima-covered-later", ok, wit)
    return rep
