"""Tree-indexed level systems, their star order, and endomorphism searches.

A rooted tree with a finite filtration drives a growing tower of finite
point levels: each node entering at level n contributes an injective map
from the previous level into the new one, extending its parent's map,
sending not-yet-covered points to fresh level-n points, and every level
keeps at least one spare point that no map hits (those spares are the
fresh roots of the point forest).  The star order on nonzero integer
vectors is generated by the lifted maps; the up-set of a vector is its
forward orbit.  Primes attach injectively to integer vectors, and the
divisible hull adjoins p-power denominators exactly along the up-set of
the vector owning p, so membership is the same span-plus-p-integrality
solve as in the graph reduction.

For a well-founded (here: finite) tree the only endomorphisms of the hull
are integer scalars; the search below verifies this on a level truncation
by solving the linear constraints "the image of a must stay inside the
span of a's up-set" over a deterministic battery of test vectors, then
enumerating the bounded rational points of the solution space.  An
infinite branch, simulated by a deep path, instead yields an injective
non-scalar endomorphism whose range misses every rational multiple of
every ground-level point.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

from .groups import GroupElement
from .linalg import solve_exact_span, solve_span_mod_p_integral, vec_scale, vec_sub
from .primes import ClassKey, PrimeRegistry


@dataclass(frozen=True)
class TreeT:
    """A rooted tree with a finite filtration; level 0 of the filtration is empty."""

    nodes: tuple[int, ...]
    parent: dict
    filtration: tuple[frozenset, ...]

    def __post_init__(self):
        roots = [t for t in self.nodes if self.parent.get(t) is None]
        if len(self.nodes) and len(roots) != 1:
            raise ValueError("the tree must have exactly one root")
        for t in self.nodes:
            seen = set()
            s = t
            while self.parent.get(s) is not None:
                s = self.parent[s]
                if s in seen or s not in set(self.nodes):
                    raise ValueError(f"broken ancestor chain at {t}")
                seen.add(s)
        if self.filtration and self.filtration[0]:
            raise ValueError("level 0 of the filtration must be empty")
        prev: frozenset = frozenset()
        covered = set()
        for n, layer in enumerate(self.filtration):
            if not prev <= layer:
                raise ValueError("filtration must be increasing")
            for t in layer - prev:
                if self.level(t) > n - 1:
                    raise ValueError(f"node {t} enters below its level")
                p = self.parent.get(t)
                if p is not None and p not in prev:
                    raise ValueError(f"node {t} enters before its parent")
            prev = layer
            covered |= layer
        if set(self.nodes) - covered and self.filtration:
            raise ValueError("filtration does not cover the tree")

    def level(self, t) -> int:
        n, s = 0, t
        while self.parent.get(s) is not None:
            s = self.parent[s]
            n += 1
        return n

    def entry(self, t) -> int:
        for n, layer in enumerate(self.filtration):
            if t in layer:
                return n
        raise KeyError(t)

    def ancestors(self, t) -> list:
        out, s = [], t
        while self.parent.get(s) is not None:
            s = self.parent[s]
            out.append(s)
        return out

    def meet(self, s, t):
        anc_s = [s] + self.ancestors(s)
        anc_t = set([t] + self.ancestors(t))
        for a in anc_s:
            if a in anc_t:
                return a
        return None

    def leq(self, s, t) -> bool:
        return s == t or s in self.ancestors(t)

    @classmethod
    def make(cls, nodes, parent, filtration=None) -> "TreeT":
        nodes = tuple(nodes)
        if filtration is None:
            depth = 0
            levels = {}
            for t in nodes:
                n, s = 0, t
                while parent.get(s) is not None:
                    s = parent[s]
                    n += 1
                levels[t] = n
                depth = max(depth, n)
            filtration = [frozenset()]
            for n in range(depth + 1):
                filtration.append(frozenset(t for t in nodes if levels[t] <= n))
        return cls(nodes, dict(parent), tuple(frozenset(x) for x in filtration))

    def to_json(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "parent": {str(t): p for t, p in self.parent.items() if p is not None},
            "filtration": [sorted(layer) for layer in self.filtration],
        }

    @classmethod
    def from_json(cls, data: dict) -> "TreeT":
        nodes = [t for t in data["nodes"]]
        parent = {t: None for t in nodes}
        for t, p in data.get("parent", {}).items():
            key = int(t) if isinstance(t, str) and t.lstrip("-").isdigit() else t
            parent[key] = p
        filtration = data.get("filtration")
        return cls.make(nodes, parent, filtration)


@dataclass
class RigidSystem:
    tree: TreeT
    levels: list[tuple[int, ...]]  # cumulative sorted point runs
    f_maps: dict  # node -> dict[int, int]
    growth: int

    def built_levels(self) -> int:
        return len(self.levels) - 1

    def points(self) -> range:
        return range(len(self.levels[-1]))

    def n_of(self, x: int) -> int:
        for n, layer in enumerate(self.levels):
            if x in set(layer):
                return n
        raise KeyError(x)

    def n_of_element(self, a: GroupElement) -> int:
        return max(self.n_of(x) for x in a)

    def fresh_roots(self, n: int) -> list[int]:
        """Level-n points hit by no map (the spare points)."""
        prev = set(self.levels[n - 1]) if n else set()
        hit = {y for f in self.f_maps.values() for y in f.values()}
        return [x for x in self.levels[n] if x not in prev and x not in hit]

    def to_json(self) -> dict:
        return {
            "tree": self.tree.to_json(),
            "levels": [list(l) for l in self.levels],
            "f_maps": {str(t): sorted(f.items()) for t, f in self.f_maps.items()},
            "growth": self.growth,
        }


def build_rigid_system(tree: TreeT, growth: int, upto_level: int | None = None) -> RigidSystem:
    """Level-by-level construction; every stated clause holds by design."""
    if growth < 1:
        raise ValueError("need at least one spare point per level")
    max_entry = max((tree.entry(t) for t in tree.nodes), default=0)
    upto = max(upto_level if upto_level is not None else 0, max_entry)
    levels: list[tuple[int, ...]] = [tuple(range(growth))]
    next_id = growth
    f_maps: dict = {}
    for n in range(1, upto + 1):
        prev = levels[n - 1]
        new_pts: list[int] = []
        entering = sorted(
            (t for t in tree.nodes if tree.entry(t) == n), key=lambda t: str(t)
        )
        for t in entering:
            par = tree.parent.get(t)
            f_t = dict(f_maps[par]) if par is not None else {}
            for x in prev:
                if x not in f_t:
                    f_t[x] = next_id
                    new_pts.append(next_id)
                    next_id += 1
            f_maps[t] = f_t
        spares = list(range(next_id, next_id + growth))
        next_id += growth
        levels.append(tuple(list(prev) + new_pts + spares))
    return RigidSystem(tree, levels, f_maps, growth)


def check_rigid_invariants(r: RigidSystem) -> "Report":
    from .system import Report

    rep = Report()
    tree = r.tree

    rep.add("ground-level-nonempty", len(r.levels[0]) > 0)
    ok = all(
        set(a) < set(b) for a, b in zip(r.levels, r.levels[1:])
    )
    rep.add("levels-strictly-increase", ok)

    ok, wit = True, ""
    for t, f in r.f_maps.items():
        n = tree.entry(t)
        if n > r.built_levels():
            continue
        dom, ran = set(f), set(f.values())
        if dom != set(r.levels[n - 1]):
            ok, wit = False, f"map of {t} is not total on its entry level"
        if len(ran) != len(f):
            ok, wit = False, f"map of {t} is not injective"
        if not ran <= set(r.levels[n]):
            ok, wit = False, f"map of {t} leaves its entry level"
    rep.add("maps-injective-into-entry-level", ok, wit)

    ground = set(r.levels[0])
    ok = all(not (set(f.values()) & ground) for f in r.f_maps.values())
    rep.add("images-avoid-ground-level", ok)

    ok, wit = True, ""
    for t, f in r.f_maps.items():
        par = tree.parent.get(t)
        if par is not None and par in r.f_maps:
            if not set(r.f_maps[par].items()) <= set(f.items()):
                ok, wit = False, f"map of {t} forgets its parent"
    rep.add("maps-extend-down-tree", ok, wit)

    ok, wit = True, ""
    for t, f in r.f_maps.items():
        n = tree.entry(t)
        covered = set()
        for s in tree.ancestors(t):
            covered |= set(r.f_maps.get(s, {}))
        for x, y in f.items():
            if y in set(r.levels[n - 1]) and x not in covered:
                ok, wit = False, f"old image {y} of {t} lacks an ancestor witness"
    rep.add("new-images-leave-old-levels", ok, wit)

    ok, wit = True, ""
    for s, t in itertools.combinations(sorted(r.f_maps, key=str), 2):
        shared = set(r.f_maps[s].values()) & set(r.f_maps[t].values())
        m = tree.meet(s, t)
        allowed = set(r.f_maps.get(m, {}).values()) if m is not None else set()
        if shared != allowed:
            ok, wit = False, f"ranges of {s},{t} overlap beyond their meet"
    rep.add("range-overlap-only-below-meet", ok, wit)

    ok, wit = True, ""
    for n in range(1, r.built_levels() + 1):
        hits = set(r.levels[n - 1])
        for t, f in r.f_maps.items():
            if tree.entry(t) == n:
                hits |= set(f.values())
        if not hits < set(r.levels[n]):
            ok, wit = False, f"level {n} has no spare point"
    rep.add("levels-keep-spare-points", ok, wit)

    ok, wit = True, ""
    for s, t in itertools.combinations(sorted(r.f_maps, key=str), 2):
        fs, ft = r.f_maps[s], r.f_maps[t]
        for x in set(fs) & set(ft):
            if fs[x] == ft[x]:
                n = r.n_of(x)
                layer = set(r.levels[n])
                if not layer <= set(fs) or not layer <= set(ft):
                    ok, wit = False, f"maps of {s},{t} agree at {x} but miss its level"
                elif any(fs[z] != ft[z] for z in layer):
                    ok, wit = False, f"maps of {s},{t} agree at {x} but not on its level"
    rep.add("map-coherence-on-shared-values", ok, wit)

    ok = all(x != y for f in r.f_maps.values() for x, y in f.items())
    rep.add("maps-move-every-point", ok)

    return rep


# ---------------------------------------------------------------------------
# the star order


def element_images(r: RigidSystem, a: GroupElement) -> list[tuple[object, GroupElement]]:
    """(node, transported element) for every map covering the support."""
    out = []
    for t in sorted(r.f_maps, key=str):
        f = r.f_maps[t]
        if all(x in f for x in a):
            out.append((t, GroupElement((f[x], q) for x, q in a.items())))
    return out


def tree_star_leq(
    r: RigidSystem, a: GroupElement, b: GroupElement
) -> list[GroupElement] | None:
    """The unique witnessing path a = a_0, ..., a_n = b when a is strictly
    below b in the star order; None otherwise."""
    if not a or not b:
        return None
    if a.freeze() == b.freeze():
        return None
    target = b.freeze()
    cap = r.n_of_element(b)
    frontier: list[tuple[GroupElement, list[GroupElement]]] = [(a, [a])]
    seen = {a.freeze()}
    while frontier:
        cur, path = frontier.pop(0)
        for _, img in element_images(r, cur):
            key = img.freeze()
            if key == target:
                return path + [img]
            if key in seen or r.n_of_element(img) > cap:
                continue
            seen.add(key)
            frontier.append((img, path + [img]))
    return None


def upset(r: RigidSystem, a: GroupElement) -> list[GroupElement]:
    """Forward orbit of a (including a) within the built levels, sorted by
    (level, serialization)."""
    seen = {a.freeze(): a}
    frontier = [a]
    while frontier:
        cur = frontier.pop()
        for _, img in element_images(r, cur):
            if img.freeze() not in seen:
                seen[img.freeze()] = img
                frontier.append(img)
    return sorted(seen.values(), key=lambda e: (r.n_of_element(e), e.freeze()))


def is_reasonable(r: RigidSystem, xs: tuple[int, ...]) -> bool:
    levels = [r.n_of(x) for x in xs]
    return all(levels[i] <= levels[j] for i in range(len(xs)) for j in range(i, len(xs)))


def tuple_star_witness(
    r: RigidSystem, xs: tuple[int, ...], ys: tuple[int, ...]
) -> list | None:
    """Minimal node sequence carrying one injective tuple to another, or None."""
    if len(xs) != len(ys) or len(set(xs)) != len(xs):
        raise ValueError("tuples must be injective and of equal length")
    if xs == ys:
        return []
    cap = max(r.n_of(y) for y in ys)
    frontier = [(xs, [])]
    seen = {xs}
    while frontier:
        cur, path = frontier.pop(0)
        steps = {}
        for t in sorted(r.f_maps, key=str):
            f = r.f_maps[t]
            if all(x in f for x in cur):
                img = tuple(f[x] for x in cur)
                prev = steps.get(img)
                if prev is None or r.tree.leq(t, prev):
                    steps[img] = t
        for img, t in sorted(steps.items()):
            if img == ys:
                return path + [t]
            if img in seen or max(r.n_of(y) for y in img) > cap:
                continue
            seen.add(img)
            frontier.append((img, path + [t]))
    return None


def reasonable_and_order(r: RigidSystem, xs: tuple[int, ...], ys: tuple[int, ...]) -> dict:
    return {
        "reasonable_x": is_reasonable(r, xs),
        "reasonable_y": is_reasonable(r, ys),
        "witness": tuple_star_witness(r, xs, ys),
    }


@dataclass
class BasisChoice:
    items: list[GroupElement]
    exhausted: bool  # True when the realized up-set ran out before the count


def choose_basis(r: RigidSystem, a: GroupElement, count: int) -> BasisChoice:
    """First elements of the up-set in star-compatible order; each adds
    support that its predecessors miss."""
    ordered = upset(r, a)
    chosen: list[GroupElement] = []
    covered: set[int] = set()
    for b in ordered:
        if len(chosen) == count:
            break
        if chosen and b.supp() <= covered:
            raise AssertionError(
                "up-set listing lost support freshness; star order violated"
            )
        chosen.append(b)
        covered |= b.supp()
    return BasisChoice(chosen, exhausted=len(chosen) < count)


# ---------------------------------------------------------------------------
# divisibility and endomorphisms


def element_prime(registry: PrimeRegistry, a: GroupElement) -> int:
    return registry.assign_prime(ClassKey.for_element(a))


def tree_in_g1(r: RigidSystem, registry: PrimeRegistry, a: GroupElement):
    """Membership in the tree hull truncated to the built levels."""
    from .groups import G1Result, denominator_primes, p_exponent, DivisibilityCertificate

    if not a:
        return G1Result(True)
    certs = []
    for p in sorted(denominator_primes(a)):
        key = registry.lookup_prime(p)
        if key is None:
            return G1Result(False, reason=f"prime {p} carries no assignment")
        if key.kind != "g0_element":
            return G1Result(False, reason=f"prime {p} is not an element prime")
        owner = GroupElement((x, Fraction(c)) for x, c in key.element)
        ups = upset(r, owner)
        columns = [dict(b) for b in ups]
        coeffs = solve_span_mod_p_integral(columns, dict(a), p)
        if coeffs is None:
            return G1Result(
                False, reason=f"p={p}: fractional part escapes the up-set span"
            )
        certs.append(
            DivisibilityCertificate(
                element=a.freeze(),
                prime=p,
                exponent=p_exponent(p, a),
                decomposition=[
                    (c, b.freeze()) for c, b in zip(coeffs, ups) if c != 0
                ],
            )
        )
    return G1Result(True, certs)


def branch_endomorphism(r: RigidSystem, branch: list, a: GroupElement) -> GroupElement:
    """Transport along the union of the maps of an increasing branch."""
    for s, t in zip(branch, branch[1:]):
        if not (r.tree.leq(s, t) and s != t):
            raise ValueError("branch must be strictly increasing in the tree")
    for t in reversed(branch):
        f = r.f_maps.get(t)
        if f is not None and all(x in f for x in a):
            return GroupElement((f[x], q) for x, q in a.items())
    raise ValueError("support not covered by the branch prefix")


def branch_misses_ground(r: RigidSystem, branch: list) -> bool:
    """No image of the branch map hits any ground-level coordinate, so no
    rational multiple of a ground point lies in the lifted range."""
    ground = set(r.levels[0])
    for t in branch:
        f = r.f_maps.get(t, {})
        if set(f.values()) & ground:
            return False
    return True


@dataclass
class EndoSearchReport:
    assumption: str
    solution_dim: int
    identity_in_space: bool
    scalar_survivors: list[Fraction]
    non_scalar_survivors: list[dict]
    partial: bool
    constraints: int

    @property
    def scalars_only(self) -> bool:
        return not self.non_scalar_survivors

    def to_json(self) -> dict:
        return {
            "assumption": self.assumption,
            "solution_dim": self.solution_dim,
            "identity_in_space": self.identity_in_space,
            "scalar_survivors": [str(q) for q in self.scalar_survivors],
            "non_scalar_survivors": self.non_scalar_survivors,
            "partial": self.partial,
            "constraints": self.constraints,
        }


def _point_component(r: RigidSystem, x: int) -> set[int]:
    """Connected component of a point under the symmetrized successor steps."""
    seen = {x}
    frontier = [x]
    while frontier:
        cur = frontier.pop()
        for f in r.f_maps.values():
            if cur in f and f[cur] not in seen:
                seen.add(f[cur])
                frontier.append(f[cur])
            for src, dst in f.items():
                if dst == cur and src not in seen:
                    seen.add(src)
                    frontier.append(src)
    return seen


def _default_battery(r: RigidSystem, level: int) -> list[GroupElement]:
    pts = list(r.levels[level])
    battery = [GroupElement.unit(x) for x in pts]
    for x, y in itertools.combinations(pts, 2):
        battery.append(GroupElement.unit(x) + GroupElement.unit(y))
    for n in range(1, level + 1):
        for z in r.fresh_roots(n):
            for x, y in itertools.combinations(r.levels[n - 1][:6], 2):
                battery.append(
                    GroupElement.unit(x) + GroupElement.unit(y) + GroupElement.unit(z)
                )
    return battery


def endorigidity_search(
    r: RigidSystem,
    registry: PrimeRegistry,
    level: int,
    coeff_bound: int,
    battery: list[GroupElement] | None = None,
    max_enumeration: int = 20000,
) -> EndoSearchReport:
    """Solve the divisibility constraints for a truncated endomorphism.

    Unknowns: matrix entries sending each truncation basis point into its
    point component.  Constraints: for every battery element a, the image
    must stay inside the rational span of a's realized up-set (images of
    divisible elements must stay as divisible).  The solution space is then
    enumerated over bounded rationals, each candidate being kept only if
    every basis image lies in the truncated hull.
    """
    assumption = (
        "candidate images are supported inside each basis point's component; "
        "images of up-set-divisible elements must remain in the up-set span"
    )
    pts = list(r.levels[level])
    battery = battery if battery is not None else _default_battery(r, level)

    unknowns: list[tuple[int, int]] = []  # (target coord y, source x)
    for x in pts:
        comp = sorted(_point_component(r, x))
        for y in comp:
            unknowns.append((y, x))
    index = {u: i for i, u in enumerate(unknowns)}

    rows: list[dict[int, Fraction]] = []
    for a in battery:
        if any(x not in pts for x in a):
            continue
        ups = upset(r, a)
        columns = [dict(b) for b in ups]
        # reduced echelon of the up-set span, pivot coordinates recorded
        basis: list[tuple[int, dict]] = []
        for col in columns:
            v = dict(col)
            for piv, w in basis:
                c = v.get(piv, Fraction(0))
                if c:
                    v = vec_sub(v, vec_scale(c, w))
            v = {k: q for k, q in v.items() if q != 0}
            if v:
                piv = min(v)
                v = vec_scale(Fraction(1) / v[piv], v)
                for j, (bp, w) in enumerate(basis):
                    c = w.get(piv, Fraction(0))
                    if c:
                        basis[j] = (bp, vec_sub(w, vec_scale(c, v)))
                basis.append((piv, v))
        pivots = [piv for piv, _ in basis]
        coords = sorted(
            {y for x in a for y in _point_component(r, x)}
            | {y for _, w in basis for y in w}
        )
        # functional: image[c] - sum_i w_i[c] * image[pivot_i] must vanish
        for c in coords:
            if c in pivots:
                continue
            row: dict[int, Fraction] = {}
            for x, ax in a.items():
                u = (c, x)
                if u in index:
                    row[index[u]] = row.get(index[u], Fraction(0)) + ax
                for (piv, w) in basis:
                    wc = w.get(c, Fraction(0))
                    if wc and (piv, x) in index:
                        i = index[(piv, x)]
                        row[i] = row.get(i, Fraction(0)) - wc * ax
            row = {i: q for i, q in row.items() if q != 0}
            if row:
                rows.append(row)

    # nullspace of the constraint rows, exact over the rationals
    pivots_of: dict[int, dict[int, Fraction]] = {}
    for row in rows:
        v = dict(row)
        for piv, w in pivots_of.items():
            c = v.get(piv, Fraction(0))
            if c:
                v = vec_sub(v, vec_scale(c, w))
        v = {i: q for i, q in v.items() if q != 0}
        if v:
            piv = min(v)
            v = vec_scale(Fraction(1) / v[piv], v)
            for p2 in list(pivots_of):
                c = pivots_of[p2].get(piv, Fraction(0))
                if c:
                    pivots_of[p2] = vec_sub(pivots_of[p2], vec_scale(c, v))
            pivots_of[piv] = v

    free = [i for i in range(len(unknowns)) if i not in pivots_of]
    null_basis: list[dict[tuple[int, int], Fraction]] = []
    for fidx in free:
        vec = {fidx: Fraction(1)}
        for piv, w in pivots_of.items():
            c = w.get(fidx, Fraction(0))
            if c:
                vec[piv] = -c
        null_basis.append({unknowns[i]: q for i, q in vec.items() if q != 0})

    identity = {(x, x): Fraction(1) for x in pts}
    id_cols = [
        {i: q for (u, q) in b.items() for i in [index[u]]} for b in null_basis
    ]
    id_vec = {index[u]: q for u, q in identity.items()}
    identity_in = solve_exact_span(id_cols, id_vec) is not None

    # bounded enumeration of the solution space
    values = [Fraction(0)]
    for num in range(1, coeff_bound + 1):
        for den in range(1, coeff_bound + 1):
            q = Fraction(num, den)
            if q.numerator <= coeff_bound and q not in values:
                values += [q, -q]
    scalar_survivors: list[Fraction] = []
    non_scalar: list[dict] = []
    partial = False
    total = len(values) ** len(null_basis)
    if total > max_enumeration:
        partial = True
    count = 0
    for combo in itertools.product(values, repeat=len(null_basis)):
        count += 1
        if count > max_enumeration:
            partial = True
            break
        cand: dict[tuple[int, int], Fraction] = {}
        for lam, b in zip(combo, null_basis):
            if lam == 0:
                continue
            for u, q in b.items():
                s = cand.get(u, Fraction(0)) + lam * q
                if s == 0:
                    cand.pop(u, None)
                else:
                    cand[u] = s
        images = {
            x: GroupElement((y, q) for (y, xx), q in cand.items() if xx == x)
            for x in pts
        }
        if any(
            q.numerator > coeff_bound or q.denominator > coeff_bound
            for img in images.values()
            for q in map(abs, img.values())
        ):
            continue
        if not all(tree_in_g1(r, registry, img).member for img in images.values()):
            continue
        scal = _as_scalar(images, pts)
        if scal is not None:
            if scal not in scalar_survivors:
                scalar_survivors.append(scal)
        else:
            non_scalar.append({str(x): img.to_json() for x, img in images.items()})

    return EndoSearchReport(
        assumption=assumption,
        solution_dim=len(null_basis),
        identity_in_space=identity_in,
        scalar_survivors=sorted(scalar_survivors),
        non_scalar_survivors=non_scalar,
        partial=partial,
        constraints=len(rows),
    )


def _as_scalar(images: dict[int, GroupElement], pts: list[int]) -> Fraction | None:
    found = set()
    for x in pts:
        img = images[x]
        if not img:
            found.add(Fraction(0))
        elif set(img) == {x}:
            found.add(img[x])
        else:
            return None
    return found.pop() if len(found) == 1 else None
