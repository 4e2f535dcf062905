"""Depth-bounded closure oracle for the p-support condition.

A support scenario fixes a prime p, an arity k >= 2, a base k-tuple of
realized points and a weight tuple of positive p-unit rationals.  From the
base tuple's class one forms finite rational-valued maps: seed maps blend
class members with rational multipliers, and the family is closed under
restriction to any superset of the p-support, pointwise sum on the union
domain, and transport backwards along any of the stage's bijections.  The
condition under test: no map in the family has p-support of size exactly
one.  This is the clause that later forces images of basis points under
any group isomorphism to be single basis points.

The closure here is the honest desk-scale version: seed multipliers come
from a finite battery (the dangerous negative-valuation values included),
family size, derivation depth and element count are capped, and a capped
run is flagged partial.  Scenarios whose base tuples share one class and
weight tuple generate identical families, so the checker deduplicates by
class.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from .system import SystemStage, seq_classes


def p_valuation(p: int, q: Fraction) -> int | None:
    """Exponent of p in q; None for q = 0 (infinite valuation)."""
    if q == 0:
        return None
    v = 0
    num, den = q.numerator, q.denominator
    while num % p == 0:
        num //= p
        v += 1
    while den % p == 0:
        den //= p
        v -= 1
    return v


def in_qp(p: int, q: Fraction) -> bool:
    """Whether q has no p in its denominator."""
    return q.denominator % p != 0


def in_qp_unit(p: int, q: Fraction) -> bool:
    """Whether q is positive of p-valuation exactly zero."""
    return q > 0 and q.numerator % p != 0 and q.denominator % p != 0


FrozenMap = tuple[tuple[int, Fraction], ...]


def _freeze(m: dict[int, Fraction]) -> FrozenMap:
    return tuple(sorted(m.items()))


def map_supp_p(p: int, m: dict[int, Fraction]) -> set[int]:
    return {x for x, q in m.items() if q != 0 and not in_qp(p, q)}


@dataclass(frozen=True)
class SupportScenario:
    p: int
    k: int
    base: tuple[int, ...]
    weights: tuple[Fraction, ...]

    def __post_init__(self):
        if self.k < 2 or len(self.base) != self.k or len(self.weights) != self.k:
            raise ValueError("scenario arity mismatch")
        if len(set(self.base)) != self.k:
            raise ValueError("base entries must be pairwise distinct")
        for q in self.weights:
            if not in_qp_unit(self.p, q):
                raise ValueError(f"weight {q} is not a positive p-unit for p={self.p}")


@dataclass
class ClosureConfig:
    seed_coeffs: tuple[Fraction, ...] | None = None  # defaults depend on p
    max_family: int = 2
    max_elements: int = 250
    max_restriction_free: int = 6  # cap on |dom| - |supp_p| when listing subsets

    def coeffs(self, p: int) -> tuple[Fraction, ...]:
        if self.seed_coeffs is not None:
            return self.seed_coeffs
        f = Fraction
        return (f(1), f(-1), f(2), f(-2), f(1, 2), f(-1, 2), f(p), f(-p), f(1, p), f(-1, p))


@dataclass
class ClosureResult:
    elements: dict  # FrozenMap -> (rule, parents)
    partial: bool

    def violations(self, p: int) -> list[FrozenMap]:
        return [e for e in self.elements if len(map_supp_p(p, dict(e))) == 1]

    def derivation(self, elem: FrozenMap) -> list[str]:
        trace, todo = [], [elem]
        seen = set()
        while todo:
            e = todo.pop()
            if e in seen:
                continue
            seen.add(e)
            rule, parents = self.elements[e]
            trace.append(f"{rule}: {dict(e)}")
            todo.extend(parents)
        return trace


def class_members_over(
    stage: SystemStage, k: int, base: tuple[int, ...], universe: set[int]
) -> list[tuple[int, ...]]:
    from .system import class_of

    cls = class_of(stage, k, base)
    return sorted(t for t in cls if set(t) <= universe)


def a_s_closure(
    stage: SystemStage,
    scenario: SupportScenario,
    depth: int,
    config: ClosureConfig | None = None,
) -> ClosureResult:
    """Depth-bounded derivation family of a scenario; see module docstring."""
    cfg = config or ClosureConfig()
    p = scenario.p
    members = class_members_over(stage, scenario.k, scenario.base, set(stage.y_set))
    coeffs = cfg.coeffs(p)

    elements: dict = {}
    partial = False

    def add(m: dict[int, Fraction], rule: str, parents: tuple) -> bool:
        nonlocal partial
        key = _freeze(m)
        if key in elements:
            return False
        if len(elements) >= cfg.max_elements:
            partial = True
            return False
        elements[key] = (rule, parents)
        return True

    # seeds: rational blends of pairwise distinct class members
    for size in range(1, min(cfg.max_family, len(members)) + 1):
        for family in itertools.combinations(members, size):
            for rs in itertools.product(coeffs, repeat=size):
                m: dict[int, Fraction] = {}
                for r, tup in zip(rs, family):
                    for q, y in zip(scenario.weights, tup):
                        m[y] = m.get(y, Fraction(0)) + r * q
                add(m, "seed", ())

    maps = [dict(pairs) for pairs in stage.f_maps.values() if pairs]
    for _ in range(depth):
        current = list(elements.items())
        # restriction to supersets of the p-support
        for key, _meta in current:
            m = dict(key)
            supp = map_supp_p(p, m)
            free = sorted(set(m) - supp)
            if len(free) > cfg.max_restriction_free:
                partial = True
                free = free[: cfg.max_restriction_free]
            for r in range(len(free)):
                for drop in itertools.combinations(free, r + 1):
                    sub = {x: q for x, q in m.items() if x not in drop}
                    add(sub, "restrict", (key,))
        # pointwise sums on the union domain
        for (k1, _), (k2, _) in itertools.combinations_with_replacement(current, 2):
            m1, m2 = dict(k1), dict(k2)
            s = dict(m1)
            for x, q in m2.items():
                s[x] = s.get(x, Fraction(0)) + q
            add(s, "sum", (k1, k2))
        # transport backwards along a bijection
        for key, _meta in current:
            m = dict(key)
            if not m:
                continue
            for f in maps:
                rng = set(f.values())
                if set(m) <= rng:
                    inv = {y: x for x, y in f.items()}
                    pulled = {inv[y]: q for y, q in m.items()}
                    add(pulled, "transport", (key,))
        if len(elements) >= cfg.max_elements:
            partial = True
            break

    return ClosureResult(elements, partial)


@dataclass
class ScenarioVerdict:
    scenario: SupportScenario
    violations: list[FrozenMap]
    partial: bool
    derivations: list[list[str]] = field(default_factory=list)


@dataclass
class SupportCheckConfig:
    primes: tuple[int, ...] = (2, 3)
    arities: tuple[int, ...] = (2, 3)
    q_values: dict = field(default_factory=lambda: {2: (1, 3), 3: (1, 2)})
    max_q_tuples: int = 4
    max_scenarios_per_arity: int = 60
    singleton_samples: int = 12
    closure: ClosureConfig = field(default_factory=ClosureConfig)


@dataclass
class SupportReport:
    verdicts: list[ScenarioVerdict]
    scenarios_checked: int
    partial_count: int

    @property
    def passed(self) -> bool:
        return all(not v.violations for v in self.verdicts)

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "scenarios_checked": self.scenarios_checked,
            "partial_count": self.partial_count,
            "violations": [
                {
                    "p": v.scenario.p,
                    "k": v.scenario.k,
                    "base": list(v.scenario.base),
                    "weights": [str(q) for q in v.scenario.weights],
                    "maps": [dict((str(x), str(q)) for x, q in e) for e in v.violations],
                    "derivations": v.derivations,
                }
                for v in self.verdicts
                if v.violations
            ],
        }


def _scenario_bases(stage: SystemStage, k: int, cfg: SupportCheckConfig) -> list[tuple[int, ...]]:
    """Deduplicated bases: one per class with trapped members, largest classes
    first, then a deterministic sample of singleton-class tuples."""
    y = set(stage.y_set)
    partition = seq_classes(stage, k, ())
    chosen: list[tuple[int, ...]] = []
    seen_classes: set = set()
    classy = sorted(
        {cls for cls in partition.values() if len(cls) > 1},
        key=lambda cls: (-len(cls), min(cls)),
    )
    for cls in classy:
        members = sorted(t for t in cls if set(t) <= y)
        if not members:
            continue
        if cls in seen_classes:
            continue
        seen_classes.add(cls)
        chosen.append(members[0])
        if len(chosen) >= cfg.max_scenarios_per_arity:
            return chosen
    map_points = sorted({x for pairs in stage.f_maps.values() for xy in pairs for x in xy})
    taken = 0
    for t in itertools.permutations(map_points, k):
        if taken >= cfg.singleton_samples:
            break
        if t in partition and len(partition[t]) > 1:
            continue
        if set(t) <= y:
            chosen.append(t)
            taken += 1
    return chosen


def check_support_condition(
    stage: SystemStage, depth: int, config: SupportCheckConfig | None = None
) -> SupportReport:
    """Run the support condition over the default scenario battery."""
    cfg = config or SupportCheckConfig()
    verdicts: list[ScenarioVerdict] = []
    checked = 0
    partials = 0
    seen_keys: set = set()
    for k in cfg.arities:
        bases = _scenario_bases(stage, k, cfg)
        for base in bases:
            for p in cfg.primes:
                qs = [Fraction(q) for q in cfg.q_values.get(p, (1,)) if in_qp_unit(p, Fraction(q))]
                q_tuples = list(itertools.product(qs, repeat=k))[: cfg.max_q_tuples]
                members = class_members_over(stage, k, base, set(stage.y_set))
                for weights in q_tuples:
                    key = (p, frozenset(members), weights)
                    if key in seen_keys:
                        continue
                    seen_keys.add(key)
                    scenario = SupportScenario(p, k, base, weights)
                    result = a_s_closure(stage, scenario, depth, cfg.closure)
                    checked += 1
                    partials += int(result.partial)
                    bad = result.violations(p)
                    verdicts.append(
                        ScenarioVerdict(
                            scenario,
                            bad,
                            result.partial,
                            [result.derivation(e) for e in bad[:3]],
                        )
                    )
    return SupportReport(verdicts, checked, partials)
