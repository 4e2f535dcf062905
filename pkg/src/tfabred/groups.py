"""Exact-rational group elements and decidable divisibility membership.

Elements of the ambient rational vector space are sparse maps from basis
points to nonzero rationals.  The distinguished subgroup ("the divisible
hull over the class generators") adjoins, for each registered prime p with
key (class e, weights q), all p-power denominators on the weighted class
vectors q.e.  Membership splits prime by prime: collecting every generator
depth at one p shows the reachable p-fractional parts are exactly

    (rational span of the weighted class vectors) + (p-integral vectors),

so membership is one exact span-plus-integrality solve per denominator
prime, with rational witness coefficients as the certificate.  The
infinitely-p-divisible part is the rational span of the class vectors
intersected with the group, which gives the prime signature test.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .chains import Chain
from .linalg import solve_exact_span, solve_span_mod_p_integral
from .primes import ClassKey, PrimeRegistry
from .support import in_qp, in_qp_unit
from .system import FullSystem, SystemStage, class_of


class GroupElement(dict):
    """Sparse basis-point -> nonzero Fraction map; the zero element is {}."""

    def __init__(self, data=()):
        super().__init__()
        items = data.items() if isinstance(data, dict) else data
        for x, q in items:
            q = Fraction(q)
            if q != 0:
                s = self.get(x, Fraction(0)) + q
                if s == 0:
                    self.pop(x, None)
                else:
                    self[x] = s

    def __missing__(self, key):
        return Fraction(0)

    def __add__(self, other) -> "GroupElement":
        out = GroupElement(self)
        for x, q in other.items():
            s = out.get(x, Fraction(0)) + q
            if s == 0:
                out.pop(x, None)
            else:
                out[x] = s
        return out

    def __sub__(self, other) -> "GroupElement":
        return self + other.scale(-1)

    def scale(self, q) -> "GroupElement":
        q = Fraction(q)
        return GroupElement((x, q * v) for x, v in self.items())

    def supp(self) -> set[int]:
        return set(self)

    def freeze(self) -> tuple:
        return tuple(sorted(self.items()))

    def is_integral(self) -> bool:
        return all(q.denominator == 1 for q in self.values())

    def to_json(self) -> list:
        return [[x, q.numerator, q.denominator] for x, q in sorted(self.items())]

    @classmethod
    def from_json(cls, data) -> "GroupElement":
        return cls((x, Fraction(num, den)) for x, num, den in data)

    @classmethod
    def unit(cls, x: int) -> "GroupElement":
        return cls(((x, 1),))


def rational_in_qp(p: int, q) -> bool:
    """Whether p does not divide the (reduced) denominator of q."""
    return in_qp(p, Fraction(q))


def rational_in_qp_odot(p: int, q) -> bool:
    """Whether q is positive with p-valuation exactly zero."""
    return in_qp_unit(p, Fraction(q))


def supp_p(p: int, a: GroupElement) -> set[int]:
    """Basis points whose coefficient has p in the denominator."""
    return {x for x, q in a.items() if not in_qp(p, q)}


def denominator_primes(a: GroupElement) -> set[int]:
    out: set[int] = set()
    for q in a.values():
        d = q.denominator
        f = 2
        while f * f <= d:
            if d % f == 0:
                out.add(f)
                while d % f == 0:
                    d //= f
            f += 1
        if d > 1:
            out.add(d)
    return out


def p_exponent(p: int, a: GroupElement) -> int:
    """Largest exponent of p among coefficient denominators."""
    best = 0
    for q in a.values():
        d, e = q.denominator, 0
        while d % p == 0:
            d //= p
            e += 1
        best = max(best, e)
    return best


def weighted_class_vectors(
    stage: SystemStage, key: ClassKey
) -> list[tuple[tuple[int, ...], GroupElement]]:
    """(member tuple, weighted vector) for every realized member of the key's class."""
    if any(x >= stage.x_count for x in key.rep):
        return []
    members = sorted(class_of(stage, key.arity, key.rep))
    out = []
    for t in members:
        vec = GroupElement((x, Fraction(q)) for x, q in zip(t, key.weights))
        out.append((t, vec))
    return out


@dataclass
class DivisibilityCertificate:
    """Witness that an element's p-fractional part comes from class vectors."""

    element: tuple
    prime: int
    exponent: int
    decomposition: list[tuple[Fraction, tuple[int, ...]]]

    def replay(self, key: ClassKey) -> GroupElement:
        total = GroupElement()
        for r, t in self.decomposition:
            total = total + GroupElement(
                (x, r * Fraction(q)) for x, q in zip(t, key.weights)
            )
        return total

    def verify(self, registry: PrimeRegistry) -> bool:
        key = registry.lookup_prime(self.prime)
        if key is None:
            return False
        residue = GroupElement(self.element) - self.replay(key)
        return all(in_qp(self.prime, q) for q in residue.values())

    def to_json(self) -> dict:
        return {
            "element": [[x, q.numerator, q.denominator] for x, q in self.element],
            "prime": self.prime,
            "exponent": self.exponent,
            "decomposition": [
                {"coeff": [r.numerator, r.denominator], "tuple": list(t)}
                for r, t in self.decomposition
            ],
        }


@dataclass
class G1Result:
    member: bool
    certificates: list[DivisibilityCertificate] = field(default_factory=list)
    reason: str = ""

    def __bool__(self) -> bool:
        return self.member


def in_g1(
    system: FullSystem,
    registry: PrimeRegistry,
    a: GroupElement,
    stage_idx: int | None = None,
) -> G1Result:
    """Decide membership in the divisible hull; certificates on success."""
    stage = system.latest if stage_idx is None else system.stage(stage_idx)
    if not a:
        return G1Result(True)
    if any(x >= stage.x_count for x in a):
        return G1Result(False, reason="support point not realized at this stage")
    certs = []
    for p in sorted(denominator_primes(a)):
        key = registry.lookup_prime(p)
        if key is None:
            return G1Result(False, reason=f"prime {p} carries no assignment")
        if key.kind != "class_tuple":
            return G1Result(False, reason=f"prime {p} is not a tuple-class prime")
        tagged = weighted_class_vectors(stage, key)
        if not tagged:
            return G1Result(False, reason=f"class of prime {p} not realized")
        columns = [dict(vec) for _, vec in tagged]
        coeffs = solve_span_mod_p_integral(columns, dict(a), p)
        if coeffs is None:
            return G1Result(
                False, reason=f"p={p}: fractional part escapes the class span"
            )
        certs.append(
            DivisibilityCertificate(
                element=a.freeze(),
                prime=p,
                exponent=p_exponent(p, a),
                decomposition=[
                    (c, t) for c, (t, _) in zip(coeffs, tagged) if c != 0
                ],
            )
        )
    return G1Result(True, certs)


def in_g1u(
    system: FullSystem,
    registry: PrimeRegistry,
    u_set,
    a: GroupElement,
    stage_idx: int | None = None,
) -> bool:
    """Membership in the pure subgroup anchored on the blocks named by u_set."""
    res = in_g1(system, registry, a, stage_idx)
    if not res.member:
        raise ValueError(f"element outside the group: {res.reason}")
    stage = system.latest if stage_idx is None else system.stage(stage_idx)
    labels = {stage.part[x] for x in a}
    return labels <= set(u_set)


def pure_closure_member(
    gens: list[GroupElement], b: GroupElement, n_bound: int
) -> int | None:
    """Least 1 <= n <= n_bound with n*b an integer combination of gens, else None."""
    from math import lcm

    from .linalg import in_integer_span

    denoms = [q.denominator for g in gens for q in g.values()]
    denoms += [q.denominator for q in b.values()]
    scale = lcm(*denoms) if denoms else 1
    cols = [
        {x: (q * scale).numerator for x, q in g.items()} for g in gens
    ]
    for n in range(1, n_bound + 1):
        target = {x: (q * scale * n).numerator for x, q in b.items()}
        if in_integer_span(cols, target):
            return n
    return None


def lift_fhat(
    system: FullSystem,
    chain: Chain,
    a: GroupElement,
    stage_idx: int | None = None,
) -> GroupElement:
    """Coefficient-preserving transport of an element along a chain's bijection."""
    stage = system.latest if stage_idx is None else system.stage(stage_idx)
    if not stage.has_chain(chain):
        raise KeyError("chain has no bijection at this stage")
    f = stage.f(chain)
    escaped = [x for x in a if x not in f]
    if escaped:
        raise ValueError(f"support points {sorted(escaped)} escape the bijection domain")
    return GroupElement((f[x], q) for x, q in a.items())


def prime_signature(
    system: FullSystem,
    registry: PrimeRegistry,
    a: GroupElement,
    stage_idx: int | None = None,
) -> set[int]:
    """Assigned primes whose divisible part contains the element.

    The element must already be a group member; the test at each prime is
    exact rational span membership over the realized class vectors.
    """
    res = in_g1(system, registry, a, stage_idx)
    if not res.member:
        raise ValueError(f"element outside the group: {res.reason}")
    stage = system.latest if stage_idx is None else system.stage(stage_idx)
    sig: set[int] = set()
    for key in registry.order:
        if key.kind != "class_tuple":
            continue
        tagged = weighted_class_vectors(stage, key)
        if not tagged:
            continue
        columns = [dict(vec) for _, vec in tagged]
        if solve_exact_span(columns, dict(a)) is not None:
            sig.add(registry.assignments[key])
    return sig
