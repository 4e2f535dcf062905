"""Injective prime assignment with stable class keys and an append-only log.

Primes are handed out to two kinds of keys: a tuple class together with a
positive integer weight vector, and a nonzero integer group element (used
by the tree construction).  The assigned prime never divides any weight or
coefficient, assignments never repeat, and the registry replays
bit-for-bit from its log.

Class keys must not move as the system grows.  Classes of tuples already
inside some bijection never change on the touched region, so the member
with the least birth stage (tie-broken lexicographically) is a stable
representative.  An untouched tuple would be unstable (its singleton class
can later join a grown class), so the key builder first forces the tuple
into a bijection domain through fresh identity chains.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass, field
from fractions import Fraction

from .chains import Chain, PartialAuto
from .system import FullSystem, class_of, tuple_birth


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    d = 2
    while d * d <= n:
        if n % d == 0:
            return False
        d += 1
    return True


def primes_from(start: int):
    n = max(2, start)
    while True:
        if is_prime(n):
            yield n
        n += 1


@dataclass(frozen=True)
class ClassKey:
    kind: str  # "class_tuple" | "g0_element"
    arity: int = 0
    rep: tuple[int, ...] = ()
    weights: tuple[int, ...] = ()
    element: tuple[tuple[int, int], ...] = ()  # sorted (point, integer coeff)

    def __post_init__(self):
        if self.kind == "class_tuple":
            if len(self.rep) != self.arity or len(self.weights) != self.arity:
                raise ValueError("class key arity mismatch")
            if any(q <= 0 for q in self.weights):
                raise ValueError("weights must be positive integers")
        elif self.kind == "g0_element":
            if not self.element or any(c == 0 for _, c in self.element):
                raise ValueError("element key must be a nonzero integer vector")
        else:
            raise ValueError(f"unknown key kind {self.kind!r}")

    def forbidden_divisors(self) -> list[int]:
        if self.kind == "class_tuple":
            return [q for q in self.weights]
        return [abs(c) for _, c in self.element]

    def serialize(self) -> str:
        if self.kind == "class_tuple":
            rep = ",".join(map(str, self.rep))
            ws = ",".join(map(str, self.weights))
            return f"ct:{self.arity}:{rep}:{ws}"
        terms = ";".join(f"{x}*{c}" for x, c in self.element)
        return f"g0:{terms}"

    @classmethod
    def deserialize(cls, text: str) -> "ClassKey":
        if text.startswith("ct:"):
            _, ar, rep, ws = text.split(":")
            return cls(
                "class_tuple",
                arity=int(ar),
                rep=tuple(int(v) for v in rep.split(",")),
                weights=tuple(int(v) for v in ws.split(",")),
            )
        if text.startswith("g0:"):
            body = text[3:]
            elem = tuple(
                (int(t.split("*")[0]), int(t.split("*")[1])) for t in body.split(";")
            )
            return cls("g0_element", element=elem)
        raise ValueError(f"bad key serialization {text!r}")

    @classmethod
    def for_element(cls, coeffs: dict[int, Fraction]) -> "ClassKey":
        elem = []
        for x, q in sorted(coeffs.items()):
            if q == 0:
                continue
            if q.denominator != 1:
                raise ValueError("element keys require integer coefficients")
            elem.append((x, q.numerator))
        return cls("g0_element", element=tuple(elem))


class PrimeRegistry:
    """Single source of prime identities; optionally file-backed."""

    def __init__(self, path: str | None = None):
        self.path = path
        self.assignments: dict[ClassKey, int] = {}
        self.reverse: dict[int, ClassKey] = {}
        self.order: list[ClassKey] = []
        if path and os.path.exists(path):
            self._load(path)

    def _load(self, path: str) -> None:
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                prime_s, key_s = line.split("\t", 1)
                self._record(ClassKey.deserialize(key_s), int(prime_s), persist=False)

    def _record(self, key: ClassKey, prime: int, persist: bool = True) -> None:
        if key in self.assignments or prime in self.reverse:
            raise ValueError("registry collision")
        self.assignments[key] = prime
        self.reverse[prime] = key
        self.order.append(key)
        if persist and self.path:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(f"{prime}\t{key.serialize()}\n")
                fh.flush()
                os.fsync(fh.fileno())

    def assign_prime(self, key: ClassKey) -> int:
        existing = self.assignments.get(key)
        if existing is not None:
            return existing
        forbidden = key.forbidden_divisors()
        for p in primes_from(2):
            if p in self.reverse:
                continue
            if any(q % p == 0 for q in forbidden):
                continue
            self._record(key, p)
            return p
        raise AssertionError("unreachable")

    def lookup_prime(self, p: int) -> ClassKey | None:
        return self.reverse.get(p)

    def check_consistent(self) -> None:
        assert len(self.assignments) == len(self.reverse)
        for key, p in self.assignments.items():
            assert is_prime(p)
            assert all(q % p != 0 for q in key.forbidden_divisors())


def _force_touched(system: FullSystem, xbar: tuple[int, ...]) -> None:
    """Force every entry of the tuple into Y and the tuple into a bijection
    domain, through fresh identity chains over the entries' block labels."""
    stage = system.latest
    labels = sorted({stage.part[x] for x in xbar})

    def fresh_identity_chain(labs: list[int]) -> Chain:
        extra = 0
        while True:
            base = labs + [max(labs, default=0) + 1 + i for i in range(extra)]
            g = PartialAuto.make({u: u for u in base}, 0)
            c = Chain((g,))
            if not system.latest.has_chain(c):
                return c
            extra += 1

    while any(x not in system.latest.y_set for x in xbar):
        system.force_chain(fresh_identity_chain(labels))

    def touched() -> bool:
        pts = set(xbar)
        return any(
            pts <= {x for x, _ in pairs} for pairs in system.latest.f_maps.values()
        )

    while not touched():
        system.force_chain(fresh_identity_chain(labels))


def canonical_class_key(
    system: FullSystem, stage_idx: int, xbar: tuple[int, ...], weights: tuple[int, ...]
) -> ClassKey:
    """Stable key for the class of a tuple with the given weight vector."""
    if len(set(xbar)) != len(xbar):
        raise ValueError("tuple entries must be pairwise distinct")
    if any(q <= 0 for q in weights) or len(weights) != len(xbar):
        raise ValueError("weights must be positive integers matching the arity")
    system.ensure_stage(stage_idx)
    if any(x >= system.stage(stage_idx).x_count for x in xbar):
        raise ValueError("tuple entries must be realized by the given stage")
    _force_touched(system, xbar)
    stage = system.latest
    idx = system.stage_count - 1
    members = sorted(class_of(stage, len(xbar), xbar))
    births = {t: tuple_birth(system, idx, t) for t in members}
    rep = min(members, key=lambda t: (births[t] if births[t] is not None else idx + 1, t))
    return ClassKey("class_tuple", arity=len(xbar), rep=rep, weights=tuple(weights))
