"""Exact, desk-scale machinery for a graph-to-group reduction.

Subpackages by theme: the homogeneous model and graph encoder (keq),
oriented partial automorphisms and their enumeration (chains), the staged
bijection system with its invariant checkers (system, support), the prime
registry (primes), exact group-element divisibility (groups, linalg), the
forward/inverse reduction pipeline (reduction), and the tree-indexed
endorigidity constructions (rigid).
"""

from .chains import Chain, PartialAuto, enumerate_chains
from .groups import GroupElement, in_g1, in_g1u, lift_fhat, prime_signature
from .keq import (
    FiniteKeqStructure,
    GraphAdj,
    decode_keq,
    encode_graph,
    greedy_embed,
    is_isomorphic_finite,
    m_relation,
)
from .primes import ClassKey, PrimeRegistry, canonical_class_key
from .reduction import reduce_graph, transfer_iso
from .rigid import RigidSystem, TreeT, build_rigid_system
from .support import SupportScenario, a_s_closure, check_support_condition
from .system import (
    FullSystem,
    SystemStage,
    base_stage,
    check_stage_invariants,
    check_successor_invariants,
    seq_classes,
    successor_stage,
)

__all__ = [
    "Chain",
    "ClassKey",
    "FiniteKeqStructure",
    "FullSystem",
    "GraphAdj",
    "GroupElement",
    "PartialAuto",
    "PrimeRegistry",
    "RigidSystem",
    "SupportScenario",
    "SystemStage",
    "TreeT",
    "a_s_closure",
    "base_stage",
    "build_rigid_system",
    "canonical_class_key",
    "check_stage_invariants",
    "check_successor_invariants",
    "check_support_condition",
    "decode_keq",
    "encode_graph",
    "enumerate_chains",
    "greedy_embed",
    "in_g1",
    "in_g1u",
    "is_isomorphic_finite",
    "lift_fhat",
    "m_relation",
    "prime_signature",
    "reduce_graph",
    "seq_classes",
    "successor_stage",
    "transfer_iso",
]
