"""Stage construction, invariant checkers, and tuple classes."""

import pytest

from tfabred.chains import Chain, EMPTY_CHAIN, PartialAuto
from tfabred.system import (
    FullSystem,
    SuccessorError,
    SystemStage,
    base_stage,
    check_stage_invariants,
    check_successor_invariants,
    class_of,
    limit_condition_witness,
    seq_classes,
    successor_stage,
    touched_tuples,
)


def test_base_stage_shape():
    m = base_stage()
    assert m.i_levels == (frozenset({EMPTY_CHAIN}),)
    assert m.n_of_m == 1
    assert m.f(EMPTY_CHAIN) == {}
    assert len(m.y_set) == 2
    assert check_stage_invariants(m).passed


def test_base_stage_classes_are_singletons():
    m = base_stage()
    classes = seq_classes(m, 1, m.x_set)
    assert all(len(cls) == 1 for cls in classes.values())


def test_successor_from_base():
    m = base_stage()
    c = Chain((PartialAuto.make({0: 1}, 0),))
    n = successor_stage(m, c)
    f = n.f(c)
    assert set(f) <= set(n.y_set)
    assert all(v not in m.y_set for v in f.values())  # images fresh
    assert n.n_of_m == 2
    assert check_stage_invariants(n).passed
    assert check_successor_invariants(m, n).passed


def test_successor_precondition_errors():
    m = base_stage()
    c = Chain((PartialAuto.make({0: 1}, 0),))
    n = successor_stage(m, c)
    with pytest.raises(SuccessorError) as exc:
        successor_stage(n, c)
    assert exc.value.clause == "already-present"
    deep = Chain((PartialAuto.make({0: 1}, 0), PartialAuto.make({0: 1, 1: 0}, 0)))
    with pytest.raises(SuccessorError) as exc:
        successor_stage(m, deep)
    assert exc.value.clause == "prefix-missing"
    with pytest.raises(SuccessorError) as exc:
        successor_stage(m, EMPTY_CHAIN)
    assert exc.value.clause == "extension-shape"


def test_build_to_stage_examples():
    system = FullSystem()
    assert system.stage(0) == base_stage()
    st5 = system.stage(5)
    st8 = system.stage(8)
    assert st5.x_count <= st8.x_count
    assert set(st5.f_maps) <= set(st8.f_maps)
    assert st5.y_set <= st8.y_set
    # every enumerated chain with index <= L has a bijection at stage L
    from tfabred.chains import enumerate_chains

    for idx, c in enumerate(enumerate_chains(9)):
        assert system.stage(8).has_chain(c), idx


def test_stage_checker_catches_injected_violation():
    system = FullSystem()
    st = system.stage(3)
    target = next(c for c in st.f_maps if len(c) == 1)
    bad_maps = dict(st.f_maps)
    pairs = bad_maps[target]
    # swap one image pair to break the inverse relation
    assert pairs
    x, y = pairs[0]
    bad_maps[target] = ((x, y + 1000),) + pairs[1:]
    bad = SystemStage(
        x_count=st.x_count + 2000,
        part=st.part + tuple(0 for _ in range(2000)),
        i_levels=st.i_levels,
        f_maps=bad_maps,
        y_set=st.y_set,
        n_of_m=st.n_of_m,
    )
    rep = check_stage_invariants(bad)
    assert not rep.passed
    assert any(r.clause == "inverse-pairing" for r in rep.failures())


def test_stage_ten_of_default_build_passes(built_system):
    rep = check_stage_invariants(built_system.stage(10))
    assert rep.passed, [(r.clause, r.witness) for r in rep.failures()]


def test_class_edges_are_symmetric(built_system):
    st = built_system.stage(8)
    classes = seq_classes(st, 1, st.x_set)
    for chain, pairs in st.f_maps.items():
        for x, y in pairs:
            assert classes[(x,)] == classes[(y,)]


def test_seq_classes_one_map_merges():
    m = base_stage()
    c = Chain((PartialAuto.make({0: 1}, 0),))
    n = successor_stage(m, c)
    f = n.f(c)
    x = next(iter(f))
    classes = seq_classes(n, 1, n.x_set)
    assert classes[(x,)] == frozenset({(x,), (f[x],)})


def test_class_stability_under_growth(built_system):
    for l in range(6):
        prev, nxt = built_system.stage(l), built_system.stage(l + 1)
        for k in (1, 2):
            prev_touched = touched_tuples(prev, k)
            a = seq_classes(prev, k, range(prev.x_count))
            b = seq_classes(nxt, k, range(prev.x_count))
            for t in prev_touched:
                assert a[t] & prev_touched == b[t] & prev_touched


def test_force_chain_and_class_of(built_system):
    system = FullSystem()
    c = Chain((PartialAuto.make({0: 1}, 0), PartialAuto.make({0: 1, 1: 0}, 0)))
    idx = system.force_chain(c)
    st = system.stage(idx)
    assert st.has_chain(c) and st.has_chain(c.prefix(1))
    f = st.f(c)
    some = next(iter(f))
    assert (f[some],) in class_of(st, 1, (some,))


def test_limit_condition_witness_trivial_and_built(built_system):
    g0 = PartialAuto.make({0: 0}, 0)
    rep = limit_condition_witness(built_system, [g0], 12)
    assert rep.passed
    g1 = PartialAuto.make({0: 0, 1: 1}, 0)
    rep = limit_condition_witness(built_system, [g0, g1], 14)
    assert rep.passed, [(r.clause, r.witness) for r in rep.failures()]


def test_limit_condition_needs_increasing_prefix(built_system):
    g0 = PartialAuto.make({0: 0}, 0)
    rep = limit_condition_witness(built_system, [g0, g0], 12)
    assert not rep.passed


def test_snapshot_round_trip(built_system):
    st = built_system.stage(7)
    again = SystemStage.from_json(st.to_json())
    assert again == st
    assert check_stage_invariants(again).passed
