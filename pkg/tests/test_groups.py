import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from haarlab.errors import NotAGroup, UnsupportedSize
from haarlab.groups import (
    GroupAction,
    build_group,
    builtin_group,
    check_axioms,
    coset_analysis,
    cube_rotations,
    cyclic,
    dihedral,
    group_from_json,
    group_to_json,
    invariant_distributions,
    parse_group,
    subgroup_closure,
    symmetric,
)

from oracles import bfs_closure, brute_associative

ALL_GROUPS = [cyclic(1), cyclic(6), cyclic(9), dihedral(3), dihedral(5), symmetric(3), symmetric(4),
              cube_rotations()[0]]


def test_trivial_group():
    G = build_group([[0]])
    assert G.order == 1
    assert G.identity == 0


def test_z2_inverse():
    G = build_group([[0, 1], [1, 0]])
    assert G.order == 2
    assert G.inv(1) == 1


def test_identity_need_not_be_index_zero():
    # Z3 with the identity stored at index 2
    t = [[1, 2, 0], [2, 0, 1], [0, 1, 2]]
    G = build_group(t)
    assert G.identity == 2
    assert G.inv(0) == 1


def test_non_associative_table_rejected():
    # a Latin square with identity 0 that is not associative
    t = [[0, 1, 2, 3, 4], [1, 0, 3, 4, 2], [2, 4, 0, 1, 3], [3, 2, 4, 0, 1], [4, 3, 1, 2, 0]]
    assert not brute_associative(t)
    with pytest.raises(NotAGroup) as exc:
        build_group(t)
    assert exc.value.reason == "associativity fails"
    a, b, c = exc.value.triple
    assert t[t[a][b]][c] != t[a][t[b][c]]


def test_three_by_three_non_associative():
    t = [[0, 1, 2], [1, 0, 0], [2, 0, 0]]
    assert not brute_associative(t)
    with pytest.raises(NotAGroup):
        check_axioms(t)


@pytest.mark.parametrize(
    "table, reason",
    [
        ([[0, 1], [1, 2]], "closure fails"),
        ([[0, 1], [0, 1]], None),
        ([[0, 1, 2]], "table is not square"),
    ],
)
def test_malformed_tables(table, reason):
    with pytest.raises(NotAGroup) as exc:
        check_axioms(table)
    if reason:
        assert exc.value.reason.startswith(reason)


def test_cyclic_six():
    G = cyclic(6)
    assert G.order == 6
    assert G.inv(2) == 4
    assert G.is_abelian()


def test_cube_rotations_order_and_action():
    G, action = cube_rotations()
    assert G.order == 24
    assert action.points == 6
    # each permutation is a bijection of faces, and opposite faces stay opposite
    opposite = {0: 1, 1: 0, 2: 3, 3: 2, 4: 5, 5: 4}
    for g in range(G.order):
        perm = action.perm[g]
        assert sorted(perm) == list(range(6))
        for f in range(6):
            assert perm[opposite[f]] == opposite[perm[f]]


def test_dihedral3_matches_symmetric3_order_census():
    assert dihedral(3).order == 6
    assert dihedral(3).element_orders() == symmetric(3).element_orders()
    assert not dihedral(3).is_abelian()


def test_builtin_sizes():
    assert dihedral(4).order == 8
    assert symmetric(5).order == 120
    with pytest.raises(UnsupportedSize):
        symmetric(6)
    with pytest.raises(UnsupportedSize):
        dihedral(2)
    with pytest.raises(UnsupportedSize):
        builtin_group("quaternion", 8)


@pytest.mark.parametrize("G", ALL_GROUPS, ids=lambda g: g.name)
def test_builtin_tables_pass_brute_force_axioms(G):
    t = G.table.tolist()
    if G.order <= 12:
        assert brute_associative(t)
    e = G.identity
    for a in range(G.order):
        assert t[a][G.inv(a)] == e and t[G.inv(a)][a] == e
        assert t[a][e] == a and t[e][a] == a
    # Latin square
    assert all(sorted(row) == list(range(G.order)) for row in t)


def test_subgroup_closure_examples():
    G = cyclic(6)
    assert subgroup_closure(G, {2}).members == (0, 2, 4)
    assert subgroup_closure(G, {1}).is_whole()
    C, _ = cube_rotations()
    quarter = next(g for g in range(C.order) if C.element_order(g) == 4)
    assert subgroup_closure(C, {quarter}).size == 4


@pytest.mark.parametrize("G", ALL_GROUPS, ids=lambda g: g.name)
def test_closure_matches_bfs_oracle(G, rng):
    for _ in range(5):
        seed = set(rng.choice(G.order, size=min(2, G.order), replace=False).tolist())
        got = set(subgroup_closure(G, seed).members)
        assert got == bfs_closure(G.table.tolist(), seed, G.identity)
        assert G.order % len(got) == 0  # Lagrange


def test_coset_analysis_examples():
    G = cyclic(6)
    res = coset_analysis(G, subgroup_closure(G, {2}))
    assert res["index"] == 2
    assert sorted(res["left_cosets"]) == [(0, 2, 4), (1, 3, 5)]
    assert coset_analysis(G, subgroup_closure(G, {0}))["index"] == 6
    C, _ = cube_rotations()
    quarter = next(g for g in range(C.order) if C.element_order(g) == 4)
    res = coset_analysis(C, subgroup_closure(C, {quarter}))
    assert res["index"] == 6
    assert sorted(x for c in res["left_cosets"] for x in c) == list(range(24))


def test_normality():
    S3 = symmetric(3)
    rotations = subgroup_closure(S3, {next(g for g in range(6) if S3.element_order(g) == 3)})
    assert rotations.is_normal()
    transposition = subgroup_closure(S3, {next(g for g in range(6) if S3.element_order(g) == 2)})
    assert not transposition.is_normal()


def test_invariant_distributions_cube_faces():
    _, action = cube_rotations()
    out = invariant_distributions(action)
    assert len(out) == 1
    assert np.allclose(out[0], 1 / 6)


def test_invariant_distributions_trivial_group():
    G = cyclic(1)
    out = invariant_distributions(GroupAction(G, 3, np.array([[0, 1, 2]])))
    assert sorted(tuple(p) for p in out) == sorted(tuple(r) for r in np.eye(3))


def test_invariant_distributions_swap():
    G = cyclic(2)
    out = invariant_distributions(GroupAction(G, 3, np.array([[0, 1, 2], [1, 0, 2]])))
    got = sorted(tuple(p) for p in out)
    assert got == sorted([(0.5, 0.5, 0.0), (0.0, 0.0, 1.0)])


@pytest.mark.parametrize("G", ALL_GROUPS[:6], ids=lambda g: g.name)
def test_json_round_trip(G):
    H = group_from_json(group_to_json(G))
    assert H.order == G.order
    assert np.array_equal(H.table, G.table)
    assert H.identity == G.identity


def test_json_accepts_nested_table():
    H = group_from_json(json.dumps({"order": 2, "table": [[0, 1], [1, 0]]}))
    assert H.inv(1) == 1


def test_parse_group_specs():
    assert parse_group("cyclic:6").order == 6
    assert parse_group("dihedral:4").order == 8
    assert parse_group("cube_rotations").order == 24
    with pytest.raises(UnsupportedSize):
        parse_group("cyclic:x")


@given(st.integers(1, 30), st.integers(0, 200), st.integers(0, 200))
def test_cyclic_power_and_order(n, a, k):
    G = cyclic(n)
    a %= n
    assert G.power(a, k) == (a * k) % n
    assert n % G.element_order(a) == 0


@given(st.sampled_from(ALL_GROUPS), st.data())
def test_inverse_of_product(G, data):
    a = data.draw(st.integers(0, G.order - 1))
    b = data.draw(st.integers(0, G.order - 1))
    assert G.inv(G.mul(a, b)) == G.mul(G.inv(b), G.inv(a))
