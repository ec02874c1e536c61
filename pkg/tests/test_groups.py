import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thermolim.errors import UsageError
from thermolim.groups import (FolnerSpec, Group, SiteSet, boundary_size, diameter, folner_ratio, r_boundary,
                              temperedness_ratio, word_ball, word_distance)

import oracles

Z1, Z2, Z3 = Group.zd(1), Group.zd(2), Group.zd(3)
H = Group.heisenberg()

coord = st.integers(-20, 20)


def test_multiply_examples():
    assert Z2.multiply((1, 2), (3, -1)).coords == (4, 1)
    assert H.multiply((1, 0, 0), (0, 1, 0)).coords == (1, 1, 1)
    assert H.multiply((0, 1, 0), (1, 0, 0)).coords == (1, 1, 0)


def test_mixed_groups_rejected():
    with pytest.raises(UsageError):
        Z2.multiply(Z2.element((1, 2)), Z3.element((1, 2, 3)))
    with pytest.raises(UsageError):
        Z2.multiply(H.element((0, 0, 0)), (1, 2))


@settings(max_examples=300, deadline=None)
@given(st.tuples(coord, coord, coord), st.tuples(coord, coord, coord), st.tuples(coord, coord, coord))
def test_heisenberg_axioms(a, b, c):
    ab_c = H.multiply(H.multiply(a, b), c)
    a_bc = H.multiply(a, H.multiply(b, c))
    assert ab_c == a_bc
    assert H.multiply(a, H.inverse(a)).coords == H.identity
    assert H.multiply(a, b).coords == oracles.heis_mul(a, b)


@settings(max_examples=200, deadline=None)
@given(st.tuples(coord, coord), st.tuples(coord, coord), st.tuples(coord, coord))
def test_zd_axioms(a, b, c):
    assert Z2.multiply(Z2.multiply(a, b), c) == Z2.multiply(a, Z2.multiply(b, c))
    assert Z2.multiply(a, Z2.inverse(a)).coords == (0, 0)


def test_generators_symmetric_without_identity():
    for g in (Z1, Z2, Z3, H):
        s = {tuple(x) for x in g.generators.tolist()}
        assert g.identity not in s
        assert s == {tuple(x) for x in g.inv(g.generators).tolist()}


def test_word_distance_examples():
    assert word_distance(Z2.element((0, 0)), Z2.element((2, 2)), 10) == 4
    assert word_distance(Z2.element((3, -1)), Z2.element((3, -1)), 0) == 0
    assert word_distance(H.element((0, 0, 0)), H.element((0, 0, 1)), 10) == 4
    assert word_distance(H.element((0, 0, 0)), H.element((0, 0, 1)), 3) is None


@settings(max_examples=60, deadline=None)
@given(st.tuples(*[st.integers(-2, 2)] * 3), st.tuples(*[st.integers(-2, 2)] * 3))
def test_heisenberg_distance_matches_bfs(v, w):
    expected = oracles.distance("heisenberg", v, w, cutoff=8)
    assert word_distance(v, w, 8, group=H) == expected


def test_r_boundary_square():
    cube = SiteSet.cube(Z2, 3)
    assert len(r_boundary(cube, 1)) == 20
    assert boundary_size(cube, 1) == 20
    assert folner_ratio(cube, 1) == pytest.approx(20 / 9)
    assert len(r_boundary(SiteSet(Z2, np.zeros((0, 2))), 1)) == 0


def test_r_boundary_rejects_nonpositive_radius():
    with pytest.raises(UsageError):
        r_boundary(SiteSet.cube(Z2, 3), 0)


@pytest.mark.parametrize("kind,d,sites", [
    ("zd", 2, oracles.box((4, 3))),
    ("zd", 2, [(0, 0), (1, 0), (3, 2), (2, 2), (0, 4)]),
    ("zd", 3, oracles.box((3, 2, 2))),
    ("heisenberg", None, oracles.box((2, 3, 4))),
    ("heisenberg", None, [(0, 0, 0), (1, 1, 1), (2, 0, 5), (-1, 2, 0)]),
])
@pytest.mark.parametrize("r", [1, 2, 3])
def test_r_boundary_matches_bruteforce(kind, d, sites, r):
    group = H if kind == "heisenberg" else Group.zd(d)
    got = {tuple(c) for c in r_boundary(SiteSet(group, sites), r).coords.tolist()}
    assert got == oracles.r_boundary(kind, sites, r, d)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_cube_boundary_closed_form_and_order_bound(d):
    g = Group.zd(d)
    for r in (1, 2, 3):
        prev = None
        for L in range(1, 33 if d < 3 else 13):
            cube = SiteSet.cube(g, L)
            size = boundary_size(cube, r)
            assert size <= 4 * d * r * (L + 2 * r) ** (d - 1)
            if L <= 6:
                assert size == len(r_boundary(SiteSet(g, cube.coords), r))
            ratio = size / L ** d
            if prev is not None:
                assert ratio <= prev
            prev = ratio


def test_folner_ratio_1d():
    for L in (5, 10, 40):
        assert folner_ratio(SiteSet.cube(Z1, L), 1) == pytest.approx(4 / L)
    with pytest.raises(UsageError):
        folner_ratio(SiteSet(Z1, np.zeros((0, 1))), 1)


def test_diameter_examples():
    assert diameter(SiteSet.cube(Z2, 3)) == 4
    assert diameter(SiteSet(Z2, [(5, 5)])) == 0
    assert diameter(SiteSet.cube(Z1, 17)) == 16
    with pytest.raises(UsageError):
        diameter(SiteSet(Z2, np.zeros((0, 2))))


def test_diameter_heisenberg_matches_bruteforce():
    sites = oracles.box((2, 2, 4))
    brute = max(oracles.distance("heisenberg", a, b, cutoff=12) for a in sites for b in sites)
    assert diameter(SiteSet.box(H, (2, 2, 4))) == brute == 8


def test_temperedness():
    cubes = [SiteSet.cube(Z1, L) for L in range(1, 11)]
    assert temperedness_ratio(cubes, 1) == 0
    assert temperedness_ratio(cubes, 2) == 1
    for d in (1, 2):
        seq = [SiteSet.cube(Group.zd(d), L) for L in range(1, 11)]
        for j in range(1, 11):
            assert temperedness_ratio(seq, j) <= 2 ** d
    with pytest.raises(UsageError):
        temperedness_ratio(cubes, 11)


def test_site_set_dedup_order_membership():
    s = SiteSet(Z2, [(1, 1), (0, 2), (1, 1), (-3, 0)])
    assert len(s) == 3
    assert list(s) == [(-3, 0), (0, 2), (1, 1)]
    assert (0, 2) in s and (2, 0) not in s
    box = SiteSet.box(Z2, (3, 4), origin=(-1, 2))
    explicit = SiteSet(Z2, box.coords)
    probe = np.array([[0, 3], [-1, 2], [1, 5], [2, 2], [-2, 3]])
    assert np.array_equal(box.index_of(probe), explicit.index_of(probe))
    assert box == explicit


def test_folner_spec_nesting():
    spec = FolnerSpec(Z2, "cubes", (2, 4, 8, 16))
    sets = spec.sets()
    assert all(a.issubset(b) for a, b in zip(sets, sets[1:]))
    assert Z2.identity in sets[0]
    balls = FolnerSpec(H, "balls", (0, 1, 2, 3)).sets()
    assert [len(b) for b in balls] == [len(word_ball(H, r)) for r in range(4)]
    hb = FolnerSpec(H, "heisenberg-boxes", (1, 2, 3)).sets()
    assert [len(b) for b in hb] == [1, 16, 81]
    cfg = {"group": "zd", "d": 2, "family": "cubes", "indices": [4, 8, 16, 32]}
    assert FolnerSpec.from_config(cfg).to_config() == dict(cfg, nested=True)
    with pytest.raises(UsageError):
        FolnerSpec(Z2, "heisenberg-boxes", (1,))


def test_word_ball_matches_bfs():
    for kind, g, d in (("zd", Z2, 2), ("heisenberg", H, None)):
        got = {tuple(c) for c in word_ball(g, 3).coords.tolist()}
        start = (0,) * g.dim
        assert got == set(oracles.ball(kind, start, 3, d))


def test_translation_is_graph_automorphism():
    box = SiteSet.box(H, (3, 3, 5))
    g = (2, -1, 4)
    moved = box.translate(g)
    assert boundary_size(moved, 2) == boundary_size(box, 2)
    assert diameter(moved) == diameter(box)


def test_huge_box_boundary_is_exact_integer():
    big = SiteSet.cube(Z1, 10 ** 30)
    assert boundary_size(big, 5) == 20
    assert list(itertools.islice(iter(SiteSet.cube(Z1, 3)), 3)) == [(0,), (1,), (2,)]
