import json
import math

import jsonschema
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thermolim.coloring import ColorSet, ConstantColoring, FunctionColoring, exact_frequency_table
from thermolim.errors import PartialTilingError, ResourceError, UsageError
from thermolim.ergodic import EigenvalueCountingField, PotentialThresholdField
from thermolim.groups import FolnerSpec, Group, SiteSet, boundary_size, diameter
from thermolim.hamiltonian import ModelSpec
from thermolim.runner import load_schema
from thermolim.spectral import sup_norm, weighted_sum
from thermolim.tiling import (QuasiTiling, construct_quasi_tiling, coverage_densities, eta_weights,
                              heisenberg_box_chain, quasi_pattern_approximation, select_shapes,
                              symmetric_tile_check, tiling_params, uniform_cover_report, verify_quasi_tiling)

import oracles

Z1, Z2 = Group.zd(1), Group.zd(2)
H = Group.heisenberg()


def test_params_examples():
    assert tiling_params(0.05).N == 59
    assert tiling_params(0.09).N == 26
    for eps in (0.05, 0.09):
        p = tiling_params(eps)
        assert (1 - eps) ** p.N <= eps < (1 - eps) ** (p.N - 1)
        assert abs(math.fsum(p.eta) - (1 - (1 - eps) ** p.N)) <= 1e-12
        assert math.fsum(p.eta) >= 1 - eps
    with pytest.raises(UsageError):
        tiling_params(0.1)
    with pytest.raises(UsageError):
        tiling_params(0.0)


@settings(max_examples=200)
@given(st.floats(1e-4, 0.0999))
def test_params_identities(eps):
    p = tiling_params(eps)
    assert p.N == math.ceil(math.log(eps) / math.log(1 - eps)) or (1 - eps) ** p.N <= eps < (1 - eps) ** (p.N - 1)
    assert abs(math.fsum(p.eta) - p.eta_sum) <= 1e-12
    assert p.eta[-1] == eps and np.all(np.diff(p.eta) > 0)


def test_invariance_selection_on_z1():
    shapes = select_shapes(FolnerSpec(Z1, "cubes", (1, 2)), 0.09)
    sides = [s.box_shape[0] for s in shapes]
    assert len(shapes) == 26 and sides[:3] == [1, 1976, 3901235]
    assert all(a < b for a, b in zip(sides, sides[1:]))
    assert shapes[0].contains(np.zeros((1, 1), dtype=np.int64))[0]
    # each pick is the least side meeting the invariance threshold
    tol = 0.09 ** 2 / 4
    for prev, side in zip(sides[:3], sides[1:4]):
        r = max(1, prev - 1)
        assert boundary_size(SiteSet.cube(Z1, side), r) <= tol * side
        assert boundary_size(SiteSet.cube(Z1, side - 1), r) > tol * (side - 1)


def test_selection_from_lists():
    chain = [SiteSet.cube(Z2, k) for k in range(1, 40)]
    out = select_shapes(chain, 0.09, rule="consecutive")
    assert [len(s) for s in out] == [k * k for k in range(1, 27)]
    with pytest.raises(ResourceError):
        select_shapes(chain[:10], 0.09, rule="consecutive")
    with pytest.raises(ResourceError):
        select_shapes(chain, 0.09, rule="invariance")
    hc = heisenberg_box_chain(30)
    assert all(a.issubset(b) and len(a) < len(b) for a, b in zip(hc, hc[1:]))
    assert [s.box_shape for s in hc[:5]] == [(1, 1, 1), (2, 1, 1), (2, 2, 1), (2, 2, 2), (2, 2, 3)]


def brute_certificate(qt, eps):
    """Set-based recomputation of the three conditions with tuple arithmetic."""
    mul = oracles.zd_mul if qt.group.kind == "zd" else oracles.heis_mul
    region = set(map(tuple, qt.region.coords.tolist()))
    owner = {}
    ok_i = True
    ratios = []
    for i, shape in enumerate(qt.shapes):
        ks = list(map(tuple, shape.coords.tolist()))
        tiles = [[mul(k, tuple(t)) for k in ks] for t in np.asarray(qt.centers[i]).reshape(-1, qt.group.dim).tolist()]
        seen = {}
        for tile in tiles:
            for pos, s in enumerate(tile):
                if s not in region or owner.get(s, i) != i:
                    ok_i = False
                seen.setdefault(s, []).append(pos)
        for tile in tiles:
            for s in tile:
                owner[s] = i
        bad = {p for s, ps in seen.items() if len(ps) > 1 for p in ps}
        ratios.append(len(bad) / len(ks))
    uncovered = len(region - set(owner))
    return ok_i, uncovered, ratios


def test_perfect_grid_tiling():
    region = SiteSet.cube(Z2, 12)
    shape = SiteSet.cube(Z2, 4)
    qt = construct_quasi_tiling(region, [shape], 0.09, targets="fill")
    cert = verify_quasi_tiling(qt)
    assert cert["passed"] and cert["uncovered"] == 0 and cert["core_removed_ratios"] == [0.0]
    assert len(qt.centers[0]) == 9
    assert coverage_densities(qt)["ratios"] == [1.0]


def test_corrupted_tiling_fails_condition_i():
    region = SiteSet.cube(Z2, 8)
    qt = construct_quasi_tiling(region, [SiteSet.cube(Z2, 4)], 0.09, targets="fill")
    moved = qt.centers[0].copy()
    moved[0] = [20, 20]
    bad = QuasiTiling(region, qt.shapes, [moved], 0.09, "fill")
    cert = verify_quasi_tiling(bad)
    assert not cert["condition_i"] and cert["tiles_outside_region"] == 1 and not cert["passed"]
    assert brute_certificate(bad, 0.09)[0] is False


def test_z2_tiling_passes_and_matches_brute_force():
    shapes = [SiteSet.cube(Z2, k) for k in range(1, 27)]
    region = SiteSet.cube(Z2, 80)
    qt = construct_quasi_tiling(region, shapes, 0.09)
    cert = verify_quasi_tiling(qt)
    assert cert["passed"] and cert["uncovered_fraction"] <= 0.18
    ok_i, uncovered, ratios = brute_certificate(qt, 0.09)
    assert ok_i and uncovered == cert["uncovered"] and np.allclose(ratios, cert["core_removed_ratios"])
    dens = coverage_densities(qt)
    assert 1 - 0.18 <= dens["total"] <= 1
    assert dens["tolerance"] == 0.09 ** 2 / 26
    doc = qt.to_dict(cert)
    jsonschema.validate(json.loads(json.dumps(doc)), load_schema("quasi-tiling"))
    again = construct_quasi_tiling(region, shapes, 0.09)
    assert all(np.array_equal(a, b) for a, b in zip(qt.centers, again.centers))


def test_heisenberg_tiling_small():
    shapes = heisenberg_box_chain(26)
    region = SiteSet.box(H, (14, 14, 196))
    qt = construct_quasi_tiling(region, shapes, 0.09)
    cert = verify_quasi_tiling(qt)
    assert cert["passed"]
    ok_i, uncovered, ratios = brute_certificate(qt, 0.09)
    assert ok_i and uncovered == cert["uncovered"] and np.allclose(ratios, cert["core_removed_ratios"])


def test_compiled_and_generic_placement_agree():
    shapes = heisenberg_box_chain(12)
    box = SiteSet.box(H, (6, 6, 30))
    generic = SiteSet(H, box.coords)
    assert not generic.is_box
    a = construct_quasi_tiling(box, shapes, 0.09, targets="fill")
    b = construct_quasi_tiling(generic, shapes, 0.09, targets="fill")
    assert all(np.array_equal(x, y) for x, y in zip(a.centers, b.centers))


def test_unreachable_targets_raise_partial_tiling():
    # two shapes on a region barely larger than the big one leave too much uncovered
    region = SiteSet.box(Z2, (5, 3))
    with pytest.raises(PartialTilingError) as info:
        construct_quasi_tiling(region, [SiteSet.cube(Z2, 1), SiteSet.cube(Z2, 3)], 0.09)
    assert len(info.value.densities) == 2
    with pytest.raises(UsageError):
        construct_quasi_tiling(region, [SiteSet.cube(Z2, 2), SiteSet.cube(Z2, 2)], 0.09)
    with pytest.raises(ResourceError):
        construct_quasi_tiling(region, [SiteSet.cube(Z2, 4)], 0.09)


def test_uniform_cover_report_shape():
    shapes = [SiteSet.cube(Z2, k) for k in range(1, 27)]
    rep = uniform_cover_report(SiteSet.cube(Z2, 60), shapes, 0.09, 3)
    assert rep["tilings"] == 3 and len(rep["max_deviation"]) == 26


def test_symmetric_tile_check():
    window = SiteSet.box(Z2, (12, 12), origin=(-6, -6))
    tile = SiteSet.cube(Z2, 3)
    grid = [(a, b) for a in (-6, -3, 0, 3) for b in (-6, -3, 0, 3)]
    assert symmetric_tile_check(tile, grid, window)["ok"]
    missing = symmetric_tile_check(tile, grid[:-1], window)
    assert not missing["covers"] and not missing["ok"]
    assert not symmetric_tile_check(tile, [(0, 0)], window)["covers"]
    lopsided = symmetric_tile_check(tile, [(-3, -3), (0, 0)], window)
    assert not lopsided["symmetric"]


def test_quasi_pattern_single_color():
    model = ModelSpec("anderson", Z1, ColorSet.finite([0.0]))
    fld = EigenvalueCountingField(model)
    shapes = [SiteSet.cube(Z1, k) for k in range(1, 27)]
    region = SiteSet.cube(Z1, 2000)
    qt = construct_quasi_tiling(region, shapes, 0.09)
    tables = [exact_frequency_table(ColorSet.finite([0.0]), s) for s in shapes]
    res = quasi_pattern_approximation(fld, ConstantColoring(0.0), qt, tables)
    eta = eta_weights(0.09, 26)
    direct = weighted_sum([(float(e), fld.normalized(s, ConstantColoring(0.0))) for e, s in zip(eta, shapes)])
    assert sup_norm(res["value"], direct) <= 1e-12
    allowance = max(fld.boundary(s) / len(s) for s in shapes) + (1 - eta.sum()) * fld.bound
    assert res["lhs"] <= allowance
    assert math.isclose(res["terms"][3], (11 * 1 + 32 * 12) * 0.09)
    # the only empirical pattern misses the placements that stick out of Q
    missing = math.fsum(float(e) * (len(s) - 1) / 2000 for e, s in zip(eta, shapes))
    assert res["shell_radius"] == 25 and math.isclose(res["terms"][2], missing)


def test_quasi_pattern_additive_field_exact_frequencies():
    fld = PotentialThresholdField(Z1)
    col = FunctionColoring(lambda c: c[:, 0] % 2)
    bern = ColorSet.finite([0.0, 1.0])
    shapes = [SiteSet.cube(Z1, k) for k in range(1, 9)]
    region = SiteSet.cube(Z1, 400)
    qt = construct_quasi_tiling(region, shapes, 0.09, targets="fill")
    tables = [exact_frequency_table(bern, s) for s in shapes]
    res = quasi_pattern_approximation(fld, col, qt, tables)
    assert res["lhs"] <= fld.bound * (1 - eta_weights(0.09, 8).sum()) + 1e-12
