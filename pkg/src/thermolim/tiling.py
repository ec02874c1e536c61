"""Epsilon-quasi-tilings: parameters, shape selection, greedy construction, certificates."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .coloring import Coloring, FrequencyTable
from ._kernels import greedy_box_place
from .errors import PartialTilingError, ResourceError, UsageError
from .ergodic import Field, pattern_average
from .groups import FolnerSpec, Group, SiteSet, boundary_size, diameter
from .spectral import StepFunction, sup_norm, weighted_sum


@dataclass(frozen=True)
class TilingParams:
    eps: float
    N: int
    eta: tuple

    @property
    def eta_sum(self) -> float:
        return 1.0 - (1.0 - self.eps) ** self.N

    @property
    def density_tolerance(self) -> float:
        """eps^2 / N, the allowed deviation of a shape's covered fraction from eta_i."""
        return self.eps ** 2 / self.N


def eta_weights(eps: float, n: int) -> np.ndarray:
    """eta_i = eps (1 - eps)^(n - i) for i = 1..n."""
    i = np.arange(1, n + 1)
    return eps * (1.0 - eps) ** (n - i)


def tiling_params(eps: float) -> TilingParams:
    """N = ceil(ln eps / ln(1 - eps)), the least N with (1 - eps)^N <= eps."""
    if not 0 < eps < 0.1:
        raise UsageError("eps must lie in (0, 0.1)")
    n = math.ceil(math.log(eps) / math.log(1.0 - eps))
    # guard the ceiling against rounding in the logarithms
    while (1.0 - eps) ** n > eps:
        n += 1
    while n > 1 and (1.0 - eps) ** (n - 1) <= eps:
        n -= 1
    return TilingParams(eps, n, tuple(eta_weights(eps, n).tolist()))


# shape sequences


def heisenberg_box_chain(count: int) -> list[SiteSet]:
    """Nested Heisenberg boxes growing one coordinate step at a time.

    From [0,n) x [0,n) x [0,n^2) the chain passes through (n+1, n, n^2),
    (n+1, n+1, n^2) and then raises the last side by one up to (n+1)^2, so the
    Folner boxes of the family appear as members together with the
    intermediate boxes between them.
    """
    group = Group.heisenberg()
    shapes = [(1, 1, 1)]
    n = 1
    while len(shapes) < count:
        shapes.append((n + 1, n, n * n))
        shapes.append((n + 1, n + 1, n * n))
        for c in range(n * n + 1, (n + 1) ** 2 + 1):
            shapes.append((n + 1, n + 1, c))
        n += 1
    return [SiteSet.box(group, s) for s in shapes[:count]]


def _sequence(source):
    """Nested candidate sets from a FolnerSpec or an explicit list."""
    if isinstance(source, FolnerSpec):
        for idx, s in zip(source.indices, source.sets()):
            yield idx, s
        return
    for k, s in enumerate(source):
        yield k, s


def _cube_side_search(group: Group, radius: int, tol: float, start: int) -> int:
    """Least cube side >= start with |d^radius C| <= tol |C| (ratio decreases in the side)."""
    def ok(side: int) -> bool:
        return boundary_size(SiteSet.cube(group, side), radius) <= tol * side ** group.dim

    hi = max(start, 1)
    while not ok(hi):
        hi *= 2
    lo = max(start, 1)
    while lo < hi:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid + 1
    return lo


def select_shapes(source, eps: float, rule: str = "invariance", count: int | None = None) -> list[SiteSet]:
    """Choose a strictly increasing nested list K_1 < ... < K_N from a Folner sequence.

    rule="invariance": K_1 is the first member; K_{i+1} is the first later
    member with |d^{diam K_i} K| / |K| <= eps^2 / 4 (radius 0 read as 1).
    rule="consecutive": the N smallest distinct members in order.
    ``count`` overrides N(eps).
    """
    params = tiling_params(eps)
    n = count if count is not None else params.N
    tol = eps * eps / 4
    if rule == "consecutive":
        out: list[SiteSet] = []
        for _, s in _sequence(source):
            if out and (len(s) <= len(out[-1]) or not out[-1].issubset(s)):
                continue
            out.append(s)
            if len(out) == n:
                return out
        raise ResourceError(f"sequence has fewer than {n} strictly nested members")
    if rule != "invariance":
        raise UsageError(f"unknown selection rule {rule!r}")
    cubes = isinstance(source, FolnerSpec) and source.family == "cubes"
    seq = None if cubes else list(_sequence(source))
    out = []
    pos = 0
    while len(out) < n:
        if not out:
            if cubes:
                out.append(SiteSet.cube(source.group, 1))
            else:
                out.append(seq[0][1])
                pos = 1
            continue
        if cubes:
            prev = out[-1].box_shape[0]
            radius = max(1, source.group.dim * (prev - 1))
            side = _cube_side_search(source.group, radius, tol, prev + 1)
            out.append(SiteSet.cube(source.group, side))
            continue
        radius = max(1, diameter(out[-1]))
        while pos < len(seq):
            idx, cand = seq[pos]
            pos += 1
            if len(cand) <= len(out[-1]) or not out[-1].issubset(cand):
                continue
            if boundary_size(cand, radius) <= tol * len(cand):
                out.append(cand)
                break
        else:
            raise ResourceError(
                f"Folner sequence exhausted after index {seq[-1][0]}: shape {len(out) + 1} needs a "
                f"set with |boundary_{radius}|/|K| <= {tol:.3g}"
            )
    return out


# tilings


@dataclass
class QuasiTiling:
    region: SiteSet
    shapes: list
    centers: list
    eps: float
    targets: str = "eta"
    notes: list = field(default_factory=list)

    @property
    def group(self) -> Group:
        return self.region.group

    def tile_sites(self, i: int) -> np.ndarray:
        """(T_i, |K_i|, dim) coordinates of the translates K_i t."""
        k = self.shapes[i].coords
        t = np.asarray(self.centers[i], dtype=np.int64).reshape(-1, self.group.dim)
        return self.group.mul(k[None, :, :], t[:, None, :])

    def to_dict(self, certificate: dict | None = None) -> dict:
        return {
            "eps": self.eps,
            "targets": self.targets,
            "region": {"size": len(self.region), "box_shape": list(self.region.box_shape) if self.region.is_box else None},
            "shapes": [s.coords.tolist() for s in self.shapes],
            "centers": [np.asarray(c).reshape(-1, self.group.dim).tolist() for c in self.centers],
            "certificate": certificate if certificate is not None else verify_quasi_tiling(self, self.eps),
        }


def _place_generic(region, k, anchors, owner, first_pos, overlap_pos, i, allowed, goal, covered, batch):
    """Same placement rule as the compiled box kernel, for arbitrary regions."""
    group = region.group
    m = len(k)
    k0_inv = group.inv(k[0])
    positions = np.arange(m)
    region_coords = region.coords
    accepted = []
    ptr = 0
    while ptr < len(anchors) and covered < goal:
        block = anchors[ptr:ptr + batch]
        ptr += len(block)
        t = group.mul(k0_inv[None, :], region_coords[block])
        sites = group.mul(k[None, :, :], t[:, None, :])
        idx = region.index_of(sites.reshape(-1, group.dim)).reshape(len(block), m)
        inside = np.all(idx >= 0, axis=1)
        for c in range(len(block)):
            if owner[block[c]] != -1 or not inside[c]:
                continue
            tile = idx[c]
            occ = owner[tile]
            if np.any((occ >= 0) & (occ != i)):
                continue
            same = occ == i
            if same.any():
                new_pos = overlap_pos.copy()
                new_pos[positions[same]] = True
                new_pos[first_pos[tile[same]]] = True
                if new_pos.sum() > allowed:
                    continue
                overlap_pos[:] = new_pos
            fresh = tile[~same]
            owner[fresh] = i
            first_pos[fresh] = positions[~same]
            covered += len(fresh)
            accepted.append(t[c])
            if covered >= goal:
                break
    return np.asarray(accepted, dtype=np.int64).reshape(-1, group.dim), covered


def construct_quasi_tiling(region: SiteSet, shapes: Sequence[SiteSet], eps: float, targets: str = "eta",
                           scan_offset: int = 0, batch: int = 256) -> QuasiTiling:
    """Greedy placement, largest shape first.

    Candidate centers are t = k0^-1 q for uncovered sites q of the region in
    lexicographic order (rotated by ``scan_offset``), k0 the minimal site of
    the shape. A translate K_i t is accepted if it lies in the region, misses
    every other shape's tiles, and the set of shape positions involved in
    same-shape overlaps stays within floor(eps |K_i|). Shape i stops once the
    covered fraction reaches sum_{k >= i} eta_k - eps^2/N (``targets="eta"``)
    or when no candidate is left (``targets="fill"``).
    """
    if not 0 < eps < 1:
        raise UsageError("eps must lie in (0, 1)")
    shapes = list(shapes)
    n_shapes = len(shapes)
    if n_shapes == 0:
        raise UsageError("need at least one shape")
    for a, b in zip(shapes, shapes[1:]):
        if len(a) >= len(b) or not a.issubset(b):
            raise UsageError("shapes must be strictly increasing and nested")
    if len(shapes[-1]) > len(region):
        raise ResourceError("largest shape does not fit in the region")
    group = region.group
    n_q = len(region)
    eta = eta_weights(eps, n_shapes)
    owner = np.full(n_q, -1, dtype=np.int64)
    first_pos = np.full(n_q, -1, dtype=np.int64)
    centers: list = [np.zeros((0, group.dim), dtype=np.int64) for _ in range(n_shapes)]
    covered = 0
    scan = np.roll(np.arange(n_q), -scan_offset % n_q) if n_q else np.arange(0)
    for i in range(n_shapes - 1, -1, -1):
        if targets == "eta":
            goal = (eta[i:].sum() - eps * eps / n_shapes) * n_q
        elif targets == "fill":
            goal = n_q
        else:
            raise UsageError(f"unknown target rule {targets!r}")
        if covered >= goal:
            continue
        k = shapes[i].coords
        m = len(k)
        allowed = math.floor(eps * m + 1e-9)
        overlap_pos = np.zeros(m, dtype=bool)
        anchors = scan[owner[scan] == -1]
        if region.is_box and group.kind in ("zd", "heisenberg"):
            found, covered = greedy_box_place(
                k, 0 if group.kind == "zd" else 1,
                np.asarray(region.box_origin, dtype=np.int64), np.asarray(region.box_shape, dtype=np.int64),
                anchors, owner, first_pos, overlap_pos, i, allowed, goal, covered,
            )
        else:
            found, covered = _place_generic(region, k, anchors, owner, first_pos, overlap_pos, i, allowed,
                                            goal, covered, batch)
        centers[i] = found
    qt = QuasiTiling(region, shapes, centers, eps, targets)
    if targets == "eta":
        final_goal = (eta.sum() - eps * eps / n_shapes) * n_q
        uncovered = n_q - covered
        if covered < final_goal or uncovered > 2 * eps * n_q:
            raise PartialTilingError(
                f"covered {covered}/{n_q} sites, target {final_goal:.1f}",
                coverage_densities(qt)["ratios"],
            )
    return qt


def verify_quasi_tiling(qt: QuasiTiling, eps: float | None = None) -> dict:
    """Recompute the three defining conditions from the raw site sets.

    (i) tiles of different shapes are disjoint and all tiles lie in the region;
    (ii) at most 2 eps |Q| sites stay uncovered;
    (iii) removing from K_i every position that takes part in a same-shape
    overlap leaves a core whose translates are disjoint and which keeps all
    but at most eps |K_i| positions.
    """
    eps = qt.eps if eps is None else eps
    region = qt.region
    n_q = len(region)
    group = qt.group
    cover_shape = np.full(n_q, -1, dtype=np.int64)
    inside_ok = True
    cross_ok = True
    outside_tiles = 0
    core_ratios, core_disjoint = [], []
    union = np.zeros(n_q, dtype=bool)
    for i, shape in enumerate(qt.shapes):
        tiles = qt.tile_sites(i)
        if len(tiles) == 0:
            core_ratios.append(0.0)
            core_disjoint.append(True)
            continue
        idx = region.index_of(tiles.reshape(-1, group.dim)).reshape(tiles.shape[:2])
        out = np.any(idx < 0, axis=1)
        if out.any():
            inside_ok = False
            outside_tiles += int(out.sum())
        flat = idx[idx >= 0]
        sites_i = np.unique(flat)
        clash = cover_shape[sites_i]
        if np.any(clash >= 0):
            cross_ok = False
        cover_shape[sites_i] = i
        union[sites_i] = True
        # same-shape multiplicity, by site of the whole group (keys), not only inside the region
        keys = group.encode(tiles.reshape(-1, group.dim)).reshape(tiles.shape[:2])
        uniq, counts = np.unique(keys, return_counts=True)
        multi = np.isin(keys, uniq[counts > 1])
        removed = np.any(multi, axis=0)
        core_ratios.append(float(removed.sum() / len(shape)))
        core_keys = keys[:, ~removed].ravel()
        core_disjoint.append(len(np.unique(core_keys)) == len(core_keys))
    uncovered = int(n_q - union.sum())
    uncovered_frac = uncovered / n_q if n_q else 0.0
    cond_i = inside_ok and cross_ok
    cond_ii = uncovered <= 2 * eps * n_q
    cond_iii = all(r <= eps + 1e-12 for r in core_ratios) and all(core_disjoint)
    return {
        "condition_i": cond_i,
        "tiles_inside_region": inside_ok,
        "tiles_outside_region": outside_tiles,
        "shapes_disjoint": cross_ok,
        "condition_ii": cond_ii,
        "uncovered": uncovered,
        "uncovered_fraction": uncovered_frac,
        "condition_iii": cond_iii,
        "core_removed_ratios": core_ratios,
        "cores_disjoint": core_disjoint,
        "passed": bool(cond_i and cond_ii and cond_iii),
    }


def coverage_densities(qt: QuasiTiling) -> dict:
    """|K_i T_i| / |Q| per shape against eta_i with the eps^2/N tolerance."""
    n_shapes = len(qt.shapes)
    eta = eta_weights(qt.eps, n_shapes)
    n_q = len(qt.region)
    ratios = []
    for i in range(n_shapes):
        tiles = qt.tile_sites(i)
        idx = qt.region.index_of(tiles.reshape(-1, qt.group.dim))
        ratios.append(len(np.unique(idx[idx >= 0])) / n_q)
    ratios = np.asarray(ratios)
    tol = qt.eps ** 2 / n_shapes
    dev = np.abs(ratios - eta)
    return {
        "ratios": ratios.tolist(),
        "eta": eta.tolist(),
        "deviation": dev.tolist(),
        "tolerance": tol,
        "flagged": [int(i) for i in np.nonzero(dev > tol)[0]],
        "total": float(ratios.sum()),
    }


def uniform_cover_report(region: SiteSet, shapes: Sequence[SiteSet], eps: float, m: int) -> dict:
    """Build m tilings from shifted scan orders and measure per-site cover frequencies.

    For each shape the frequency with which a site is covered by that shape
    is compared with eta_i; the report lists the largest deviation per shape.
    """
    n_q = len(region)
    n_shapes = len(shapes)
    eta = eta_weights(eps, n_shapes)
    freq = np.zeros((n_shapes, n_q))
    for k in range(m):
        qt = construct_quasi_tiling(region, shapes, eps, scan_offset=(k * n_q) // max(m, 1))
        for i in range(n_shapes):
            idx = region.index_of(qt.tile_sites(i).reshape(-1, region.group.dim))
            freq[i, np.unique(idx[idx >= 0])] += 1
    freq /= m
    return {"max_deviation": np.abs(freq - eta[:, None]).max(axis=1).tolist(), "eta": eta.tolist(), "tilings": m}


def symmetric_tile_check(tile: SiteSet, centers, window: SiteSet) -> dict:
    """Check T = T^-1 (for centers whose inverse lies in the window), disjoint translates, cover of the window."""
    group = tile.group
    t = np.asarray([group.coords_of(c) for c in centers], dtype=np.int64).reshape(-1, group.dim)
    tset = SiteSet(group, t)
    inv = group.inv(t)
    relevant = window.contains(t) & window.contains(inv)
    symmetric = bool(np.all(tset.contains(inv[relevant])))
    sites = group.mul(tile.coords[None, :, :], t[:, None, :]).reshape(-1, group.dim)
    keys = group.encode(sites)
    disjoint = len(np.unique(keys)) == len(keys)
    covers = bool(np.all(np.isin(window.keys, keys)))
    return {"symmetric": symmetric, "disjoint": disjoint, "covers": covers, "ok": symmetric and disjoint and covers}


def quasi_pattern_approximation(fld: Field, coloring: Coloring, qt: QuasiTiling,
                                limit_tables: Sequence[FrequencyTable],
                                empirical_tables: Sequence[FrequencyTable] | None = None) -> dict:
    """Weighted pattern average over the shapes and the four bound terms, reported as a diagnostic.

    value = sum_i eta_i sum_P nu_P F~(P) / |K_i|. The bound terms are
    4 sum_i eta_i b(K_i)/|K_i|, (C_F + 4 D_b) |d^r Q|/|Q| sum_i |K_i| with r the
    largest shape diameter, C_F sum_i eta_i sum_P |emp - nu|, and
    (11 C_F + 32 D_b) eps.
    """
    from .coloring import empirical_frequency_table
    from .ergodic import l1_frequency_gap

    n_shapes = len(qt.shapes)
    eta = eta_weights(qt.eps, n_shapes)
    region = qt.region
    averages = [pattern_average(fld, tab, shape) for tab, shape in zip(limit_tables, qt.shapes)]
    value = weighted_sum([(float(e), a) for e, a in zip(eta, averages)])
    target = fld.normalized(region, coloring)
    lhs = sup_norm(target, value)
    c_f, d_b = fld.bound, fld.boundary.bound
    r = max(1, max(diameter(s) for s in qt.shapes))
    if empirical_tables is None:
        empirical_tables = [empirical_frequency_table(coloring, region, s) for s in qt.shapes]
    terms = [
        4 * math.fsum(float(e) * fld.boundary(s) / len(s) for e, s in zip(eta, qt.shapes)),
        (c_f + 4 * d_b) * boundary_size(region, r) / len(region) * sum(len(s) for s in qt.shapes),
        c_f * math.fsum(float(e) * l1_frequency_gap(emp, lim) for e, emp, lim in zip(eta, empirical_tables, limit_tables)),
        (11 * c_f + 32 * d_b) * qt.eps,
    ]
    return {"value": value, "lhs": lhs, "terms": terms, "rhs": math.fsum(terms), "shell_radius": r,
            "label": "diagnostic: shell radius is the largest shape diameter"}
