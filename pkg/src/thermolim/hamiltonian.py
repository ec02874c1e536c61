"""Finite-volume Hamiltonians and percolation clusters.

Two Laplacian conventions appear and are kept apart by name:

* ``anderson_matrix`` clips the full-lattice operator to the box, so every
  diagonal entry keeps the full Cayley degree |S| (2d in Z^d), also at the
  box boundary;
* ``build_percolation_matrix`` uses the Laplacian of a subgraph, whose
  diagonal is the degree inside the subgraph.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy import sparse

from ._kernels import origin_cluster_sizes
from ._rng import mix_seed
from .coloring import ColorSet, Coloring, IIDColoring, visible_coloring
from .errors import UsageError
from .groups import Group, SiteSet, group_from_config, word_ball
from .spectral import fmt17

MODEL_KINDS = ("anderson", "site-percolation", "edge-percolation", "anderson-percolation", "visible-points")


class SymmetricMatrix:
    """Sparse symmetric matrix stored as its upper triangle (row <= col).

    Row/column i corresponds to the i-th site of ``sites`` when given.
    Duplicate entries are summed at construction.
    """

    def __init__(self, n: int, rows, cols, vals, sites: SiteSet | None = None):
        r = np.asarray(rows, dtype=np.int64)
        c = np.asarray(cols, dtype=np.int64)
        v = np.asarray(vals, dtype=np.float64)
        if not np.all(np.isfinite(v)):
            raise UsageError("matrix entries must be finite")
        if len(r) and (min(r.min(), c.min()) < 0 or max(r.max(), c.max()) >= n):
            raise UsageError("matrix index out of range")
        lo, hi = np.minimum(r, c), np.maximum(r, c)
        key = lo * n + hi
        uniq, inv = np.unique(key, return_inverse=True)
        summed = np.bincount(inv, weights=v, minlength=len(uniq))
        keep = (summed != 0) | (uniq // n == uniq % n)
        uniq, summed = uniq[keep], summed[keep]
        self.n = int(n)
        self.rows = uniq // n
        self.cols = uniq % n
        self.vals = summed
        self.sites = sites

    @property
    def bandwidth(self) -> int:
        return int((self.cols - self.rows).max(initial=0))

    def diagonal(self) -> np.ndarray:
        d = np.zeros(self.n)
        on = self.rows == self.cols
        d[self.rows[on]] = self.vals[on]
        return d

    def band_rows(self) -> np.ndarray:
        """Upper band in row layout: out[i, k] = A[i, i + k]."""
        out = np.zeros((self.n, self.bandwidth + 1))
        out[self.rows, self.cols - self.rows] = self.vals
        return out

    def to_dense(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        a[self.rows, self.cols] = self.vals
        a[self.cols, self.rows] = self.vals
        return a

    def to_sparse(self) -> sparse.csr_matrix:
        off = self.rows != self.cols
        r = np.concatenate([self.rows, self.cols[off]])
        c = np.concatenate([self.cols, self.rows[off]])
        v = np.concatenate([self.vals, self.vals[off]])
        return sparse.csr_matrix((v, (r, c)), shape=(self.n, self.n))

    def max_row_sum(self) -> float:
        off = self.rows != self.cols
        sums = np.bincount(self.rows, weights=np.abs(self.vals), minlength=self.n)
        sums += np.bincount(self.cols[off], weights=np.abs(self.vals[off]), minlength=self.n)
        return float(sums.max(initial=0.0))

    def to_coo_text(self) -> str:
        """One 'row col value' line per stored upper-triangle entry."""
        lines = [f"{i} {j} {fmt17(v)}" for i, j, v in zip(self.rows.tolist(), self.cols.tolist(), self.vals)]
        return "\n".join(lines) + ("\n" if lines else "")

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SymmetricMatrix)
            and self.n == other.n
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.cols, other.cols)
            and np.array_equal(self.vals, other.vals)
        )

    def __repr__(self) -> str:
        return f"SymmetricMatrix(n={self.n}, nnz_upper={len(self.vals)}, bandwidth={self.bandwidth})"


def neighbor_pairs(sites: SiteSet) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Index pairs (i, j, generator) with site_j = s * site_i for a positive generator s."""
    group = sites.group
    c = sites.coords
    ii, jj, kk = [], [], []
    for k, s in enumerate(group.positive_generators):
        idx = sites.index_of(group.mul(s[None, :], c))
        hit = np.nonzero(idx >= 0)[0]
        ii.append(hit)
        jj.append(idx[hit])
        kk.append(np.full(len(hit), k))
    return np.concatenate(ii), np.concatenate(jj), np.concatenate(kk)


def anderson_matrix(sites: SiteSet, potential) -> SymmetricMatrix:
    """|S| + V on the diagonal (full degree kept at the box boundary), -1 between neighbours."""
    n = len(sites)
    if n == 0:
        raise UsageError("site set must be nonempty")
    pot = np.asarray(potential, dtype=np.float64).reshape(n)
    i, j, _ = neighbor_pairs(sites)
    diag = np.arange(n)
    return SymmetricMatrix(
        n,
        np.concatenate([diag, i]),
        np.concatenate([diag, j]),
        np.concatenate([sites.group.degree + pot, -np.ones(len(i))]),
        sites,
    )


def build_anderson_matrix(coloring: Coloring, sites: SiteSet) -> SymmetricMatrix:
    vals = coloring.values(sites.coords)
    return anderson_matrix(sites, vals[:, 0])


@dataclass(frozen=True)
class PercolationGraph:
    """Open vertices and open edges inside a region; edges are region index pairs."""

    region: SiteSet
    vertex_mask: np.ndarray
    edges: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))

    @property
    def vertices(self) -> SiteSet:
        return SiteSet.from_keys(self.region.group, self.region.keys[self.vertex_mask], assume_unique=True)

    @property
    def n_vertices(self) -> int:
        return int(self.vertex_mask.sum())

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=len(self.region))


def site_percolation_graph(coloring: Coloring, sites: SiteSet, closed_value: float | None = None,
                           component: int = -1) -> PercolationGraph:
    """Open sites (color 1) and the lattice edges between open sites.

    With ``closed_value`` given, any color different from it counts as open
    (the convention where closed sites carry the energy alpha).
    """
    state = coloring.values(sites.coords)[:, component]
    if closed_value is None:
        if not np.all((state == 0) | (state == 1)):
            raise UsageError("site percolation needs colors in {0, 1}")
        is_open = state == 1
    else:
        is_open = state != closed_value
    i, j, _ = neighbor_pairs(sites)
    keep = is_open[i] & is_open[j]
    return PercolationGraph(sites, is_open, np.stack([i[keep], j[keep]], axis=1))


def edge_percolation_graph(coloring: Coloring, sites: SiteSet, offset: int = 0) -> PercolationGraph:
    """Edges {v, s_k v} whose bit k at v is 1; vertices are their endpoints."""
    group = sites.group
    d = len(group.positive_generators)
    vals = coloring.values(sites.coords)
    if vals.shape[1] != offset + d:
        raise UsageError(f"edge percolation needs {d} bits per site, colors have width {vals.shape[1] - offset}")
    bits = vals[:, offset:offset + d]
    if not np.all((bits == 0) | (bits == 1)):
        raise UsageError("edge bits must be 0 or 1")
    i, j, k = neighbor_pairs(sites)
    keep = bits[i, k] == 1
    edges = np.stack([i[keep], j[keep]], axis=1)
    mask = np.zeros(len(sites), dtype=bool)
    mask[edges.ravel()] = True
    return PercolationGraph(sites, mask, edges)


def build_percolation_matrix(graph: PercolationGraph, alpha: float, potential=None) -> SymmetricMatrix:
    """Subgraph Laplacian (+ potential) on open vertices, alpha on the rest of the region."""
    sites = graph.region
    n = len(sites)
    if potential is None:
        pot = np.zeros(n)
    elif isinstance(potential, Coloring):
        pot = potential.values(sites.coords)[:, 0]
    else:
        pot = np.asarray(potential, dtype=np.float64).reshape(n)
    diag = np.where(graph.vertex_mask, graph.degrees() + pot, alpha)
    e = graph.edges
    idx = np.arange(n)
    return SymmetricMatrix(
        n,
        np.concatenate([idx, e[:, 0]]),
        np.concatenate([idx, e[:, 1]]),
        np.concatenate([diag, -np.ones(len(e))]),
        sites,
    )


class UnionFind:
    """Disjoint sets over 0..n-1 with union by size and path halving."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> int:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return ra


def cluster_labels(graph: PercolationGraph) -> np.ndarray:
    """Component label per region site (-1 off the vertex set), labels ordered by first site."""
    n = len(graph.region)
    uf = UnionFind(n)
    for a, b in graph.edges.tolist():
        uf.union(a, b)
    roots = np.array([uf.find(i) for i in range(n)], dtype=np.int64)
    labels = np.full(n, -1, dtype=np.int64)
    verts = np.nonzero(graph.vertex_mask)[0]
    _, first, inv = np.unique(roots[verts], return_index=True, return_inverse=True)
    # relabel by the position of each component's first vertex
    rank = np.argsort(np.argsort(first))
    labels[verts] = rank[inv]
    return labels


def cluster_decomposition(graph: PercolationGraph) -> list[SiteSet]:
    """Connected components of the percolation graph, ordered by their minimal site."""
    labels = cluster_labels(graph)
    keys = graph.region.keys
    n_clusters = int(labels.max(initial=-1)) + 1
    order = np.argsort(labels, kind="stable")
    bounds = np.searchsorted(labels[order], np.arange(n_clusters + 1))
    group = graph.region.group
    return [
        SiteSet.from_keys(group, keys[order[bounds[c]:bounds[c + 1]]], assume_unique=True)
        for c in range(n_clusters)
    ]


@dataclass(frozen=True)
class ModelSpec:
    """A random Hamiltonian family.

    Colors per kind: anderson -> potential; site-percolation -> open bit;
    edge-percolation -> one bit per positive generator; anderson-percolation
    -> potential followed by the site bit (or the edge bits when
    ``percolation == "edge"``); visible-points -> the deterministic
    visibility indicator used as open/closed state.
    """

    kind: str
    group: Group
    potential: ColorSet | None = None
    p_site: float | None = None
    p_edge: float | None = None
    alpha: float | None = None
    percolation: str = "site"

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise UsageError(f"unknown model kind {self.kind!r}")
        if self.kind in ("anderson", "anderson-percolation") and self.potential is None:
            raise UsageError(f"{self.kind} needs a potential color set")
        if self.kind == "site-percolation" or (self.kind == "anderson-percolation" and self.percolation == "site"):
            if self.p_site is None or not 0 <= self.p_site <= 1:
                raise UsageError("site percolation needs p_site in [0, 1]")
        if self.kind == "edge-percolation" or (self.kind == "anderson-percolation" and self.percolation == "edge"):
            if self.p_edge is None or not 0 <= self.p_edge <= 1:
                raise UsageError("edge percolation needs p_edge in [0, 1]")
        if self.kind == "visible-points" and self.group.kind != "zd":
            raise UsageError("visible points live on Z^d")
        if self.has_percolation:
            sup = self.potential.sup() if self.potential is not None else 0.0
            floor = self.group.degree + max(sup, 0.0)
            if self.alpha is None:
                object.__setattr__(self, "alpha", floor + 1.0)
            elif not self.alpha > floor:
                raise UsageError(f"alpha must exceed {floor}")

    @property
    def has_percolation(self) -> bool:
        return self.kind != "anderson"

    @property
    def edge_mode(self) -> bool:
        return self.kind == "edge-percolation" or (self.kind == "anderson-percolation" and self.percolation == "edge")

    def color_components(self) -> list[ColorSet]:
        d = len(self.group.positive_generators)
        if self.kind == "anderson":
            return [self.potential]
        if self.kind == "site-percolation":
            return [ColorSet.bernoulli(self.p_site)]
        if self.kind == "edge-percolation":
            return [ColorSet.bernoulli(self.p_edge)] * d
        if self.kind == "anderson-percolation":
            if self.percolation == "site":
                return [self.potential, ColorSet.bernoulli(self.p_site)]
            return [self.potential] + [ColorSet.bernoulli(self.p_edge)] * d
        return []

    def colors(self) -> ColorSet:
        """The single-site color set (finite products become vector colors)."""
        comps = self.color_components()
        if not comps:
            raise UsageError("visible points are deterministic")
        if len(comps) == 1:
            return comps[0]
        return ColorSet.product(*comps)

    def coloring(self, seed: int) -> Coloring:
        if self.kind == "visible-points":
            return visible_coloring(self.group.dim)
        comps = self.color_components()
        if len(comps) > 1 and all(c.is_finite for c in comps):
            return IIDColoring(ColorSet.product(*comps), seed)
        return IIDColoring(comps, seed)

    def graph(self, coloring: Coloring, sites: SiteSet) -> PercolationGraph:
        if self.edge_mode:
            return edge_percolation_graph(coloring, sites, offset=1 if self.kind == "anderson-percolation" else 0)
        return site_percolation_graph(coloring, sites, component=-1)

    def matrix_from_colors(self, sites: SiteSet, colors: np.ndarray) -> SymmetricMatrix:
        """Hamiltonian on ``sites`` given the (n, width) colors of those sites."""
        from .coloring import ExplicitColoring

        if self.kind == "anderson":
            return anderson_matrix(sites, colors[:, 0])
        explicit = ExplicitColoring(sites, colors)
        g = self.graph(explicit, sites)
        pot = colors[:, 0] if self.kind == "anderson-percolation" else None
        return build_percolation_matrix(g, self.alpha, pot)

    def matrix(self, coloring: Coloring, sites: SiteSet) -> SymmetricMatrix:
        return self.matrix_from_colors(sites, coloring.values(sites.coords))

    def spectral_scale(self) -> float:
        """Upper bound on the spectrum, used to size numerical tolerances."""
        sup = abs(self.potential.sup()) if self.potential is not None else 0.0
        top = 2 * self.group.degree + sup
        return max(top, self.alpha or 0.0, 1.0)

    def to_config(self) -> dict:
        cfg = {"kind": self.kind, "group": self.group.to_config()}
        if self.potential is not None:
            cfg["potential"] = self.potential.to_config()
        for name in ("p_site", "p_edge", "alpha"):
            if getattr(self, name) is not None:
                cfg[name] = getattr(self, name)
        if self.kind == "anderson-percolation":
            cfg["percolation"] = self.percolation
        return cfg

    @classmethod
    def from_config(cls, cfg: Mapping, group: Group | None = None) -> "ModelSpec":
        if group is None:
            group = group_from_config(cfg["group"])
        pot = ColorSet.from_config(cfg["potential"]) if "potential" in cfg else None
        return cls(
            cfg["kind"], group, pot, cfg.get("p_site"), cfg.get("p_edge"), cfg.get("alpha"),
            cfg.get("percolation", "site"),
        )


@dataclass(frozen=True)
class ClusterEstimate:
    estimate: float
    low: float
    high: float
    trials: int

    def contains(self, value: float) -> bool:
        return self.low <= value <= self.high


def cluster_size_distribution(model: ModelSpec, s_max: int, trials: int, seed: int) -> np.ndarray:
    """Monte Carlo frequencies of |cluster of the identity| = s for s = 0..s_max+1.

    Entry s_max + 1 collects all sizes above s_max. Trial t uses the coloring
    seeded by mix(seed, t), sampled on the word ball of radius s_max + 1,
    which contains every site whose state decides sizes up to s_max + 1.
    """
    if trials < 100:
        raise UsageError("use at least 100 trials")
    if not model.has_percolation or model.kind == "visible-points":
        raise UsageError("cluster statistics need a random percolation model")
    group = model.group
    window = word_ball(group, s_max + 1)
    coords = window.coords
    nbr = np.stack([window.index_of(group.mul(s[None, :], coords)) for s in group.generators], axis=1)
    origin = int(window.index_of([group.identity])[0])
    seeds = np.array([mix_seed(seed, t) for t in range(trials)], dtype=np.uint64)
    colors = model.coloring(0).sample_batch(seeds, coords)
    d = len(group.positive_generators)
    deg = group.degree
    if model.edge_mode:
        bits = colors[:, :, -d:] == 1
        site_open = np.ones(colors.shape[:2], dtype=bool)
        edge_open = np.zeros((trials, len(coords), deg), dtype=bool)
        edge_open[:, :, :d] = bits
        # the edge to s_k^-1 u is open iff bit k of that neighbour is set
        for k in range(d):
            back = nbr[:, d + k]
            inside = back >= 0
            edge_open[:, inside, d + k] = bits[:, back[inside], k]
        has_edge = edge_open[:, origin, :].any(axis=1)
    else:
        site_open = colors[:, :, -1] == 1
        edge_open = np.ones((trials, len(coords), deg), dtype=bool)
        has_edge = np.ones(trials, dtype=bool)
    sizes, escaped = origin_cluster_sizes(site_open, edge_open, nbr, origin, s_max)
    if escaped.any():
        raise RuntimeError("cluster search left the sampling window")
    sizes = np.where(has_edge, sizes, 0)
    return np.bincount(sizes, minlength=s_max + 2)[: s_max + 2] / trials


def cluster_size_at_origin_probability(model: ModelSpec, s: int, trials: int, seed: int) -> ClusterEstimate:
    """Estimate Prob(cluster of the identity has exactly s sites) with a 95% normal interval."""
    p = float(cluster_size_distribution(model, s, trials, seed)[s])
    half = 1.959963984540054 * np.sqrt(p * (1 - p) / trials)
    return ClusterEstimate(p, float(max(0.0, p - half)), float(min(1.0, p + half)), trials)
