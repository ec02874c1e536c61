"""Colorings of a group, patterns, and pattern frequencies.

Colors are real vectors of a fixed width (width 1 for scalar potentials or
open/closed states, width d for edge-percolation bit vectors). A coloring maps
an (n, dim) coordinate array to an (n, width) float array; random colorings do
this through the counter-based hash in ``_rng`` so evaluation is a pure
function of (seed, site).
"""
from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from ._rng import site_uniform
from .errors import UsageError
from .groups import Group, SiteSet
from .spectral import fmt17

MAX_ENUMERATED_PATTERNS = 1 << 20


@dataclass(frozen=True)
class ColorSet:
    """A finite weighted set of colors or a real interval [lo, hi]."""

    atoms: tuple | None = None
    weights: tuple | None = None
    interval: tuple | None = None

    def __post_init__(self):
        if (self.atoms is None) == (self.interval is None):
            raise UsageError("a color set is either finite or an interval")
        if self.interval is not None:
            lo, hi = self.interval
            if not lo < hi:
                raise UsageError("interval color set needs lo < hi")
            return
        if not self.atoms:
            raise UsageError("finite color set must be nonempty")
        widths = {len(a) for a in self.atoms}
        if len(widths) != 1:
            raise UsageError("all colors must have the same width")
        if len(set(self.atoms)) != len(self.atoms):
            raise UsageError("colors must be distinct")
        w = np.asarray(self.weights, dtype=np.float64)
        if len(w) != len(self.atoms) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise UsageError("finite weights must be nonnegative and sum to 1")

    @classmethod
    def finite(cls, values: Sequence, weights: Sequence[float] | None = None) -> "ColorSet":
        atoms = tuple(tuple(float(x) for x in np.atleast_1d(v)) for v in values)
        if weights is None:
            weights = [1.0 / len(atoms)] * len(atoms)
        return cls(atoms=atoms, weights=tuple(float(w) for w in weights))

    @classmethod
    def bernoulli(cls, p: float) -> "ColorSet":
        """Colors 0 and 1 with Prob(1) = p."""
        return cls.finite([0.0, 1.0], [1.0 - p, p])

    @classmethod
    def uniform_interval(cls, lo: float, hi: float) -> "ColorSet":
        return cls(interval=(float(lo), float(hi)))

    @classmethod
    def product(cls, *sets: "ColorSet") -> "ColorSet":
        """Finite product set with product weights (vector colors)."""
        if any(not s.is_finite for s in sets):
            raise UsageError("product color sets must be finite")
        atoms, weights = [], []
        for combo in itertools.product(*[list(zip(s.atoms, s.weights)) for s in sets]):
            atoms.append(tuple(itertools.chain.from_iterable(a for a, _ in combo)))
            weights.append(math.prod(w for _, w in combo))
        return cls(atoms=tuple(atoms), weights=tuple(weights))

    @property
    def is_finite(self) -> bool:
        return self.atoms is not None

    @property
    def width(self) -> int:
        return 1 if self.interval is not None else len(self.atoms[0])

    def sup(self) -> float:
        """Largest value of the first color component."""
        if self.interval is not None:
            return self.interval[1]
        return max(a[0] for a in self.atoms)

    def inf(self) -> float:
        if self.interval is not None:
            return self.interval[0]
        return min(a[0] for a in self.atoms)

    def sample(self, u: np.ndarray) -> np.ndarray:
        """Map uniforms of shape S to colors of shape S + (width,)."""
        if self.interval is not None:
            lo, hi = self.interval
            return (lo + (hi - lo) * u)[..., None]
        cum = np.cumsum(self.weights)
        idx = np.minimum(np.searchsorted(cum, u, side="right"), len(self.atoms) - 1)
        return np.asarray(self.atoms, dtype=np.float64)[idx]

    def weight_table(self) -> dict:
        if not self.is_finite:
            raise UsageError("interval color sets have no point weights")
        return dict(zip(self.atoms, self.weights))

    def to_config(self) -> dict:
        if self.interval is not None:
            return {"kind": "interval", "lo": self.interval[0], "hi": self.interval[1]}
        vals = [a[0] if len(a) == 1 else list(a) for a in self.atoms]
        return {"kind": "finite", "values": vals, "weights": list(self.weights)}

    @classmethod
    def from_config(cls, cfg: Mapping) -> "ColorSet":
        kind = cfg.get("kind")
        if kind == "interval":
            return cls.uniform_interval(cfg["lo"], cfg["hi"])
        if kind == "bernoulli":
            return cls.bernoulli(cfg["p"])
        if kind == "finite":
            return cls.finite(cfg["values"], cfg.get("weights"))
        raise UsageError(f"unknown color set kind {kind!r}")


# colorings


class Coloring:
    """Base class: a map from sites to colors of fixed width."""

    width: int = 1
    # independent at distances greater than this (0 for iid, None if not random)
    independence_range: int | None = None

    def values(self, coords) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, site):
        v = self.values(np.asarray([tuple(site)], dtype=np.int64))[0]
        return float(v[0]) if self.width == 1 else tuple(float(x) for x in v)

    def restrict(self, sites: SiteSet) -> "Pattern":
        return restrict(self, sites)

    def shifted(self, g, group: Group) -> "Coloring":
        return ShiftedColoring(self, g, group)

    def sample_batch(self, seeds: np.ndarray, coords) -> np.ndarray:
        """Colors for several seeds at once, shape (len(seeds), n, width)."""
        return np.stack([self.with_seed(int(s)).values(coords) for s in seeds])

    def with_seed(self, seed: int) -> "Coloring":
        return self


def _as_coords(coords) -> np.ndarray:
    c = np.asarray(coords, dtype=np.int64)
    return c[:, None] if c.ndim == 1 else c


class ConstantColoring(Coloring):
    def __init__(self, value):
        self.value = np.atleast_1d(np.asarray(value, dtype=np.float64))
        self.width = len(self.value)

    def values(self, coords) -> np.ndarray:
        n = len(_as_coords(coords))
        return np.broadcast_to(self.value, (n, self.width)).copy()


class FunctionColoring(Coloring):
    """Deterministic coloring given by a vectorized function of coordinates."""

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray], width: int = 1, name: str = "function"):
        self.fn = fn
        self.width = width
        self.name = name

    def values(self, coords) -> np.ndarray:
        out = np.asarray(self.fn(_as_coords(coords)), dtype=np.float64)
        return out.reshape(len(out), self.width)


def _visible(coords: np.ndarray) -> np.ndarray:
    g = np.gcd.reduce(np.abs(coords), axis=1)
    return ((g == 1) | np.all(coords == 0, axis=1)).astype(np.float64)


def visible_coloring(d: int) -> FunctionColoring:
    """1 at the origin and at lattice points whose coordinates have gcd 1, else 0."""
    if d < 1:
        raise UsageError("dimension must be at least 1")
    return FunctionColoring(_visible, 1, name=f"visible-points-d{d}")


class IIDColoring(Coloring):
    """Independent colors per site, one hash stream per component set."""

    def __init__(self, colors: ColorSet | Sequence[ColorSet], seed: int, stream: int = 0):
        self.components = (colors,) if isinstance(colors, ColorSet) else tuple(colors)
        self.seed = int(seed)
        self.stream = int(stream)
        self.width = sum(c.width for c in self.components)
        self.independence_range = 0

    @property
    def colors(self) -> ColorSet:
        if len(self.components) == 1:
            return self.components[0]
        return ColorSet.product(*self.components)

    def with_seed(self, seed: int) -> "IIDColoring":
        return IIDColoring(self.components, seed, self.stream)

    def _sample(self, seed, coords) -> np.ndarray:
        parts = []
        for k, comp in enumerate(self.components):
            u = site_uniform(seed, self.stream + 7919 * k, coords)
            parts.append(comp.sample(u))
        return np.concatenate(parts, axis=-1)

    def values(self, coords) -> np.ndarray:
        return self._sample(self.seed, _as_coords(coords))

    def sample_batch(self, seeds, coords) -> np.ndarray:
        seeds = np.asarray(seeds, dtype=np.uint64)[:, None]
        return self._sample(seeds, _as_coords(coords))


class BlockColoring(Coloring):
    """Random field on Z^d that is independent at distances greater than r.

    Z^d is cut into cubes of side s = floor(r/d) + 1 (randomly offset), so
    sites more than r apart in the 1-norm never share a cube. Each site takes
    its cube's shared uniform with probability 1/2 and its own uniform
    otherwise; the marginal law is exactly ``colors`` and sites within a
    cube are correlated.
    """

    def __init__(self, colors: ColorSet, r: int, d: int, seed: int, stream: int = 0):
        if r < 0:
            raise UsageError("range must be nonnegative")
        self.colors = colors
        self.r = int(r)
        self.d = int(d)
        self.seed = int(seed)
        self.stream = int(stream)
        self.side = self.r // self.d + 1
        self.width = colors.width
        self.independence_range = self.r

    def with_seed(self, seed: int) -> "BlockColoring":
        return BlockColoring(self.colors, self.r, self.d, seed, self.stream)

    def block_of(self, coords) -> np.ndarray:
        c = _as_coords(coords)
        offset = np.floor(site_uniform(self.seed, self.stream + 1, np.zeros((self.d, 1))) * self.side)
        return np.floor_divide(c + offset.astype(np.int64), self.side)

    def values(self, coords) -> np.ndarray:
        c = _as_coords(coords)
        u_block = site_uniform(self.seed, self.stream + 2, self.block_of(c))
        u_site = site_uniform(self.seed, self.stream + 3, c)
        choose = site_uniform(self.seed, self.stream + 4, c) < 0.5
        return self.colors.sample(np.where(choose, u_block, u_site))


class ExplicitColoring(Coloring):
    """Colors given on a finite site set, a default color elsewhere."""

    def __init__(self, sites: SiteSet, values, default=0.0):
        vals = np.asarray(values, dtype=np.float64)
        if vals.ndim == 1:
            vals = vals[:, None]
        if len(vals) != len(sites):
            raise UsageError("need one color per site")
        self.sites = sites
        self._vals = vals
        self.width = vals.shape[1]
        self.default = np.broadcast_to(np.asarray(default, dtype=np.float64), (self.width,))

    def values(self, coords) -> np.ndarray:
        idx = self.sites.index_of(_as_coords(coords))
        out = np.broadcast_to(self.default, (len(idx), self.width)).copy()
        hit = idx >= 0
        out[hit] = self._vals[idx[hit]]
        return out


class OverrideColoring(Coloring):
    """A base coloring with colors replaced on a finite set of sites."""

    def __init__(self, base: Coloring, sites: SiteSet, values):
        self.base = base
        self.override = ExplicitColoring(sites, values)
        self.width = base.width
        self.independence_range = base.independence_range

    def values(self, coords) -> np.ndarray:
        c = _as_coords(coords)
        out = self.base.values(c)
        idx = self.override.sites.index_of(c)
        hit = idx >= 0
        out[hit] = self.override._vals[idx[hit]]
        return out


class ShiftedColoring(Coloring):
    """The shifted coloring (tau_g omega)_v = omega_{v g^-1}."""

    def __init__(self, base: Coloring, g, group: Group):
        self.base = base
        self.group = group
        self.g_inv = group.inv(np.asarray(group.coords_of(g)))
        self.width = base.width
        self.independence_range = base.independence_range

    def values(self, coords) -> np.ndarray:
        c = _as_coords(coords)
        return self.base.values(self.group.mul(c, self.g_inv[None, :]))


# patterns


class Pattern:
    """Colors on a finite domain; ``values[i]`` belongs to the i-th domain site."""

    __slots__ = ("domain", "values")

    def __init__(self, domain: SiteSet, values):
        vals = np.asarray(values, dtype=np.float64)
        if vals.ndim == 1:
            vals = vals[:, None]
        if len(vals) != len(domain):
            raise UsageError("pattern values must match the domain size")
        vals.flags.writeable = False
        self.domain = domain
        self.values = vals

    @classmethod
    def from_mapping(cls, group: Group, mapping: Mapping) -> "Pattern":
        sites = SiteSet(group, list(mapping.keys()))
        vals = [np.atleast_1d(mapping[tuple(s)]) for s in sites]
        return cls(sites, np.asarray(vals, dtype=np.float64))

    @property
    def group(self) -> Group:
        return self.domain.group

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def value_at(self, site):
        i = int(self.domain.index_of([self.group.coords_of(site)])[0])
        if i < 0:
            raise UsageError(f"{site} is not in the pattern domain")
        v = self.values[i]
        return float(v[0]) if self.width == 1 else tuple(v.tolist())

    def translate(self, g) -> "Pattern":
        return shift_pattern(self, g)

    def canonical(self) -> "Pattern":
        """The translate whose lexicographically minimal site is the identity."""
        if len(self.domain) == 0:
            return self
        m = np.asarray(self.domain.min_element())
        return shift_pattern(self, self.group.inv(m))

    def pattern_id(self) -> str:
        c = self.canonical()
        return pattern_id(c.domain.coords, c.values)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Pattern)
            and self.domain == other.domain
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self) -> int:
        return hash((self.domain, self.values.tobytes()))

    def __repr__(self) -> str:
        return f"Pattern({self.pattern_id()})"


def pattern_id(coords: np.ndarray, values: np.ndarray) -> str:
    """Serialize a pattern as 'x,y=v;...' in domain order (vector colors joined by '/')."""
    parts = []
    for c, v in zip(np.asarray(coords).tolist(), np.asarray(values).reshape(len(coords), -1)):
        parts.append(",".join(str(x) for x in c) + "=" + "/".join(fmt17(x) for x in v))
    return ";".join(parts)


def restrict(coloring: Coloring, sites: SiteSet) -> Pattern:
    """The pattern omega|_Lambda."""
    return Pattern(sites, coloring.values(sites.coords))


def shift_pattern(pattern: Pattern, g) -> Pattern:
    """Translate a pattern: domain becomes {v g}, and the new value at v g is P(v)."""
    group = pattern.group
    gc = np.asarray(group.coords_of(g), dtype=np.int64)
    moved = group.mul(pattern.domain.coords, gc[None, :])
    domain = SiteSet(group, moved)
    vals = np.empty_like(pattern.values)
    vals[domain.index_of(moved)] = pattern.values
    return Pattern(domain, vals)


def placements(window: SiteSet, region: SiteSet) -> tuple[np.ndarray, np.ndarray]:
    """All g with window * g inside the region, in lexicographic order of g.

    Candidates are g = m^-1 q with m the minimal window site and q in the
    region. Returns the (p, |window|) positions of the translated window
    sites in region order, and the (p, dim) coordinates of g.
    """
    group = window.group
    w = window.coords
    if len(w) == 0:
        raise UsageError("window must be nonempty")
    m_inv = group.inv(w[0])
    cand = group.mul(m_inv[None, :], region.coords)
    out_idx, out_g = [], []
    chunk = max(1, 4_000_000 // len(w))
    for start in range(0, len(cand), chunk):
        g = cand[start:start + chunk]
        sites = group.mul(w[None, :, :], g[:, None, :])
        idx = region.index_of(sites.reshape(-1, group.dim)).reshape(len(g), len(w))
        ok = np.all(idx >= 0, axis=1)
        out_idx.append(idx[ok])
        out_g.append(g[ok])
    return np.concatenate(out_idx), np.concatenate(out_g)


def pattern_count(pattern: Pattern, host: Pattern) -> int:
    """Number of translates of ``pattern`` that occur inside ``host``."""
    if pattern.group != host.group:
        raise UsageError("patterns belong to different groups")
    if pattern.width != host.width:
        raise UsageError("patterns use colors of different widths")
    if len(pattern.domain) == 0:
        return 0
    idx, _ = placements(pattern.domain, host.domain)
    if len(idx) == 0:
        return 0
    windows = host.values[idx]
    return int(np.all(windows == pattern.values[None, :, :], axis=(1, 2)).sum())


def empirical_frequency(pattern: Pattern, coloring: Coloring, region: SiteSet) -> float:
    """Occurrences of the pattern class in omega|_Q divided by |Q|."""
    if len(region) == 0:
        raise UsageError("region must be nonempty")
    return pattern_count(pattern, restrict(coloring, region)) / len(region)


def exact_frequency(pattern: Pattern, colors: ColorSet) -> float:
    """Probability of the pattern under the iid product measure."""
    if not colors.is_finite:
        raise UsageError("exact frequencies need a finite color set")
    table = colors.weight_table()
    p = 1.0
    for row in pattern.values:
        p *= table.get(tuple(float(x) for x in row), 0.0)
    return p


class FrequencyTable:
    """Pattern classes on a common window with counts and frequencies.

    ``patterns[i]`` holds the colors on the (canonical) window for the i-th
    class, ``frequencies[i]`` its frequency. Rows are sorted by color values.
    """

    def __init__(self, window: SiteSet, patterns: np.ndarray, frequencies: np.ndarray,
                 counts: np.ndarray | None = None, total: int | None = None):
        self.window = window
        self.patterns = np.asarray(patterns, dtype=np.float64)
        self.frequencies = np.asarray(frequencies, dtype=np.float64)
        self.counts = None if counts is None else np.asarray(counts, dtype=np.int64)
        self.total = total

    def __len__(self) -> int:
        return len(self.frequencies)

    def ids(self) -> list[str]:
        return [pattern_id(self.window.coords, p) for p in self.patterns]

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.ids(), self.frequencies.tolist()))

    def pattern(self, i: int) -> Pattern:
        return Pattern(self.window, self.patterns[i])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["pattern_id", "count[occurrences]", "frequency[per site]"])
        counts = self.counts if self.counts is not None else [""] * len(self)
        for pid, c, f in zip(self.ids(), counts, self.frequencies):
            w.writerow([pid, c, fmt17(f)])
        return buf.getvalue()


class EmpiricalMeasure(FrequencyTable):
    """Counts of window patterns over a grid of disjoint translates; masses sum to 1."""

    def mass(self, pattern: Pattern) -> float:
        canon = pattern.canonical()
        if canon.domain != self.window:
            raise UsageError("pattern domain does not match the measure's window")
        hit = np.all(self.patterns == canon.values[None, :, :], axis=(1, 2))
        return float(self.frequencies[hit].sum())


def _canonical_window(window: SiteSet) -> SiteSet:
    m = np.asarray(window.min_element())
    return window.translate(window.group.inv(m))


def _tabulate(windows: np.ndarray):
    p, k, width = windows.shape
    flat = windows.reshape(p, k * width)
    uniq, counts = np.unique(flat, axis=0, return_counts=True)
    return uniq.reshape(-1, k, width), counts


def empirical_frequency_table(coloring: Coloring, region: SiteSet, window: SiteSet) -> FrequencyTable:
    """Counts of every window pattern occurring in omega|_Q, frequencies count/|Q|."""
    if len(region) == 0:
        raise UsageError("region must be nonempty")
    win = _canonical_window(window)
    idx, _ = placements(win, region)
    vals = coloring.values(region.coords)
    pats, counts = _tabulate(vals[idx])
    return FrequencyTable(win, pats, counts / len(region), counts, len(region))


def exact_frequency_table(colors: ColorSet, window: SiteSet,
                          max_patterns: int = MAX_ENUMERATED_PATTERNS) -> FrequencyTable:
    """All patterns on the window with their iid product probabilities."""
    if not colors.is_finite:
        raise UsageError("exact frequencies need a finite color set")
    win = _canonical_window(window)
    m, k = len(colors.atoms), len(win)
    if m ** k > max_patterns:
        raise UsageError(f"{m}^{k} patterns exceed the enumeration limit {max_patterns}")
    atoms = np.asarray(colors.atoms, dtype=np.float64)
    weights = np.asarray(colors.weights, dtype=np.float64)
    choice = np.indices((m,) * k).reshape(k, -1).T
    probs = np.prod(weights[choice], axis=1)
    pats = atoms[choice]
    keep = probs > 0
    order = np.lexsort(pats[keep].reshape(int(keep.sum()), -1).T[::-1])
    return FrequencyTable(win, pats[keep][order], probs[keep][order])


def grid_empirical_measure(coloring: Coloring, region: SiteSet, window: SiteSet, grid) -> EmpiricalMeasure:
    """Empirical measure of the patterns (tau_t omega) on the window translates window * t."""
    group = region.group
    grid = np.asarray([group.coords_of(t) for t in grid], dtype=np.int64).reshape(-1, group.dim)
    if len(grid) == 0:
        raise UsageError("grid must be nonempty")
    w = window.coords
    sites = group.mul(w[None, :, :], grid[:, None, :])
    idx = region.index_of(sites.reshape(-1, group.dim)).reshape(len(grid), len(w))
    if np.any(idx < 0):
        raise UsageError("a window translate leaves the region")
    if len(np.unique(idx)) != idx.size:
        raise UsageError("window translates overlap")
    vals = coloring.values(region.coords)
    pats, counts = _tabulate(vals[idx])
    win = _canonical_window(window)
    return EmpiricalMeasure(win, pats, counts / len(grid), counts, len(grid))


def total_variation(first, second) -> dict:
    """Total variation (half the l1 sum) and the l1 sum itself.

    Accepts FrequencyTables (matched by pattern id), dicts, or aligned sequences.
    """
    if isinstance(first, FrequencyTable):
        first = first.as_dict()
    if isinstance(second, FrequencyTable):
        second = second.as_dict()
    if isinstance(first, Mapping) and isinstance(second, Mapping):
        keys = set(first) | set(second)
        l1 = math.fsum(abs(first.get(k, 0.0) - second.get(k, 0.0)) for k in keys)
    else:
        a = np.asarray(first, dtype=np.float64)
        b = np.asarray(second, dtype=np.float64)
        if a.shape != b.shape:
            raise UsageError("frequency vectors must be aligned")
        l1 = math.fsum(np.abs(a - b).tolist())
    return {"tv": 0.5 * l1, "l1": l1}
