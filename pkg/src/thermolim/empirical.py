"""Uniform deviation statistics for empirical measures."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from ._kernels import orthant_sup_2d
from ._rng import mix_seed
from .errors import ResourceError, UsageError


class Marginal:
    """A distribution on R given by its cdf, its left limits and a sampler."""

    def __init__(self, cdf: Callable, sampler: Callable, left: Callable | None = None, name: str = "custom"):
        self._cdf = cdf
        self._left = left if left is not None else cdf
        self._sampler = sampler
        self.name = name

    def cdf(self, x) -> np.ndarray:
        return np.asarray(self._cdf(np.asarray(x, dtype=np.float64)), dtype=np.float64)

    def cdf_left(self, x) -> np.ndarray:
        """P(X < x)."""
        return np.asarray(self._left(np.asarray(x, dtype=np.float64)), dtype=np.float64)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.asarray(self._sampler(rng, n), dtype=np.float64)

    @classmethod
    def normal(cls) -> "Marginal":
        return cls(stats.norm.cdf, lambda rng, n: rng.standard_normal(n), name="normal(0,1)")

    @classmethod
    def uniform(cls, a: float = 0.0, b: float = 1.0) -> "Marginal":
        if not b > a:
            raise UsageError("need a < b")
        dist = stats.uniform(loc=a, scale=b - a)
        return cls(dist.cdf, lambda rng, n: rng.uniform(a, b, n), name=f"uniform({a:g},{b:g})")

    @classmethod
    def discrete(cls, atoms: Sequence[float], weights: Sequence[float] | None = None) -> "Marginal":
        atoms = np.asarray(atoms, dtype=np.float64)
        order = np.argsort(atoms)
        atoms = atoms[order]
        w = np.full(len(atoms), 1 / len(atoms)) if weights is None else np.asarray(weights, dtype=np.float64)[order]
        if len(np.unique(atoms)) != len(atoms) or np.any(w < 0) or not np.isclose(w.sum(), 1.0):
            raise UsageError("atoms must be distinct with nonnegative weights summing to 1")
        cum = np.concatenate([[0.0], np.cumsum(w)])
        cum[-1] = 1.0
        return cls(
            lambda x: cum[np.searchsorted(atoms, x, side="right")],
            lambda rng, n: rng.choice(atoms, size=n, p=w),
            left=lambda x: cum[np.searchsorted(atoms, x, side="left")],
            name="discrete",
        )


class ProductReference:
    """Independent coordinates with the given marginals."""

    is_product = True

    def __init__(self, marginals: Sequence[Marginal]):
        if not marginals:
            raise UsageError("need at least one marginal")
        self.marginals = list(marginals)
        self.k = len(self.marginals)

    @property
    def name(self) -> str:
        return " x ".join(m.name for m in self.marginals)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.stack([m.sample(rng, n) for m in self.marginals], axis=1)

    def cdf(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return np.prod([m.cdf(pts[:, c]) for c, m in enumerate(self.marginals)], axis=0)

    def strip_mass(self, a, b, y) -> np.ndarray:
        """P(a < X_1 <= b, X_2 <= y) for k = 2."""
        m1, m2 = self.marginals
        return np.maximum(m1.cdf(b) - m1.cdf(a), 0.0) * m2.cdf(y)


class ComonotoneReference:
    """Law of (X, -X) for a continuous marginal X."""

    is_product = False
    k = 2

    def __init__(self, marginal: Marginal):
        self.marginal = marginal

    @property
    def name(self) -> str:
        return f"({self.marginal.name}, -same)"

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        x = self.marginal.sample(rng, n)
        return np.stack([x, -x], axis=1)

    def cdf(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return self.strip_mass(np.full(len(pts), -np.inf), pts[:, 0], pts[:, 1])

    def strip_mass(self, a, b, y) -> np.ndarray:
        # a < X <= b and X >= -y
        lo = np.maximum(np.asarray(a, dtype=np.float64), -np.asarray(y, dtype=np.float64))
        f = self.marginal.cdf
        return np.maximum(f(b) - f(lo), 0.0)


@dataclass(frozen=True)
class Sample:
    values: np.ndarray
    seed: int | None = None
    descriptor: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[1] < 1:
            raise UsageError("sample values must be an (n, k) array")
        if not np.all(np.isfinite(v)):
            raise UsageError("sample entries must be finite")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def k(self) -> int:
        return self.values.shape[1]

    @classmethod
    def draw(cls, reference, n: int, seed: int) -> "Sample":
        if isinstance(reference, Marginal):
            reference = ProductReference([reference])
        rng = np.random.default_rng(seed)
        return cls(reference.sample(rng, n), seed, reference.name)


def _values_1d(sample) -> np.ndarray:
    if isinstance(sample, Sample):
        if sample.k != 1:
            raise UsageError("expected a one-dimensional sample")
        x = sample.values[:, 0]
    else:
        x = np.asarray(sample, dtype=np.float64).ravel()
    if len(x) == 0:
        raise UsageError("empty sample")
    return x


def _as_marginal(cdf) -> Marginal:
    if isinstance(cdf, Marginal):
        return cdf
    if isinstance(cdf, ProductReference) and cdf.k == 1:
        return cdf.marginals[0]
    # a bare callable is treated as continuous
    return Marginal(cdf, lambda rng, n: None)


def ks_statistic(sample, cdf) -> float:
    """sup_E |F_n(E) - F(E)|, exact.

    At each distinct sample value u the supremum can only be approached at
    u itself or just below it, where F takes the values F(u) and F(u-).
    """
    x = _values_1d(sample)
    ref = _as_marginal(cdf)
    n = len(x)
    u, counts = np.unique(x, return_counts=True)
    hi = np.cumsum(counts) / n
    lo = hi - counts / n
    return float(max(np.abs(hi - ref.cdf(u)).max(), np.abs(lo - ref.cdf_left(u)).max()))


def monotone_discrepancy_1d(sample, cdf, M: float) -> float:
    """sup of |<g, P_n - P>| over nondecreasing g with values in [-M, M]; equals 2M times KS."""
    if not M > 0:
        raise UsageError("M must be positive")
    return 2.0 * M * ks_statistic(sample, cdf)


def _rank_regions(x: np.ndarray, marginal: Marginal):
    """Ranks among distinct values and the cdf range on each region between them."""
    u, rank = np.unique(x, return_inverse=True)
    f_at = marginal.cdf(u)
    f_left = marginal.cdf_left(u)
    p_lo = np.concatenate([[0.0], f_at])
    p_hi = np.concatenate([f_left, [1.0]])
    return rank.astype(np.int64), p_lo, p_hi


def orthant_discrepancy(sample: Sample, reference) -> float:
    """sup over lower-left orthants (-inf, E] of |P_n - P|, exact for product references."""
    if isinstance(reference, Marginal):
        reference = ProductReference([reference])
    if not getattr(reference, "is_product", False):
        raise NotImplementedError("orthant statistic needs a product reference")
    if not isinstance(sample, Sample):
        sample = Sample(sample)
    if sample.n == 0:
        raise UsageError("empty sample")
    if sample.k != reference.k:
        raise UsageError("sample and reference dimensions differ")
    if sample.k == 1:
        return ks_statistic(sample.values[:, 0], reference.marginals[0])
    regions = [_rank_regions(sample.values[:, c], m) for c, m in enumerate(reference.marginals)]
    if sample.k == 2:
        (xr, p_lo, p_hi), (yr, q_lo, q_hi) = regions
        return float(orthant_sup_2d(xr, yr, p_lo, p_hi, q_lo, q_hi))
    sizes = [len(r[1]) for r in regions]
    if np.prod(sizes, dtype=float) * sample.n > 5e8:
        raise ResourceError("orthant grid too large for k >= 3")
    # cumulative count on the rank grid by multidimensional prefix sums
    hist = np.zeros(sizes)
    np.add.at(hist, tuple(r[0] + 1 for r in regions), 1.0)
    for axis in range(sample.k):
        hist = np.cumsum(hist, axis=axis)
    emp = hist / sample.n
    best = 0.0
    for pick in np.ndindex(*(2,) * sample.k):
        ref = np.ones(sizes)
        for c, (_, lo, hi) in enumerate(regions):
            shape = [1] * sample.k
            shape[c] = -1
            ref = ref * (hi if pick[c] else lo).reshape(shape)
        best = max(best, float(np.abs(emp - ref).max()))
    return best


def _downset_mass(generators: np.ndarray, points: np.ndarray) -> float:
    """Fraction of points in the union of closed lower-left quadrants at the generators."""
    gx, gy = _staircase(generators)
    pos = np.searchsorted(gx, points[:, 0], side="left")
    inside = pos < len(gx)
    inside[inside] = points[inside, 1] <= gy[pos[inside]]
    return float(inside.mean())


def _staircase(generators: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Maximal generators sorted by x ascending (y then strictly descending)."""
    order = np.lexsort((-generators[:, 1], -generators[:, 0]))
    g = generators[order]
    # scanning x descending, keep points whose y beats everything to their right
    running = np.maximum.accumulate(g[:, 1])
    keep = np.concatenate([[True], g[1:, 1] > running[:-1]])
    g = g[keep][::-1]
    return g[:, 0], g[:, 1]


def _reference_downset_mass(generators: np.ndarray, reference) -> float:
    gx, gy = _staircase(generators)
    a = np.concatenate([[-np.inf], gx[:-1]])
    return float(np.sum(reference.strip_mass(a, gx, gy)))


@dataclass(frozen=True)
class LowerBoundReport:
    value: float
    trials: int
    best_trial: int
    flagged: str = ""


def monotone_lower_bound(sample: Sample, reference, M: float, trials: int, seed: int = 0) -> LowerBoundReport:
    """max over random monotone staircases g = M - 2M 1_D of |<g, P_n - P>|, a lower bound for the class sup.

    D is a union of closed lower-left quadrants at a random subset of the
    sample points; |<g, P_n - P>| = 2M |P_n(D) - P(D)|. Trial 0 uses every
    sample point, trial 1 the single quadrant maximizing the orthant
    statistic on the sample grid, later trials keep each point with a
    probability drawn uniformly per trial. Only k = 2 is supported.
    """
    if not isinstance(sample, Sample):
        sample = Sample(sample)
    if not M > 0:
        raise UsageError("M must be positive")
    if trials < 0:
        raise UsageError("trials must be nonnegative")
    if trials == 0:
        return LowerBoundReport(0.0, 0, -1, "no trials: value 0 by convention")
    if sample.k != 2 or reference.k != 2:
        raise NotImplementedError("staircase probes are implemented for k = 2")
    pts = sample.values
    best, best_t = 0.0, -1
    for t in range(trials):
        if t == 0:
            gens = pts
        elif t == 1:
            gens = _best_quadrant(pts, reference)
        else:
            rng = np.random.default_rng(mix_seed(seed, t))
            keep = rng.random(len(pts)) < rng.random()
            if not keep.any():
                keep[rng.integers(len(pts))] = True
            gens = pts[keep]
        val = 2 * M * abs(_downset_mass(gens, pts) - _reference_downset_mass(gens, reference))
        if val > best:
            best, best_t = val, t
    return LowerBoundReport(best, trials, best_t)


def _best_quadrant(pts: np.ndarray, reference) -> np.ndarray:
    """The sample corner (x_i, y_j) with the largest |P_n - P| on closed quadrants."""
    xs, ys = np.unique(pts[:, 0]), np.unique(pts[:, 1])
    if len(xs) * len(ys) > 4e6:
        # subsample the corner grid evenly
        xs = xs[np.linspace(0, len(xs) - 1, 2000).astype(int)]
        ys = ys[np.linspace(0, len(ys) - 1, 2000).astype(int)]
    hist = np.zeros((len(xs), len(ys)))
    ix = np.searchsorted(xs, pts[:, 0], side="left")
    iy = np.searchsorted(ys, pts[:, 1], side="left")
    ok = (ix < len(xs)) & (iy < len(ys))
    np.add.at(hist, (ix[ok], iy[ok]), 1.0)
    emp = hist.cumsum(0).cumsum(1) / len(pts)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    ref = reference.cdf(np.stack([gx.ravel(), gy.ravel()], axis=1)).reshape(emp.shape)
    i, j = np.unravel_index(np.argmax(np.abs(emp - ref)), emp.shape)
    return np.array([[xs[i], ys[j]]])


def concentration_curve(statistic: Callable[[Sample], float], reference, n_grid: Sequence[int],
                        seeds: Sequence[int], kappa: float) -> dict:
    """Exceedance frequency of {statistic > kappa} per sample size and the fitted log-slope.

    The slope is a least-squares fit of log(frequency) against n over the
    sizes with a nonzero frequency; it is None when fewer than two remain.
    """
    rows = []
    for n in n_grid:
        exceed = sum(statistic(Sample.draw(reference, int(n), int(s))) > kappa for s in seeds)
        rows.append({"n": int(n), "kappa": float(kappa), "exceedances": int(exceed), "trials": len(seeds),
                     "frequency": exceed / len(seeds)})
    nz = [(r["n"], r["frequency"]) for r in rows if r["frequency"] > 0]
    slope = None
    if len(nz) >= 2:
        ns, fs = zip(*nz)
        slope = float(np.polyfit(np.asarray(ns, dtype=float), np.log(fs), 1)[0])
    return {"rows": rows, "slope": slope}


def concentration_csv(table: dict) -> str:
    lines = ["n,kappa,exceedances,trials,frequency"]
    for r in table["rows"]:
        lines.append(f"{r['n']},{r['kappa']!r},{r['exceedances']},{r['trials']},{r['frequency']!r}")
    return "\n".join(lines) + "\n"
