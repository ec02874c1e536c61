"""Almost additive fields, pattern averages, and the approximation error bounds."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .coloring import (
    Coloring,
    FrequencyTable,
    OverrideColoring,
    empirical_frequency_table,
)
from .errors import UsageError
from .groups import FolnerSpec, Group, SiteSet, boundary_size, diameter
from .hamiltonian import ModelSpec
from .spectral import (
    CLUSTER_RTOL,
    StepFunction,
    counting_function,
    eigenvalues,
    sup_norm,
    weighted_sum,
)

# slack for floating-point rounding when comparing a computed lhs with its bound
ROUND_TOL = 1e-12
# pattern batches are diagonalized in chunks of this many matrices
_BATCH = 4096


class BoundaryTerm:
    """A set function b with b(L)/|L| <= bound."""

    def __init__(self, rule: Callable[[SiteSet], float], bound: float, name: str):
        self.rule = rule
        self.bound = float(bound)
        self.name = name

    def __call__(self, sites: SiteSet) -> float:
        return float(self.rule(sites))

    def __repr__(self) -> str:
        return f"BoundaryTerm({self.name}, D_b={self.bound})"


def default_eig_boundary_term(group: Group) -> BoundaryTerm:
    """b(L) = 4 |boundary_1(L)| with D_b = 4(|S| + 1), which is 8d + 4 on Z^d."""
    return BoundaryTerm(lambda s: 4 * boundary_size(s, 1) if len(s) else 0, 4 * (group.degree + 1), "4|d1|")


def zero_boundary_term() -> BoundaryTerm:
    return BoundaryTerm(lambda s: 0.0, 0.0, "zero")


class Field:
    """Base class for fields (L, omega) -> StepFunction.

    Subclasses implement ``from_colors`` (the value on a site set given the
    colors of exactly those sites), which makes every field local by
    construction and gives the pattern function directly.
    """

    name = "field"
    bound = 1.0
    local = True
    equivariant = True
    monotone = False

    def __init__(self, group: Group, boundary: BoundaryTerm):
        self.group = group
        self.boundary = boundary

    def from_colors(self, sites: SiteSet, colors: np.ndarray) -> StepFunction:
        raise NotImplementedError

    def evaluate(self, sites: SiteSet, coloring: Coloring) -> StepFunction:
        return self.from_colors(sites, coloring.values(sites.coords))

    def normalized(self, sites: SiteSet, coloring: Coloring) -> StepFunction:
        if len(sites) == 0:
            raise UsageError("cannot normalize over an empty set")
        return self.evaluate(sites, coloring) / len(sites)

    def weighted_pattern_sum(self, window: SiteSet, patterns: np.ndarray, weights: np.ndarray) -> StepFunction:
        """sum_P w_P F~(P) for colors ``patterns[P]`` on the window."""
        return weighted_sum([(float(w), self.from_colors(window, p)) for p, w in zip(patterns, weights)])


class EigenvalueCountingField(Field):
    """n(L, omega)(E) = #{eigenvalues of the restricted Hamiltonian <= E}."""

    name = "eigenvalue-counting"
    bound = 1.0
    monotone = True

    def __init__(self, model: ModelSpec):
        super().__init__(model.group, default_eig_boundary_term(model.group))
        self.model = model

    def _scale(self) -> float:
        return self.model.spectral_scale()

    def from_colors(self, sites: SiteSet, colors: np.ndarray) -> StepFunction:
        return counting_function(eigenvalues(self.model.matrix_from_colors(sites, colors)), scale=self._scale())

    def weighted_pattern_sum(self, window, patterns, weights) -> StepFunction:
        if len(patterns) == 1:
            # same solver as a direct evaluation, so a point mass reproduces F exactly
            return float(weights[0]) * self.from_colors(window, patterns[0])
        # all pattern matrices share the window, so diagonalize them as one stack
        n = len(window)
        eigs, wts = [], []
        for start in range(0, len(patterns), _BATCH):
            block = patterns[start:start + _BATCH]
            mats = np.stack([self.model.matrix_from_colors(window, p).to_dense() for p in block])
            eigs.append(np.linalg.eigvalsh(mats).ravel())
            wts.append(np.repeat(np.asarray(weights[start:start + _BATCH], dtype=np.float64), n))
        if not eigs:
            return StepFunction.constant(0.0)
        return counting_function(np.concatenate(eigs), np.concatenate(wts), scale=self._scale())


class PotentialThresholdField(Field):
    """f(L, omega)(E) = #{v in L : omega_v <= E}; exactly additive, b = 0."""

    name = "potential-threshold"
    bound = 1.0
    monotone = True

    def __init__(self, group: Group):
        super().__init__(group, zero_boundary_term())

    def from_colors(self, sites: SiteSet, colors: np.ndarray) -> StepFunction:
        return counting_function(colors[:, 0], scale=1.0)

    def weighted_pattern_sum(self, window, patterns, weights) -> StepFunction:
        vals = patterns[:, :, 0].ravel()
        wts = np.repeat(np.asarray(weights, dtype=np.float64), patterns.shape[1])
        return counting_function(vals, wts, scale=1.0)


# almost additivity


def check_almost_additivity(fld: Field, parts: Sequence[SiteSet], coloring: Coloring) -> dict:
    """Defect |F(union) - sum F(part)| against the budget sum b(part)."""
    if not parts:
        raise UsageError("need at least one part")
    total = sum(len(p) for p in parts)
    union = parts[0]
    for p in parts[1:]:
        union = union.union(p)
    if len(union) != total:
        raise UsageError("parts must be pairwise disjoint")
    whole = fld.evaluate(union, coloring)
    pieces = weighted_sum([(1.0, fld.evaluate(p, coloring)) for p in parts])
    defect = sup_norm(whole, pieces)
    budget = sum(fld.boundary(p) for p in parts)
    norm_ratio = whole.sup_abs() / len(union)
    return {"defect": defect, "budget": budget, "ok": defect <= budget + ROUND_TOL, "norm_ratio": norm_ratio}


def pattern_average(fld: Field, table: FrequencyTable, window: SiteSet | None = None) -> StepFunction:
    """sum_P nu_P F~(P) / |window| over the patterns listed in the table."""
    if not fld.local:
        raise UsageError("pattern averages need a local field")
    window = table.window if window is None else window
    if len(window) != len(table.window):
        raise UsageError("table window does not match")
    if np.any(table.frequencies < 0):
        raise UsageError("frequencies must be nonnegative")
    return fld.weighted_pattern_sum(table.window, table.patterns, table.frequencies) / len(window)


def l1_frequency_gap(first: FrequencyTable, second: FrequencyTable) -> float:
    """sum over the union of pattern classes of |nu1 - nu2| (missing entries are 0)."""
    if len(first.window) != len(second.window):
        raise UsageError("tables have different windows")
    if len(first) == 0 or len(second) == 0:
        return math.fsum(first.frequencies.tolist()) + math.fsum(second.frequencies.tolist())
    a = first.patterns.reshape(len(first), -1)
    b = second.patterns.reshape(len(second), -1)
    rows = np.concatenate([a, b])
    _, inv = np.unique(rows, axis=0, return_inverse=True)
    inv = inv.ravel()
    m = int(inv.max()) + 1
    x = np.bincount(inv[: len(a)], weights=first.frequencies, minlength=m)
    y = np.bincount(inv[len(a):], weights=second.frequencies, minlength=m)
    return math.fsum(np.abs(x - y).tolist())


@dataclass
class ApproxReport:
    """Inputs and outputs of one bound evaluation at (j, L)."""

    j: int
    L: int
    shell_radius: int
    lhs: float
    terms: list
    value: StepFunction
    average: StepFunction
    flags: list = field(default_factory=list)
    fbar_gap: float | None = None
    fbar_bound: float | None = None
    seed: int | None = None

    @property
    def rhs(self) -> float:
        return math.fsum(self.terms)

    @property
    def passed(self) -> bool:
        return self.lhs <= self.rhs + ROUND_TOL

    def recompute_lhs(self) -> float:
        return sup_norm(self.value, self.average)

    def to_dict(self) -> dict:
        return {
            "j": self.j,
            "L": self.L,
            "seed": self.seed,
            "shell_radius": self.shell_radius,
            "lhs": self.lhs,
            "terms": list(self.terms),
            "rhs": self.rhs,
            "pass": self.passed,
            "flags": list(self.flags),
            "fbar_gap": self.fbar_gap,
            "fbar_bound": self.fbar_bound,
            "value": self.value.to_dict(),
            "average": self.average.to_dict(),
        }


def _error_bound(fld: Field, coloring: Coloring, region: SiteSet, window: SiteSet,
                 limit: FrequencyTable, empirical: FrequencyTable | None, shell_radius: int,
                 j: int, L: int, flags: list, fbar: StepFunction | None,
                 value: StepFunction | None = None) -> ApproxReport:
    if empirical is None:
        empirical = empirical_frequency_table(coloring, region, window)
    if value is None:
        value = fld.normalized(region, coloring)
    average = pattern_average(fld, limit, window)
    lhs = sup_norm(value, average)
    c_f, d_b = fld.bound, fld.boundary.bound
    terms = [
        fld.boundary(window) / len(window),
        (c_f + d_b) * boundary_size(region, shell_radius) / len(region),
        c_f * l1_frequency_gap(empirical, limit),
    ]
    rep = ApproxReport(j, L, shell_radius, lhs, terms, value, average, flags)
    if fbar is not None:
        rep.fbar_gap = sup_norm(fbar, average)
        rep.fbar_bound = terms[0]
    return rep


def error_bound_lmv(fld: Field, coloring: Coloring, region: SiteSet, window: SiteSet, limit: FrequencyTable,
                    empirical: FrequencyTable | None = None, L: int | None = None, j: int | None = None,
                    fbar: StepFunction | None = None, value: StepFunction | None = None) -> ApproxReport:
    """Pattern-average approximation on Z^d with the boundary shell of radius L.

    lhs = |F(Q)/|Q| - sum_P nu_P F~(P)/|L_L||, bounded by
    b(L_L)/|L_L| + (C_F + D_b)|d^L Q|/|Q| + C_F sum_P |emp_P - nu_P|.
    The empirical frequencies are counts in omega|_Q divided by |Q|.
    ``value`` may carry a precomputed F(Q)/|Q| when several windows share Q.
    """
    if L is None:
        if not window.is_box:
            raise UsageError("pass L for windows that are not boxes")
        L = max(window.box_shape)
    j = j if j is not None else (max(region.box_shape) if region.is_box else len(region))
    return _error_bound(fld, coloring, region, window, limit, empirical, max(L, 1), j, L,
                        [] if L >= 1 else ["radius-0-shell-uses-1"], fbar, value)


def error_bound_amenable(fld: Field, coloring: Coloring, region: SiteSet, window: SiteSet, limit: FrequencyTable,
                         empirical: FrequencyTable | None = None, L: int | None = None, j: int | None = None,
                         fbar: StepFunction | None = None, value: StepFunction | None = None) -> ApproxReport:
    """Same as error_bound_lmv with the shell radius diam(L_L); radius 0 is read as 1."""
    diam = diameter(window)
    flags = ["radius-0-shell-uses-1"] if diam == 0 else []
    L = L if L is not None else (max(window.box_shape) if window.is_box else len(window))
    j = j if j is not None else len(region)
    return _error_bound(fld, coloring, region, window, limit, empirical, max(diam, 1), j, L, flags, fbar, value)


# thermodynamic limits


def thermodynamic_sequence(fld: Field, coloring: Coloring, sets) -> tuple[list[StepFunction], list[float]]:
    """Normalized values F(Q_j)/|Q_j| along the sequence and consecutive sup-norm gaps."""
    if isinstance(sets, FolnerSpec):
        sets = sets.sets()
    values = [fld.normalized(q, coloring) for q in sets]
    gaps = [sup_norm(a, b) for a, b in zip(values, values[1:])]
    return values, gaps


def free_laplacian_ids_1d(energy):
    """Integrated density of states of the free Laplacian on Z: arccos((2 - E)/2)/pi on [0, 4]."""
    e = np.clip(np.asarray(energy, dtype=np.float64), 0.0, 4.0)
    return np.arccos((2.0 - e) / 2.0) / np.pi


def dirichlet_eigenvalues_1d(length: int) -> np.ndarray:
    """Eigenvalues 2 - 2 cos(k pi / (L + 1)), k = 1..L, of the clipped 1d Laplacian."""
    k = np.arange(1, length + 1)
    return np.sort(2.0 - 2.0 * np.cos(k * np.pi / (length + 1)))


def dirichlet_counting_function(length: int) -> StepFunction:
    return counting_function(dirichlet_eigenvalues_1d(length), scale=4.0) / length


# monotone fields


def monotone_field_bound(d: int, c_f: float, d_b: float, L: int, r: int, j: int) -> float:
    """Deterministic part of the monotone-field estimate:

    2^(2d+1) ( ((2 C_f + D_b) L^d + D_b r^d)/(j - 2L) + (2 (C_f + D_b) r^d + 3 D_b r^d)/(L - 2r) ).
    """
    if not L > 2 * r:
        raise UsageError("need L > 2r")
    if not j > 2 * L:
        raise UsageError("need j > 2L")
    first = ((2 * c_f + d_b) * L ** d + d_b * r ** d) / (j - 2 * L)
    second = (2 * (c_f + d_b) * r ** d + 3 * d_b * r ** d) / (L - 2 * r)
    return 2 ** (2 * d + 1) * (first + second)


def monotonicity_spot_check(model: ModelSpec, coloring: Coloring, sites: SiteSet, site: int,
                            increase: float) -> dict:
    """Raise the potential at one site and compare counting functions.

    By min-max the eigenvalues cannot decrease, so n(E) cannot increase. The
    comparison is between sorted eigenvalue lists with a rounding allowance of
    CLUSTER_RTOL times the spectral scale; ``violation`` is the largest amount
    by which a raised eigenvalue falls below its original beyond that allowance.
    """
    if increase < 0:
        raise UsageError("increase must be nonnegative")
    colors = coloring.values(sites.coords)
    raised = colors.copy()
    raised[site, 0] += increase
    before = eigenvalues(model.matrix_from_colors(sites, colors))
    after = eigenvalues(model.matrix_from_colors(sites, raised))
    scale = model.spectral_scale() + abs(increase)
    tol = 1e3 * CLUSTER_RTOL * scale
    drop = float(np.max(before - after, initial=0.0))
    n_before = counting_function(before, scale=scale)
    n_after = counting_function(after, scale=scale)
    pointwise = float((n_after - n_before).values.max())
    return {
        "violation": max(0.0, drop - tol),
        "ok": drop <= tol,
        "max_counting_increase": pointwise,
        "tolerance": tol,
    }


def raise_site(coloring: Coloring, sites: SiteSet, site: int, increase: float) -> Coloring:
    """Coloring with the first color component at one site raised."""
    c = sites.coords[site:site + 1]
    v = coloring.values(c)
    v[0, 0] += increase
    return OverrideColoring(coloring, SiteSet(sites.group, c), v)


def monotone_field_diagnostics(fld: Field, coloring_for_seed: Callable[[int], Coloring], seeds: Sequence[int],
                               d: int, L: int, r: int, js: Sequence[int], kappa: float,
                               quantile: float = 0.95) -> dict:
    """Observed deviations of f(L_j)/|L_j| from the largest-j seed average vs bound + kappa."""
    if not fld.monotone:
        raise UsageError("field is not flagged monotone")
    js = sorted(int(x) for x in js)
    group = fld.group
    values = {j: [] for j in js}
    for s in seeds:
        col = coloring_for_seed(s)
        for j in js:
            values[j].append(fld.normalized(SiteSet.cube(group, j), col))
    ref = weighted_sum([(1.0 / len(seeds), f) for f in values[js[-1]]])
    rows = []
    for j in js:
        devs = np.array([sup_norm(f, ref) for f in values[j]])
        row = {"j": j, "quantile": float(np.quantile(devs, quantile)), "max": float(devs.max())}
        if j > 2 * L:
            bound = monotone_field_bound(d, fld.bound, fld.boundary.bound, L, r, j)
            row["bound"] = bound
            row["violations"] = int(np.sum(devs > bound + kappa))
        rows.append(row)
    return {"rows": rows, "kappa": kappa, "reference_j": js[-1], "seeds": len(seeds)}


def theorem_general_amenable_term(c_f: float, d: float, eps: float) -> float:
    """(37 C_f + 47 D + 47) eps, evaluated as a report-only diagnostic."""
    return (37 * c_f + 47 * d + 47) * eps
