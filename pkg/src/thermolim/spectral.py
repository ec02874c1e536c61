"""Eigenvalues, counting functions and the space of right-continuous step functions."""
from __future__ import annotations

import csv
import io
from typing import Sequence

import numpy as np
from scipy import linalg

from ._kernels import banded_ldl_negative_count
from .errors import PivotBreakdown, UsageError

# relative size below which an LDL^T pivot counts as zero
BREAKDOWN_RTOL = 1e-10
# suggested energy shift (relative to the matrix scale) after a breakdown
BREAKDOWN_SHIFT = 1e-9
# eigenvalues closer than this (relative) share one breakpoint
CLUSTER_RTOL = 1e-12


class StepFunction:
    """Right-continuous step function in canonical form.

    The function equals ``values[0]`` on (-inf, E_1) and ``values[k]`` on
    [E_k, E_{k+1}). Breakpoints are strictly increasing and consecutive
    values differ, so two functions are equal iff their arrays are equal.
    """

    __slots__ = ("breakpoints", "values")

    def __init__(self, breakpoints: Sequence[float], values: Sequence[float]):
        bp = np.asarray(breakpoints, dtype=np.float64).ravel()
        vals = np.asarray(values, dtype=np.float64).ravel()
        if len(vals) != len(bp) + 1:
            raise UsageError("a step function needs one more value than breakpoints")
        if not (np.all(np.isfinite(bp)) and np.all(np.isfinite(vals))):
            raise UsageError("step functions must be finite")
        if np.any(np.diff(bp) <= 0):
            raise UsageError("breakpoints must be strictly increasing")
        keep = vals[1:] != vals[:-1]
        bp = bp[keep]
        vals = np.concatenate([vals[:1], vals[1:][keep]])
        bp.flags.writeable = False
        vals.flags.writeable = False
        self.breakpoints = bp
        self.values = vals

    @classmethod
    def constant(cls, c: float) -> "StepFunction":
        return cls([], [c])

    @classmethod
    def indicator_from(cls, start: float, height: float = 1.0) -> "StepFunction":
        """height * 1_[start, inf)."""
        return cls([start], [0.0, height])

    @property
    def v0(self) -> float:
        return float(self.values[0])

    def __call__(self, energy):
        idx = np.searchsorted(self.breakpoints, energy, side="right")
        out = self.values[idx]
        return float(out) if np.ndim(out) == 0 else out

    def left_limit(self, energy):
        idx = np.searchsorted(self.breakpoints, energy, side="left")
        out = self.values[idx]
        return float(out) if np.ndim(out) == 0 else out

    def jump(self, energy: float) -> float:
        return self(energy) - self.left_limit(energy)

    def sup_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    # vector space operations

    def __add__(self, other: "StepFunction") -> "StepFunction":
        return linear_combine(1.0, self, 1.0, other)

    def __sub__(self, other: "StepFunction") -> "StepFunction":
        return linear_combine(1.0, self, -1.0, other)

    def __mul__(self, a: float) -> "StepFunction":
        return StepFunction(self.breakpoints, a * self.values)

    __rmul__ = __mul__

    def __truediv__(self, a: float) -> "StepFunction":
        return StepFunction(self.breakpoints, self.values / a)

    def __neg__(self) -> "StepFunction":
        return StepFunction(self.breakpoints, -self.values)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, StepFunction)
            and np.array_equal(self.breakpoints, other.breakpoints)
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self) -> int:
        return hash((self.breakpoints.tobytes(), self.values.tobytes()))

    def __repr__(self) -> str:
        return f"StepFunction({len(self.breakpoints)} breakpoints, v0={self.v0})"

    # serialization

    def to_csv(self) -> str:
        """Header, then a ``-inf`` row carrying v0, then one row per breakpoint."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["breakpoint[energy]", "value[dimensionless]"])
        w.writerow(["-inf", fmt17(self.values[0])])
        for e, v in zip(self.breakpoints, self.values[1:]):
            w.writerow([fmt17(e), fmt17(v)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "StepFunction":
        rows = [r for r in csv.reader(io.StringIO(text)) if r]
        body = rows[1:]
        if not body or body[0][0] != "-inf":
            raise UsageError("step function CSV must start with a -inf row")
        v0 = float(body[0][1])
        bp = [float(r[0]) for r in body[1:]]
        vals = [v0] + [float(r[1]) for r in body[1:]]
        return cls(bp, vals)

    def to_dict(self) -> dict:
        return {"breakpoints": self.breakpoints.tolist(), "values": self.values.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "StepFunction":
        return cls(data["breakpoints"], data["values"])


def fmt17(x: float) -> str:
    """17 significant digits, enough to round-trip any double."""
    return format(float(x), ".17g")


def linear_combine(a: float, f: StepFunction, b: float, g: StepFunction) -> StepFunction:
    """Canonical form of a*f + b*g."""
    bp = np.union1d(f.breakpoints, g.breakpoints)
    fv = f.values[np.searchsorted(f.breakpoints, bp, side="right")]
    gv = g.values[np.searchsorted(g.breakpoints, bp, side="right")]
    v0 = a * f.values[0] + b * g.values[0]
    return StepFunction(bp, np.concatenate([[v0], a * fv + b * gv]))


def sup_norm(f: StepFunction, g: StepFunction) -> float:
    """Exact sup over the real line of |f - g|.

    Both functions are constant between merged breakpoints, so the sup is a
    maximum over finitely many region values.
    """
    return linear_combine(1.0, f, -1.0, g).sup_abs()


def weighted_sum(terms: Sequence[tuple[float, StepFunction]]) -> StepFunction:
    """sum_k c_k f_k in one merge."""
    if not terms:
        return StepFunction.constant(0.0)
    bp = np.unique(np.concatenate([f.breakpoints for _, f in terms]))
    vals = np.zeros(len(bp) + 1)
    for c, f in terms:
        vals[0] += c * f.values[0]
        vals[1:] += c * f.values[np.searchsorted(f.breakpoints, bp, side="right")]
    return StepFunction(bp, vals)


# eigenvalues


def _parts(matrix):
    """(dense-or-None, band rows, bandwidth, n, scale) for a matrix-like input."""
    if isinstance(matrix, np.ndarray):
        a = np.asarray(matrix, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise UsageError("matrix must be square")
        if not np.all(np.isfinite(a)):
            raise UsageError("matrix has non-finite entries")
        return a, None
    if not np.all(np.isfinite(matrix.vals)):
        raise UsageError("matrix has non-finite entries")
    return None, matrix


def matrix_scale(matrix) -> float:
    """Max absolute row sum, an upper bound on the spectral radius (at least 1)."""
    dense, sym = _parts(matrix)
    if dense is not None:
        return max(1.0, float(np.abs(dense).sum(axis=1).max(initial=0.0)))
    return max(1.0, sym.max_row_sum())


def eigenvalues(matrix) -> np.ndarray:
    """All eigenvalues in ascending order.

    LAPACK does the work: the tridiagonal solver for bandwidth 1, the banded
    solver for narrow bands and the dense symmetric solver otherwise.
    """
    dense, sym = _parts(matrix)
    if dense is not None:
        if dense.shape[0] == 0:
            raise UsageError("matrix dimension must be at least 1")
        return np.sort(linalg.eigvalsh(dense, check_finite=False))
    n = sym.n
    if n == 0:
        raise UsageError("matrix dimension must be at least 1")
    b = sym.bandwidth
    if b == 0:
        return np.sort(sym.diagonal())
    if b == 1:
        band = sym.band_rows()
        return np.sort(linalg.eigvalsh_tridiagonal(band[:, 0], band[:-1, 1], check_finite=False))
    if n > 256 and 8 * b < n:
        rows = sym.band_rows()
        # LAPACK upper storage: ab[b + i - j, j] = A[i, j]
        ab = np.zeros((b + 1, n))
        for k in range(b + 1):
            ab[b - k, k:] = rows[: n - k, k]
        return np.sort(linalg.eig_banded(ab, lower=False, eigvals_only=True, check_finite=False))
    return np.sort(linalg.eigvalsh(sym.to_dense(), check_finite=False))


def eigen_residuals(matrix, count: int = 5, seed: int = 0) -> float:
    """Largest residual |Mx - lambda x| over a few eigenpairs (dense path, small n)."""
    dense, sym = _parts(matrix)
    a = dense if dense is not None else sym.to_dense()
    w, v = linalg.eigh(a)
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(w), size=min(count, len(w)), replace=False)
    res = a @ v[:, picks] - v[:, picks] * w[picks]
    return float(np.linalg.norm(res, axis=0).max())


def counting_function(eigs, weights=None, scale: float | None = None) -> StepFunction:
    """E -> #{lambda <= E}, optionally with a weight per eigenvalue.

    Eigenvalues within CLUSTER_RTOL * scale of their predecessor join its
    breakpoint, so the jump there is the summed multiplicity.
    """
    e = np.asarray(eigs, dtype=np.float64).ravel()
    w = np.ones_like(e) if weights is None else np.asarray(weights, dtype=np.float64).ravel()
    if len(e) == 0:
        return StepFunction.constant(0.0)
    order = np.argsort(e, kind="stable")
    e, w = e[order], w[order]
    if scale is None:
        scale = max(1.0, float(np.abs(e).max()))
    starts = np.concatenate([[True], np.diff(e) > CLUSTER_RTOL * scale])
    group = np.cumsum(starts) - 1
    jumps = np.bincount(group, weights=w)
    return StepFunction(e[starts], np.concatenate([[0.0], np.cumsum(jumps)]))


def inertia_count(matrix, energy: float) -> int:
    """Number of eigenvalues <= energy from the inertia of M - E I.

    Uses an unpivoted banded LDL^T factorization, independent of the LAPACK
    eigensolvers. A pivot with |p| <= BREAKDOWN_RTOL * scale means E is
    numerically an eigenvalue; PivotBreakdown then suggests a shift of
    BREAKDOWN_SHIFT * scale.
    """
    dense, sym = _parts(matrix)
    if dense is not None:
        rows = _dense_band_rows(dense)
    else:
        rows = sym.band_rows()
    if rows.shape[0] == 0:
        return 0
    scale = matrix_scale(matrix)
    count, broke = banded_ldl_negative_count(rows, float(energy), BREAKDOWN_RTOL * scale)
    if broke >= 0:
        raise PivotBreakdown(float(energy), BREAKDOWN_SHIFT * scale)
    return int(count)


def counting_jump(matrix, energy: float, delta: float | None = None) -> int:
    """Total multiplicity of eigenvalues in (energy - delta, energy + delta]."""
    if delta is None:
        delta = 1e-7 * matrix_scale(matrix)
    return inertia_count(matrix, energy + delta) - inertia_count(matrix, energy - delta)


def _dense_band_rows(a: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    nz = np.nonzero(np.triu(a))
    b = int((nz[1] - nz[0]).max(initial=0))
    rows = np.zeros((n, b + 1))
    for k in range(b + 1):
        rows[: n - k, k] = np.diagonal(a, offset=k)
    return rows
