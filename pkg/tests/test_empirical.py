import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from thermolim.empirical import (ComonotoneReference, Marginal, ProductReference, Sample, concentration_csv,
                                 concentration_curve, ks_statistic, monotone_discrepancy_1d, monotone_lower_bound,
                                 orthant_discrepancy)
from thermolim.errors import UsageError

U = Marginal.uniform()
N01 = Marginal.normal()


def test_ks_quantile_sample_is_exact():
    for n in (5, 100, 1000):
        x = np.arange(1, n + 1) / (n + 1)
        assert ks_statistic(x, U) == pytest.approx(1 / (n + 1), abs=1e-15)


def test_ks_against_own_empirical_cdf():
    x = np.random.default_rng(0).integers(0, 7, 50).astype(float)
    u, c = np.unique(x, return_counts=True)
    assert ks_statistic(x, Marginal.discrete(u, c / c.sum())) <= 1e-15
    with pytest.raises(UsageError):
        ks_statistic([], U)


def test_ks_dominates_dense_grid():
    grid = np.linspace(-0.1, 1.1, 1_000_000)
    rng = np.random.default_rng(1)
    for _ in range(50):
        x = np.sort(rng.uniform(0, 1, int(rng.integers(5, 60))))
        emp = np.searchsorted(x, grid, side="right") / len(x)
        assert np.abs(emp - U.cdf(grid)).max() <= ks_statistic(x, U)


def test_ks_matches_scipy():
    x = np.random.default_rng(2).standard_normal(300)
    assert ks_statistic(x, N01) == pytest.approx(stats.kstest(x, "norm").statistic, abs=1e-14)


def test_monotone_1d_examples():
    x = np.random.default_rng(3).uniform(size=200)
    ks = ks_statistic(x, U)
    assert monotone_discrepancy_1d(x, U, 0.5) == ks
    assert monotone_discrepancy_1d(x, U, 2.0) == 2 * monotone_discrepancy_1d(x, U, 1.0)
    with pytest.raises(UsageError):
        monotone_discrepancy_1d(x, U, 0.0)


def test_monotone_1d_dominates_random_monotone_functions():
    rng = np.random.default_rng(4)
    for instance in range(5):
        x = rng.uniform(size=int(rng.integers(20, 200)))
        M = float(rng.uniform(0.2, 3))
        bound = monotone_discrepancy_1d(x, U, M)
        for _ in range(1000):
            k = int(rng.integers(1, 8))
            cuts = np.sort(rng.uniform(0, 1, k))
            levels = np.sort(rng.uniform(-M, M, k + 1))
            gx = levels[np.searchsorted(cuts, x, side="right")]
            lengths = np.diff(np.concatenate([[0.0], cuts, [1.0]]))
            assert abs(gx.mean() - levels @ lengths) <= bound + 1e-12


def brute_orthant(points, marginals):
    """Largest |P_n - P| over orthants whose corners range over atoms, midpoints and the far right."""
    cands = []
    for c, m in enumerate(marginals):
        u = np.unique(points[:, c])
        mids = (u[1:] + u[:-1]) / 2
        cands.append(np.concatenate([u, mids, [u[0] - 1, u[-1] + 1]]))
    best = 0.0
    for corner in itertools.product(*cands):
        emp = np.all(points <= np.asarray(corner), axis=1).mean()
        ref = np.prod([m.cdf(e) for m, e in zip(marginals, corner)])
        best = max(best, abs(emp - ref))
    return best


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(2, 3))
def test_orthant_matches_brute_force_on_discrete_data(seed, k):
    rng = np.random.default_rng(seed)
    margs = [Marginal.discrete([0.0, 1.0, 2.0], w) for w in rng.dirichlet(np.ones(3), size=k)]
    pts = rng.integers(0, 3, size=(int(rng.integers(1, 25)), k)).astype(float)
    ref = ProductReference(margs)
    assert orthant_discrepancy(Sample(pts), ref) == pytest.approx(brute_orthant(pts, margs), abs=1e-12)


def test_orthant_continuous_dominates_grid_and_examples():
    rng = np.random.default_rng(5)
    pts = rng.uniform(size=(40, 2))
    ref = ProductReference([U, U])
    exact = orthant_discrepancy(Sample(pts), ref)
    g = np.linspace(0, 1, 801)
    gx, gy = np.meshgrid(g, g, indexing="ij")
    emp = ((pts[:, 0][None, None, :] <= gx[..., None]) & (pts[:, 1][None, None, :] <= gy[..., None])).mean(-1)
    assert np.abs(emp - gx * gy).max() <= exact
    atoms = ProductReference([Marginal.discrete([0.0, 1.0])] * 2)
    grid = Sample(np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float))
    assert orthant_discrepancy(grid, atoms) == 0
    with pytest.raises(NotImplementedError):
        orthant_discrepancy(grid, ComonotoneReference(N01))


def test_orthant_reparameterization_invariance():
    s = Sample.draw(ProductReference([N01, N01]), 500, seed=6)
    lognormal = Marginal(lambda x: stats.norm.cdf(np.log(np.maximum(x, 1e-300))), lambda rng, n: None)
    a = orthant_discrepancy(s, ProductReference([N01, N01]))
    b = orthant_discrepancy(Sample(np.exp(s.values)), ProductReference([lognormal, lognormal]))
    assert a == pytest.approx(b, abs=1e-12)


def test_orthant_detects_comonotone_sample():
    for n in (100, 1000, 10000):
        s = Sample.draw(ComonotoneReference(N01), n, seed=n)
        assert orthant_discrepancy(s, ProductReference([N01, N01])) >= 0.2


def test_orthant_uniform_square_small_in_most_seeds():
    ref = ProductReference([U, U])
    vals = [orthant_discrepancy(Sample.draw(ref, 10_000, seed), ref) for seed in range(20)]
    assert sum(v <= 0.05 for v in vals) >= 19


def test_lower_bound_examples():
    ref = ProductReference([U, U])
    s = Sample.draw(ref, 300, seed=7)
    rep0 = monotone_lower_bound(s, ref, 1.0, 0)
    assert rep0.value == 0 and rep0.flagged
    M = 1.5
    rep = monotone_lower_bound(s, ref, M, 10, seed=1)
    # closed sample-corner quadrants approach the orthant sup up to the two points on the corner lines
    assert rep.value >= 2 * M * (orthant_discrepancy(s, ref) - 2 / s.n)
    assert rep.value <= 2 * M


def test_lower_bound_comonotone_counterexample():
    ref = ComonotoneReference(N01)
    s = Sample.draw(ref, 1000, seed=9)
    rep = monotone_lower_bound(s, ref, 1.0, 8, seed=0)
    assert rep.value >= 0.9 * 2


def test_concentration_curves():
    stat = lambda s: ks_statistic(s.values[:, 0], U)
    never = concentration_curve(stat, U, [100, 1000], range(20), kappa=2.0)
    assert all(r["frequency"] == 0 for r in never["rows"]) and never["slope"] is None
    curve = concentration_curve(stat, U, [100, 1000, 10000], range(100), kappa=0.1)
    freqs = [r["frequency"] for r in curve["rows"]]
    assert freqs[0] > 0 and all(a >= b for a, b in zip(freqs, freqs[1:]))
    fine = concentration_curve(stat, U, [25, 50, 100, 200], range(200), kappa=0.1)
    assert fine["slope"] is not None and fine["slope"] < 0
    text = concentration_csv(fine)
    assert text.splitlines()[0] == "n,kappa,exceedances,trials,frequency" and len(text.splitlines()) == 5


def test_sample_validation_and_determinism():
    with pytest.raises(UsageError):
        Sample(np.array([[np.inf]]))
    a = Sample.draw(ProductReference([U, N01]), 50, seed=3)
    b = Sample.draw(ProductReference([U, N01]), 50, seed=3)
    assert np.array_equal(a.values, b.values) and a.k == 2 and a.n == 50
