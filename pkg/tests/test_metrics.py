import numpy as np
import pytest
from scipy.integrate import quad
from scipy.optimize import linprog
from scipy.special import ndtr

from clt_lab import metrics
from clt_lab.dist import STANDARD_NORMAL, delta, discretize_normal, make_discrete
from clt_lab.metrics import (
    MetricError,
    MetricValue,
    kolmogorov,
    prokhorov,
    prokhorov_oracle,
    prokhorov_symmetric,
    total_variation,
    wasserstein,
    wasserstein_oracle,
)

RAD = make_discrete([-1.0, 1.0], [0.5, 0.5])


def _random_dist(rng, max_atoms=8, scale=2.0):
    n = int(rng.integers(1, max_atoms + 1))
    return make_discrete(rng.normal(size=n) * scale, rng.dirichlet(np.ones(n)))


# ---------------------------------------------------------------------------
# Kolmogorov
# ---------------------------------------------------------------------------


def test_kolmogorov_identity():
    assert kolmogorov(RAD, RAD).value == 0.0


def test_kolmogorov_rademacher_vs_normal():
    # staircase-vs-Phi supremum sits at the atoms: Phi(1) - 1/2
    val = kolmogorov(RAD, STANDARD_NORMAL).value
    assert val == pytest.approx(ndtr(1.0) - 0.5, abs=1e-15)
    assert val == pytest.approx(0.3413447460685429, abs=1e-14)


def test_kolmogorov_disjoint_point_masses():
    assert kolmogorov(delta(0.0), delta(1.0)).value == 1.0


def test_kolmogorov_matches_dense_grid_scan():
    rng = np.random.default_rng(5)
    for _ in range(20):
        p = _random_dist(rng)
        exact = kolmogorov(p, STANDARD_NORMAL).value
        # scan just left and right of every atom plus a dense background grid
        eps = 1e-12
        grid = np.concatenate(
            [p.atoms, p.atoms - eps, np.linspace(p.atoms[0] - 4, p.atoms[-1] + 4, 4001)]
        )
        scan = np.max(np.abs(p.cdf(grid) - STANDARD_NORMAL.cdf(grid)))
        assert exact >= scan - 1e-12
        assert exact <= scan + 1e-9


def test_kolmogorov_near_duplicate_atoms_are_identified():
    p = make_discrete([0.0, 1.0], [0.5, 0.5])
    q = make_discrete([0.0, 1.0 + 1e-13], [0.5, 0.5])
    assert kolmogorov(p, q).value <= 1e-12


# ---------------------------------------------------------------------------
# Wasserstein
# ---------------------------------------------------------------------------


def test_wasserstein_identity_and_translation():
    assert wasserstein(RAD, RAD).value == 0.0
    assert wasserstein(delta(0.0), delta(2.5)).value == pytest.approx(2.5, abs=1e-15)
    assert wasserstein(RAD, delta(0.0)).value == pytest.approx(1.0, abs=1e-15)


def test_wasserstein_vs_normal_point_mass_closed_form():
    # W(delta_c, N(0,1)) = E|Z - c| = 2 phi(c) + c (2 Phi(c) - 1)
    for c in (0.0, 0.7, -1.3, 3.0):
        expected = 2 * np.exp(-0.5 * c * c) / np.sqrt(2 * np.pi) + c * (2 * ndtr(c) - 1)
        assert wasserstein(delta(c), STANDARD_NORMAL).value == pytest.approx(expected, abs=1e-13)


def test_wasserstein_vs_normal_quadrature_oracle():
    rng = np.random.default_rng(3)
    for _ in range(5):
        p = _random_dist(rng, max_atoms=5)
        lo = min(p.atoms[0], -9.0) - 1.0
        hi = max(p.atoms[-1], 9.0) + 1.0
        # split at the atoms and at the |F - Phi| kinks where Phi crosses a level
        from scipy.special import ndtri

        levels = [c for c in p.cdf(p.atoms) if 0.0 < c < 1.0]
        pts = sorted(set(p.atoms.tolist()) | {float(ndtri(c)) for c in levels})
        oracle, err = quad(
            lambda x: abs(p.cdf(x) - ndtr(x)), lo, hi, points=pts, limit=400, epsabs=1e-11
        )
        assert err < 1e-8
        assert wasserstein(p, STANDARD_NORMAL).value == pytest.approx(oracle, abs=1e-9)


def test_wasserstein_agrees_with_transport_lp():
    rng = np.random.default_rng(0)
    for _ in range(50):
        p, q = _random_dist(rng), _random_dist(rng)
        assert wasserstein(p, q).value == pytest.approx(wasserstein_oracle(p, q).value, abs=1e-9)


def test_wasserstein_oracle_rejects_large_supports():
    big = make_discrete(np.arange(65.0), np.full(65, 1.0 / 65))
    with pytest.raises(MetricError):
        wasserstein_oracle(big, RAD)


# ---------------------------------------------------------------------------
# Prokhorov
# ---------------------------------------------------------------------------


def test_prokhorov_identity():
    assert prokhorov(RAD, RAD, 1.0).value == 0.0
    assert prokhorov_oracle(RAD, RAD, 1.0).value == 0.0


def test_prokhorov_two_point_examples():
    tol = 1e-6
    assert prokhorov(delta(0.0), delta(0.3), 1.0, tol).value == pytest.approx(0.3, abs=2 * tol)
    assert prokhorov(delta(0.0), delta(5.0), 1.0, tol).value == pytest.approx(1.0, abs=2 * tol)
    # subset {0} forces min(alpha : 0.3 <= 2 alpha) = 0.15
    assert prokhorov_oracle(delta(0.0), delta(0.3), 2.0).value == pytest.approx(0.15, abs=1e-9)
    assert prokhorov(delta(0.0), delta(0.3), 2.0, tol).value == pytest.approx(0.15, abs=2 * tol)


def test_prokhorov_flow_matches_subset_oracle():
    rng = np.random.default_rng(11)
    tol = 1e-6
    for _ in range(40):
        p = _random_dist(rng, max_atoms=6)
        q = _random_dist(rng, max_atoms=6)
        for lam in (0.5, 1.0, 2.0):
            flow = prokhorov(p, q, lam, tol).value
            oracle = prokhorov_oracle(p, q, lam).value
            assert flow == pytest.approx(oracle, abs=2 * tol)


def _max_flow_lp(p, q, d):
    """LP oracle for the greedy coupling sweep: maximize mass on close pairs."""
    n, m = p.n_atoms, q.n_atoms
    allowed = (np.abs(p.atoms[:, None] - q.atoms[None, :]) <= d).ravel()
    c = -allowed.astype(float)
    a_ub = np.zeros((n + m, n * m))
    for i in range(n):
        a_ub[i, i * m : (i + 1) * m] = 1.0
    for j in range(m):
        a_ub[n + j, j::m] = 1.0
    b_ub = np.concatenate([p.probs, q.probs])
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=(0, None), method="highs")
    assert res.success
    return -res.fun


def test_greedy_coupling_sweep_matches_lp():
    rng = np.random.default_rng(23)
    for _ in range(25):
        p = _random_dist(rng, max_atoms=7)
        q = _random_dist(rng, max_atoms=7)
        for d in (0.1, 0.5, 2.0):
            greedy = metrics._max_close_mass(p.atoms, p.probs, q.atoms, q.probs, d)
            assert greedy == pytest.approx(_max_flow_lp(p, q, d), abs=1e-9)


def test_prokhorov_monotone_in_lambda():
    rng = np.random.default_rng(17)
    tol = 1e-6
    for _ in range(10):
        p = _random_dist(rng, max_atoms=6)
        q = _random_dist(rng, max_atoms=6)
        vals = [prokhorov(p, q, lam, tol).value for lam in (0.25, 0.5, 1.0, 2.0, 4.0)]
        for smaller_lam, larger_lam in zip(vals[:-1], vals[1:]):
            assert larger_lam <= smaller_lam + 2 * tol


def test_prokhorov_bounded_by_total_variation():
    rng = np.random.default_rng(29)
    tol = 1e-6
    for _ in range(10):
        p = _random_dist(rng, max_atoms=6)
        q = _random_dist(rng, max_atoms=6)
        tv = total_variation(p, q).value
        for lam in (0.25, 1.0, 4.0):
            assert prokhorov(p, q, lam, tol).value <= tv + 2 * tol


def test_prokhorov_converges_to_tv_for_separated_supports():
    # every inter-atom gap is at least 0.5, so tiny enlargements add nothing
    p = make_discrete([0.0, 1.0], [0.6, 0.4])
    q = make_discrete([2.5, 4.0], [0.5, 0.5])
    tol = 1e-7
    tv = total_variation(p, q).value
    vals = [prokhorov(p, q, lam, tol).value for lam in (4.0, 1.0, 0.1, 0.01, 0.001)]
    assert all(v2 >= v1 - 2 * tol for v1, v2 in zip(vals, vals[1:]))
    assert vals[-1] == pytest.approx(tv, abs=2 * tol)


def test_prokhorov_symmetrized_agrees_with_one_sided():
    rng = np.random.default_rng(31)
    tol = 1e-6
    for _ in range(10):
        p = _random_dist(rng, max_atoms=5)
        q = _random_dist(rng, max_atoms=5)
        one = prokhorov(p, q, 1.0, tol).value
        sym = prokhorov_symmetric(p, q, 1.0, tol).value
        assert sym == pytest.approx(one, abs=2 * tol)


def test_prokhorov_rejects_bad_parameters():
    with pytest.raises(MetricError):
        prokhorov(RAD, RAD, 0.0)
    with pytest.raises(MetricError):
        prokhorov(RAD, RAD, 1.0, tol=0.0)
    big = make_discrete(np.arange(13.0), np.full(13, 1.0 / 13))
    with pytest.raises(MetricError):
        prokhorov_oracle(big, RAD, 1.0)


# ---------------------------------------------------------------------------
# Total variation
# ---------------------------------------------------------------------------


def test_total_variation_examples():
    assert total_variation(RAD, RAD).value == 0.0
    assert total_variation(delta(0.0), delta(1.0)).value == 1.0
    q = make_discrete([-1.0, 0.5, 1.0], [0.25, 0.5, 0.25])
    assert total_variation(RAD, q).value == pytest.approx(0.5, abs=1e-15)


def test_total_variation_vs_continuous_is_one():
    assert total_variation(RAD, STANDARD_NORMAL).value == 1.0
    assert total_variation(discretize_normal(10_000), STANDARD_NORMAL).value == 1.0


# ---------------------------------------------------------------------------
# Shared metric properties
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("metric", ["kolmogorov", "wasserstein", "tv"])
def test_symmetry_exact_metrics(metric):
    rng = np.random.default_rng(37)
    fn = {"kolmogorov": kolmogorov, "wasserstein": wasserstein, "tv": total_variation}[metric]
    for _ in range(10):
        p, q = _random_dist(rng), _random_dist(rng)
        assert fn(p, q).value == pytest.approx(fn(q, p).value, abs=1e-12)


def test_triangle_inequality_spot_checks():
    rng = np.random.default_rng(41)
    tol = 1e-6
    for _ in range(10):
        p, q, r = (_random_dist(rng) for _ in range(3))
        for fn, budget in (
            (kolmogorov, 1e-12),
            (wasserstein, 1e-9),
            (total_variation, 1e-12),
            (lambda a, b: prokhorov(a, b, 1.0, tol), 4 * tol),
        ):
            assert fn(p, r).value <= fn(p, q).value + fn(q, r).value + budget


def test_metric_value_validation():
    with pytest.raises(MetricError):
        MetricValue(-0.1, "exact")
    with pytest.raises(MetricError):
        MetricValue(0.1, "guesswork")


def test_compute_distance_dispatch():
    assert metrics.compute_distance("tv", RAD, STANDARD_NORMAL).value == 1.0
    val = metrics.compute_distance("prokhorov", RAD, STANDARD_NORMAL, lam=1.0)
    assert val.method == "binary_search"
    assert val.error_budget >= metrics.PROKHOROV_DISC_BUDGET_SCALE / metrics.PROKHOROV_DISC_N
    with pytest.raises(MetricError):
        metrics.compute_distance("levy", RAD, RAD)
