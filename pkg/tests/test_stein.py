import numpy as np
import pytest
from scipy.integrate import quad

from clt_lab import stein
from clt_lab.stein import (
    SteinError,
    check_transform_derivative_bounds,
    evaluate_stein,
    from_name,
    gauss_expectation,
    identity,
    library,
    log_cosh_contraction,
    mollify,
    scaled_arctan,
    sigmoid,
    smooth_step,
    stein_derivatives,
    stein_identity_residuals,
    stein_transform,
)


@pytest.fixture(scope="module")
def sigmoid_eval():
    return evaluate_stein(sigmoid())


@pytest.fixture(scope="module")
def library_evals():
    return {h.name: evaluate_stein(h) for h in library()}


# ---------------------------------------------------------------------------
# Expectations
# ---------------------------------------------------------------------------


def test_gauss_expectation_symmetric_functions():
    assert gauss_expectation(sigmoid()) == pytest.approx(0.5, abs=1e-12)
    assert gauss_expectation(scaled_arctan()) == pytest.approx(0.5, abs=1e-12)
    assert gauss_expectation(smooth_step(0.0, 1.0)) == pytest.approx(0.5, abs=1e-12)
    assert gauss_expectation(identity()) == pytest.approx(0.0, abs=1e-12)


def test_gauss_expectation_log_cosh_against_quadrature():
    h = log_cosh_contraction()
    oracle, err = quad(
        lambda t: float(h.eval(t)) * np.exp(-0.5 * t * t) / np.sqrt(2 * np.pi),
        -12.0,
        12.0,
        epsabs=1e-13,
        limit=300,
    )
    assert gauss_expectation(h) == pytest.approx(oracle, abs=1e-11)


# ---------------------------------------------------------------------------
# Pointwise transform
# ---------------------------------------------------------------------------


def test_identity_transform_is_minus_one():
    # int_{-inf}^x t e^{-t^2/2} dt = -e^{-x^2/2} makes f constant
    h = identity()
    for x in (-12.0, -3.0, 0.0, 1.7, 5.0, 12.0, 30.0):
        assert stein_transform(h, x) == pytest.approx(-1.0, abs=1e-10)


def test_transform_overflow_guard():
    with pytest.raises(SteinError):
        stein_transform(identity(), 40.5)


def test_sigmoid_transform_at_zero_two_quadratures():
    h = sigmoid()
    val = stein_transform(h, 0.0)
    assert val < 0.0
    # second, independent quadrature of the defining left integral
    oracle, err = quad(
        lambda t: (float(h.eval(t)) - 0.5) * np.exp(-0.5 * t * t), -40.0, 0.0, epsabs=1e-12, limit=300
    )
    assert err < 1e-7  # quad's estimate is conservative; the agreement is far tighter
    assert val == pytest.approx(oracle, abs=1e-9)


def test_grid_values_match_pointwise_transform(sigmoid_eval):
    ev = sigmoid_eval
    h = sigmoid()
    for x in (-9.7, -1.1, 0.0, 0.4, 3.9, 11.0):
        i = int(np.argmin(np.abs(ev.grid - x)))
        assert ev.f[i] == pytest.approx(stein_transform(h, float(ev.grid[i])), abs=1e-9)


# ---------------------------------------------------------------------------
# Derivatives
# ---------------------------------------------------------------------------


def test_identity_derivatives_vanish():
    h = identity()
    for x in (-2.0, 0.0, 3.3):
        f1, f2 = stein_derivatives(h, x)
        assert abs(f1) <= 1e-9
        assert abs(f2) <= 1e-9


def test_sigmoid_first_derivative_at_zero():
    f1, _ = stein_derivatives(sigmoid(), 0.0)
    assert f1 == pytest.approx(0.0, abs=1e-12)  # h(0) = E h = 1/2


def test_stein_identity_residuals(library_evals):
    for name, ev in library_evals.items():
        assert stein_identity_residuals(ev).max() <= 1e-8, name


def _interior_mask(ev):
    # The central-difference estimator is invalid where h' has a kink (the
    # one-sided second derivatives differ there), so skip a 2-step collar
    # around each breakpoint.
    mask = np.ones(ev.grid.size - 2, dtype=bool)
    inner = ev.grid[1:-1]
    for b in ev.h.breakpoints:
        mask &= np.abs(inner - b) > 2.5e-3
    return mask


def test_second_derivative_matches_finite_differences(library_evals):
    for name, ev in library_evals.items():
        step = ev.grid[2:] - ev.grid[:-2]
        fd = (ev.f1[2:] - ev.f1[:-2]) / step
        mask = _interior_mask(ev)
        assert np.max(np.abs(fd - ev.f2[1:-1])[mask]) <= 1e-5, name


def test_first_derivative_matches_finite_differences(library_evals):
    for name, ev in library_evals.items():
        step = ev.grid[2:] - ev.grid[:-2]
        fd = (ev.f[2:] - ev.f[:-2]) / step
        mask = _interior_mask(ev)
        assert np.max(np.abs(fd - ev.f1[1:-1])[mask]) <= 1e-5, name


def test_evaluation_invariants(library_evals):
    for name, ev in library_evals.items():
        assert ev.osc_f1 <= 2 * ev.sup_f1 + 1e-15, name
        assert ev.osc_f2 <= 2 * ev.sup_f2 + 1e-15, name
        assert ev.stitch_residual <= 1e-10, name
        assert ev.grid[0] <= -12.0 and ev.grid[-1] >= 12.0


def test_identity_evaluation_derivatives_vanish(library_evals):
    ev = library_evals["identity"]
    assert ev.sup_f1 <= 1e-8
    assert ev.sup_f2 <= 1e-8


def test_taylor_remainder_bound(library_evals):
    # |f(a+x) - f(a) - f'(a) x| <= min(osc(f') |x|, 1/2 sup|f''| x^2) up to grid noise
    rng = np.random.default_rng(19)
    for name, ev in library_evals.items():
        n = ev.grid.size
        idx_a = rng.integers(0, n, size=400)
        idx_b = rng.integers(0, n, size=400)
        x = ev.grid[idx_b] - ev.grid[idx_a]
        lhs = np.abs(ev.f[idx_b] - ev.f[idx_a] - ev.f1[idx_a] * x)
        rhs = np.minimum(ev.osc_f1 * np.abs(x), 0.5 * ev.sup_f2 * x * x)
        assert np.all(lhs <= rhs + 1e-6), name


# ---------------------------------------------------------------------------
# Derivative bound checks
# ---------------------------------------------------------------------------


def test_bounds_hold_for_library(library_evals):
    for h in library():
        reports = check_transform_derivative_bounds(h, library_evals[h.name])
        assert len(reports) == (3 if h.range_bounds else 2)
        for r in reports:
            assert r.passed, f"{r.name}: lhs={r.lhs} rhs={r.rhs}"
            assert r.margin >= 0.0


def test_bounds_hold_for_a_mollified_contraction():
    h = mollify(sigmoid(), 0.1)
    for r in check_transform_derivative_bounds(h):
        assert r.passed and r.margin >= 0.0


# ---------------------------------------------------------------------------
# Mollification
# ---------------------------------------------------------------------------

GRID = np.linspace(-12.0, 12.0, 24001)


def test_mollified_identity_is_identity():
    hm = mollify(identity(), 0.3)
    assert np.max(np.abs(hm.eval(GRID) - GRID)) <= 1e-12
    assert np.max(np.abs(hm.deriv(GRID) - 1.0)) == 0.0


@pytest.mark.parametrize("eps", [0.01, 0.1, 0.5])
def test_mollification_closeness_and_contraction(eps):
    for base in (sigmoid(), scaled_arctan(), log_cosh_contraction(), identity()):
        hm = mollify(base, eps)
        assert np.max(np.abs(base.eval(GRID) - hm.eval(GRID))) <= eps
        assert np.max(np.abs(hm.deriv(GRID))) <= 1.0
        assert hm.deriv_bound == base.deriv_bound
        assert hm.range_bounds == base.range_bounds


def test_mollify_rejects_bad_inputs():
    with pytest.raises(SteinError):
        mollify(sigmoid(), 0.0)
    with pytest.raises(SteinError):
        mollify(smooth_step(0.0, 1.0), 0.1)  # slope 1.5 > 1, not a contraction


def test_mollifier_kernel_normalization():
    assert stein.mollifier_normalization_residual() <= 1e-12


# ---------------------------------------------------------------------------
# Library plumbing
# ---------------------------------------------------------------------------


def test_smooth_step_shape():
    h = smooth_step(0.0, 1.0)
    assert h.eval(-0.5) == 0.0
    assert h.eval(0.5) == 1.0
    assert h.eval(0.0) == pytest.approx(0.5)
    xs = np.linspace(-0.5, 0.5, 101)
    np.testing.assert_allclose(h.eval(xs) + h.eval(-xs), 1.0, atol=1e-15)
    assert np.max(h.deriv(xs)) <= h.deriv_bound + 1e-15
    with pytest.raises(SteinError):
        smooth_step(0.0, 0.0)


def test_deriv_bounds_certified_on_grid():
    for h in library():
        assert np.max(np.abs(h.deriv(GRID))) <= h.deriv_bound + 1e-12


def test_range_bounds_certified_on_grid():
    for h in library():
        if h.range_bounds is not None:
            lo, hi = h.range_bounds
            vals = h.eval(GRID)
            assert vals.min() >= lo - 1e-12
            assert vals.max() <= hi + 1e-12


def test_from_name_parsing():
    assert from_name("sigmoid").name == "sigmoid"
    assert from_name("smooth_step:0.5:2").name == "smooth_step(0.5,2)"
    assert from_name("log_cosh").name == "log_cosh_contraction"
    assert from_name("mollified:sigmoid:0.1").name == "mollified(sigmoid,0.1)"
    with pytest.raises(SteinError):
        from_name("polynomial")
    with pytest.raises(SteinError):
        from_name("mollified:sigmoid")
