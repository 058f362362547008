"""The verification harness: every checked inequality, plus suite runners.

Each check computes both sides of one finite-n inequality with exact (or
certified) arithmetic and wraps them in a ``BoundReport``:

* ``stein_inequality_check``   |E h(Z) - E h(S_n)| against the three-term
  right side built from the Stein-transform derivative bounds (the truncated
  second moment here uses the closed condition |cell| >= eps).
* ``tail_cubic_bound_check``   Kolmogorov distance to the normal against
  C * (tail second moments above 1 + cubic moments up to 1), C = 4.1.
* ``truncated_tail_bound_check``  the eps-form: K <= C * (L_n(eps) + eps),
  with the strict condition |cell| > eps in L_n.
* ``aclt_estimate``            asymptotic-distance proxy at the largest
  scheduled n against C_metric * (Lindeberg index estimate); the finite-n
  convergence allowance is explicit and reported.
* ``tv_counterexample``        total variation against the normal stays
  exactly 1 for the lattice family while the Kolmogorov distance vanishes and
  the Lindeberg profile is identically zero.
* ``prokhorov_duality_diagnostic``  traces max_lambda rho_lambda and the
  largest smooth-test-function gap along an n-schedule; nothing is asserted
  because the underlying statement is about limits.

Truncation boundaries follow the printed conventions exactly: >= eps in the
Stein inequality, > eps in the Lindeberg sum, > 1 / <= 1 in the tail-cubic
split.  Atoms landing exactly on a boundary are covered by dedicated tests.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import arrays, metrics, stein
from .arrays import ArrayFamily
from .dist import DiscreteDistribution, StandardNormal, discretize_normal, make_discrete
from .metrics import PROKHOROV_DISC_BUDGET_SCALE, PROKHOROV_DISC_N
from .reports import BoundReport

NORMAL = StandardNormal()

OSIPOV_CONSTANT = 4.1
ACLT_CONSTANTS = {"K": 1.0, "W": 8.0, "P": 4.0}
# Finite-n convergence allowance added (and reported) by aclt_estimate; the
# Prokhorov one also covers the atom-vs-atom graininess of measuring a lattice
# law against the discretized normal (about 0.04 at lambda = 0.25, N = 1e4).
ACLT_ALLOWANCES = {"K": 0.02, "W": 0.02, "P": 0.06}
DEFAULT_LAMBDA_GRID = (0.25, 0.5, 1.0, 2.0, 4.0)
DEFAULT_EPS_PROFILE = tuple(np.round(np.arange(0.05, 1.0, 0.05), 10))

QUADRATURE_BUDGET = 1e-12


def rademacher_base() -> DiscreteDistribution:
    return make_discrete([-1.0, 1.0], [0.5, 0.5])


def default_families() -> list[ArrayFamily]:
    """The configured acceptance fixtures."""
    return [
        arrays.rademacher(),
        arrays.iid_scaled(rademacher_base()),
        arrays.jump(0.1),
        arrays.jump(0.4),
    ]


def default_prune_tol(fam: ArrayFamily, n: int) -> float:
    """Exact convolution wherever cheap; the jump family prunes at 1e-12 above n=64."""
    if fam.kind == "jump" and n > 64:
        return 1e-12
    return 0.0


class _RowSumCache:
    def __init__(self):
        self._laws: dict[tuple[ArrayFamily, int, float], DiscreteDistribution] = {}

    def get(self, fam: ArrayFamily, n: int, prune_tol: float | None = None) -> DiscreteDistribution:
        tol = default_prune_tol(fam, n) if prune_tol is None else prune_tol
        key = (fam, n, tol)
        law = self._laws.get(key)
        if law is None:
            law = arrays.row_sum_exact(fam, n, prune_tol=tol)
            self._laws[key] = law
        return law


_shared_cache = _RowSumCache()


def _h_expectation(h: stein.TestFunction, law: DiscreteDistribution) -> tuple[float, float]:
    """(E h(S), pruning budget) for a row-sum law."""
    values = np.asarray(h.eval(law.atoms), dtype=np.float64)
    spread = float(values.max() - values.min()) if values.size > 1 else 1.0
    return float(values @ law.probs), law.pruned_mass * max(spread, 1.0)


def stein_inequality_check(
    fam: ArrayFamily,
    n: int,
    h: stein.TestFunction,
    eps: float,
    prune_tol: float | None = None,
    rowsum: DiscreteDistribution | None = None,
    ev: stein.SteinEvaluation | None = None,
    cache: _RowSumCache | None = None,
) -> BoundReport:
    """Check the smooth-test-function inequality for one (family, n, h, eps) cell."""
    if eps <= 0:
        raise ValueError("eps must be > 0")
    cache = cache or _shared_cache
    law = rowsum if rowsum is not None else cache.get(fam, n, prune_tol)
    ev = ev or stein.cached_evaluation(h)
    cell = arrays.cell_distribution(fam, n)

    mean_h = ev.mean_h
    e_h_sum, prune_budget = _h_expectation(h, law)
    lhs = abs(mean_h - e_h_sum)

    truncated = n * cell.truncated_second_moment(eps, strict=False)  # closed: |cell| >= eps
    max_abs_first = cell.abs_moment(1.0)
    rhs = 0.5 * ev.sup_f2 * eps + ev.osc_f1 * truncated + ev.osc_f2 * max_abs_first

    return BoundReport(
        name=f"stein_inequality[{fam.label},n={n},{h.name},eps={eps:g}]",
        lhs=lhs,
        rhs=rhs,
        lhs_method="exact",
        error_budget=QUADRATURE_BUDGET + prune_budget,
        params={
            "family": fam.label,
            "n": n,
            "h": h.name,
            "eps": eps,
            "truncated_second_moment": truncated,
            "max_abs_first_moment": max_abs_first,
            "sup_f2": ev.sup_f2,
            "osc_f1": ev.osc_f1,
            "osc_f2": ev.osc_f2,
            "pruned_mass": law.pruned_mass,
        },
    )


def tail_cubic_bound_check(
    fam: ArrayFamily,
    n: int,
    constant: float = OSIPOV_CONSTANT,
    prune_tol: float | None = None,
    cache: _RowSumCache | None = None,
) -> BoundReport:
    """K(row sum, normal) <= C * (tail above 1 + cubic part up to 1)."""
    cache = cache or _shared_cache
    law = cache.get(fam, n, prune_tol)
    cell = arrays.cell_distribution(fam, n)
    kv = metrics.kolmogorov(law, NORMAL)
    tail = n * cell.truncated_second_moment(1.0, strict=True)
    cubic = n * cell.truncated_abs_moment(3.0, 1.0)
    rhs = constant * (tail + cubic)
    return BoundReport(
        name=f"tail_cubic_bound[{fam.label},n={n}]",
        lhs=kv.value,
        rhs=rhs,
        lhs_method="exact",
        error_budget=kv.error_budget + 1e-9,
        params={"family": fam.label, "n": n, "C": constant, "tail": tail, "cubic": cubic},
    )


def truncated_tail_bound_check(
    fam: ArrayFamily,
    n: int,
    eps: float,
    constant: float = OSIPOV_CONSTANT,
    prune_tol: float | None = None,
    cache: _RowSumCache | None = None,
) -> BoundReport:
    """K(row sum, normal) <= C * (L_n(eps) + eps) with the strict Lindeberg truncation."""
    if eps <= 0:
        raise ValueError("eps must be > 0")
    cache = cache or _shared_cache
    law = cache.get(fam, n, prune_tol)
    kv = metrics.kolmogorov(law, NORMAL)
    lsum = arrays.lindeberg_sum(fam, n, eps)
    rhs = constant * (lsum + eps)
    return BoundReport(
        name=f"truncated_tail_bound[{fam.label},n={n},eps={eps:g}]",
        lhs=kv.value,
        rhs=rhs,
        lhs_method="exact",
        error_budget=kv.error_budget + 1e-9,
        params={"family": fam.label, "n": n, "eps": eps, "C": constant, "lindeberg_sum": lsum},
    )


def aclt_estimate(
    fam: ArrayFamily,
    metric: str,
    n_schedule,
    lambda_grid=DEFAULT_LAMBDA_GRID,
    eps_grid=DEFAULT_EPS_PROFILE,
    prune_tol: float | None = None,
    disc_n: int = PROKHOROV_DISC_N,
    tol: float = 1e-6,
    constant: float | None = None,
    allowance: float | None = None,
    cache: _RowSumCache | None = None,
) -> BoundReport:
    """Asymptotic-normality bound at desk scale for one (family, metric) pair.

    The left side is the distance at the largest scheduled n (the asymptotic
    proxy; the full trace is reported), the right side C_metric times the
    Lindeberg index estimate.  For the Prokhorov metric the check runs at
    every lambda in the grid and keeps the largest distance.  If the largest
    per-cell variance does not shrink along the schedule the report refuses
    certification and is marked diagnostic-only.
    """
    if metric not in ACLT_CONSTANTS:
        raise ValueError(f"metric must be one of {sorted(ACLT_CONSTANTS)}")
    cache = cache or _shared_cache
    ns = sorted(int(n) for n in n_schedule)
    if not ns:
        raise ValueError("n_schedule must be nonempty")

    profile = arrays.lindeberg_profile(fam, ns, eps_grid)
    feller = np.asarray(profile.feller)
    feller_ok = bool(np.all(np.diff(feller) <= 1e-12)) and feller[-1] <= feller[0]

    c = ACLT_CONSTANTS[metric] if constant is None else constant
    allow = ACLT_ALLOWANCES[metric] if allowance is None else allowance

    reference = discretize_normal(disc_n) if metric == "P" else None
    trace: list[float] = []
    per_lambda_last: dict[str, float] = {}
    numeric_budget = 0.0
    for n in ns:
        law = cache.get(fam, n, prune_tol)
        if metric == "K":
            mv = metrics.kolmogorov(law, NORMAL)
            value, numeric_budget = mv.value, mv.error_budget
        elif metric == "W":
            mv = metrics.wasserstein(law, NORMAL)
            value, numeric_budget = mv.value, mv.error_budget
        else:
            value, numeric_budget = 0.0, 0.0
            for lam in lambda_grid:
                mv = metrics.prokhorov_vs_normal(law, lam, tol=tol, disc_n=disc_n, reference=reference)
                if n == ns[-1]:
                    per_lambda_last[f"{lam:g}"] = mv.value
                if mv.value > value:
                    value, numeric_budget = mv.value, mv.error_budget
        trace.append(value)

    index = profile.index_estimate
    rhs = c * index
    params = {
        "family": fam.label,
        "metric": metric,
        "n_schedule": ns,
        "trace": trace,
        "trend": arrays._trend(np.asarray(trace), tol=1e-9),
        "index_estimate": index,
        "constant": c,
        "allowance": allow,
        "numeric_budget": numeric_budget,
        "feller_trace": list(profile.feller),
    }
    if metric == "P":
        params["lambda_grid"] = list(lambda_grid)
        params["per_lambda"] = per_lambda_last
        params["disc_n"] = disc_n
    return BoundReport(
        name=f"aclt[{metric},{fam.label}]",
        lhs=trace[-1],
        rhs=rhs,
        lhs_method="exact",
        error_budget=numeric_budget + allow,
        params=params,
        certified=feller_ok,
        notes="" if feller_ok else "largest cell variance not shrinking along the schedule: diagnostic only",
    )


def tv_counterexample(
    n_schedule=(1, 2, 5, 10, 50, 100, 1000, 10_000),
    kolmogorov_threshold: float = 0.005,
    cache: _RowSumCache | None = None,
) -> list[BoundReport]:
    """Total variation against the normal is identically 1 for the lattice family.

    One report per n asserts TV(row sum, normal) == 1 exactly while the
    Kolmogorov trace and the (identically zero) truncated second moments ride
    along in params; two summary rows assert the vanishing Kolmogorov distance
    at the largest n and the all-zero Lindeberg profile.
    """
    cache = cache or _shared_cache
    fam = arrays.rademacher()
    ns = sorted(int(n) for n in n_schedule)
    reports: list[BoundReport] = []
    k_last = 0.0
    k_budget = 0.0
    worst_lindeberg = 0.0
    for n in ns:
        law = cache.get(fam, n)
        tv = metrics.total_variation(law, NORMAL)
        kv = metrics.kolmogorov(law, NORMAL)
        k_last, k_budget = kv.value, kv.error_budget
        # Strict truncation means eps = n^{-1/2} (the atom magnitude) already gives 0;
        # the profile is only claimed to vanish from that threshold upward.
        atom = 1.0 / np.sqrt(n)
        lsums = {f"{eps:g}": arrays.lindeberg_sum(fam, n, eps) for eps in sorted({atom, max(0.5, atom), 1.0})}
        worst_lindeberg = max(worst_lindeberg, max(lsums.values()))
        reports.append(
            BoundReport(
                name=f"tv_equals_one[n={n}]",
                lhs=abs(tv.value - 1.0),
                rhs=0.0,
                lhs_method="exact",
                error_budget=0.0,
                params={"n": n, "tv": tv.value, "kolmogorov": kv.value, "lindeberg_sums": lsums},
            )
        )
    reports.append(
        BoundReport(
            name=f"tv_counterexample_kolmogorov[n={ns[-1]}]",
            lhs=k_last,
            rhs=kolmogorov_threshold,
            lhs_method="exact",
            error_budget=k_budget,
            params={"n": ns[-1], "threshold": kolmogorov_threshold},
        )
    )
    reports.append(
        BoundReport(
            name="tv_counterexample_lindeberg_profile",
            lhs=worst_lindeberg,
            rhs=0.0,
            lhs_method="exact",
            error_budget=0.0,
            params={"n_schedule": ns, "eps_rule": "n^-1/2 and beyond"},
        )
    )
    return reports


def diagnostic_h_library() -> list[stein.TestFunction]:
    """Smooth [0,1]-valued functions for the duality diagnostic.

    Off-center ramps are essential: the symmetric library members have
    expectation exactly 1/2 under every symmetric law, which would make the
    gap trace identically zero.
    """
    return stein.unit_range_functions() + [
        stein.smooth_step(0.5, 1.0),
        stein.smooth_step(-0.75, 1.5),
        stein.smooth_step(1.0, 2.0),
        stein.smooth_step(-0.25, 0.5),
    ]


def prokhorov_duality_diagnostic(
    fam: ArrayFamily,
    n_schedule=(50, 200, 1000),
    lambda_grid=DEFAULT_LAMBDA_GRID,
    h_library: list[stein.TestFunction] | None = None,
    disc_n: int = PROKHOROV_DISC_N,
    tol: float = 1e-6,
    prune_tol: float | None = None,
    cache: _RowSumCache | None = None,
) -> dict:
    """Trace max_lambda rho_lambda(reference, row sum) against the largest
    smooth-[0,1]-function expectation gap along the schedule.

    No inequality is asserted: the two quantities agree only in the limit.
    """
    cache = cache or _shared_cache
    hs = h_library if h_library is not None else diagnostic_h_library()
    reference = discretize_normal(disc_n)
    rows = []
    for n in sorted(int(n) for n in n_schedule):
        law = cache.get(fam, n, prune_tol)
        rho = {f"{lam:g}": metrics.prokhorov(reference, law, lam, tol).value for lam in lambda_grid}
        gaps = {h.name: abs(stein.gauss_expectation(h) - _h_expectation(h, law)[0]) for h in hs}
        rows.append(
            {
                "n": n,
                "rho_max": max(rho.values()),
                "rho_per_lambda": rho,
                "h_gap_max": max(gaps.values()),
                "h_gap_per_h": gaps,
            }
        )
    return {
        "family": fam.label,
        "lambda_grid": list(lambda_grid),
        "h_library": [h.name for h in hs],
        "disc_n": disc_n,
        "rows": rows,
    }


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------

MATRIX_N = (2, 10, 50, 200)
MATRIX_EPS = (0.1, 0.3, 0.6, 1.0)


@dataclass
class SuiteConfig:
    """Knobs shared by the verify suites; fields default to the acceptance matrix."""

    n_values: tuple = MATRIX_N
    eps_values: tuple = MATRIX_EPS
    lambda_grid: tuple = DEFAULT_LAMBDA_GRID
    prune_tol: float | None = None  # None = per-(family, n) default policy
    tol: float = 1e-6
    reps: int = 1_000_000
    seed: int = 7
    threads: int = 1
    constant: float | None = None
    families: list[ArrayFamily] = field(default_factory=default_families)


def _run_parallel(jobs, threads: int):
    if threads <= 1:
        return [job() for job in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(job) for job in jobs]
        return [f.result() for f in futures]


def suite_stein_inequality(config: SuiteConfig | None = None) -> list[BoundReport]:
    config = config or SuiteConfig()
    cache = _RowSumCache()
    hs = stein.library()
    for h in hs:  # warm the evaluation cache serially
        stein.cached_evaluation(h)
    for fam in config.families:
        for n in config.n_values:
            cache.get(fam, n, config.prune_tol)
    jobs = []
    for fam in config.families:
        for n in config.n_values:
            for h in hs:
                for eps in config.eps_values:
                    jobs.append(
                        lambda fam=fam, n=n, h=h, eps=eps: stein_inequality_check(
                            fam, n, h, eps, prune_tol=config.prune_tol, cache=cache
                        )
                    )
    return _run_parallel(jobs, config.threads)


def _tail_cubic_schedule(fam: ArrayFamily) -> list[int]:
    ns = list(range(1, 201)) + [1000]
    if fam.kind == "rademacher":
        ns.append(10_000)
    return ns


def suite_tail_cubic(config: SuiteConfig | None = None) -> list[BoundReport]:
    config = config or SuiteConfig()
    cache = _RowSumCache()
    jobs = []
    for fam in config.families:
        for n in _tail_cubic_schedule(fam):
            jobs.append(
                lambda fam=fam, n=n: tail_cubic_bound_check(
                    fam, n, constant=config.constant or OSIPOV_CONSTANT, prune_tol=config.prune_tol, cache=cache
                )
            )
    return _run_parallel(jobs, config.threads)


def suite_truncated_tail(config: SuiteConfig | None = None) -> list[BoundReport]:
    config = config or SuiteConfig()
    cache = _RowSumCache()
    jobs = []
    for fam in config.families:
        for n in config.n_values:
            for eps in config.eps_values:
                jobs.append(
                    lambda fam=fam, n=n, eps=eps: truncated_tail_bound_check(
                        fam, n, eps, constant=config.constant or OSIPOV_CONSTANT, prune_tol=config.prune_tol, cache=cache
                    )
                )
    return _run_parallel(jobs, config.threads)


def aclt_schedule(fam: ArrayFamily) -> tuple[int, ...]:
    if fam.kind == "jump":
        return (250, 500, 1000, 2000)
    return (100, 1000, 10_000)


def aclt_families() -> list[ArrayFamily]:
    return [
        arrays.rademacher(),
        arrays.iid_scaled(rademacher_base()),
        arrays.jump(0.1),
        arrays.jump(0.2),
        arrays.jump(0.4),
    ]


def suite_aclt(config: SuiteConfig | None = None, families: list[ArrayFamily] | None = None) -> list[BoundReport]:
    config = config or SuiteConfig()
    cache = _RowSumCache()
    fams = families if families is not None else aclt_families()
    reports = []
    for fam in fams:
        for metric in ("K", "W", "P"):
            reports.append(
                aclt_estimate(
                    fam,
                    metric,
                    aclt_schedule(fam),
                    lambda_grid=config.lambda_grid,
                    prune_tol=config.prune_tol,
                    tol=config.tol,
                    cache=cache,
                )
            )
    return reports


def suite_tv(config: SuiteConfig | None = None) -> list[BoundReport]:
    return tv_counterexample()


def suite_duality_diagnostic(config: SuiteConfig | None = None) -> list[BoundReport]:
    """Wrap the duality diagnostic rows as always-pass records (nothing asserted)."""
    config = config or SuiteConfig()
    reports = []
    for fam in (arrays.rademacher(), arrays.jump(0.4)):
        diag = prokhorov_duality_diagnostic(fam, lambda_grid=config.lambda_grid, tol=config.tol)
        for row in diag["rows"]:
            reports.append(
                BoundReport(
                    name=f"prokhorov_vs_smooth_gap[{fam.label},n={row['n']}]",
                    lhs=0.0,
                    rhs=0.0,
                    lhs_method="exact",
                    error_budget=0.0,
                    params={**row, "family": fam.label, "lambda_grid": diag["lambda_grid"]},
                    notes="diagnostic trace; the equality holds only in the limit",
                )
            )
    return reports


def suite_monte_carlo(config: SuiteConfig | None = None) -> list[BoundReport]:
    """Empirical row-sum laws stay inside the DKW band around the exact laws."""
    config = config or SuiteConfig()
    cache = _RowSumCache()
    reports = []
    band = arrays.dkw_band(config.reps, delta=1e-3)
    for fam in config.families:
        exact = cache.get(fam, 500, config.prune_tol)
        empirical = arrays.row_sum_sample(fam, 500, config.reps, config.seed)
        kv = metrics.kolmogorov(exact, empirical)
        reports.append(
            BoundReport(
                name=f"dkw_band[{fam.label},n=500,reps={config.reps}]",
                lhs=kv.value,
                rhs=band,
                lhs_method="monte_carlo",
                error_budget=kv.error_budget,
                params={"family": fam.label, "n": 500, "reps": config.reps, "seed": config.seed, "delta": 1e-3},
            )
        )
    return reports


SUITES = {
    "thm32": suite_stein_inequality,
    "thm12": suite_tail_cubic,
    "eps": suite_truncated_tail,
    "aclt": suite_aclt,
    "tv": suite_tv,
    "lemma45": suite_duality_diagnostic,
    "mc": suite_monte_carlo,
}


def run_suite(name: str, config: SuiteConfig | None = None) -> list[BoundReport]:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    return SUITES[name](config)
