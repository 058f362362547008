"""Probability metrics between finitely supported laws and the normal law.

Four metrics are provided, each as an exact (or certified-tolerance)
computation, plus independent brute-force oracles used by the test suite:

* ``kolmogorov`` -- sup-norm distance between CDFs.  Staircase-vs-staircase is
  a max over the union of atoms; staircase-vs-continuous scans both one-sided
  limits at every atom, where the supremum is attained.
* ``wasserstein`` -- the L1 area between CDFs.  Discrete-discrete is a
  piecewise-constant integral; discrete-vs-normal uses the closed antiderivative
  int Phi = x*Phi(x) + phi(x) on every inter-atom interval, tails included in
  closed form.  ``wasserstein_oracle`` solves the primal transport LP instead.
* ``prokhorov`` -- the parametrized Prokhorov distance rho_lambda, computed by
  binary search on alpha; feasibility of a given alpha is a maximum-flow
  question on the bipartite atom graph with the closed window |x - y| <=
  lambda*alpha, solved by a greedy sweep that is exact because both atom sets
  are sorted and the windows move monotonically.  ``prokhorov_oracle``
  enumerates all subsets of the left support instead.
* ``total_variation`` -- half the l1 distance over the atom union; exactly 1
  against any atomless law (mutual singularity).

Numerical conventions: every value against the normal inherits an absolute
error floor of 1e-14 from the normal CDF evaluation; pruned mass carried on
either argument is added to ``error_budget``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.special import ndtr, ndtri

from .dist import (
    ATOM_MERGE_TOL,
    DiscreteDistribution,
    GaussianSkellamMixture,
    StandardNormal,
)

NORMAL_CDF_FLOOR = 1e-14
PROKHOROV_DEFAULT_TOL = 1e-6
# Flow bookkeeping noise: sums of ~1e5 masses at double precision.
FLOW_NOISE = 1e-9


class MetricError(ValueError):
    """Invalid metric computation request."""


@dataclass(frozen=True)
class MetricValue:
    """A computed distance with its method tag and certified error budget."""

    value: float
    method: str  # "exact" | "binary_search" | "monte_carlo"
    error_budget: float = 0.0

    def __post_init__(self):
        if self.value < 0 or self.error_budget < 0:
            raise MetricError("metric value and error budget must be >= 0")
        if self.method not in ("exact", "binary_search", "monte_carlo"):
            raise MetricError(f"unknown method {self.method!r}")


def _is_continuous(law) -> bool:
    return isinstance(law, (StandardNormal, GaussianSkellamMixture))


# ---------------------------------------------------------------------------
# Kolmogorov
# ---------------------------------------------------------------------------


def _union_eval_points(p: DiscreteDistribution, q: DiscreteDistribution) -> np.ndarray:
    """Union of atoms with near-duplicates (within the merge tolerance)
    identified; each cluster is represented by its largest member so both CDFs
    are evaluated strictly after every jump of the cluster."""
    xs = np.sort(np.concatenate([p.atoms, q.atoms]))
    if xs.size <= 1:
        return xs
    is_last = np.empty(xs.size, dtype=bool)
    np.greater(np.diff(xs), ATOM_MERGE_TOL, out=is_last[:-1])
    is_last[-1] = True
    return xs[is_last]


def kolmogorov(p: DiscreteDistribution, q) -> MetricValue:
    """sup_x |F_p(x) - F_q(x)|, exact for the supported law pairs."""
    if isinstance(q, DiscreteDistribution):
        xs = _union_eval_points(p, q)
        value = float(np.max(np.abs(p.cdf(xs) - q.cdf(xs))))
        budget = p.pruned_mass + q.pruned_mass
        return MetricValue(value, "exact", budget)
    if _is_continuous(q):
        g = q.cdf(p.atoms)
        right = np.abs(p.cdf(p.atoms) - g)
        left = np.abs(p.cdf_left(p.atoms) - g)
        value = float(max(right.max(), left.max()))
        return MetricValue(value, "exact", p.pruned_mass + NORMAL_CDF_FLOOR)
    raise MetricError(f"unsupported law type {type(q).__name__}")


# ---------------------------------------------------------------------------
# Wasserstein
# ---------------------------------------------------------------------------


def _wasserstein_discrete(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    xs = np.unique(np.concatenate([p.atoms, q.atoms]))
    diff = np.abs(p.cdf(xs[:-1]) - q.cdf(xs[:-1]))
    return float(diff @ np.diff(xs))


def _normal_cdf_area(x: np.ndarray) -> np.ndarray:
    """Antiderivative of Phi: int_{-inf}^x Phi(t) dt = x*Phi(x) + phi(x)."""
    return x * ndtr(x) + np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)


def _wasserstein_vs_normal(p: DiscreteDistribution) -> float:
    a = p.atoms
    big_psi = _normal_cdf_area(a)
    phi_a = ndtr(a)
    # Tails: F_p = 0 left of the first atom, 1 right of the last.
    total = float(big_psi[0]) + float(big_psi[-1] - a[-1])
    if p.n_atoms == 1:
        return total
    lo, hi = a[:-1], a[1:]
    c = p.cdf(lo)
    psi_lo, psi_hi = big_psi[:-1], big_psi[1:]
    phi_lo, phi_hi = phi_a[:-1], phi_a[1:]
    below = c * (hi - lo) - (psi_hi - psi_lo)  # Phi <= c on the whole interval
    above = (psi_hi - psi_lo) - c * (hi - lo)  # Phi >= c on the whole interval
    inner = np.clip(c, 1e-300, 1.0 - 1e-16)
    xs = ndtri(inner)
    crossing = 2.0 * (c * xs - _normal_cdf_area(xs)) - (c * lo - psi_lo) + (psi_hi - c * hi)
    seg = np.where(phi_hi <= c, below, np.where(phi_lo >= c, above, crossing))
    return total + float(seg.sum())


def wasserstein(p: DiscreteDistribution, q) -> MetricValue:
    """int |F_p - F_q| dx, exact via piecewise closed forms."""
    if isinstance(q, DiscreteDistribution):
        value = _wasserstein_discrete(p, q)
        span = max(p.support_range(), q.support_range(), 1.0)
        budget = (p.pruned_mass + q.pruned_mass) * span
        return MetricValue(value, "exact", budget)
    if isinstance(q, StandardNormal):
        value = _wasserstein_vs_normal(p)
        span = max(p.support_range(), 12.0)
        budget = p.pruned_mass * span + 1e-12
        return MetricValue(value, "exact", budget)
    raise MetricError(f"unsupported law type {type(q).__name__}")


def wasserstein_oracle(p: DiscreteDistribution, q: DiscreteDistribution) -> MetricValue:
    """Transport LP over the atom bipartite graph (supports <= 64 atoms each)."""
    n, m = p.n_atoms, q.n_atoms
    if n > 64 or m > 64:
        raise MetricError("oracle supports at most 64 atoms per side")
    cost = np.abs(p.atoms[:, None] - q.atoms[None, :]).ravel()
    a_eq = np.zeros((n + m - 1, n * m))
    for i in range(n):
        a_eq[i, i * m : (i + 1) * m] = 1.0
    for j in range(m - 1):  # last column constraint is redundant
        a_eq[n + j, j::m] = 1.0
    b_eq = np.concatenate([p.probs, q.probs[:-1]])
    res = linprog(cost, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if not res.success:
        raise MetricError(f"transport LP failed: {res.message}")
    return MetricValue(float(res.fun), "exact", 1e-9)


# ---------------------------------------------------------------------------
# Parametrized Prokhorov
# ---------------------------------------------------------------------------


def _max_close_mass(
    px: np.ndarray, pm: np.ndarray, qx: np.ndarray, qm: np.ndarray, d: float
) -> float:
    """Maximum coupling mass placeable on pairs with |x - y| <= d.

    Greedy left-to-right sweep: each left atom consumes remaining right mass
    from the smallest eligible right atom upward.  Because the windows
    [x - d, x + d] shift right with x, the leftmost eligible right mass is
    usable by the fewest future left atoms, so this greedy is optimal (the
    standard exchange argument for convex bipartite flows).
    """
    total = 0.0
    rem = qm.copy()
    nq = qx.size
    j = 0
    for i in range(px.size):
        lo = px[i] - d
        hi = px[i] + d
        while j < nq and (qx[j] < lo or rem[j] <= 0.0):
            j += 1
        need = pm[i]
        k = j
        while need > 0.0 and k < nq and qx[k] <= hi:
            take = rem[k] if rem[k] < need else need
            if take > 0.0:
                rem[k] -= take
                total += take
                need -= take
            if rem[k] <= 0.0 and k == j:
                j += 1
            k += 1
    return total


def _prokhorov_feasible(p: DiscreteDistribution, q: DiscreteDistribution, lam: float, alpha: float) -> bool:
    if alpha >= 1.0:
        return True
    moved = _max_close_mass(p.atoms, p.probs, q.atoms, q.probs, lam * alpha)
    return moved >= 1.0 - alpha - FLOW_NOISE


def prokhorov(
    p: DiscreteDistribution,
    q: DiscreteDistribution,
    lam: float,
    tol: float = PROKHOROV_DEFAULT_TOL,
    extra_budget: float = 0.0,
) -> MetricValue:
    """One-sided parametrized Prokhorov distance rho_lambda(p, q).

    Returns the smallest alpha (within ``tol``) such that a coupling places
    mass >= 1 - alpha on pairs closer than lambda*alpha; by the max-flow /
    min-cut duality this is exactly inf{alpha : p[A] <= q[A^(lambda alpha)] +
    alpha for all A}.
    """
    if lam <= 0:
        raise MetricError("lambda must be > 0")
    if tol <= 0:
        raise MetricError("tol must be > 0")
    lo, hi = 0.0, 1.0
    if _prokhorov_feasible(p, q, lam, 0.0):
        return MetricValue(0.0, "binary_search", tol + extra_budget)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _prokhorov_feasible(p, q, lam, mid):
            hi = mid
        else:
            lo = mid
    budget = tol + FLOW_NOISE + p.pruned_mass + q.pruned_mass + extra_budget
    return MetricValue(hi, "binary_search", budget)


def prokhorov_symmetric(
    p: DiscreteDistribution,
    q: DiscreteDistribution,
    lam: float,
    tol: float = PROKHOROV_DEFAULT_TOL,
) -> MetricValue:
    """max of the two one-sided distances (they coincide for atomic laws)."""
    a = prokhorov(p, q, lam, tol)
    b = prokhorov(q, p, lam, tol)
    return MetricValue(max(a.value, b.value), "binary_search", max(a.error_budget, b.error_budget))


def prokhorov_oracle(p: DiscreteDistribution, q: DiscreteDistribution, lam: float) -> MetricValue:
    """Subset-enumeration oracle for rho_lambda (p support <= 12 atoms).

    For every A in the power set of p's support, the critical alpha solving
    p[A] <= q[A^(lambda alpha)] + alpha is found by bisection of the monotone
    scalar condition (all subsets bisected in lockstep); the distance is the
    largest critical alpha.  Only subsets of p's support matter because p is
    atomic.
    """
    if lam <= 0:
        raise MetricError("lambda must be > 0")
    n = p.n_atoms
    if n > 12:
        raise MetricError("oracle supports at most 12 atoms on the left")
    n_subsets = 1 << n
    masks = (np.arange(n_subsets)[:, None] >> np.arange(n)[None, :]) & 1  # (subsets, p atoms)
    p_mass = masks @ p.probs
    dmat = np.abs(q.atoms[:, None] - p.atoms[None, :])  # (q atoms, p atoms)
    # Distance from each q atom to each subset; empty selections give +inf.
    big = np.where(masks[:, None, :].astype(bool), dmat[None, :, :], np.inf)
    dmin = big.min(axis=2)  # (subsets, q atoms)

    def enlarged_mass(alpha: np.ndarray) -> np.ndarray:
        return (dmin <= lam * alpha[:, None]) @ q.probs

    lo = np.zeros(n_subsets)
    hi = np.ones(n_subsets)
    done = enlarged_mass(lo) >= p_mass  # already satisfied at alpha = 0
    for _ in range(48):
        mid = 0.5 * (lo + hi)
        feasible = enlarged_mass(mid) + mid >= p_mass
        hi = np.where(feasible, mid, hi)
        lo = np.where(feasible, lo, mid)
    hi = np.where(done, 0.0, hi)
    return MetricValue(float(hi.max(initial=0.0)), "binary_search", 1e-12)


# ---------------------------------------------------------------------------
# Total variation
# ---------------------------------------------------------------------------


def total_variation(p: DiscreteDistribution, q) -> MetricValue:
    """sup_A |p[A] - q[A]|: half-l1 for atomic pairs, exactly 1 vs atomless laws."""
    if isinstance(q, DiscreteDistribution):
        atoms = np.concatenate([p.atoms, q.atoms])
        signed = np.concatenate([p.probs, -q.probs])
        order = np.argsort(atoms, kind="stable")
        atoms, signed = atoms[order], signed[order]
        new_group = np.empty(atoms.size, dtype=bool)
        new_group[0] = True
        np.greater(np.diff(atoms), ATOM_MERGE_TOL, out=new_group[1:])
        gid = np.cumsum(new_group) - 1
        net = np.bincount(gid, weights=signed)
        value = 0.5 * float(np.abs(net).sum())
        return MetricValue(min(value, 1.0), "exact", p.pruned_mass + q.pruned_mass)
    if _is_continuous(q):
        # An atomic law and an atomless law are mutually singular.
        return MetricValue(1.0, "exact", 0.0)
    raise MetricError(f"unsupported law type {type(q).__name__}")


# Prokhorov against the continuous normal is computed against an equal-mass
# discretization with this many atoms; the associated budget scales as 1/N.
PROKHOROV_DISC_N = 10_000
PROKHOROV_DISC_BUDGET_SCALE = 10.0


def prokhorov_vs_normal(
    p: DiscreteDistribution,
    lam: float,
    tol: float = PROKHOROV_DEFAULT_TOL,
    disc_n: int = PROKHOROV_DISC_N,
    reference: DiscreteDistribution | None = None,
) -> MetricValue:
    """rho_lambda against discretize_normal(disc_n), discretization budget added."""
    from .dist import discretize_normal

    q = reference if reference is not None else discretize_normal(disc_n)
    return prokhorov(p, q, lam, tol, extra_budget=PROKHOROV_DISC_BUDGET_SCALE / disc_n)


def compute_distance(metric: str, p, q, lam: float = 1.0, tol: float = PROKHOROV_DEFAULT_TOL) -> MetricValue:
    """Dispatch used by the CLI: metric in {kolmogorov, wasserstein, prokhorov, tv}."""
    if metric == "kolmogorov":
        return kolmogorov(p, q)
    if metric == "wasserstein":
        return wasserstein(p, q)
    if metric == "prokhorov":
        if isinstance(q, StandardNormal):
            return prokhorov_vs_normal(p, lam, tol)
        if not isinstance(q, DiscreteDistribution):
            raise MetricError("prokhorov requires finitely supported laws or the normal")
        return prokhorov(p, q, lam, tol)
    if metric == "tv":
        return total_variation(p, q)
    raise MetricError(f"unknown metric {metric!r}")
