"""Standard triangular arrays: parametric families, diagnostics, row-sum laws.

A standard triangular array (STA) has independent cells within each row,
mean-zero cells, and row variances summing to one.  Three fixture families
are provided, all row-exchangeable with finitely supported cells:

* ``rademacher``       cells at +/- n^{-1/2} with probability 1/2 each.
* ``iid_scaled(base)`` a mean-0 variance-1 base law scaled by n^{-1/2}.
* ``jump(theta)``      cells at +/-1 with probability theta/(2n) each and at
  +/-c_n with probability (1 - theta/n)/2 each, c_n = sqrt((1-theta)/(n-theta)).
  Then E[cell^2] = 1/n exactly, the largest cell variance vanishes, and the
  truncated-second-moment profile converges to theta: the canonical family
  with a nonzero Lindeberg index that still satisfies Feller's condition.

Row sums are computed exactly by convolution.  The jump family additionally
has a mixture fast path: conditioning on the number J of +/-1 cells splits the
row sum into (scaled binomial) + (binomial on the jump lattice), which is the
n-fold convolution reorganized, and is cross-validated against the generic
path in the tests.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO

import numpy as np

from . import dist
from .dist import DiscreteDistribution, GaussianSkellamMixture, make_discrete

DEFAULT_ATOM_BUDGET = 2_000_000
# Pair-product guard for the exact (unpruned) jump mixture assembly.
_JUMP_PAIR_BUDGET = 80_000_000

STA_TOL = 1e-12


class ArrayError(ValueError):
    pass


class AtomBudgetError(ArrayError):
    """Row-sum support would exceed the configured atom budget."""


@dataclass(frozen=True, eq=False)
class ArrayFamily:
    """Descriptor of one parametric STA; immutable and cheap to pass around.

    Equality and hashing are by content (kind, theta, base atoms) so families
    work as cache keys across independently constructed instances.
    """

    kind: str  # "rademacher" | "iid_scaled" | "jump"
    base: DiscreteDistribution | None = None
    theta: float | None = None

    def _key(self) -> tuple:
        base_key = None
        if self.base is not None:
            base_key = (self.base.atoms.tobytes(), self.base.probs.tobytes())
        return (self.kind, self.theta, base_key)

    def __eq__(self, other):
        return isinstance(other, ArrayFamily) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __post_init__(self):
        if self.kind == "rademacher":
            pass
        elif self.kind == "iid_scaled":
            if self.base is None:
                raise ArrayError("iid_scaled needs a base law")
            if abs(self.base.mean()) > STA_TOL or abs(self.base.variance() - 1.0) > 1e-10:
                raise ArrayError("base law must have mean 0 and variance 1")
        elif self.kind == "jump":
            if self.theta is None or not (0.0 <= self.theta < 1.0):
                raise ArrayError("jump needs theta in [0, 1)")
        else:
            raise ArrayError(f"unknown family kind {self.kind!r}")

    @property
    def label(self) -> str:
        if self.kind == "jump":
            return f"jump({self.theta:g})"
        if self.kind == "iid_scaled":
            return f"iid_scaled[{self.base.n_atoms} atoms]"
        return self.kind


def rademacher() -> ArrayFamily:
    return ArrayFamily("rademacher")


def iid_scaled(base: DiscreteDistribution) -> ArrayFamily:
    return ArrayFamily("iid_scaled", base=base)


def jump(theta: float) -> ArrayFamily:
    return ArrayFamily("jump", theta=theta)


def cell_distribution(fam: ArrayFamily, n: int, k: int = 1) -> DiscreteDistribution:
    """Exact law of one cell in row n; rows are exchangeable so k only gets range-checked."""
    if n < 1:
        raise ArrayError("n must be >= 1")
    if not (1 <= k <= n):
        raise ArrayError(f"cell index {k} outside [1, {n}]")
    if fam.kind == "rademacher":
        x = 1.0 / np.sqrt(n)
        return make_discrete([-x, x], [0.5, 0.5])
    if fam.kind == "iid_scaled":
        return DiscreteDistribution(fam.base.atoms / np.sqrt(n), fam.base.probs)
    theta = fam.theta
    if theta == 0.0:
        x = 1.0 / np.sqrt(n)
        return make_discrete([-x, x], [0.5, 0.5])
    c = np.sqrt((1.0 - theta) / (n - theta))
    a = theta / (2.0 * n)
    b = (1.0 - theta / n) / 2.0
    return make_discrete([-1.0, -c, c, 1.0], [a, b, b, a])


def lindeberg_sum(fam: ArrayFamily, n: int, eps: float) -> float:
    """Sum over the row of E[cell^2; |cell| > eps], exact from atom enumeration.

    The sum never exceeds the unit row variance; the float product is clipped
    back when rounding pushes it a few ulp above 1.
    """
    if eps <= 0:
        raise ArrayError("eps must be > 0")
    cell = cell_distribution(fam, n)
    return min(n * cell.truncated_second_moment(eps, strict=True), 1.0)


def feller_max(fam: ArrayFamily, n: int) -> float:
    """Largest cell variance in row n (cells are exchangeable)."""
    return cell_distribution(fam, n).second_moment()


@dataclass(frozen=True, eq=False)
class LindebergProfile:
    """The truncated-second-moment matrix L_n(eps) over a schedule and grid.

    The asymptotic index is approximated by the largest-n row; per-eps trends
    over n are classified so a non-monotone trace is visible to the caller.
    """

    family: str
    n_schedule: tuple[int, ...]
    eps_grid: tuple[float, ...]
    sums: np.ndarray  # shape (len(n_schedule), len(eps_grid))
    feller: tuple[float, ...]
    index_estimate: float
    trends: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "n_schedule": list(self.n_schedule),
            "eps_grid": list(self.eps_grid),
            "sums": self.sums.tolist(),
            "feller": list(self.feller),
            "index_estimate": self.index_estimate,
            "trends": list(self.trends),
        }


def _trend(values: np.ndarray, tol: float = 1e-12) -> str:
    d = np.diff(values)
    up = bool(np.any(d > tol))
    down = bool(np.any(d < -tol))
    if up and down:
        return "non-monotone"
    if up:
        return "increasing"
    if down:
        return "decreasing"
    return "constant"


def lindeberg_profile(fam: ArrayFamily, n_schedule, eps_grid) -> LindebergProfile:
    ns = [int(n) for n in n_schedule]
    eps = [float(e) for e in eps_grid]
    if not ns or not eps:
        raise ArrayError("n_schedule and eps_grid must be nonempty")
    if any(e <= 0 for e in eps):
        raise ArrayError("eps grid must be positive")
    sums = np.array([[lindeberg_sum(fam, n, e) for e in eps] for n in ns])
    feller = tuple(feller_max(fam, n) for n in ns)
    return LindebergProfile(
        family=fam.label,
        n_schedule=tuple(ns),
        eps_grid=tuple(eps),
        sums=sums,
        feller=feller,
        index_estimate=float(sums[-1].max()),
        trends=tuple(_trend(sums[:, j]) for j in range(len(eps))),
    )


# ---------------------------------------------------------------------------
# Exact row sums
# ---------------------------------------------------------------------------


def _binomial_half_pmf(m: int) -> np.ndarray:
    """Binomial(m, 1/2) pmf of length m+1, built by convolution doubling."""
    row = np.array([1.0])
    if m == 0:
        return row
    bits = bin(m)[2:]
    coin = np.array([0.5, 0.5])
    for b in bits:
        row = np.convolve(row, row)
        if b == "1":
            row = np.convolve(row, coin)
    # bits-driven doubling computes coin^(m) starting from coin^0; first step squares [1.0]
    return row


def _binom_pmf_recurrence(n: int, p: float) -> np.ndarray:
    """Binomial(n, p) pmf by the stable ratio recurrence."""
    out = np.empty(n + 1)
    out[0] = (1.0 - p) ** n
    ratio = p / (1.0 - p)
    for k in range(1, n + 1):
        out[k] = out[k - 1] * ratio * (n - k + 1) / k
    return out


def _jump_row_sum(theta: float, n: int, prune_tol: float, atom_budget: int) -> DiscreteDistribution:
    """Row-sum law for jump(theta) via conditioning on the number of +/-1 cells."""
    c = float(np.sqrt((1.0 - theta) / (n - theta)))
    p_jump = theta / n
    pj = _binom_pmf_recurrence(n, p_jump)
    if prune_tol > 0.0:
        cum = np.cumsum(pj)
        j_max = int(np.searchsorted(cum, 1.0 - prune_tol / 2.0, side="left"))
        j_max = min(j_max, n)
        tail = float(pj[j_max + 1 :].sum())
        atom_tol = prune_tol / 2.0
    else:
        j_max = n
        tail = 0.0
        atom_tol = 0.0

    pairs = sum((j + 1) * (n - j + 1) for j in range(j_max + 1))
    if pairs > _JUMP_PAIR_BUDGET:
        raise AtomBudgetError(
            f"jump row sum at n={n} needs {pairs} atom pairs; increase prune_tol or lower n"
        )

    step_rows: dict[int, np.ndarray] = {n - j_max: _binomial_half_pmf(n - j_max)}
    coin = np.array([0.5, 0.5])
    for m in range(n - j_max + 1, n + 1):
        step_rows[m] = np.convolve(step_rows[m - 1], coin)

    jump_row = np.array([1.0])
    pieces_a, pieces_m = [], []
    for j in range(0, j_max + 1):
        m = n - j
        jump_atoms = 2.0 * np.arange(j + 1) - j
        step_atoms = (2.0 * np.arange(m + 1) - m) * c
        pieces_a.append(np.add.outer(jump_atoms, step_atoms).ravel())
        pieces_m.append(pj[j] * np.multiply.outer(jump_row, step_rows[m]).ravel())
        jump_row = np.convolve(jump_row, coin)
    atoms = np.concatenate(pieces_a)
    mass = np.concatenate(pieces_m)
    law = dist.from_weighted_atoms(atoms, mass, prune_tol=atom_tol, pruned_mass=tail)
    if law.n_atoms > atom_budget:
        raise AtomBudgetError(f"jump row sum support {law.n_atoms} exceeds atom budget {atom_budget}")
    return law


def _convolution_power(cell: DiscreteDistribution, n: int, prune_tol: float, atom_budget: int) -> DiscreteDistribution:
    steps = (n.bit_length() - 1) + (bin(n).count("1") - 1)
    step_tol = prune_tol / steps if steps else 0.0
    acc: DiscreteDistribution | None = None
    base = cell
    m = n
    while m > 0:
        if m & 1:
            acc = base if acc is None else dist.convolve(acc, base, step_tol)
            if acc.n_atoms > atom_budget:
                raise AtomBudgetError(f"row-sum support {acc.n_atoms} exceeds atom budget {atom_budget}")
        m >>= 1
        if m > 0:
            base = dist.convolve(base, base, step_tol)
            if base.n_atoms > atom_budget:
                raise AtomBudgetError(f"row-sum support {base.n_atoms} exceeds atom budget {atom_budget}")
    return acc


def row_sum_exact(
    fam: ArrayFamily,
    n: int,
    prune_tol: float = 0.0,
    atom_budget: int = DEFAULT_ATOM_BUDGET,
    method: str = "auto",
) -> DiscreteDistribution:
    """Exact law of the row sum, the n-fold convolution of the cell law.

    With ``prune_tol`` = 0 the result is exact; otherwise the total pruned
    mass stays below ``prune_tol`` and is recorded on the result.
    """
    if n < 1:
        raise ArrayError("n must be >= 1")
    if prune_tol < 0:
        raise ArrayError("prune_tol must be >= 0")
    if method not in ("auto", "mixture", "convolve"):
        raise ArrayError(f"unknown method {method!r}")
    if fam.kind == "jump" and fam.theta > 0.0 and method in ("auto", "mixture"):
        return _jump_row_sum(fam.theta, n, prune_tol, atom_budget)
    if method == "mixture":
        raise ArrayError("mixture method applies only to the jump family")
    return _convolution_power(cell_distribution(fam, n), n, prune_tol, atom_budget)


def row_sum_sample(fam: ArrayFamily, n: int, reps: int, seed: int) -> DiscreteDistribution:
    """Empirical law of ``reps`` independent row sums; deterministic in ``seed``.

    Sampling draws the multinomial cell-value counts per replicate, which has
    exactly the row-sum law since cells are exchangeable and independent.
    """
    if reps < 1:
        raise ArrayError("reps must be >= 1")
    cell = cell_distribution(fam, n)
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(n, cell.probs, size=reps)
    sums = counts.astype(np.float64) @ cell.atoms
    values, cnt = np.unique(sums, return_counts=True)
    return make_discrete(values, cnt / reps)


def dkw_band(reps: int, delta: float = 1e-3) -> float:
    """Uniform CDF confidence band sqrt(ln(2/delta) / (2 reps))."""
    return float(np.sqrt(np.log(2.0 / delta) / (2.0 * reps)))


def jump_limit_law(theta: float, trunc_tol: float = 1e-12) -> GaussianSkellamMixture:
    """Weak limit of the jump(theta) row sums: N(0, 1-theta) plus an integer law.

    The jump count converges to Poisson(theta) with symmetric signs, i.e. the
    integer component is the difference of two independent Poisson(theta/2)
    counts; it is assembled by convolving truncated Poisson mass functions.
    """
    if not (0.0 <= theta < 1.0):
        raise ArrayError("theta must lie in [0, 1)")
    if trunc_tol <= 0:
        raise ArrayError("trunc_tol must be > 0")
    if theta == 0.0:
        return GaussianSkellamMixture(1.0, dist.delta(0.0))
    lam = theta / 2.0
    pmf = [float(np.exp(-lam))]
    while 1.0 - sum(pmf) > trunc_tol / 4.0 and len(pmf) < 400:
        k = len(pmf)
        pmf.append(pmf[-1] * lam / k)
    pmf = np.array(pmf)
    tail = max(0.0, 1.0 - float(pmf.sum()))
    ks = np.arange(pmf.size, dtype=np.float64)
    plus = dist.from_weighted_atoms(ks, pmf, pruned_mass=tail)
    minus = dist.from_weighted_atoms(-ks[::-1], pmf[::-1], pruned_mass=tail)
    return GaussianSkellamMixture(1.0 - theta, dist.convolve(plus, minus))


# ---------------------------------------------------------------------------
# Family specification files
# ---------------------------------------------------------------------------


def family_to_json_dict(fam: ArrayFamily) -> dict:
    if fam.kind == "rademacher":
        return {"kind": "rademacher"}
    if fam.kind == "jump":
        return {"kind": "jump", "theta": fam.theta}
    return {"kind": "iid_scaled", "base": dist.to_json_dict(fam.base)}


def family_from_json_dict(doc: dict) -> ArrayFamily:
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ArrayError("family document needs a 'kind' field")
    kind = doc["kind"]
    if kind == "rademacher":
        return rademacher()
    if kind == "jump":
        if "theta" not in doc:
            raise ArrayError("jump family needs 'theta'")
        return jump(float(doc["theta"]))
    if kind == "iid_scaled":
        if "base" not in doc:
            raise ArrayError("iid_scaled family needs 'base'")
        return iid_scaled(dist.from_json_dict(doc["base"]))
    raise ArrayError(f"unknown family kind {kind!r}")


def load_family(fp: IO[str]) -> ArrayFamily:
    return family_from_json_dict(json.load(fp))
