"""One-dimensional laws with exact finite representations.

Three law types are shared across the package:

* ``DiscreteDistribution`` -- finitely many real atoms with probabilities,
  canonically sorted and merged.  All row-sum laws and discretized reference
  laws live here, so convolution and CDF evaluation stay exact.
* ``StandardNormal`` -- the N(0,1) reference law, evaluated through the
  complementary error function (absolute CDF error below 1e-14).
* ``GaussianSkellamMixture`` -- an independent sum N(0, sigma^2) + integer
  jump law, used as the continuous limit of the heavy-cell array family.

Conventions: atoms closer than ``ATOM_MERGE_TOL`` are merged (convolution of
float grids produces near-duplicates); pruning drops smallest-mass atoms first
and the total dropped mass is carried on the result as ``pruned_mass`` so that
downstream error budgets can account for it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import IO, Union

import numpy as np
from scipy.special import ndtr, ndtri

ATOM_MERGE_TOL = 1e-12
MASS_INPUT_TOL = 1e-9
MASS_CANONICAL_TOL = 1e-12

# Pair count above which convolution falls back to chunked accumulation.
_CONV_CHUNK_PAIRS = 8_000_000


class DistributionError(ValueError):
    """Invalid construction or use of a distribution."""


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """Finitely supported law: strictly increasing atoms, unit total mass.

    ``pruned_mass`` records the cumulative mass removed (and renormalized
    away) by pruning anywhere in the history of this object.
    """

    atoms: np.ndarray
    probs: np.ndarray
    pruned_mass: float = 0.0

    def __post_init__(self):
        atoms = np.ascontiguousarray(self.atoms, dtype=np.float64)
        probs = np.ascontiguousarray(self.probs, dtype=np.float64)
        if atoms.ndim != 1 or probs.ndim != 1 or atoms.shape != probs.shape:
            raise DistributionError("atoms and probs must be 1-d arrays of equal length")
        if atoms.size == 0:
            raise DistributionError("a distribution needs at least one atom")
        if np.any(np.diff(atoms) <= 0):
            raise DistributionError("atoms must be strictly increasing")
        if np.any(probs < 0):
            raise DistributionError("negative probability")
        total = float(probs.sum())
        if abs(total - 1.0) > MASS_CANONICAL_TOL:
            raise DistributionError(f"total mass {total!r} deviates from 1 beyond {MASS_CANONICAL_TOL}")
        atoms.setflags(write=False)
        probs.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "probs", probs)

    @cached_property
    def _cumprobs(self) -> np.ndarray:
        return np.cumsum(self.probs)

    @property
    def n_atoms(self) -> int:
        return int(self.atoms.size)

    def mean(self) -> float:
        return float(self.atoms @ self.probs)

    def variance(self) -> float:
        m = self.mean()
        return float(((self.atoms - m) ** 2) @ self.probs)

    def second_moment(self) -> float:
        return float((self.atoms**2) @ self.probs)

    def abs_moment(self, power: float = 1.0) -> float:
        return float((np.abs(self.atoms) ** power) @ self.probs)

    def truncated_second_moment(self, eps: float, strict: bool) -> float:
        """E[X^2; |X| > eps] (strict) or E[X^2; |X| >= eps]."""
        a = np.abs(self.atoms)
        mask = a > eps if strict else a >= eps
        return float((self.atoms[mask] ** 2) @ self.probs[mask])

    def truncated_abs_moment(self, power: float, cutoff: float) -> float:
        """E[|X|^power; |X| <= cutoff]."""
        a = np.abs(self.atoms)
        mask = a <= cutoff
        return float((a[mask] ** power) @ self.probs[mask])

    def expectation(self, fn) -> float:
        return float(np.asarray(fn(self.atoms), dtype=np.float64) @ self.probs)

    def cdf(self, x) -> np.ndarray | float:
        """Right-continuous CDF, exact at and between atoms."""
        xs = np.asarray(x, dtype=np.float64)
        idx = np.searchsorted(self.atoms, xs, side="right")
        cum = np.concatenate(([0.0], self._cumprobs))
        out = cum[idx]
        return out if xs.ndim else float(out)

    def cdf_left(self, x) -> np.ndarray | float:
        """Left limit F(x-) of the CDF."""
        xs = np.asarray(x, dtype=np.float64)
        idx = np.searchsorted(self.atoms, xs, side="left")
        cum = np.concatenate(([0.0], self._cumprobs))
        out = cum[idx]
        return out if xs.ndim else float(out)

    def quantile(self, t) -> np.ndarray | float:
        """Generalized inverse inf{x : F(x) >= t}, 0 < t < 1."""
        ts = np.asarray(t, dtype=np.float64)
        if np.any(ts <= 0.0) or np.any(ts >= 1.0):
            raise DistributionError("quantile level must lie in (0, 1)")
        idx = np.searchsorted(self._cumprobs, ts, side="left")
        idx = np.minimum(idx, self.n_atoms - 1)
        out = self.atoms[idx]
        return out if ts.ndim else float(out)

    def support_range(self) -> float:
        return float(self.atoms[-1] - self.atoms[0])


@dataclass(frozen=True)
class StandardNormal:
    """The N(0,1) reference law."""

    def cdf(self, x) -> np.ndarray | float:
        xs = np.asarray(x, dtype=np.float64)
        out = ndtr(xs)
        return out if xs.ndim else float(out)

    def pdf(self, x) -> np.ndarray | float:
        xs = np.asarray(x, dtype=np.float64)
        out = np.exp(-0.5 * xs * xs) / np.sqrt(2.0 * np.pi)
        return out if xs.ndim else float(out)

    def quantile(self, t) -> np.ndarray | float:
        ts = np.asarray(t, dtype=np.float64)
        if np.any(ts <= 0.0) or np.any(ts >= 1.0):
            raise DistributionError("quantile level must lie in (0, 1)")
        out = ndtri(ts)
        return out if ts.ndim else float(out)


STANDARD_NORMAL = StandardNormal()


@dataclass(frozen=True, eq=False)
class GaussianSkellamMixture:
    """Law of N(0, gaussian_variance) + J with J an independent integer law.

    The CDF is the jump-mixture of shifted normal CDFs, hence continuous and
    strictly increasing; it inherits the 1e-14 normal-CDF accuracy floor.
    """

    gaussian_variance: float
    jump_atoms: DiscreteDistribution

    def __post_init__(self):
        if not (0.0 < self.gaussian_variance <= 1.0):
            raise DistributionError("gaussian_variance must lie in (0, 1]")

    @property
    def sigma(self) -> float:
        return float(np.sqrt(self.gaussian_variance))

    def cdf(self, x) -> np.ndarray | float:
        xs = np.asarray(x, dtype=np.float64)
        z = (xs[..., None] - self.jump_atoms.atoms) / self.sigma
        out = ndtr(z) @ self.jump_atoms.probs
        return out if xs.ndim else float(out)

    def mean(self) -> float:
        return self.jump_atoms.mean()

    def variance(self) -> float:
        return self.gaussian_variance + self.jump_atoms.variance()


Law = Union[DiscreteDistribution, StandardNormal, GaussianSkellamMixture]


def _merge_sorted(atoms: np.ndarray, mass: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Merge atoms of a sorted array whose successive gaps are <= tol.

    Merged atoms sit at the mass-weighted mean of their group, which keeps the
    mean of the law exact under merging.
    """
    if atoms.size <= 1:
        return atoms, mass
    new_group = np.empty(atoms.size, dtype=bool)
    new_group[0] = True
    np.greater(np.diff(atoms), tol, out=new_group[1:])
    gid = np.cumsum(new_group) - 1
    n_groups = int(gid[-1]) + 1
    if n_groups == atoms.size:
        return atoms, mass
    merged_mass = np.bincount(gid, weights=mass, minlength=n_groups)
    weighted = np.bincount(gid, weights=mass * atoms, minlength=n_groups)
    counts = np.bincount(gid, minlength=n_groups)
    plain = np.bincount(gid, weights=atoms, minlength=n_groups) / counts
    # Mass-weighted centers preserve the mean exactly, but denormal-range
    # masses make the quotient unreliable; fall back to the plain mean there
    # (it always stays inside the 1e-12-wide cluster hull).
    usable = merged_mass > 1e-250
    centers = np.where(usable, weighted / np.where(usable, merged_mass, 1.0), plain)
    return centers, merged_mass


def _prune_smallest(atoms: np.ndarray, mass: np.ndarray, prune_tol: float) -> tuple[np.ndarray, np.ndarray, float]:
    """Drop smallest-mass atoms while the cumulative dropped mass stays <= prune_tol."""
    order = np.argsort(mass, kind="stable")
    csum = np.cumsum(mass[order])
    k = int(np.searchsorted(csum, prune_tol, side="right"))
    k = min(k, atoms.size - 1)  # never drop everything
    if k == 0:
        return atoms, mass, 0.0
    dropped = float(csum[k - 1])
    keep = np.ones(atoms.size, dtype=bool)
    keep[order[:k]] = False
    return atoms[keep], mass[keep], dropped


def _canonicalize(
    atoms: np.ndarray, mass: np.ndarray, prune_tol: float, inherited_pruned: float
) -> DiscreteDistribution:
    order = np.argsort(atoms, kind="stable")
    atoms = atoms[order]
    mass = mass[order]
    atoms, mass = _merge_sorted(atoms, mass, ATOM_MERGE_TOL)
    atoms, mass, dropped = _prune_smallest(atoms, mass, prune_tol)
    total = mass.sum()
    if total <= 0.0:
        raise DistributionError("no mass left after pruning")
    return DiscreteDistribution(atoms, mass / total, pruned_mass=inherited_pruned + dropped)


def from_weighted_atoms(atoms, weights, prune_tol: float = 0.0, pruned_mass: float = 0.0) -> DiscreteDistribution:
    """Canonicalize unnormalized weighted atoms (sort, merge, prune, renormalize).

    ``pruned_mass`` seeds the error accounting for mass the caller already
    dropped before assembly (e.g. a truncated mixture tail).
    """
    a = np.asarray(atoms, dtype=np.float64).ravel()
    w = np.asarray(weights, dtype=np.float64).ravel()
    if a.size == 0 or a.shape != w.shape:
        raise DistributionError("weighted atoms need equal nonzero lengths")
    if np.any(w < 0):
        raise DistributionError("negative weight")
    return _canonicalize(a, w, prune_tol=prune_tol, inherited_pruned=pruned_mass)


def make_discrete(atoms, probs) -> DiscreteDistribution:
    """Build a canonical finitely supported law.

    Sorts atoms, merges duplicates (summing mass), drops zero-mass atoms and
    renormalizes.  The input mass may deviate from 1 by at most 1e-9.
    """
    a = np.asarray(atoms, dtype=np.float64).ravel()
    p = np.asarray(probs, dtype=np.float64).ravel()
    if a.size == 0:
        raise DistributionError("empty input")
    if a.shape != p.shape:
        raise DistributionError("atoms and probs must have equal length")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(p))):
        raise DistributionError("atoms and probs must be finite")
    if np.any(p < 0):
        raise DistributionError("negative probability")
    total = float(p.sum())
    if abs(total - 1.0) > MASS_INPUT_TOL:
        raise DistributionError(f"total mass {total!r} deviates from 1 beyond {MASS_INPUT_TOL}")
    return _canonicalize(a, p, prune_tol=0.0, inherited_pruned=0.0)


def delta(x: float) -> DiscreteDistribution:
    """Point mass at x."""
    return DiscreteDistribution(np.array([float(x)]), np.array([1.0]))


def _lattice_embed(d: DiscreteDistribution) -> tuple[float, float, np.ndarray] | None:
    """Recognize a law supported on a regular lattice base + k*step.

    Returns (base, step, integer indices) or None.  Single atoms are not
    treated as lattices (the delta fast path handles them).
    """
    if d.n_atoms < 2:
        return None
    diffs = np.diff(d.atoms)
    step = float(diffs.min())
    if step <= 4.0 * ATOM_MERGE_TOL:
        return None
    ratio = diffs / step
    rounded = np.rint(ratio)
    if np.any(np.abs(ratio - rounded) * step > ATOM_MERGE_TOL):
        return None
    idx = np.concatenate(([0], np.cumsum(rounded))).astype(np.int64)
    if idx[-1] + 1 > 4_000_000:
        return None
    return float(d.atoms[0]), step, idx


def convolve(p: DiscreteDistribution, q: DiscreteDistribution, prune_tol: float = 0.0) -> DiscreteDistribution:
    """Law of X + Y for independent X ~ p, Y ~ q.

    Exact when ``prune_tol`` is 0; otherwise atoms are pruned smallest-first
    until the dropped mass reaches ``prune_tol`` and the law is renormalized.
    The dropped mass is recorded in ``pruned_mass``.
    """
    if prune_tol < 0:
        raise DistributionError("prune_tol must be >= 0")
    inherited = p.pruned_mass + q.pruned_mass

    if p.n_atoms == 1 or q.n_atoms == 1:
        if q.n_atoms == 1:
            p, q = q, p
        shifted = q.atoms + p.atoms[0]
        if prune_tol == 0.0:
            return DiscreteDistribution(shifted, q.probs, pruned_mass=inherited)
        return _canonicalize(shifted, q.probs.copy(), prune_tol, inherited)

    lp, lq = _lattice_embed(p), _lattice_embed(q)
    if lp is not None and lq is not None:
        bp, sp, ip = lp
        bq, sq, iq = lq
        if abs(sp - sq) <= ATOM_MERGE_TOL and (ip[-1] + 1) * (iq[-1] + 1) <= 500_000_000:
            step = 0.5 * (sp + sq)
            dense_p = np.zeros(int(ip[-1]) + 1)
            dense_p[ip] = p.probs
            dense_q = np.zeros(int(iq[-1]) + 1)
            dense_q[iq] = q.probs
            mass = np.convolve(dense_p, dense_q)
            atoms = (bp + bq) + step * np.arange(mass.size)
            keep = mass > 0.0
            return _canonicalize(atoms[keep], mass[keep], prune_tol, inherited)

    n_pairs = p.n_atoms * q.n_atoms
    if n_pairs <= _CONV_CHUNK_PAIRS:
        atoms = np.add.outer(p.atoms, q.atoms).ravel()
        mass = np.multiply.outer(p.probs, q.probs).ravel()
    else:
        chunk = max(1, _CONV_CHUNK_PAIRS // q.n_atoms)
        pieces_a, pieces_m = [], []
        for lo in range(0, p.n_atoms, chunk):
            hi = min(lo + chunk, p.n_atoms)
            pieces_a.append(np.add.outer(p.atoms[lo:hi], q.atoms).ravel())
            pieces_m.append(np.multiply.outer(p.probs[lo:hi], q.probs).ravel())
        atoms = np.concatenate(pieces_a)
        mass = np.concatenate(pieces_m)
    return _canonicalize(atoms, mass, prune_tol, inherited)


def cdf(law: Law, x):
    """Right-continuous CDF of any supported law type."""
    return law.cdf(x)


def quantile(law: DiscreteDistribution | StandardNormal, t):
    """Generalized inverse CDF inf{x : F(x) >= t} for 0 < t < 1."""
    return law.quantile(t)


def discretize_normal(n_atoms: int) -> DiscreteDistribution:
    """Equal-mass discretization of N(0,1) at the cell-midpoint quantiles.

    Atoms sit at Phi^{-1}((i - 1/2)/n) with mass 1/n each; the atom grid is
    built antisymmetric so the mean vanishes by construction.
    """
    if n_atoms < 2:
        raise DistributionError("n_atoms must be >= 2")
    half = n_atoms // 2
    u = (np.arange(1, half + 1) - 0.5) / n_atoms
    lower = ndtri(u)
    atoms = np.empty(n_atoms)
    atoms[:half] = lower
    atoms[n_atoms - half :] = -lower[::-1]
    if n_atoms % 2:
        atoms[half] = 0.0
    probs = np.full(n_atoms, 1.0 / n_atoms)
    return DiscreteDistribution(atoms, probs)


def to_json_dict(d: DiscreteDistribution) -> dict:
    return {"atoms": d.atoms.tolist(), "probs": d.probs.tolist()}


def from_json_dict(doc: dict) -> DiscreteDistribution:
    """Load a serialized law; an already-canonical document round-trips bit-exactly."""
    if not isinstance(doc, dict) or "atoms" not in doc or "probs" not in doc:
        raise DistributionError("distribution document needs 'atoms' and 'probs'")
    a = np.asarray(doc["atoms"], dtype=np.float64)
    p = np.asarray(doc["probs"], dtype=np.float64)
    if (
        a.size
        and a.shape == p.shape
        and np.all(np.diff(a) > 0)
        and np.all(p >= 0)
        and abs(float(p.sum()) - 1.0) <= MASS_CANONICAL_TOL
    ):
        return DiscreteDistribution(a, p)
    return make_discrete(a, p)


def dump_json(d: DiscreteDistribution, fp: IO[str]) -> None:
    json.dump(to_json_dict(d), fp)


def load_json(fp: IO[str]) -> DiscreteDistribution:
    return from_json_dict(json.load(fp))
