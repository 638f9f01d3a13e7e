"""Core thermodynamic quantities for finite-dimensional diagonal systems.

States are classical probability distributions over energy levels.  All
energies and work values share one energy unit, inverse temperature has the
inverse unit, and the Boltzmann constant is fixed to 1.  Logarithms are
natural throughout.  Every operation in this module is a pure function of
immutable inputs and is safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import logsumexp

__all__ = [
    "DomainError",
    "NumericOverflowError",
    "ThermalContext",
    "HamiltonianSpec",
    "DiagonalState",
    "BetaOrder",
    "WorkValue",
    "WorkDistribution",
    "partition_function",
    "log_partition_function",
    "free_energy",
    "deterministic_work",
    "deterministic_formation_cost",
    "beta_order",
    "unbounded_work",
]

PROB_SUM_TOL = 1e-12     # admissible |sum(probs) - 1| before rejection
MEAN_TOL = 1e-12         # admissible |stored mean - sum(p * w)|
CENTER_TOL = 1e-10       # admissible |sum(p * fluctuation)|
FLUCTUATION_TOL = 1e-9   # admissible excess of |fluctuation| over the bound


class DomainError(ValueError):
    """An input violates a documented precondition."""


class NumericOverflowError(ArithmeticError):
    """A requested quantity is too large to represent as a float."""


@dataclass(frozen=True)
class ThermalContext:
    """Inverse temperature of the heat bath (energy**-1, k_B = 1)."""

    beta: float

    def __post_init__(self) -> None:
        if not (isinstance(self.beta, (int, float)) and math.isfinite(self.beta)):
            raise DomainError(f"beta must be finite, got {self.beta!r}")
        if self.beta <= 0:
            raise DomainError(f"beta must be strictly positive, got {self.beta!r}")
        object.__setattr__(self, "beta", float(self.beta))


@dataclass(frozen=True)
class HamiltonianSpec:
    """Energy levels of a finite-dimensional system."""

    energies: tuple

    def __init__(self, energies: Sequence[float]) -> None:
        vals = tuple(float(e) for e in energies)
        if not vals:
            raise DomainError("a Hamiltonian needs at least one level")
        if not all(math.isfinite(e) for e in vals):
            raise DomainError("energies must be finite")
        object.__setattr__(self, "energies", vals)

    @property
    def dimension(self) -> int:
        return len(self.energies)


@dataclass(frozen=True)
class DiagonalState:
    """Occupation probabilities paired with the energy of each level.

    Probabilities must be nonnegative and sum to 1 within ``PROB_SUM_TOL``;
    inputs inside the tolerance are renormalized, anything else is rejected.
    """

    probs: tuple
    energies: tuple

    def __init__(self, probs: Sequence[float], energies: Sequence[float]) -> None:
        p = np.asarray(probs, dtype=float)
        e = tuple(float(v) for v in energies)
        if p.ndim != 1 or p.size == 0:
            raise DomainError("probs must be a nonempty 1-d sequence")
        if len(e) != p.size:
            raise DomainError("probs and energies must have equal length")
        if not all(math.isfinite(v) for v in e):
            raise DomainError("energies must be finite")
        if not np.all(np.isfinite(p)):
            raise DomainError("probabilities must be finite")
        if np.any(p < 0):
            raise DomainError("probabilities must be nonnegative")
        total = math.fsum(p.tolist())
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise DomainError(f"probabilities sum to {total!r}, not 1")
        if total != 1.0:
            p = p / total
        object.__setattr__(self, "probs", tuple(p.tolist()))
        object.__setattr__(self, "energies", e)

    @classmethod
    def gibbs(cls, h: HamiltonianSpec, ctx: ThermalContext) -> "DiagonalState":
        """Thermal state exp(-beta H)/Z of a Hamiltonian."""
        log_w = -ctx.beta * np.asarray(h.energies)
        p = np.exp(log_w - logsumexp(log_w))
        return cls(p, h.energies)

    @property
    def dimension(self) -> int:
        return len(self.probs)

    @property
    def support(self) -> tuple:
        """Indices of levels with strictly positive probability."""
        return tuple(i for i, p in enumerate(self.probs) if p > 0.0)

    @property
    def rank(self) -> int:
        return len(self.support)

    def hamiltonian(self) -> HamiltonianSpec:
        return HamiltonianSpec(self.energies)


@dataclass(frozen=True)
class BetaOrder:
    """Support indices sorted by descending ``x_s * exp(beta * E_s)``.

    Ties keep the original index order so the result is deterministic.
    """

    permutation: tuple

    def __len__(self) -> int:
        return len(self.permutation)


class WorkValue(NamedTuple):
    index: int
    probability: float
    energy: float
    work: float


@dataclass(frozen=True)
class WorkDistribution:
    """Per-level work values of a protocol, with their probabilities.

    ``kind`` is ``"extraction"`` (values indexed by initial levels) or
    ``"formation"`` (values indexed by target levels, extracted-work sign).
    ``bound`` carries the fluctuation bound the distribution was produced
    under, or None for unconstrained protocols.  The mean is computed from
    the entries; construction fails if the distribution is not normalized,
    not mean-centered, or violates its bound beyond the stated tolerances.
    """

    entries: tuple
    kind: str
    bound: float | None
    mean: float

    def __init__(self, entries: Sequence[WorkValue], kind: str,
                 bound: float | None = None) -> None:
        if kind not in ("extraction", "formation"):
            raise DomainError(f"unknown distribution kind {kind!r}")
        rows = tuple(WorkValue(int(i), float(p), float(e), float(w))
                     for i, p, e, w in entries)
        if not rows:
            raise DomainError("a work distribution needs at least one entry")
        total = math.fsum(r.probability for r in rows)
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise DomainError(f"entry probabilities sum to {total!r}, not 1")
        mean = math.fsum(r.probability * r.work for r in rows)
        centered = math.fsum(r.probability * (r.work - mean) for r in rows)
        if abs(centered) > CENTER_TOL:
            raise DomainError(f"fluctuations do not average to zero: {centered!r}")
        if bound is not None:
            bound = float(bound)
            worst = max(abs(r.work - mean) for r in rows)
            if worst > bound + FLUCTUATION_TOL:
                raise DomainError(
                    f"fluctuation {worst!r} exceeds bound {bound!r}")
        object.__setattr__(self, "entries", rows)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "bound", bound)
        object.__setattr__(self, "mean", mean)

    @property
    def fluctuations(self) -> tuple:
        """Deviations w(s) - mean, in entry order."""
        return tuple(r.work - self.mean for r in self.entries)


def log_partition_function(h: HamiltonianSpec, ctx: ThermalContext) -> float:
    """log Z = log sum_s exp(-beta E_s), evaluated with a max shift."""
    return float(logsumexp(-ctx.beta * np.asarray(h.energies)))


def partition_function(h: HamiltonianSpec, ctx: ThermalContext) -> float:
    """Canonical partition function Z = sum_s exp(-beta E_s).

    Raises NumericOverflowError when Z does not fit in a float; use
    ``log_partition_function`` for extreme spectra.
    """
    log_z = log_partition_function(h, ctx)
    z = math.exp(log_z) if log_z < 709.0 else math.inf
    if not math.isfinite(z):
        raise NumericOverflowError(f"partition function overflows (log Z = {log_z})")
    return z


def free_energy(rho: DiagonalState, ctx: ThermalContext) -> float:
    """Standard free energy F = <E> - S/beta with S = -sum x log x.

    The 0 * log 0 contribution of empty levels is taken as 0.
    """
    mean_e = math.fsum(p * e for p, e in zip(rho.probs, rho.energies))
    entropy = -math.fsum(p * math.log(p) for p in rho.probs if p > 0.0)
    return mean_e - entropy / ctx.beta


def _support_log_weights(rho: DiagonalState, ctx: ThermalContext):
    """(indices, probs, energies, log(x) + beta*E) over the support."""
    idx = rho.support
    if not idx:
        raise DomainError("state has empty support")
    x = np.array([rho.probs[i] for i in idx])
    e = np.array([rho.energies[i] for i in idx])
    return idx, x, e, np.log(x) + ctx.beta * e


def deterministic_work(rho: DiagonalState, h_final: HamiltonianSpec,
                       ctx: ThermalContext) -> float:
    """Fluctuation-free extractable work.

    Equals (1/beta) log Z' - (1/beta) log sum_{s in supp} exp(-beta E_s);
    nonzero only for rank-deficient states.
    """
    _, _, e_supp, _ = _support_log_weights(rho, ctx)
    log_support_sum = float(logsumexp(-ctx.beta * e_supp))
    return (log_partition_function(h_final, ctx) - log_support_sum) / ctx.beta


def deterministic_formation_cost(rho_target: DiagonalState,
                                 h_target: HamiltonianSpec | None,
                                 h_initial: HamiltonianSpec,
                                 ctx: ThermalContext) -> float:
    """Fluctuation-free cost of preparing ``rho_target`` from the thermal
    state of ``h_initial``; reported as a positive number.

    ``h_target`` defaults to the target state's own level energies and must
    match them when given.
    """
    if h_target is not None and h_target.energies != rho_target.energies:
        raise DomainError("h_target energies must match the target state")
    beta = ctx.beta
    log_max = max(math.log(p) + beta * e
                  for p, e in zip(rho_target.probs, rho_target.energies)
                  if p > 0.0)
    return (log_partition_function(h_initial, ctx) + log_max) / beta


def beta_order(rho: DiagonalState, ctx: ThermalContext) -> BetaOrder:
    """Sort the support by descending x_s exp(beta E_s), stable on ties."""
    idx, _, _, omega = _support_log_weights(rho, ctx)
    perm = np.argsort(-omega, kind="stable")
    return BetaOrder(tuple(int(idx[j]) for j in perm))


def unbounded_work(rho: DiagonalState, h_final: HamiltonianSpec,
                   ctx: ThermalContext) -> tuple:
    """Optimal average work with unconstrained fluctuations.

    Returns ``(mean, distribution)``.  The mean equals
    (1/beta) log Z' + F(rho); the per-level values are
    w(s) = (1/beta) log(x_s exp(beta E_s) Z') on the support, which makes the
    transform realizable as a thermal operation (the reversibility identity
    sum_s exp(beta (w(s) - E_s)) = Z' is saturated).
    """
    beta = ctx.beta
    idx, x, e, omega = _support_log_weights(rho, ctx)
    log_zf = log_partition_function(h_final, ctx)
    works = (omega + log_zf) / beta
    dist = WorkDistribution(
        [(i, p, lvl_e, w) for i, p, lvl_e, w in zip(idx, x, e, works)],
        kind="extraction")
    return dist.mean, dist
