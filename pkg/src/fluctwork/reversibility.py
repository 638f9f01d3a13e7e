"""Reversible transitions under bounded fluctuations, and thermal-map checks.

A transition between diagonal states can be driven reversibly (average work
equal to the free-energy drop) only if every realized work value, which is
pinned to w(s'|s) = (1/beta) log(x_s e^{beta E_s} / (x_{s'} e^{beta E_{s'}})),
stays within the allowed window around the mean.  The minimal window width
diverges when one side of a level pair loses support, which is a structural
fact; it is reported as ``math.inf``, never as a large float.

``validate_thermal_map`` checks the exactness condition that characterizes
classical maps realizable as thermal operations, and ``jarzynski_check``
verifies the exponential work identity for thermally started protocols.
These statements are exact for diagonal states, which is the only input
class modeled here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .bounded import c_bounded_formation, c_bounded_work
from .core import (
    PROB_SUM_TOL,
    DiagonalState,
    DomainError,
    HamiltonianSpec,
    ThermalContext,
    WorkDistribution,
    free_energy,
)

__all__ = [
    "TransitionSpec",
    "ClassicalThermalMap",
    "reversible_work_values",
    "min_reversible_c",
    "is_reversible_within",
    "validate_thermal_map",
    "jarzynski_check",
    "unbounded_transition_map",
    "extraction_optimal_map",
    "formation_optimal_map",
]

MAP_RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class TransitionSpec:
    """A transition between two diagonal states (dimensions may differ)."""

    initial: DiagonalState
    final: DiagonalState

    def free_energy_change(self, ctx: ThermalContext) -> float:
        """F(initial) - F(final)."""
        return free_energy(self.initial, ctx) - free_energy(self.final, ctx)


@dataclass(frozen=True)
class ClassicalThermalMap:
    """Conditional probabilities and work values of a classical protocol.

    ``t[a][b]`` is the probability of reaching final level
    ``col_indices[b]`` from initial level ``row_indices[a]``; ``w[a][b]`` is
    the work extracted on that jump.  Rows cover the initial support and
    must be stochastic.
    """

    row_indices: tuple
    col_indices: tuple
    t: tuple
    w: tuple

    def __init__(self, row_indices, col_indices, t, w) -> None:
        t_arr = np.asarray(t, dtype=float)
        w_arr = np.asarray(w, dtype=float)
        rows = tuple(int(i) for i in row_indices)
        cols = tuple(int(j) for j in col_indices)
        if t_arr.shape != (len(rows), len(cols)) or w_arr.shape != t_arr.shape:
            raise DomainError("map arrays must be (rows, cols) shaped")
        if np.any(t_arr < 0):
            raise DomainError("transition probabilities must be nonnegative")
        for a in range(len(rows)):
            total = math.fsum(t_arr[a].tolist())
            if abs(total - 1.0) > PROB_SUM_TOL:
                raise DomainError(f"row {rows[a]} sums to {total!r}, not 1")
        object.__setattr__(self, "row_indices", rows)
        object.__setattr__(self, "col_indices", cols)
        object.__setattr__(self, "t", tuple(map(tuple, t_arr.tolist())))
        object.__setattr__(self, "w", tuple(map(tuple, w_arr.tolist())))


def reversible_work_values(spec: TransitionSpec, ctx: ThermalContext) -> np.ndarray:
    """Work values of the minimally fluctuating reversible protocol.

    Returns a (d, d') array with
    w(s'|s) = (1/beta) log(x_s e^{beta E_s} / (x_{s'} e^{beta E_{s'}}));
    pairs touching an empty level are NaN (omitted).
    """
    beta = ctx.beta
    rho, rho_f = spec.initial, spec.final
    out = np.full((rho.dimension, rho_f.dimension), math.nan)
    for s, (p, e) in enumerate(zip(rho.probs, rho.energies)):
        if p <= 0.0:
            continue
        for sp, (q, ef) in enumerate(zip(rho_f.probs, rho_f.energies)):
            if q <= 0.0:
                continue
            out[s, sp] = ((math.log(p) + beta * e)
                          - (math.log(q) + beta * ef)) / beta
    return out


def min_reversible_c(spec: TransitionSpec, ctx: ThermalContext) -> float:
    """Smallest fluctuation bound admitting a reversible protocol.

    max over supported pairs of |w(s'|s) - dF|.  A pair with support on
    exactly one side makes the requirement diverge and yields ``math.inf``;
    pairs empty on both sides carry no transition mass and are ignored.
    """
    rho, rho_f = spec.initial, spec.final
    if rho.rank < rho.dimension or rho_f.rank < rho_f.dimension:
        # A dead level on either side pairs with a live one on the other,
        # and such pairs force divergent work values.  Pairs dead on both
        # sides carry no transition mass and are ignored.
        return math.inf
    d_f = spec.free_energy_change(ctx)
    values = reversible_work_values(spec, ctx)
    finite = values[np.isfinite(values)]
    return float(np.max(np.abs(finite - d_f)))


def is_reversible_within(spec: TransitionSpec, ctx: ThermalContext,
                         c: float) -> bool:
    """Whether the transition admits a reversible protocol with bound c."""
    if c < 0:
        raise DomainError("fluctuation bound must be nonnegative")
    return min_reversible_c(spec, ctx) <= c


def validate_thermal_map(thermal_map: ClassicalThermalMap,
                         energies: Sequence[float],
                         energies_final: Sequence[float],
                         ctx: ThermalContext) -> tuple:
    """Exactness check for realizability as a thermal operation.

    For every covered final level s' the sum
    sum_s t(s'|s) exp(beta (E_{s'} - E_s + w(s'|s))) must equal 1.  Returns
    ``(valid, residuals)`` where residuals[b] is that sum minus 1.
    """
    beta = ctx.beta
    e_all = tuple(float(v) for v in energies)
    ef_all = tuple(float(v) for v in energies_final)
    if max(thermal_map.row_indices) >= len(e_all):
        raise DomainError("row index outside the initial level range")
    if max(thermal_map.col_indices) >= len(ef_all):
        raise DomainError("column index outside the final level range")
    t = np.asarray(thermal_map.t)
    w = np.asarray(thermal_map.w)
    residuals = []
    for b, j in enumerate(thermal_map.col_indices):
        terms = [
            t[a, b] * math.exp(beta * (ef_all[j] - e_all[i] + w[a, b]))
            for a, i in enumerate(thermal_map.row_indices) if t[a, b] > 0.0
        ]
        residuals.append(math.fsum(terms) - 1.0)
    valid = max(abs(r) for r in residuals) <= MAP_RESIDUAL_TOL
    return valid, tuple(residuals)


def jarzynski_check(dist: WorkDistribution, z_initial: float, z_final: float,
                    ctx: ThermalContext) -> float:
    """Relative residual of <exp(beta w)> = Z'/Z for a thermally started run.

    For extraction distributions the work probability under a thermal start
    is exp(-beta E_s)/Z, so the residual reduces to
    |sum_s exp(beta (w_s - E_s)) / Z' - 1|.  Formation protocols start
    thermal by definition and realize work w(s') with probability x_{s'},
    giving |sum x_{s'} exp(beta w_{s'}) * Z/Z' - 1|.  The identity holds
    exactly whenever the protocol saturates all its reversibility
    constraints (always for extraction; for formation only without clipped
    levels).
    """
    if z_initial <= 0 or z_final <= 0:
        raise DomainError("partition functions must be positive")
    beta = ctx.beta
    if dist.kind == "extraction":
        log_sum = logsumexp([beta * (r.work - r.energy) for r in dist.entries])
        return abs(math.exp(log_sum - math.log(z_final)) - 1.0)
    log_sum = logsumexp([math.log(r.probability) + beta * r.work
                         for r in dist.entries if r.probability > 0.0])
    return abs(math.exp(log_sum + math.log(z_initial) - math.log(z_final)) - 1.0)


def unbounded_transition_map(spec: TransitionSpec,
                             ctx: ThermalContext) -> ClassicalThermalMap:
    """Minimally fluctuating reversible map between two diagonal states.

    Transition probabilities are the product map t(s'|s) = x_{s'} restricted
    to the supports; work values are the reversible ones.  Saturates the
    thermal-operation condition on the covered sector.
    """
    rows = spec.initial.support
    cols = spec.final.support
    values = reversible_work_values(spec, ctx)
    t = [[spec.final.probs[j] for j in cols] for _ in rows]
    w = [[values[i, j] for j in cols] for i in rows]
    return ClassicalThermalMap(rows, cols, t, w)


def extraction_optimal_map(rho: DiagonalState, h_final: HamiltonianSpec,
                           ctx: ThermalContext, c: float) -> ClassicalThermalMap:
    """Optimal bounded-extraction protocol as a classical map.

    The final state is thermal, t(s'|s) = exp(-beta E'_{s'})/Z', and the
    work depends only on the initial level.
    """
    result = c_bounded_work(rho, h_final, ctx, c)
    beta = ctx.beta
    log_w = -beta * np.asarray(h_final.energies)
    gibbs = np.exp(log_w - logsumexp(log_w))
    rows = [r.index for r in result.distribution.entries]
    cols = list(range(h_final.dimension))
    t = [gibbs.tolist() for _ in rows]
    w = [[r.work] * len(cols) for r in result.distribution.entries]
    return ClassicalThermalMap(rows, cols, t, w)


def formation_optimal_map(rho_target: DiagonalState,
                          h_target: HamiltonianSpec | None,
                          h_initial: HamiltonianSpec,
                          ctx: ThermalContext, c: float) -> ClassicalThermalMap:
    """Optimal bounded-formation protocol as a classical map.

    t(s'|s) = x_{s'} independently of the thermal starting level.  The map
    saturates the thermal-operation condition only on unclipped levels;
    clipped levels carry strict slack.
    """
    result = c_bounded_formation(rho_target, h_target, h_initial, ctx, c)
    rows = list(range(h_initial.dimension))
    entries = result.distribution.entries
    cols = [r.index for r in entries]
    t = [[r.probability for r in entries] for _ in rows]
    w = [[r.work for r in entries] for _ in rows]
    return ClassicalThermalMap(rows, cols, t, w)
