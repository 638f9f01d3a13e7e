"""Optimal work extraction and state formation under a hard fluctuation bound.

Work is a random variable; here every realized value is forced to lie within
``c`` of the protocol average, ``|w - <w>| <= c``.  The optimal protocols
split the energy levels into three contiguous blocks of the beta-ordered
support:

* ``plus``      levels whose fluctuation is clipped at +c,
* ``minus``     levels clipped at -c,
* ``unbounded`` levels whose fluctuation floats freely.

For extraction the bound-respecting optimum follows from a clipped
water-filling of the per-level log weights log(x_s) + beta E_s around a
common level ``water_level``; the optimal average work is

    W(c) = (1/beta) * (log Z' - log effective_sum),

with ``effective_sum = sum_s exp(-beta (E_s - theta_s))`` over the support,
theta_s being the per-level fluctuation.  Formation is the mirror problem
with per-level reversibility caps; only positive fluctuations are ever
clipped, but the cost can never drop below the fluctuation-free cost minus c
(the trade-off line), which acts as a hard floor when the target's
beta-ordered head carries less than half the mass.

Everything here is pure and thread-safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .core import (
    FLUCTUATION_TOL,
    DiagonalState,
    DomainError,
    HamiltonianSpec,
    ThermalContext,
    WorkDistribution,
    beta_order,
    deterministic_formation_cost,
    deterministic_work,
    free_energy,
    log_partition_function,
    unbounded_work,
)

__all__ = [
    "Partition",
    "BoundedWorkResult",
    "extraction_partition",
    "c_bounded_work",
    "qubit_work_closed_form",
    "formation_partition",
    "c_bounded_formation",
    "work_curve",
]

INEQ_SLACK = 1e-12   # strictness slack; borderline levels stay unbounded
MASS_TOL = 1e-9      # tolerance on the < 1/2 block-mass property


@dataclass(frozen=True)
class Partition:
    """Block structure of an optimal bounded-fluctuation protocol.

    ``plus``/``minus``/``unbounded`` hold original level indices; they are
    disjoint, cover the support, and are contiguous in beta order (clipped-up
    block first for extraction, clipped-down block first for formation).

    Aggregates:
      mass_*              total probability of each block
      z_plus, z_minus     partial Boltzmann sums over the clipped blocks
      free_energy_unbounded   (1/beta) sum_u x log(x exp(beta E)), energy units
      water_level         common level of the unclipped fluctuations:
                          theta_s = (1/beta) log(x_s e^{beta E_s}) - water_level
                          on the unbounded block (extraction); for formation
                          it stores the self-consistent extracted mean
      effective_sum       sum_s exp(-beta (E_s - theta_s)) over the support;
                          strictly positive, equals Z'. e^{-beta W} at the
                          optimum (log_effective_sum is its log)
    """

    kind: str
    bound: float
    plus: tuple
    minus: tuple
    unbounded: tuple
    beta_permutation: tuple
    mass_plus: float
    mass_minus: float
    mass_unbounded: float
    z_plus: float
    z_minus: float
    free_energy_unbounded: float
    water_level: float
    log_effective_sum: float

    def __post_init__(self) -> None:
        blocks = (set(self.plus), set(self.minus), set(self.unbounded))
        if (blocks[0] & blocks[1]) or (blocks[0] & blocks[2]) or (blocks[1] & blocks[2]):
            raise DomainError("partition blocks overlap")
        if blocks[0] | blocks[1] | blocks[2] != set(self.beta_permutation):
            raise DomainError("partition blocks do not cover the support")
        order = list(self.beta_permutation)
        if self.kind == "extraction":
            expected = list(self.plus) + list(self.unbounded) + list(self.minus)
            if self.mass_plus > 0.5 + MASS_TOL or self.mass_minus > 0.5 + MASS_TOL:
                raise DomainError("clipped block mass exceeds 1/2")
        else:
            expected = list(self.minus) + list(self.unbounded) + list(self.plus)
        if expected != order:
            raise DomainError("partition blocks are not contiguous in beta order")
        if math.isnan(self.log_effective_sum):
            raise DomainError("effective sum must be positive")

    @property
    def effective_sum(self) -> float:
        if self.log_effective_sum > 709.0:
            return math.inf
        return math.exp(self.log_effective_sum)

    @property
    def regime(self) -> str:
        if self.bound == 0.0:
            return "fully-clipped"
        if not self.plus and not self.minus:
            return "all-unbounded"
        return "partially-bounded"


@dataclass(frozen=True)
class BoundedWorkResult:
    """Value, work distribution and block structure of a bounded protocol.

    ``value`` is the optimal average work (extraction) or the optimal cost,
    reported positive (formation); it equals the distribution mean, resp. its
    negation, up to roundoff.
    """

    value: float
    distribution: WorkDistribution
    partition: Partition
    regime: str

    def __post_init__(self) -> None:
        signed = self.value if self.distribution.kind == "extraction" else -self.value
        if abs(signed - self.distribution.mean) > 1e-10:
            raise DomainError("result value disagrees with distribution mean")


def _ordered_levels(rho: DiagonalState, ctx: ThermalContext):
    """Support data in beta order: (indices, probs, energies, log-weights)."""
    perm = beta_order(rho, ctx).permutation
    x = np.array([rho.probs[i] for i in perm])
    e = np.array([rho.energies[i] for i in perm])
    omega = np.log(x) + ctx.beta * e
    return perm, x, e, omega


def _trial_block_sizes(x: np.ndarray):
    """Largest prefix and suffix with mass strictly below one half."""
    r = len(x)
    k = 0
    mass = 0.0
    while k < r and mass + x[k] < 0.5:
        mass += x[k]
        k += 1
    l = r
    mass = 0.0
    while l > 0 and mass + x[l - 1] < 0.5:
        mass += x[l - 1]
        l -= 1
    return k, max(l, k)


def _clip_center(x: np.ndarray, levels: np.ndarray, c: float) -> float:
    """Shift eta with sum_s x_s clip(levels_s - eta, -c, c) = 0 (bisection)."""
    lo = float(levels.min()) - c - 1.0
    hi = float(levels.max()) + c + 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        g = math.fsum((x * np.clip(levels - mid, -c, c)).tolist())
        if g > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, abs(lo), abs(hi)):
            break
    return 0.5 * (lo + hi)


def _extraction_blocks(x, omega, w_unbounded, c, beta):
    """Sizes (k, l) of the +c prefix and the -c suffix start, by the
    hierarchy of pairwise inequalities on the unbounded work values."""
    r = len(x)
    w_mean = math.fsum((x * w_unbounded).tolist())
    k, l = _trial_block_sizes(x)
    while True:
        mass_u = math.fsum(x[k:l].tolist())
        t_term = math.fsum((x[:k] * (w_unbounded[:k] - c)).tolist()) \
            + math.fsum((x[l:] * (w_unbounded[l:] + c)).tolist())
        if k > 0:
            lhs = mass_u * (w_unbounded[k - 1] - c) + t_term
            if not (lhs - w_mean > INEQ_SLACK):
                k -= 1
                continue
        if l < r:
            lhs = mass_u * (w_unbounded[l] + c) + t_term
            if not (w_mean - lhs > INEQ_SLACK):
                l += 1
                continue
        break
    return k, l


def _extraction_fluctuations(x, omega, beta, c, k, l):
    """Per-level fluctuations and the water level for blocks (k, l)."""
    r = len(x)
    theta = np.empty(r)
    theta[:k] = c
    theta[l:] = -c
    mass_u = math.fsum(x[k:l].tolist())
    mass_plus = math.fsum(x[:k].tolist())
    mass_minus = math.fsum(x[l:].tolist())
    if l > k:
        f_u = math.fsum((x[k:l] * omega[k:l]).tolist()) / beta
        water = (f_u + c * (mass_plus - mass_minus)) / mass_u
        theta[k:l] = omega[k:l] / beta - water
    else:
        f_u = 0.0
        water = math.nan
    return theta, water, f_u


def _build_extraction_partition(perm, x, e, theta, water, f_u, k, l, beta, c):
    log_eff = float(logsumexp(beta * (theta - e)))
    return Partition(
        kind="extraction",
        bound=c,
        plus=tuple(perm[:k]),
        minus=tuple(perm[l:]),
        unbounded=tuple(perm[k:l]),
        beta_permutation=tuple(perm),
        mass_plus=math.fsum(x[:k].tolist()),
        mass_minus=math.fsum(x[l:].tolist()),
        mass_unbounded=math.fsum(x[k:l].tolist()),
        z_plus=math.fsum(np.exp(-beta * e[:k]).tolist()),
        z_minus=math.fsum(np.exp(-beta * e[l:]).tolist()),
        free_energy_unbounded=f_u,
        water_level=water,
        log_effective_sum=log_eff,
    )


def extraction_partition(rho: DiagonalState, h_final: HamiltonianSpec,
                         ctx: ThermalContext, c: float) -> Partition:
    """Unique block structure of the optimal c-bounded extraction protocol.

    Beta-orders the support, starts from the maximal prefix/suffix trial
    blocks with mass below 1/2, and shrinks whichever boundary inequality
    fails; at most rank-1 checks are needed and the result is independent of
    input level order up to relabeling.  Borderline inequalities (within
    ``INEQ_SLACK``) leave the level unbounded, which does not change the
    value by continuity.
    """
    if c < 0:
        raise DomainError(f"fluctuation bound must be nonnegative, got {c!r}")
    c = float(c)
    beta = ctx.beta
    perm, x, e, omega = _ordered_levels(rho, ctx)
    log_zf = log_partition_function(h_final, ctx)
    w_unb = (omega + log_zf) / beta
    k, l = _extraction_blocks(x, omega, w_unb, c, beta)
    theta, water, f_u = _extraction_fluctuations(x, omega, beta, c, k, l)

    feasible = c == 0.0 or l <= k or \
        float(np.max(np.abs(theta[k:l]))) <= c + FLUCTUATION_TOL
    if not feasible:
        # Degenerate half/half mass split: fall back to the direct clipped
        # water-filling, which also resolves exact ties (positive side first).
        water = _clip_center(x, omega / beta, c)
        shifted = omega / beta - water
        theta = np.clip(shifted, -c, c)
        k = int(np.sum(shifted >= c - INEQ_SLACK))
        l = len(x) - int(np.sum(shifted <= -c + INEQ_SLACK))
        f_u = math.fsum((x[k:l] * omega[k:l]).tolist()) / beta
    return _build_extraction_partition(perm, x, e, theta, water, f_u, k, l, beta, c)


def c_bounded_work(rho: DiagonalState, h_final: HamiltonianSpec,
                   ctx: ThermalContext, c: float) -> BoundedWorkResult:
    """Maximal average work extractable from ``rho`` under the bound ``c``.

    The protocol ends in the thermal state of ``h_final``.  The c -> 0 limit
    is served by the fluctuation-free formula on the support (shared code
    path with :func:`deterministic_work`), and once every unbounded
    fluctuation fits inside ``c`` the unconstrained optimum is returned
    unchanged.
    """
    if c < 0:
        raise DomainError(f"fluctuation bound must be nonnegative, got {c!r}")
    c = float(c)
    beta = ctx.beta
    part = extraction_partition(rho, h_final, ctx, c)
    perm = part.beta_permutation
    x = np.array([rho.probs[i] for i in perm])
    e = np.array([rho.energies[i] for i in perm])

    if c == 0.0:
        value = deterministic_work(rho, h_final, ctx)
        dist = WorkDistribution(
            [(i, p, lvl, value) for i, p, lvl in zip(perm, x, e)],
            kind="extraction", bound=0.0)
        return BoundedWorkResult(value, dist, part, "fully-clipped")

    if not part.plus and not part.minus:
        value, dist0 = unbounded_work(rho, h_final, ctx)
        dist = WorkDistribution(dist0.entries, kind="extraction", bound=c)
        return BoundedWorkResult(value, dist, part, "all-unbounded")

    log_zf = log_partition_function(h_final, ctx)
    value = (log_zf - part.log_effective_sum) / beta
    theta = _partition_thetas(part, rho, ctx)
    dist = WorkDistribution(
        [(i, p, lvl, value + th) for i, p, lvl, th in zip(perm, x, e, theta)],
        kind="extraction", bound=c)
    return BoundedWorkResult(value, dist, part, "partially-bounded")


def _partition_thetas(part: Partition, rho: DiagonalState,
                      ctx: ThermalContext) -> np.ndarray:
    """Fluctuations of an extraction partition, in beta order."""
    beta = ctx.beta
    c = part.bound
    out = []
    for i in part.beta_permutation:
        if i in part.plus:
            out.append(c)
        elif i in part.minus:
            out.append(-c)
        else:
            omega_i = math.log(rho.probs[i]) + beta * rho.energies[i]
            out.append(omega_i / beta - part.water_level)
    return np.array(out)


def qubit_work_closed_form(x1: float, gap: float, z_final: float,
                           ctx: ThermalContext, c: float) -> float:
    """Two-level work content in closed form.

    The state is (x1, 1 - x1) with level energies (gap, 0) and x1 >= 1/2;
    ``z_final`` is the partition function of the final Hamiltonian.  With
    xi the unconstrained fluctuation of the minority level,

        xi = (1/beta) log(1 - x1) - F(rho),

    the three branches are: minority level clipped at +c when xi > c (only
    reachable for gap < 0, where the beta order flips), clipped at -c when
    xi < -c, and the unconstrained value when |xi| <= c.  Branch selection
    mirrors the general block algorithm; boundary cases take the
    unconstrained branch.
    """
    if not (0.5 <= x1 <= 1.0):
        raise DomainError("x1 must lie in [1/2, 1]")
    if z_final <= 0:
        raise DomainError("z_final must be positive")
    if c < 0:
        raise DomainError("fluctuation bound must be nonnegative")
    beta = ctx.beta
    log_zf = math.log(z_final)
    rho = DiagonalState((x1, 1.0 - x1), (gap, 0.0))
    f_rho = free_energy(rho, ctx)
    if x1 == 1.0:
        return log_zf / beta - gap  # single support level, no fluctuations
    if c == 0.0:
        return (log_zf - math.log(math.exp(-beta * gap) + 1.0)) / beta
    xi = math.log(1.0 - x1) / beta - f_rho
    if xi > c + INEQ_SLACK:
        bracket = math.exp(beta * c) * (1.0 + math.exp(-beta * (gap + c / x1)))
    elif xi < -c - INEQ_SLACK:
        bracket = math.exp(-beta * c) * (1.0 + math.exp(-beta * (gap - c / x1)))
    else:
        return log_zf / beta + f_rho
    return (log_zf - math.log(bracket)) / beta


def _formation_levels(rho_target: DiagonalState, h_initial: HamiltonianSpec,
                      ctx: ThermalContext):
    """Target support in beta order with ascending extracted work values."""
    perm, x, e, omega = _ordered_levels(rho_target, ctx)
    log_zi = log_partition_function(h_initial, ctx)
    w_bar = -(omega + log_zi) / ctx.beta  # ascending saturation values
    return perm, x, e, w_bar, log_zi


def _check_target_pairing(rho_target: DiagonalState,
                          h_target: HamiltonianSpec | None) -> None:
    if h_target is not None and h_target.energies != rho_target.energies:
        raise DomainError("h_target energies must match the target state")


def formation_partition(rho_target: DiagonalState,
                        h_target: HamiltonianSpec | None,
                        h_initial: HamiltonianSpec,
                        ctx: ThermalContext, c: float) -> Partition:
    """Cut of the target support into unbounded and positively clipped levels.

    In beta order the extracted work values ascend; the unique cut index is
    the first level whose cumulative spread over its predecessors exceeds
    ``c``.  Negative fluctuations are never clipped at this stage (the
    trade-off floor is applied by :func:`c_bounded_formation`).
    """
    if c < 0:
        raise DomainError(f"fluctuation bound must be nonnegative, got {c!r}")
    _check_target_pairing(rho_target, h_target)
    c = float(c)
    beta = ctx.beta
    perm, x, e, w_bar, log_zi = _formation_levels(rho_target, h_initial, ctx)
    r = len(perm)
    cut = r
    for j in range(1, r):
        spread = math.fsum((x[:j] * (w_bar[j] - w_bar[:j])).tolist())
        if spread > c + INEQ_SLACK:
            cut = j
            break
    mass_u = math.fsum(x[:cut].tolist())
    mass_plus = math.fsum(x[cut:].tolist())
    mean_cut = (math.fsum((x[:cut] * w_bar[:cut]).tolist()) + c * mass_plus) / mass_u
    return Partition(
        kind="formation",
        bound=c,
        plus=tuple(perm[cut:]),
        minus=(),
        unbounded=tuple(perm[:cut]),
        beta_permutation=tuple(perm),
        mass_plus=mass_plus,
        mass_minus=0.0,
        mass_unbounded=mass_u,
        z_plus=math.fsum(np.exp(-beta * e[cut:]).tolist()),
        z_minus=0.0,
        free_energy_unbounded=math.fsum(
            (x[:cut] * (np.log(x[:cut]) + beta * e[:cut])).tolist()) / beta,
        water_level=mean_cut,
        log_effective_sum=log_zi - beta * mean_cut,
    )


def c_bounded_formation(rho_target: DiagonalState,
                        h_target: HamiltonianSpec | None,
                        h_initial: HamiltonianSpec,
                        ctx: ThermalContext, c: float) -> BoundedWorkResult:
    """Minimal average cost of forming ``rho_target`` from the thermal state
    of ``h_initial`` under the bound ``c``; the cost is reported positive.

    Internally works in extracted-work sign.  The self-consistent mean of
    the cut protocol solves m = (sum_u x w + c X_plus) / X_u; the bound also
    forces m <= min_s w(s) + c (equivalently cost >= fluctuation-free cost
    minus c), a floor that binds when the beta-ordered head of the target
    carries less than half the mass.  On the floor the head level sits at
    -c while staying reversibility-saturated, and the excess mean is shed
    from the top of the order, so every unbounded level stays saturated and
    every clipped level keeps strict slack.
    """
    if c < 0:
        raise DomainError(f"fluctuation bound must be nonnegative, got {c!r}")
    _check_target_pairing(rho_target, h_target)
    c = float(c)
    beta = ctx.beta
    perm, x, e, w_bar, log_zi = _formation_levels(rho_target, h_initial, ctx)
    r = len(perm)

    # Saturation labels live on the scale of the per-level reversibility
    # residual x Z exp(beta (w + E)) - 1 ~ -beta * slack, so that levels
    # tagged unbounded are saturated well within 1e-10 and levels tagged
    # clipped keep strictly positive slack.
    sat_slack = 0.5e-10 / beta

    if c == 0.0:
        cost = deterministic_formation_cost(rho_target, None, h_initial, ctx)
        mean = -cost
        cut0 = r
        for j in range(r):
            if w_bar[j] - w_bar[0] > sat_slack:
                cut0 = j
                break
        part = _build_formation_result_partition(
            perm, x, e, beta, c, [], list(perm[:cut0]), list(perm[cut0:]),
            mean, log_zi)
        dist = WorkDistribution(
            [(i, p, lvl, mean) for i, p, lvl in zip(perm, x, e)],
            kind="formation", bound=0.0)
        return BoundedWorkResult(cost, dist, part, "fully-clipped")

    cut_part = formation_partition(rho_target, None, h_initial, ctx, c)
    mean_cut = cut_part.water_level
    floor_mean = w_bar[0] + c
    capped = mean_cut > floor_mean
    mean = floor_mean if capped else mean_cut

    theta = np.minimum(w_bar - mean, c)
    excess = math.fsum((x * theta).tolist())
    if capped and excess > 0.0:
        # Shed the surplus from the top of the beta order; any level pushed
        # below its saturation value joins the strict-slack block.
        for j in range(r - 1, 0, -1):
            room = theta[j] + c
            take = min(excess / x[j], room)
            theta[j] -= take
            excess -= take * x[j]
            if excess <= 1e-16:
                break
    works = mean + theta

    # Leading block: saturated levels pinned at -c (floor regime only; ties
    # of the head value).  Then the first level with visible slack opens the
    # clipped block; slack is nondecreasing along the order, including the
    # shed levels, so the three blocks are contiguous.
    head_end = 0
    if capped:
        while head_end < r and w_bar[head_end] - w_bar[0] <= sat_slack:
            head_end += 1
    cut2 = r
    for j in range(head_end, r):
        if w_bar[j] - works[j] > sat_slack:
            cut2 = j
            break
    minus_idx = list(perm[:head_end])
    unb_idx = list(perm[head_end:cut2])
    plus_idx = list(perm[cut2:])
    part = _build_formation_result_partition(
        perm, x, e, beta, c, minus_idx, unb_idx, plus_idx, mean, log_zi)
    dist = WorkDistribution(
        [(i, p, lvl, w) for i, p, lvl, w in zip(perm, x, e, works)],
        kind="formation", bound=c)
    regime = "all-unbounded" if (not plus_idx and not minus_idx) else "partially-bounded"
    return BoundedWorkResult(-dist.mean, dist, part, regime)


def _build_formation_result_partition(perm, x, e, beta, c, minus_idx, unb_idx,
                                      plus_idx, mean, log_zi) -> Partition:
    pos = {i: j for j, i in enumerate(perm)}
    unb = [pos[i] for i in unb_idx]
    return Partition(
        kind="formation",
        bound=c,
        plus=tuple(plus_idx),
        minus=tuple(minus_idx),
        unbounded=tuple(unb_idx),
        beta_permutation=tuple(perm),
        mass_plus=math.fsum(x[pos[i]] for i in plus_idx),
        mass_minus=math.fsum(x[pos[i]] for i in minus_idx),
        mass_unbounded=math.fsum(x[j] for j in unb),
        z_plus=math.fsum(math.exp(-beta * e[pos[i]]) for i in plus_idx),
        z_minus=math.fsum(math.exp(-beta * e[pos[i]]) for i in minus_idx),
        free_energy_unbounded=math.fsum(
            x[j] * (math.log(x[j]) + beta * e[j]) for j in unb) / beta,
        water_level=mean,
        log_effective_sum=log_zi - beta * mean,
    )


def work_curve(rho: DiagonalState, h: HamiltonianSpec, ctx: ThermalContext,
               c_grid) -> list:
    """Pointwise (c, extraction work, formation cost) along a bound grid.

    ``h`` is the final Hamiltonian of the extraction and the initial
    Hamiltonian of the formation; the formation target is ``rho`` itself.
    Grid must be sorted ascending and nonnegative.  Element failures are
    re-raised with their grid index.
    """
    grid = [float(c) for c in c_grid]
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise DomainError("c_grid must be sorted ascending")
    if grid and grid[0] < 0:
        raise DomainError("c_grid must be nonnegative")
    rows = []
    for i, c in enumerate(grid):
        try:
            w = c_bounded_work(rho, h, ctx, c).value
            wf = c_bounded_formation(rho, None, h, ctx, c).value
        except Exception as exc:
            raise DomainError(f"work_curve failed at grid index {i} (c={c}): {exc}") from exc
        rows.append((c, w, wf))
    return rows
