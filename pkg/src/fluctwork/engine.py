"""Single-qubit Carnot engine with a hard bound on work fluctuations.

The working qubit (gap E, levels at energies E and 0) is shuttled between a
hot and a cold bath; work is extracted while it re-equilibrates after each
move.  With unconstrained fluctuations the cycle reaches Carnot efficiency.
Under a per-shot bound c each stroke is the bounded work content of the
corresponding thermal state against the other bath, which switches from the
free-energy difference to a clipped expression below a stroke-specific
threshold:

    A = (E / Z_C) (beta_C - beta_H) / beta_H    (stroke 1, hot bath)
    B = (E / Z_H) (beta_C - beta_H) / beta_C    (stroke 2, cold bath)

A >= B always, so clearing A clears both and restores Carnot efficiency.
The closed forms below are exactly the general bounded-work values of the
thermal qubit states (tested against :func:`fluctwork.bounded.c_bounded_work`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import DomainError

__all__ = ["EngineSpec", "EngineCycleResult", "engine_cycle",
           "max_efficiency", "efficiency_sweep"]

THRESHOLD_SLACK = 1e-12  # boundary comparisons favor the unbounded branch


@dataclass(frozen=True)
class EngineSpec:
    """Engine parameters: qubit gap, the two inverse temperatures, and the
    fluctuation bound."""

    gap: float
    beta_hot: float
    beta_cold: float
    c: float

    def __post_init__(self) -> None:
        if not (self.gap > 0 and math.isfinite(self.gap)):
            raise DomainError("gap must be positive and finite")
        if not (0 < self.beta_hot < self.beta_cold):
            raise DomainError("need 0 < beta_hot < beta_cold")
        if not (math.isfinite(self.beta_hot) and math.isfinite(self.beta_cold)):
            raise DomainError("inverse temperatures must be finite")
        if self.c < 0:
            raise DomainError("fluctuation bound must be nonnegative")


@dataclass(frozen=True)
class EngineCycleResult:
    """Per-stroke works, heat intake, internal-energy change, efficiency,
    and the clipping thresholds with their activation flags."""

    w1: float
    w2: float
    q_hot: float
    delta_u: float
    efficiency: float
    threshold_a: float
    threshold_b: float
    stroke1_clipped: bool
    stroke2_clipped: bool

    def __post_init__(self) -> None:
        if self.threshold_a < self.threshold_b - 1e-12:
            raise DomainError("threshold ordering A >= B violated")
        if not (-1e-12 <= self.efficiency <= 1.0):
            raise DomainError(f"efficiency {self.efficiency!r} out of range")


def engine_cycle(spec: EngineSpec) -> EngineCycleResult:
    """Average works, heat intake and efficiency of one engine cycle.

    Stroke 1 extracts from the cold-equilibrium qubit against the hot bath,
    stroke 2 from the hot-equilibrium qubit against the cold bath.  Heat
    intake follows from the first law, Q_H = dU + W1 with
    dU = <E>_hot - <E>_cold, and the efficiency is (W1 + W2) / Q_H.
    """
    e, bh, bc, c = spec.gap, spec.beta_hot, spec.beta_cold, spec.c
    z_hot = 1.0 + math.exp(-bh * e)
    z_cold = 1.0 + math.exp(-bc * e)
    occ_hot = math.exp(-bh * e) / z_hot    # excited-level population, hot
    occ_cold = math.exp(-bc * e) / z_cold

    a = (e / z_cold) * (bc - bh) / bh
    b = (e / z_hot) * (bc - bh) / bc

    stroke1_clipped = c < a - THRESHOLD_SLACK
    if stroke1_clipped:
        w1 = (math.log(z_hot)
              - math.log(math.exp(c * bh * (z_cold - 1.0))
                         + math.exp(-bh * (e + c)))) / bh
    else:
        w1 = math.log(z_hot / z_cold) / bh + e * occ_cold * (bh - bc) / bh

    stroke2_clipped = c < b - THRESHOLD_SLACK
    if stroke2_clipped:
        w2 = (math.log(z_cold)
              - math.log(math.exp(-c * bc * (z_hot - 1.0))
                         + math.exp(bc * (c - e)))) / bc
    else:
        w2 = math.log(z_cold / z_hot) / bc + e * occ_hot * (bc - bh) / bc

    delta_u = e * (occ_hot - occ_cold)
    q_hot = delta_u + w1
    efficiency = (w1 + w2) / q_hot
    return EngineCycleResult(w1, w2, q_hot, delta_u, efficiency, a, b,
                             stroke1_clipped, stroke2_clipped)


def max_efficiency(gap: float, c: float) -> float:
    """Asymptotic efficiency ceiling 1 - E / (2 (2c + E)).

    At exactly c = 0 no work can be extracted (thermal states are full
    rank), so the operation returns 0 there even though the formula's
    c -> 0 limit is 1/2; the discontinuity is intentional.
    """
    if gap <= 0:
        raise DomainError("gap must be positive")
    if c < 0:
        raise DomainError("fluctuation bound must be nonnegative")
    if c == 0.0:
        return 0.0
    return 1.0 - gap / (2.0 * (2.0 * c + gap))


def efficiency_sweep(gap: float, t_cold: float, t_hot_grid, c_list) -> list:
    """Efficiency table over hot temperatures and fluctuation bounds.

    Returns one dict per hot temperature with the Carnot line, one bounded
    efficiency per c, and the corresponding asymptotic ceilings (constant
    down the column, the dashed lines of the usual plot).
    """
    t_hots = [float(t) for t in t_hot_grid]
    cs = [float(c) for c in c_list]
    if not t_hots or not cs:
        raise DomainError("grids must be nonempty")
    if t_cold <= 0 or any(t <= t_cold for t in t_hots):
        raise DomainError("need t_hot > t_cold > 0")
    rows = []
    for t_hot in t_hots:
        row = {"T_hot": t_hot, "eta_carnot": 1.0 - t_cold / t_hot}
        for c in cs:
            spec = EngineSpec(gap=gap, beta_hot=1.0 / t_hot,
                              beta_cold=1.0 / t_cold, c=c)
            row[f"eta_c{c:g}"] = engine_cycle(spec).efficiency
        for c in cs:
            row[f"eta_max_c{c:g}"] = max_efficiency(gap, c)
        rows.append(row)
    return rows
