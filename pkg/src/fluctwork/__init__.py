"""Work extraction and state formation with hard bounds on work fluctuations.

The package computes the optimal average work of extraction and formation
protocols whose per-shot work values may deviate from the mean by at most a
given amount, interpolating between fluctuation-free (single-shot) and
unconstrained thermodynamics, together with reversibility windows, an
independent verification solver, and a bounded-fluctuation qubit engine.
"""

from .bounded import (
    BoundedWorkResult,
    Partition,
    c_bounded_formation,
    c_bounded_work,
    extraction_partition,
    formation_partition,
    qubit_work_closed_form,
    work_curve,
)
from .core import (
    BetaOrder,
    DiagonalState,
    DomainError,
    HamiltonianSpec,
    NumericOverflowError,
    ThermalContext,
    WorkDistribution,
    WorkValue,
    beta_order,
    deterministic_formation_cost,
    deterministic_work,
    free_energy,
    log_partition_function,
    partition_function,
    unbounded_work,
)
from .engine import (
    EngineCycleResult,
    EngineSpec,
    efficiency_sweep,
    engine_cycle,
    max_efficiency,
)
from .oracle import (
    ConvergenceError,
    OracleSolution,
    oracle_extraction,
    oracle_formation,
    random_instance,
)
from .reversibility import (
    ClassicalThermalMap,
    TransitionSpec,
    extraction_optimal_map,
    formation_optimal_map,
    is_reversible_within,
    jarzynski_check,
    min_reversible_c,
    reversible_work_values,
    unbounded_transition_map,
    validate_thermal_map,
)

__version__ = "0.1.0"

__all__ = [
    "BetaOrder",
    "BoundedWorkResult",
    "ClassicalThermalMap",
    "ConvergenceError",
    "DiagonalState",
    "DomainError",
    "EngineCycleResult",
    "EngineSpec",
    "HamiltonianSpec",
    "NumericOverflowError",
    "OracleSolution",
    "Partition",
    "ThermalContext",
    "TransitionSpec",
    "WorkDistribution",
    "WorkValue",
    "beta_order",
    "c_bounded_formation",
    "c_bounded_work",
    "deterministic_formation_cost",
    "deterministic_work",
    "efficiency_sweep",
    "engine_cycle",
    "extraction_optimal_map",
    "extraction_partition",
    "formation_optimal_map",
    "formation_partition",
    "free_energy",
    "is_reversible_within",
    "jarzynski_check",
    "log_partition_function",
    "max_efficiency",
    "min_reversible_c",
    "oracle_extraction",
    "oracle_formation",
    "partition_function",
    "qubit_work_closed_form",
    "random_instance",
    "reversible_work_values",
    "unbounded_transition_map",
    "unbounded_work",
    "validate_thermal_map",
    "work_curve",
]
