"""Stochastic point-process models of repairable systems.

Four failure processes are supported: the homogeneous Poisson process (HPP),
the renewal process (RP, perfect repair), the non-homogeneous Poisson process
(NHPP, minimal repair) and the generalized renewal process (GRP) whose
rejuvenation parameter ``q`` spans and extends both repair assumptions.
"""

from .engine import SimulationBatch, simulate_batch, simulate_history
from .measures import (
    Estimate,
    analytic_expected_count,
    availability,
    availability_curve,
    count_curve,
    expected_count,
    mtbf,
    rocof_at,
    rocof_curve,
)
from .models import (
    GRP,
    HPP,
    NHPP,
    RP,
    Distributed,
    EventHistory,
    Fixed,
    Instantaneous,
    KijimaVariant,
    Linear,
    LogLinear,
    PowerLaw,
    SimulationConfig,
    kijima_virtual_age,
)

__all__ = [
    "HPP", "RP", "NHPP", "GRP", "PowerLaw", "LogLinear", "Linear", "KijimaVariant",
    "Instantaneous", "Fixed", "Distributed", "SimulationConfig", "EventHistory",
    "SimulationBatch", "simulate_batch", "simulate_history", "kijima_virtual_age",
    "Estimate", "analytic_expected_count", "expected_count", "rocof_at", "mtbf",
    "availability", "count_curve", "availability_curve", "rocof_curve",
]
