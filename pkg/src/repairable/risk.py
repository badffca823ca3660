"""Risk triplets and their aggregation.

A scenario's risk is consequence times probability; a system's risk is the
sum over its scenarios. Sums use ``math.fsum`` so the result is correctly
rounded and therefore independent of scenario order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

from .errors import ModelValidityError, PreconditionError

__all__ = [
    "Scenario",
    "RiskPortfolio",
    "ReliabilityProxy",
    "scenario_risk",
    "system_risk",
    "reliability_proxy",
]


@dataclass(frozen=True)
class Scenario:
    id: str
    consequence: float
    probability: float
    description: str = ""

    def __post_init__(self):
        if not str(self.id).strip():
            raise ModelValidityError("scenario id must be non-empty")
        c = float(self.consequence)
        p = float(self.probability)
        if not (math.isfinite(c) and c >= 0):
            raise ModelValidityError(f"scenario {self.id!r}: consequence must be >= 0, got {c!r}")
        if not (0.0 <= p <= 1.0):
            raise ModelValidityError(f"scenario {self.id!r}: probability must be in [0, 1], got {p!r}")
        object.__setattr__(self, "consequence", c)
        object.__setattr__(self, "probability", p)


@dataclass(frozen=True)
class RiskPortfolio:
    """Scenarios considered for one system.

    ``normalized`` records that consequences are on a [0, 1] scale, which is
    required before the portfolio can be turned into a reliability proxy.
    """

    scenarios: tuple[Scenario, ...] = field(default_factory=tuple)
    normalized: bool = False

    def __post_init__(self):
        scenarios = tuple(self.scenarios)
        object.__setattr__(self, "scenarios", scenarios)
        seen = set()
        for s in scenarios:
            if s.id in seen:
                raise ModelValidityError(f"duplicate scenario id {s.id!r}")
            seen.add(s.id)
            if self.normalized and s.consequence > 1.0:
                raise ModelValidityError(
                    f"scenario {s.id!r}: consequence {s.consequence} outside [0, 1] "
                    "in a normalized portfolio"
                )

    def __len__(self):
        return len(self.scenarios)

    def __iter__(self):
        return iter(self.scenarios)

    def concat(self, other: "RiskPortfolio") -> "RiskPortfolio":
        return RiskPortfolio(
            self.scenarios + other.scenarios, self.normalized and other.normalized
        )


class ReliabilityProxy(NamedTuple):
    value: float
    saturated: bool


def scenario_risk(s: Scenario) -> float:
    return s.consequence * s.probability


def system_risk(portfolio: RiskPortfolio | Iterable[Scenario]) -> float:
    return math.fsum(scenario_risk(s) for s in portfolio)


def reliability_proxy(portfolio: RiskPortfolio) -> ReliabilityProxy:
    """``max(0, 1 - system_risk)`` for a normalized portfolio.

    The proportionality between risk and reliability is taken with unit
    constant. ``saturated`` is set when total risk exceeds one and the proxy
    has been clamped to zero.
    """
    if not portfolio.normalized:
        raise PreconditionError(
            "reliability proxy needs consequences normalized to [0, 1]"
        )
    total = system_risk(portfolio)
    if total > 1.0:
        return ReliabilityProxy(0.0, True)
    return ReliabilityProxy(1.0 - total, False)
