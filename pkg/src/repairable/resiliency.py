"""Reactive resiliency of a system that fails and is restored during a mission.

A resiliency event is described by when the failure happened (``t_fail``),
how long restoration took (``t_res``) and the resiliency degree ``q_res``: the
reliability shortfall after restoration, measured against an as-new system
with reliability 1. The reactive resiliency of one event is

    rho_r = (1 - q_res) * (1 - t_res / (t_mission - t_fail))

and is exactly zero once restoration takes the rest of the mission.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, EventValidationError, PreconditionError
from .lifetime import LifetimeDistribution, quantile

__all__ = [
    "ResiliencyDegree",
    "ResiliencyEvent",
    "MissionContext",
    "EventAssessment",
    "ResiliencyAssessment",
    "PerformanceTrajectory",
    "ResiliencyWarning",
    "reactive_resiliency",
    "recovered_reliability",
    "classify_degree",
    "virtual_age_of_degree",
    "mission_resiliency",
    "performance_trajectory",
    "DEGREE_TOL",
    "BETTER_THAN_NEW",
    "NO_EVENTS",
]

DEGREE_TOL = 1e-9

BETTER_THAN_NEW = "better_than_new"
NO_EVENTS = "no_events"
NO_BASELINE = "no_baseline"
UNRECOVERED = "not_recovered_before_mission_end"


class ResiliencyWarning(UserWarning):
    """Recovered reliability above 1 (better than new)."""


class ResiliencyDegree(str, enum.Enum):
    BETTER_THAN_NEW = "BetterThanNew"
    GOOD_AS_NEW = "GoodAsNew"
    PARTIAL_RECOVERY = "PartialRecovery"
    SAME_AS_OLD = "SameAsOld"
    WORSE_THAN_OLD = "WorseThanOld"

    @property
    def rank(self) -> int:
        return _RANK[self]


_RANK = {d: i for i, d in enumerate(ResiliencyDegree)}


@dataclass(frozen=True)
class ResiliencyEvent:
    t_fail: float
    t_res: float
    q_res: float

    def __post_init__(self):
        for name in ("t_fail", "t_res", "q_res"):
            value = float(getattr(self, name))
            if math.isnan(value):
                raise EventValidationError(f"{name} is NaN")
            object.__setattr__(self, name, value)
        if not math.isfinite(self.t_fail) or self.t_fail < 0:
            raise EventValidationError(f"t_fail must be finite and >= 0, got {self.t_fail!r}")
        if self.t_res < 0:
            raise EventValidationError(f"t_res must be >= 0, got {self.t_res!r}")
        if not math.isfinite(self.q_res) or self.q_res > 1:
            raise EventValidationError(
                f"q_res must be <= 1 (recovered reliability cannot be negative), got {self.q_res!r}"
            )

    @property
    def better_than_new(self) -> bool:
        return self.q_res < 0


@dataclass(frozen=True)
class MissionContext:
    t_mission: float
    baseline: LifetimeDistribution | None = None

    def __post_init__(self):
        t = float(self.t_mission)
        if not (math.isfinite(t) and t > 0):
            raise DomainError(f"t_mission must be > 0, got {self.t_mission!r}")
        object.__setattr__(self, "t_mission", t)


def reactive_resiliency(event: ResiliencyEvent, ctx: MissionContext) -> float:
    remaining = ctx.t_mission - event.t_fail
    if remaining <= 0:
        raise EventValidationError(
            f"failure at t={event.t_fail:g} is outside the mission window [0, {ctx.t_mission:g})"
        )
    if event.t_res >= remaining:
        return 0.0
    if event.t_res == 0:
        return 1.0 - event.q_res
    # same as (1 - q) * (1 - t_res / remaining), with one rounding fewer
    return (1.0 - event.q_res) * (remaining - event.t_res) / remaining


def recovered_reliability(q_res: float) -> float:
    """Reliability restored by the resiliency actions, ``1 - q_res``.

    Values above one (``q_res < 0``) are returned as computed and signalled
    with a ``ResiliencyWarning``.
    """
    q_res = float(q_res)
    if not q_res <= 1:
        raise DomainError(f"q_res must be <= 1, got {q_res!r}")
    if q_res < 0:
        warnings.warn(
            f"q_res={q_res:g} gives recovered reliability {1 - q_res:g} > 1 (better than new)",
            ResiliencyWarning,
            stacklevel=2,
        )
    return 1.0 - q_res


def classify_degree(q_res: float, ctx: MissionContext, t_fail: float) -> ResiliencyDegree:
    """Place ``q_res`` on the better-than-new ... worse-than-old scale.

    The same-as-old reference is the failure probability accumulated by the
    baseline life model up to the failure, ``F(t_fail)``: restoring to that
    level leaves the system exactly as reliable as just before it failed.
    """
    if ctx.baseline is None:
        raise PreconditionError("degree classification needs a baseline life distribution")
    if not 0 <= t_fail < ctx.t_mission:
        raise DomainError(f"t_fail must lie in [0, {ctx.t_mission:g}), got {t_fail!r}")
    q_res = float(q_res)
    if q_res > 1:
        raise DomainError(f"q_res must be <= 1, got {q_res!r}")
    f_star = float(ctx.baseline.cdf(np.asarray(t_fail, dtype=float)))
    if abs(q_res) <= DEGREE_TOL:
        return ResiliencyDegree.GOOD_AS_NEW
    if q_res < 0:
        return ResiliencyDegree.BETTER_THAN_NEW
    if abs(q_res - f_star) <= DEGREE_TOL:
        return ResiliencyDegree.SAME_AS_OLD
    if q_res < f_star:
        return ResiliencyDegree.PARTIAL_RECOVERY
    return ResiliencyDegree.WORSE_THAN_OLD


def virtual_age_of_degree(q_res: float, baseline: LifetimeDistribution) -> float:
    """Age at which the baseline's reliability equals ``1 - q_res``.

    Ties a resiliency degree to a virtual age in the generalized renewal
    sense. ``q_res < 0`` has no such age; 0 is returned with a warning.
    """
    q_res = float(q_res)
    if q_res >= 1:
        raise DomainError(f"q_res must be < 1 for a finite virtual age, got {q_res!r}")
    if q_res < 0:
        warnings.warn(
            f"q_res={q_res:g} is better than new; virtual age floored at 0",
            ResiliencyWarning,
            stacklevel=2,
        )
        return 0.0
    return float(quantile(baseline, q_res))


@dataclass(frozen=True)
class EventAssessment:
    event: ResiliencyEvent
    rho_r: float
    degree: ResiliencyDegree | None
    flags: tuple[str, ...] = ()


@dataclass(frozen=True)
class ResiliencyAssessment:
    per_event: tuple[EventAssessment, ...]
    mission_rho: float
    flags: tuple[str, ...] = ()
    t_mission: float = math.nan

    def to_dict(self) -> dict:
        return {
            "t_mission": self.t_mission,
            "mission_rho": self.mission_rho,
            "flags": list(self.flags),
            "events": [
                {
                    "t_fail": a.event.t_fail,
                    "t_res": a.event.t_res,
                    "q_res": a.event.q_res,
                    "rho_r": a.rho_r,
                    "degree": a.degree.value if a.degree is not None else None,
                    "flags": list(a.flags),
                }
                for a in self.per_event
            ],
        }


def _check_sequence(events):
    for i, (a, b) in enumerate(zip(events[:-1], events[1:]), start=1):
        if b.t_fail < a.t_fail:
            raise EventValidationError(f"events not sorted by t_fail at event {i}")
        if a.t_fail + a.t_res > b.t_fail:
            raise EventValidationError(
                f"outage of event {i - 1} (t_fail={a.t_fail:g}, t_res={a.t_res:g}) "
                f"overlaps the failure at t={b.t_fail:g}"
            )


def mission_resiliency(events, ctx: MissionContext) -> ResiliencyAssessment:
    """Per-event reactive resiliency and its mission-level minimum."""
    events = list(events)
    if not events:
        return ResiliencyAssessment((), 1.0, (NO_EVENTS,), ctx.t_mission)
    _check_sequence(events)
    per_event = []
    flags = []
    for ev in events:
        rho = reactive_resiliency(ev, ctx)
        ev_flags = []
        if ev.better_than_new:
            ev_flags.append(BETTER_THAN_NEW)
        if ev.t_res >= ctx.t_mission - ev.t_fail:
            ev_flags.append(UNRECOVERED)
        degree = None
        if ctx.baseline is not None:
            degree = classify_degree(ev.q_res, ctx, ev.t_fail)
        per_event.append(EventAssessment(ev, rho, degree, tuple(ev_flags)))
        flags.extend(f for f in ev_flags if f not in flags)
    if ctx.baseline is None:
        flags.append(NO_BASELINE)
    return ResiliencyAssessment(
        tuple(per_event), min(a.rho_r for a in per_event), tuple(flags), ctx.t_mission
    )


@dataclass(frozen=True, eq=False)
class PerformanceTrajectory:
    t: np.ndarray
    level: np.ndarray
    segment: tuple[str, ...]
    flags: tuple[str, ...] = field(default=())

    def rows(self):
        return zip(self.t.tolist(), self.level.tolist(), self.segment)

    @property
    def onset_index(self) -> int | None:
        """Index of the first recovered sample, if any."""
        try:
            return self.segment.index("recovered")
        except ValueError:
            return None


def performance_trajectory(ctx: MissionContext, event: ResiliencyEvent, resolution: int = 201,
                           outage_level: float = 0.0) -> PerformanceTrajectory:
    """Sampled performance level over the mission for one resiliency event.

    Before the failure the level follows the baseline reliability. During the
    outage it sits at ``outage_level``. From the recovery onset it starts at
    ``1 - q_res`` and decays like a system of virtual age
    ``v = virtual_age_of_degree(q_res)``:
    ``(1 - q_res) * R(v + dt) / R(v)`` with ``dt`` the time since recovery.

    The grid is ``resolution`` evenly spaced points on ``[0, t_mission]``
    plus the failure time and the recovery onset.
    """
    if ctx.baseline is None:
        raise PreconditionError("performance trajectory needs a baseline life distribution")
    if not 0 <= outage_level < 1:
        raise DomainError(f"outage_level must lie in [0, 1), got {outage_level!r}")
    if int(resolution) < 2:
        raise DomainError("resolution must be at least 2")
    remaining = ctx.t_mission - event.t_fail
    if remaining <= 0:
        raise EventValidationError(
            f"failure at t={event.t_fail:g} is outside the mission window [0, {ctx.t_mission:g})"
        )
    base = ctx.baseline
    onset = event.t_fail + event.t_res
    points = [np.linspace(0.0, ctx.t_mission, int(resolution)), [event.t_fail]]
    if onset < ctx.t_mission:
        points.append([onset])
    t = np.unique(np.concatenate(points))

    flags = []
    nominal = t < event.t_fail
    outage = (t >= event.t_fail) & (t < onset)
    recovered = t >= onset
    level = np.empty(t.shape)
    level[nominal] = base.sf(t[nominal])
    level[outage] = outage_level
    if recovered.any():
        r = 1.0 - event.q_res
        if event.q_res < 0:
            flags.append(BETTER_THAN_NEW)
            v = 0.0
        elif event.q_res < 1:
            v = float(quantile(base, event.q_res))
        else:
            v = None
        if v is None:
            level[recovered] = 0.0
        else:
            dt = t[recovered] - onset
            level[recovered] = r * np.exp(base.log_sf(v + dt) - base.log_sf(v))
    else:
        flags.append(UNRECOVERED)
    segment = tuple(
        "nominal" if n else "outage" if o else "recovered"
        for n, o in zip(nominal.tolist(), outage.tolist())
    )
    return PerformanceTrajectory(t, level, segment, tuple(flags))
