"""Failure process models, repair policies and event histories."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.signal import lfilter

from ..errors import DomainError, ModelValidityError, SingularityError
from ..lifetime import LifetimeDistribution
from ..rng import DEFAULT_SEED, normalize_seed

__all__ = [
    "HPP",
    "RP",
    "NHPP",
    "GRP",
    "PowerLaw",
    "LogLinear",
    "Linear",
    "KijimaVariant",
    "Instantaneous",
    "Fixed",
    "Distributed",
    "SimulationConfig",
    "EventHistory",
    "kijima_virtual_age",
]


def _finite(name, value):
    value = float(value)
    if not math.isfinite(value):
        raise ModelValidityError(f"{name} must be finite, got {value!r}")
    return value


def _positive(name, value):
    value = _finite(name, value)
    if value <= 0:
        raise ModelValidityError(f"{name} must be > 0, got {value!r}")
    return value


# --------------------------------------------------------------------------
# NHPP intensity laws. Each provides the intensity, its integral from 0 and
# the inverse of that integral; the inverse returns inf once the integral can
# no longer reach the requested value.


@dataclass(frozen=True)
class PowerLaw:
    """Crow-AMSAA intensity ``lam * beta * t**(beta - 1)``."""

    lam: float
    beta: float

    def __post_init__(self):
        object.__setattr__(self, "lam", _positive("lam", self.lam))
        object.__setattr__(self, "beta", _positive("beta", self.beta))

    def intensity(self, t):
        t = np.asarray(t, dtype=float)
        if self.beta < 1 and (t == 0).any():
            raise SingularityError("power-law intensity with beta < 1 is unbounded at t = 0")
        return self.lam * self.beta * t ** (self.beta - 1.0)

    def cumulative(self, t):
        return self.lam * np.asarray(t, dtype=float) ** self.beta

    def inverse_cumulative(self, y):
        return (np.asarray(y, dtype=float) / self.lam) ** (1.0 / self.beta)

    def check_horizon(self, horizon):
        pass


@dataclass(frozen=True)
class LogLinear:
    """Cox-Lewis intensity ``exp(alpha + beta * t)``."""

    alpha: float
    beta: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", _finite("alpha", self.alpha))
        object.__setattr__(self, "beta", _finite("beta", self.beta))

    def intensity(self, t):
        return np.exp(self.alpha + self.beta * np.asarray(t, dtype=float))

    def cumulative(self, t):
        t = np.asarray(t, dtype=float)
        if self.beta == 0.0:
            return math.exp(self.alpha) * t
        return math.exp(self.alpha) * np.expm1(self.beta * t) / self.beta

    def inverse_cumulative(self, y):
        y = np.asarray(y, dtype=float)
        z = y * math.exp(-self.alpha)
        if self.beta == 0.0:
            return z
        arg = self.beta * z
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.log1p(arg) / self.beta
        return np.where(arg > -1.0, out, np.inf)

    def check_horizon(self, horizon):
        pass


@dataclass(frozen=True)
class Linear:
    """Intensity ``a + b * t``; must stay non-negative over the horizon."""

    a: float
    b: float

    def __post_init__(self):
        object.__setattr__(self, "a", _finite("a", self.a))
        object.__setattr__(self, "b", _finite("b", self.b))
        if self.a < 0:
            raise ModelValidityError(f"linear intensity needs a >= 0, got {self.a!r}")

    def intensity(self, t):
        return self.a + self.b * np.asarray(t, dtype=float)

    def cumulative(self, t):
        t = np.asarray(t, dtype=float)
        return self.a * t + 0.5 * self.b * t * t

    def inverse_cumulative(self, y):
        y = np.asarray(y, dtype=float)
        disc = self.a * self.a + 2.0 * self.b * y
        with np.errstate(invalid="ignore", divide="ignore"):
            # rationalised root avoids cancellation when b is small
            out = 2.0 * y / (self.a + np.sqrt(disc))
        out = np.where(y == 0.0, 0.0, out)
        return np.where(disc >= 0.0, out, np.inf)

    def check_horizon(self, horizon):
        if self.a + self.b * horizon < 0:
            raise ModelValidityError(
                f"linear intensity a + b*t turns negative at t = {-self.a / self.b:g}, "
                f"inside the horizon {horizon:g}"
            )


Rocof = Union[PowerLaw, LogLinear, Linear]


class KijimaVariant(enum.Enum):
    I = "kijima1"
    II = "kijima2"

    @classmethod
    def parse(cls, value) -> "KijimaVariant":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "").replace("-", "")
        aliases = {
            "kijima1": cls.I, "kijimai": cls.I, "i": cls.I, "1": cls.I,
            "kijima2": cls.II, "kijimaii": cls.II, "ii": cls.II, "2": cls.II,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ModelValidityError(f"unknown Kijima variant {value!r}") from None


def kijima_virtual_age(durations, q: float, variant=KijimaVariant.I) -> np.ndarray:
    """Virtual age after each repair.

    Kijima I adds ``q`` times the last operating duration to the age; Kijima II
    scales the whole accumulated age by ``q``. Ages are floored at zero, which
    only matters for ``q < 0``.
    """
    variant = KijimaVariant.parse(variant)
    x = np.asarray(durations, dtype=float)
    if (x <= 0).any():
        raise DomainError("operating durations must be positive")
    q = float(q)
    if q <= 0:
        # the first step already lands at or below zero and every later
        # increment is non-positive, so the floor holds the age at 0
        return np.zeros(x.shape)
    if variant is KijimaVariant.I:
        return np.cumsum(q * x)
    # v_n = q * v_{n-1} + q * x_n
    return lfilter([q], [1.0, -q], x)


# --------------------------------------------------------------------------
# Failure process models. ``_next`` maps the current state and log-uniforms
# to (failure time, operating duration) for a vector of trajectories.


@dataclass(frozen=True)
class HPP:
    rate: float
    kind = "hpp"

    def __post_init__(self):
        object.__setattr__(self, "rate", _positive("rate", self.rate))

    def validate(self, horizon):
        pass

    def _next(self, clock, age, log_u):
        x = -log_u / self.rate
        return clock + x, x

    def params(self):
        return {"rate": self.rate}


@dataclass(frozen=True)
class RP:
    ttf: LifetimeDistribution
    kind = "rp"

    def validate(self, horizon):
        pass

    def _next(self, clock, age, log_u):
        x = self.ttf.isf_log(log_u)
        return clock + x, x

    def params(self):
        return {"family": self.ttf.family, **self.ttf.params()}


@dataclass(frozen=True)
class NHPP:
    """Minimal-repair process; the intensity runs on calendar time."""

    rocof: Rocof
    kind = "nhpp"

    def validate(self, horizon):
        self.rocof.check_horizon(horizon)

    def _next(self, clock, age, log_u):
        fail = self.rocof.inverse_cumulative(self.rocof.cumulative(clock) - log_u)
        return fail, fail - clock

    def params(self):
        law = type(self.rocof).__name__.lower()
        return {"rocof": law, **{k: getattr(self.rocof, k) for k in self.rocof.__dataclass_fields__}}


@dataclass(frozen=True)
class GRP:
    """Generalized renewal process with Kijima virtual age.

    Given virtual age ``v`` the next operating duration ``x`` satisfies
    ``P(x > s) = R(v + s) / R(v)``.
    """

    ttf: LifetimeDistribution
    q: float
    variant: KijimaVariant = KijimaVariant.I
    kind = "grp"

    def __post_init__(self):
        object.__setattr__(self, "q", _finite("q", self.q))
        object.__setattr__(self, "variant", KijimaVariant.parse(self.variant))

    def validate(self, horizon):
        pass

    def _next(self, clock, age, log_u):
        target = log_u + self.ttf.log_sf(age)
        x = np.maximum(self.ttf.isf_log(target) - age, 0.0)
        return clock + x, x

    def _age(self, age, x):
        if self.variant is KijimaVariant.I:
            age = age + self.q * x
        else:
            age = self.q * (age + x)
        return np.maximum(age, 0.0)

    def params(self):
        return {
            "family": self.ttf.family,
            **self.ttf.params(),
            "q": self.q,
            "variant": self.variant.value,
        }


# --------------------------------------------------------------------------
# Repair duration models


@dataclass(frozen=True)
class Instantaneous:
    kind = "instantaneous"

    def durations(self, log_u):
        return np.zeros(np.shape(log_u))


@dataclass(frozen=True)
class Fixed:
    duration: float
    kind = "fixed"

    def __post_init__(self):
        d = _finite("duration", self.duration)
        if d < 0:
            raise ModelValidityError(f"repair duration must be >= 0, got {d!r}")
        object.__setattr__(self, "duration", d)

    def durations(self, log_u):
        return np.full(np.shape(log_u), self.duration)


@dataclass(frozen=True)
class Distributed:
    dist: LifetimeDistribution
    kind = "distributed"

    def durations(self, log_u):
        return self.dist.isf_log(log_u)


# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SimulationConfig:
    horizon: float
    n_trajectories: int
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        h = float(self.horizon)
        if not (math.isfinite(h) and h > 0):
            raise DomainError(f"horizon must be > 0, got {self.horizon!r}")
        n = int(self.n_trajectories)
        if n < 1 or n != self.n_trajectories:
            raise DomainError(f"n_trajectories must be a positive integer, got {self.n_trajectories!r}")
        object.__setattr__(self, "horizon", h)
        object.__setattr__(self, "n_trajectories", n)
        object.__setattr__(self, "seed", normalize_seed(self.seed))


@dataclass(frozen=True, eq=False)
class EventHistory:
    """One failure/repair timeline on ``[0, horizon]``.

    ``repair_times[i]`` is when the repair of failure ``i`` completed. A repair
    still running at the horizon is recorded as ending at the horizon with
    ``repair_open`` set.
    """

    fail_times: np.ndarray
    repair_times: np.ndarray
    horizon: float
    provenance: str = "simulated"
    seed: int | None = None
    trajectory: int | None = None
    repair_open: bool = False

    def __post_init__(self):
        f = np.asarray(self.fail_times, dtype=float).reshape(-1)
        r = np.asarray(self.repair_times, dtype=float).reshape(-1)
        object.__setattr__(self, "fail_times", f)
        object.__setattr__(self, "repair_times", r)
        object.__setattr__(self, "horizon", float(self.horizon))
        if f.shape != r.shape:
            raise DomainError("fail_times and repair_times differ in length")
        if self.provenance not in ("simulated", "observed"):
            raise DomainError(f"provenance must be 'simulated' or 'observed', got {self.provenance!r}")
        if f.size:
            if f[0] < 0 or r[-1] > self.horizon:
                raise DomainError("event times must lie in [0, horizon]")
            if (r < f).any():
                raise DomainError("repair completes before its failure")
            if (f[1:] <= r[:-1]).any():
                raise DomainError("failure occurs before the previous repair completed")
        if self.repair_open and (not f.size or r[-1] != self.horizon):
            raise DomainError("repair_open requires the last repair to end at the horizon")

    def __len__(self):
        return int(self.fail_times.size)

    def __eq__(self, other):
        if not isinstance(other, EventHistory):
            return NotImplemented
        return (
            np.array_equal(self.fail_times, other.fail_times)
            and np.array_equal(self.repair_times, other.repair_times)
            and self.horizon == other.horizon
            and self.provenance == other.provenance
            and self.seed == other.seed
            and self.trajectory == other.trajectory
            and self.repair_open == other.repair_open
        )

    def operating_durations(self) -> np.ndarray:
        starts = np.concatenate(([0.0], self.repair_times[:-1]))
        return self.fail_times - starts

    def is_operating(self, t: float) -> bool:
        down = (self.fail_times <= t) & (t < self.repair_times)
        if self.repair_open and self.fail_times.size and t >= self.fail_times[-1]:
            return False
        return not down.any()

