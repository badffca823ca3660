"""Parametric time-to-failure distributions and bathtub hazard profiles.

All distributions are immutable and expose vectorised methods on numpy
arrays. CDF and survival are never evaluated independently: the smaller of
the two is computed directly and the other is its complement, which keeps
both tails accurate and makes ``cdf_at(d, t) + reliability_at(d, t) == 1``
hold exactly in floating point.

The module-level functions validate their arguments and accept scalars or
arrays; the methods on the distribution objects assume validated input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import DomainError, ModelValidityError, SingularityError
from .rng import RandomStream

__all__ = [
    "LifetimeDistribution",
    "Exponential",
    "Weibull",
    "Gamma",
    "Lognormal",
    "DecreasingPower",
    "Constant",
    "IncreasingPower",
    "BathtubProfile",
    "make_distribution",
    "reliability_at",
    "cdf_at",
    "pdf_at",
    "hazard_at",
    "quantile",
    "sample_ttf",
    "mttf",
    "bathtub_reliability",
    "HAZARD_FLOOR",
]

# hazard_at refuses to divide by survival values below this
HAZARD_FLOOR = 1e-300

_LOG_HALF = math.log(0.5)


def _positive(name, value):
    value = float(value)
    if not (math.isfinite(value) and value > 0):
        raise ModelValidityError(f"{name} must be a finite positive number, got {value!r}")
    return value


def _times(t):
    arr = np.asarray(t, dtype=float)
    if np.isnan(arr).any() or (arr < 0).any():
        raise DomainError(f"time must be >= 0, got {t!r}")
    return arr


def _out(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


def _bracket_solve(g, target, guess, *, max_expand=256, max_iter=400):
    """Solve ``g(t) = target`` for ``t > 0`` where ``g`` increases in ``t``.

    Vectorised bisection in ``log t``. The bracket is grown geometrically
    around ``guess`` and then halved until adjacent doubles or a relative
    width of 1e-15 is reached.
    """
    target = np.asarray(target, dtype=float)
    x0 = np.full(target.shape, math.log(guess))
    lo = x0 - 1.0
    hi = x0 + 1.0
    with np.errstate(all="ignore"):
        step = np.ones_like(x0)
        for _ in range(max_expand):
            bad = g(np.exp(lo)) >= target
            if not bad.any():
                break
            lo = np.where(bad, lo - step, lo)
            step = np.where(bad, step * 2.0, step)
        step = np.ones_like(x0)
        for _ in range(max_expand):
            bad = g(np.exp(hi)) < target
            if not bad.any():
                break
            hi = np.where(bad, hi + step, hi)
            step = np.where(bad, step * 2.0, step)
        for _ in range(max_iter):
            mid = 0.5 * (lo + hi)
            done = (hi - lo <= 1e-15 * np.maximum(1.0, np.abs(mid))) | (mid == lo) | (mid == hi)
            if done.all():
                break
            # finished elements are frozen so each result is independent of
            # whatever else shares the batch
            below = g(np.exp(mid)) < target
            lo = np.where(~done & below, mid, lo)
            hi = np.where(~done & ~below, mid, hi)
        return np.exp(0.5 * (lo + hi))


class LifetimeDistribution:
    """Common interface of the parametric life models."""

    family: str = ""
    n_params: int = 0

    def log_sf(self, t):
        raise NotImplementedError

    def log_cdf(self, t):
        raise NotImplementedError

    def log_pdf(self, t):
        raise NotImplementedError

    def mean(self) -> float:
        raise NotImplementedError

    def params(self) -> dict:
        raise NotImplementedError

    def cdf_sf(self, t):
        """CDF and survival as exact complements.

        Whichever side is below one half is evaluated directly and the other
        is ``1 - side``, so both tails keep their relative precision.
        """
        log_s = np.asarray(self.log_sf(t), dtype=float)
        head = log_s > _LOG_HALF
        with np.errstate(divide="ignore", invalid="ignore"):
            f = np.where(head, np.exp(self.log_cdf(t)), 0.0)
            s = np.where(head, 1.0 - f, np.exp(log_s))
        f = np.where(head, f, 1.0 - s)
        return f, s

    def sf(self, t):
        return self.cdf_sf(t)[1]

    def cdf(self, t):
        return self.cdf_sf(t)[0]

    def pdf(self, t):
        return np.exp(self.log_pdf(t))

    def log_conditional_pdf(self, v, x):
        """Log density of a further life ``x`` given survival to age ``v``."""
        v = np.asarray(v, dtype=float)
        return self.log_pdf(v + x) - self.log_sf(v)

    def isf_log(self, log_s):
        """Time ``t`` with ``log R(t) = log_s`` (``log_s <= 0``)."""
        log_s = np.asarray(log_s, dtype=float)
        out = np.empty(log_s.shape)
        zero = log_s >= 0.0
        # upper half of the probability range is inverted on the CDF side,
        # where small probabilities keep their relative precision
        head = (log_s > _LOG_HALF) & ~zero
        tail = ~head & ~zero
        out[zero] = 0.0
        if head.any():
            target = np.log(-np.expm1(log_s[head]))
            out[head] = _bracket_solve(self.log_cdf, target, self.mean())
        if tail.any():
            out[tail] = _bracket_solve(lambda t: -self.log_sf(t), -log_s[tail], self.mean())
        return out

    def ppf(self, p):
        p = np.asarray(p, dtype=float)
        out = np.empty(p.shape)
        zero = p == 0.0
        low = (p < 0.5) & ~zero
        high = p >= 0.5
        out[zero] = 0.0
        if low.any():
            out[low] = _bracket_solve(self.log_cdf, np.log(p[low]), self.mean())
        if high.any():
            # 1 - p is exact for p >= 0.5
            out[high] = self.isf_log(np.log1p(-p[high]))
        return out


@dataclass(frozen=True)
class Exponential(LifetimeDistribution):
    rate: float
    family = "exponential"
    n_params = 1

    def __post_init__(self):
        object.__setattr__(self, "rate", _positive("rate", self.rate))

    def log_sf(self, t):
        return -self.rate * np.asarray(t, dtype=float)

    def log_cdf(self, t):
        with np.errstate(divide="ignore"):
            return np.log(-np.expm1(-self.rate * np.asarray(t, dtype=float)))

    def log_pdf(self, t):
        return math.log(self.rate) - self.rate * np.asarray(t, dtype=float)

    def log_conditional_pdf(self, v, x):
        # memoryless: the age cancels exactly
        return np.broadcast_to(self.log_pdf(x), np.broadcast(np.asarray(v), np.asarray(x)).shape)

    def isf_log(self, log_s):
        return -np.asarray(log_s, dtype=float) / self.rate

    def ppf(self, p):
        return -np.log1p(-np.asarray(p, dtype=float)) / self.rate

    def mean(self):
        return 1.0 / self.rate

    def params(self):
        return {"rate": self.rate}


@dataclass(frozen=True)
class Weibull(LifetimeDistribution):
    shape: float
    scale: float
    family = "weibull"
    n_params = 2

    def __post_init__(self):
        object.__setattr__(self, "shape", _positive("shape", self.shape))
        object.__setattr__(self, "scale", _positive("scale", self.scale))

    def _z(self, t):
        # overflow to inf is the correct limit for very old ages
        with np.errstate(over="ignore"):
            return (np.asarray(t, dtype=float) / self.scale) ** self.shape

    def log_sf(self, t):
        return -self._z(t)

    def log_cdf(self, t):
        with np.errstate(divide="ignore"):
            return np.log(-np.expm1(-self._z(t)))

    def log_pdf(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            u = t / self.scale
            return (
                math.log(self.shape / self.scale)
                + special.xlogy(self.shape - 1.0, u)
                - u**self.shape
            )

    def log_conditional_pdf(self, v, x):
        v = np.asarray(v, dtype=float)
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            # z(v + x) - z(v) without cancellation once v dominates x
            grown = self._z(v) * np.expm1(self.shape * np.log1p(x / v))
        grown = np.where(v > 0, grown, self._z(x))
        t = v + x
        with np.errstate(divide="ignore", invalid="ignore"):
            u = t / self.scale
            return math.log(self.shape / self.scale) + special.xlogy(self.shape - 1.0, u) - grown

    def isf_log(self, log_s):
        return self.scale * (-np.asarray(log_s, dtype=float)) ** (1.0 / self.shape)

    def ppf(self, p):
        return self.scale * (-np.log1p(-np.asarray(p, dtype=float))) ** (1.0 / self.shape)

    def mean(self):
        return self.scale * math.gamma(1.0 + 1.0 / self.shape)

    def params(self):
        return {"shape": self.shape, "scale": self.scale}


_GAMMA_TAIL = 1e-250


def _log_upper_gamma_tail(a, x):
    """``log Q(a, x)`` for ``x`` well past the mode, where ``Q`` underflows.

    Legendre continued fraction evaluated by the modified Lentz method.
    """
    x = np.asarray(x, dtype=float)
    tiny = 1e-300
    b = x + 1.0 - a
    c = np.full(x.shape, 1.0 / tiny)
    d = 1.0 / b
    h = d.copy()
    for i in range(1, 500):
        an = -i * (i - a)
        b = b + 2.0
        d = an * d + b
        d = np.where(np.abs(d) < tiny, tiny, d)
        c = b + an / c
        c = np.where(np.abs(c) < tiny, tiny, c)
        d = 1.0 / d
        delta = d * c
        h = h * delta
        if np.all(np.abs(delta - 1.0) <= 4e-16):
            break
    with np.errstate(divide="ignore"):
        return -x + a * np.log(x) - math.lgamma(a) + np.log(h)


@dataclass(frozen=True)
class Gamma(LifetimeDistribution):
    shape: float
    rate: float
    family = "gamma"
    n_params = 2

    def __post_init__(self):
        object.__setattr__(self, "shape", _positive("shape", self.shape))
        object.__setattr__(self, "rate", _positive("rate", self.rate))

    def log_sf(self, t):
        x = self.rate * np.asarray(t, dtype=float)
        q = special.gammaincc(self.shape, x)
        with np.errstate(divide="ignore"):
            out = np.log(q)
        tail = (q < _GAMMA_TAIL) & np.isfinite(x)
        if np.any(tail):
            out = np.array(out, dtype=float)
            out[tail] = _log_upper_gamma_tail(self.shape, np.broadcast_to(x, out.shape)[tail])
        return out

    def log_cdf(self, t):
        with np.errstate(divide="ignore"):
            return np.log(special.gammainc(self.shape, self.rate * np.asarray(t, dtype=float)))

    def log_pdf(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return (
                self.shape * math.log(self.rate)
                + special.xlogy(self.shape - 1.0, t)
                - self.rate * t
                - math.lgamma(self.shape)
            )

    def mean(self):
        return self.shape / self.rate

    def params(self):
        return {"shape": self.shape, "rate": self.rate}


@dataclass(frozen=True)
class Lognormal(LifetimeDistribution):
    mu: float
    sigma: float
    family = "lognormal"
    n_params = 2

    def __post_init__(self):
        mu = float(self.mu)
        if not math.isfinite(mu):
            raise ModelValidityError(f"mu must be finite, got {self.mu!r}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", _positive("sigma", self.sigma))

    def _z(self, t):
        with np.errstate(divide="ignore"):
            return (np.log(np.asarray(t, dtype=float)) - self.mu) / self.sigma

    def log_sf(self, t):
        return special.log_ndtr(-self._z(t))

    def log_cdf(self, t):
        return special.log_ndtr(self._z(t))

    def log_pdf(self, t):
        t = np.asarray(t, dtype=float)
        z = self._z(t)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = -0.5 * z * z - np.log(t * self.sigma) - 0.5 * math.log(2.0 * math.pi)
        return np.where(t > 0, out, -np.inf)

    def mean(self):
        return math.exp(self.mu + 0.5 * self.sigma**2)

    def params(self):
        return {"mu": self.mu, "sigma": self.sigma}


FAMILIES = {
    "exponential": Exponential,
    "weibull": Weibull,
    "gamma": Gamma,
    "lognormal": Lognormal,
}


def make_distribution(family: str, **params) -> LifetimeDistribution:
    """Build a distribution from its family name and named parameters."""
    try:
        cls = FAMILIES[family.lower()]
    except KeyError:
        raise ModelValidityError(
            f"unknown family {family!r}; expected one of {sorted(FAMILIES)}"
        ) from None
    try:
        return cls(**params)
    except TypeError as exc:
        raise ModelValidityError(f"bad parameters for {family}: {exc}") from None


def reliability_at(dist: LifetimeDistribution, t):
    """Probability of surviving beyond ``t``: R(t) = 1 - F(t)."""
    arr = _times(t)
    return _out(dist.sf(arr), t)


def cdf_at(dist: LifetimeDistribution, t):
    arr = _times(t)
    return _out(dist.cdf(arr), t)


def pdf_at(dist: LifetimeDistribution, t):
    arr = _times(t)
    return _out(dist.pdf(arr), t)


def hazard_at(dist: LifetimeDistribution, t):
    """Instantaneous failure rate pdf/R.

    Raises
    ------
    SingularityError
        Where survival has fallen below ``HAZARD_FLOOR``.
    """
    arr = _times(t)
    surv = dist.sf(arr)
    if (surv < HAZARD_FLOOR).any():
        raise SingularityError(f"hazard undefined: R(t) < {HAZARD_FLOOR:g} at t={t!r}")
    return _out(dist.pdf(arr) / surv, t)


def quantile(dist: LifetimeDistribution, p):
    """Inverse CDF on ``[0, 1)``.

    Exponential and Weibull are inverted in closed form; Gamma and Lognormal
    by bracketed bisection on the CDF (relative time tolerance 1e-15).
    """
    arr = np.asarray(p, dtype=float)
    if np.isnan(arr).any() or (arr < 0).any() or (arr >= 1).any():
        raise DomainError(f"probability must lie in [0, 1), got {p!r}")
    return _out(dist.ppf(arr), p)


def sample_ttf(dist: LifetimeDistribution, stream: RandomStream, size=None):
    """Draw times to failure by inverting the survival function.

    One uniform is consumed per draw, so a given stream position always maps
    to the same time.
    """
    n = 1 if size is None else int(size)
    u = stream.uniforms(n)
    draws = dist.isf_log(np.log(u))
    return float(draws[0]) if size is None else draws


def mttf(dist) -> float:
    """Mean time to failure.

    Closed form for the parametric families; a ``BathtubProfile`` is handled
    by adaptive quadrature of R(t) over [0, inf) at relative tolerance 1e-8.
    """
    if isinstance(dist, BathtubProfile):
        return dist.mean()
    return float(dist.mean())


# --------------------------------------------------------------------------
# Bathtub hazard profiles


@dataclass(frozen=True)
class DecreasingPower:
    """Burn-in hazard ``c * (1 + tau)**exponent`` with ``exponent < 0``.

    The unit shift keeps the hazard finite at the segment start.
    """

    c: float
    exponent: float

    def __post_init__(self):
        object.__setattr__(self, "c", _positive("c", self.c))
        if not (math.isfinite(self.exponent) and self.exponent < 0):
            raise ModelValidityError(f"exponent must be negative, got {self.exponent!r}")

    def hazard(self, tau):
        return self.c * (1.0 + tau) ** self.exponent

    def cumulative(self, tau):
        e1 = self.exponent + 1.0
        if e1 == 0.0:
            return self.c * np.log1p(tau)
        return self.c * ((1.0 + tau) ** e1 - 1.0) / e1


@dataclass(frozen=True)
class Constant:
    rate: float

    def __post_init__(self):
        object.__setattr__(self, "rate", _positive("rate", self.rate))

    def hazard(self, tau):
        return np.full(np.shape(tau), self.rate)

    def cumulative(self, tau):
        return self.rate * tau


@dataclass(frozen=True)
class IncreasingPower:
    """Wear-out hazard ``c * tau**exponent`` with ``exponent > 0``."""

    c: float
    exponent: float

    def __post_init__(self):
        object.__setattr__(self, "c", _positive("c", self.c))
        object.__setattr__(self, "exponent", _positive("exponent", self.exponent))

    def hazard(self, tau):
        return self.c * tau**self.exponent

    def cumulative(self, tau):
        return self.c * tau ** (self.exponent + 1.0) / (self.exponent + 1.0)


class BathtubProfile:
    """Piecewise hazard built from segment laws in segment-local time.

    The cumulative hazard is accumulated segment by segment, so it is
    continuous even where the hazard itself jumps at a boundary.

    Parameters
    ----------
    segments : sequence of (start, law)
        Start times must begin at 0 and strictly increase.
    """

    def __init__(self, segments):
        segments = tuple((float(s), law) for s, law in segments)
        if not segments:
            raise ModelValidityError("bathtub profile needs at least one segment")
        starts = np.array([s for s, _ in segments])
        if starts[0] != 0.0:
            raise ModelValidityError("first bathtub segment must start at 0")
        if np.any(np.diff(starts) <= 0):
            raise ModelValidityError("bathtub segment starts must strictly increase")
        self.segments = segments
        self._starts = starts
        offsets = [0.0]
        for (s0, law), s1 in zip(segments[:-1], starts[1:]):
            offsets.append(offsets[-1] + float(law.cumulative(s1 - s0)))
        self._offsets = np.array(offsets)

    def __repr__(self):
        return f"BathtubProfile({list(self.segments)!r})"

    def _segment(self, t):
        return np.searchsorted(self._starts, t, side="right") - 1

    def hazard(self, t):
        t = np.asarray(t, dtype=float)
        idx = self._segment(t)
        out = np.empty(t.shape)
        for i, (start, law) in enumerate(self.segments):
            m = idx == i
            if m.any():
                out[m] = law.hazard(t[m] - start)
        return out

    def cumulative_hazard(self, t):
        t = np.asarray(t, dtype=float)
        idx = self._segment(t)
        out = np.empty(t.shape)
        for i, (start, law) in enumerate(self.segments):
            m = idx == i
            if m.any():
                out[m] = self._offsets[i] + law.cumulative(t[m] - start)
        return out

    def sf(self, t):
        return np.exp(-self.cumulative_hazard(t))

    def mean(self) -> float:
        last = self.segments[-1][1]
        if isinstance(last, DecreasingPower) and last.exponent < -1.0:
            raise DomainError("final segment has bounded cumulative hazard: mean is infinite")
        breaks = list(self._starts[1:])
        total = 0.0
        edges = [0.0, *breaks]
        for a, b in zip(edges[:-1], edges[1:]):
            val, _ = integrate.quad(lambda x: float(self.sf(x)), a, b, epsrel=1e-10, epsabs=0)
            total += val
        val, _ = integrate.quad(
            lambda x: float(self.sf(x)), edges[-1], np.inf, epsrel=1e-10, epsabs=0, limit=200
        )
        return total + val


def bathtub_reliability(profile: BathtubProfile, t):
    """R(t) = exp(-H(t)) for a bathtub hazard profile."""
    arr = _times(t)
    return _out(profile.sf(arr), t)
