"""Maximum-likelihood fitting of failure process models to event logs.

Every fitter returns a ``FitResult`` whose log-likelihood is recomputed from
the public ``loglik_*`` function at the reported parameters, so the reported
value and the parameters can never drift apart.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special, stats

from .errors import ConvergenceError, DomainError, InsufficientDataError, ReliabilityError
from .lifetime import Exponential, Gamma, LifetimeDistribution, Lognormal, Weibull, make_distribution
from .pointproc.models import GRP, HPP, NHPP, RP, EventHistory, KijimaVariant, PowerLaw, kijima_virtual_age

__all__ = [
    "Truncation",
    "ObservedEvents",
    "FitResult",
    "ModelRanking",
    "MIN_EVENTS",
    "loglik_hpp",
    "loglik_power_law",
    "loglik_renewal",
    "loglik_grp",
    "fit_hpp",
    "fit_crow_amsaa",
    "fit_renewal",
    "fit_grp",
    "fit_candidate",
    "model_select",
    "trend_report",
]

MIN_EVENTS = {"hpp": 1, "crow_amsaa": 3, "renewal": 3, "grp": 5}

_MAX_EXPAND = 60
# log-parameter searches stay inside exp's finite range
_LOG_BOUND = 700.0
# stands in for -inf log-likelihood so simplex comparisons stay finite
_PENALTY = 1e300


class Truncation(str, enum.Enum):
    TIME = "time"
    FAILURE = "failure"


@dataclass(frozen=True, eq=False)
class ObservedEvents:
    """Failure times observed on ``[0, end]``.

    ``repair_times`` are optional; when absent repairs are taken as
    instantaneous. Under failure truncation the observation ends at the last
    failure.
    """

    failure_times: np.ndarray
    end: float | None = None
    truncation: Truncation = Truncation.TIME
    repair_times: np.ndarray | None = None

    def __post_init__(self):
        t = np.asarray(self.failure_times, dtype=float).reshape(-1)
        if not np.isfinite(t).all():
            raise DomainError("failure times must be finite")
        if t.size and t[0] <= 0:
            raise DomainError("failure times must be > 0")
        if (np.diff(t) <= 0).any():
            raise DomainError("failure times must be strictly increasing")
        truncation = Truncation(self.truncation)
        end = self.end
        if truncation is Truncation.FAILURE:
            if not t.size:
                raise InsufficientDataError("failure-truncated data needs at least one failure",
                                            required=1, observed=0)
            end = float(t[-1])
        elif end is None:
            if not t.size:
                raise DomainError("observation end is required when there are no failures")
            end = float(t[-1])
        end = float(end)
        if not (math.isfinite(end) and end > 0) or (t.size and end < t[-1]):
            raise DomainError(f"observation end {end!r} must be positive and >= the last failure")
        r = self.repair_times
        if r is not None:
            r = np.asarray(r, dtype=float).reshape(-1)
            if r.shape != t.shape:
                raise DomainError("repair_times must match failure_times in length")
            if (r < t).any() or (t[1:] <= r[:-1]).any():
                raise DomainError("each repair must complete before the next failure")
        object.__setattr__(self, "failure_times", t)
        object.__setattr__(self, "end", end)
        object.__setattr__(self, "truncation", truncation)
        object.__setattr__(self, "repair_times", r)

    @classmethod
    def from_history(cls, history: EventHistory) -> "ObservedEvents":
        return cls(history.fail_times, history.horizon, Truncation.TIME, history.repair_times)

    @property
    def n(self) -> int:
        return int(self.failure_times.size)

    def gaps(self) -> np.ndarray:
        """Operating time before each failure."""
        t = self.failure_times
        starts = self.repair_times if self.repair_times is not None else t
        return t - np.concatenate(([0.0], starts[:-1]))

    def rescaled(self, c: float) -> "ObservedEvents":
        r = None if self.repair_times is None else self.repair_times * c
        return ObservedEvents(self.failure_times * c, self.end * c, self.truncation, r)


@dataclass(frozen=True)
class FitResult:
    name: str
    model: object
    log_likelihood: float
    n_params: int
    diagnostics: dict = field(default_factory=dict)

    @property
    def aic(self) -> float:
        return 2.0 * self.n_params - 2.0 * self.log_likelihood

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "model": self.model.kind,
            "parameters": self.model.params(),
            "log_likelihood": self.log_likelihood,
            "aic": self.aic,
            "n_params": self.n_params,
            "diagnostics": self.diagnostics,
        }


@dataclass(frozen=True)
class ModelRanking:
    ranked: tuple[FitResult, ...]
    failures: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.ranked)

    def __getitem__(self, i):
        return self.ranked[i]


def _require(obs: ObservedEvents, kind: str):
    need = MIN_EVENTS[kind]
    if obs.n < need:
        raise InsufficientDataError(
            f"{kind} needs at least {need} failures, got {obs.n}", required=need, observed=obs.n
        )


# --------------------------------------------------------------------------
# Log-likelihoods


def loglik_hpp(rate: float, obs: ObservedEvents) -> float:
    return obs.n * math.log(rate) - rate * obs.end


def loglik_power_law(lam: float, beta: float, obs: ObservedEvents) -> float:
    t = obs.failure_times
    return float(
        obs.n * math.log(lam * beta) + (beta - 1.0) * np.log(t).sum() - lam * obs.end**beta
    )


def loglik_renewal(dist: LifetimeDistribution, gaps) -> float:
    return float(np.sum(dist.log_pdf(np.asarray(gaps, dtype=float))))


def _prior_ages(gaps, q, variant):
    gaps = np.asarray(gaps, dtype=float)
    ages = kijima_virtual_age(gaps[:-1], q, variant) if gaps.size > 1 else np.empty(0)
    return np.concatenate(([0.0], ages))


def loglik_grp(dist: LifetimeDistribution, q: float, variant, gaps) -> float:
    """Sum of ``log f(v + x) - log R(v)`` with ``v`` the age before each gap."""
    gaps = np.asarray(gaps, dtype=float)
    v = _prior_ages(gaps, q, variant)
    if not np.isfinite(v).all():
        # Kijima II with q > 1 can push ages past the float range
        return -math.inf
    return float(np.sum(dist.log_conditional_pdf(v, gaps)))


# --------------------------------------------------------------------------
# Closed-form fits


def fit_hpp(obs: ObservedEvents) -> FitResult:
    _require(obs, "hpp")
    rate = obs.n / obs.end
    return FitResult(
        "hpp", HPP(rate), loglik_hpp(rate, obs), 1,
        {"method": "closed_form", "truncation": obs.truncation.value},
    )


def fit_crow_amsaa(obs: ObservedEvents) -> FitResult:
    """Power-law NHPP fit.

    Time-truncated data use ``beta = n / sum(ln(T / t_i))``. Failure-truncated
    data use ``n - 1`` in the numerator (the last failure defines ``T`` and
    contributes a zero term). In both cases ``lam = n / T**beta``.
    """
    _require(obs, "crow_amsaa")
    t = obs.failure_times
    T = obs.end
    if obs.truncation is Truncation.TIME:
        if (t == T).any():
            raise DomainError(
                "a failure coincides with the end of a time-truncated observation; "
                "treat the data as failure-truncated"
            )
        numerator = obs.n
    else:
        numerator = obs.n - 1
    s = float(np.log(T / t).sum())
    if s <= 0:
        raise DomainError("degenerate failure times: sum of ln(T / t_i) is zero")
    beta = numerator / s
    lam = obs.n / T**beta
    return FitResult(
        "crow_amsaa", NHPP(PowerLaw(lam, beta)), loglik_power_law(lam, beta, obs), 2,
        {
            "method": "closed_form",
            "truncation": obs.truncation.value,
            "beta_numerator": "n" if numerator == obs.n else "n-1",
        },
    )


# --------------------------------------------------------------------------
# Renewal fits


def _expand_bracket(f, lo, hi):
    """Grow ``[lo, hi]`` until ``f`` changes sign; ``f`` increasing."""
    flo, fhi = f(lo), f(hi)
    for i in range(_MAX_EXPAND):
        if flo < 0 < fhi:
            return lo, hi, i
        if flo >= 0:
            if lo <= -_LOG_BOUND:
                return None
            lo = max(lo - 2.0**i, -_LOG_BOUND)
            flo = f(lo)
        if fhi <= 0:
            if hi >= _LOG_BOUND:
                return None
            hi = min(hi + 2.0**i, _LOG_BOUND)
            fhi = f(hi)
    return None


def _weibull_mle(x):
    lx = np.log(x)
    c = lx.max()
    mean_lx = lx.mean()

    def score(log_k):
        k = math.exp(log_k)
        w = np.exp(k * (lx - c))
        return float(w @ lx / w.sum() - 1.0 / k - mean_lx)

    bracket = _expand_bracket(score, -1.0, 1.0)
    if bracket is None:
        raise ConvergenceError(
            "Weibull shape diverges: gaps are (near-)deterministic",
            diagnostics={"reason": "near_deterministic_data", "log_shape_searched_to": _LOG_BOUND},
        )
    lo, hi, expansions = bracket
    log_k, res = optimize.brentq(score, lo, hi, xtol=1e-14, rtol=1e-13, full_output=True)
    k = math.exp(log_k)
    scale = math.exp(c + math.log(np.mean(np.exp(k * (lx - c)))) / k)
    return Weibull(k, scale), {"iterations": res.iterations, "bracket_expansions": expansions,
                               "converged": res.converged}


def _gamma_mle(x):
    m = float(x.mean())
    s = math.log(m) - float(np.log(x).mean())
    if s <= 1e-15:
        raise ConvergenceError(
            "Gamma shape diverges: gaps are (near-)deterministic",
            diagnostics={"reason": "near_deterministic_data"},
        )

    def f(log_k):
        k = math.exp(log_k)
        return s - (math.log(k) - special.digamma(k))

    bracket = _expand_bracket(f, -1.0, 1.0)
    if bracket is None:
        raise ConvergenceError("Gamma shape search did not bracket a root",
                               diagnostics={"reason": "no_bracket"})
    lo, hi, expansions = bracket
    log_k, res = optimize.brentq(f, lo, hi, xtol=1e-14, rtol=1e-13, full_output=True)
    k = math.exp(log_k)
    return Gamma(k, k / m), {"iterations": res.iterations, "bracket_expansions": expansions,
                             "converged": res.converged}


def _lognormal_mle(x):
    lx = np.log(x)
    mu = float(lx.mean())
    sigma = math.sqrt(float(np.mean((lx - mu) ** 2)))
    if sigma <= 0:
        raise ConvergenceError(
            "log-sd is zero: gaps are deterministic",
            diagnostics={"reason": "near_deterministic_data"},
        )
    return Lognormal(mu, sigma), {"iterations": 0}


def _renewal_mle(family, x):
    family = family.lower()
    if family == "exponential":
        return Exponential(x.size / float(x.sum())), {"method": "closed_form"}
    if family == "weibull":
        dist, diag = _weibull_mle(x)
    elif family == "gamma":
        dist, diag = _gamma_mle(x)
    elif family == "lognormal":
        dist, diag = _lognormal_mle(x)
        return dist, {"method": "closed_form", **diag}
    else:
        raise DomainError(f"unknown family {family!r}")
    return dist, {"method": "profile_root", **diag}


def fit_renewal(obs: ObservedEvents, family: str = "weibull") -> FitResult:
    """Renewal process fit: i.i.d. life model on the operating gaps."""
    _require(obs, "renewal")
    gaps = obs.gaps()
    dist, diag = _renewal_mle(family, gaps)
    return FitResult(
        f"renewal:{dist.family}", RP(dist), loglik_renewal(dist, gaps), dist.n_params, diag
    )


# --------------------------------------------------------------------------
# GRP fits


def _grp_weibull_profile(gaps, q, variant):
    """Best Weibull for fixed ``q``; the scale is profiled out analytically."""
    v = _prior_ages(gaps, q, variant)
    n = gaps.size
    if not np.isfinite(v).all():
        return Weibull(1.0, 1.0), -math.inf, 0
    y = v + gaps
    ly = np.log(y)
    with np.errstate(divide="ignore"):
        # log(v / y) without the cancellation of log(v) - log(y)
        lvy = -np.log1p(gaps / v)
    c = ly.max()
    sum_ly = ly.sum()

    def log_s(beta):
        # sum of y**beta - v**beta, factored to avoid cancellation when v ~ y
        total = np.sum(np.exp(beta * (ly - c)) * -np.expm1(beta * lvy))
        return beta * c + math.log(total) if total > 0 else -math.inf

    def neg(log_beta):
        beta = math.exp(log_beta)
        ls = log_s(beta)
        if not math.isfinite(ls):
            return _PENALTY
        return -(n * log_beta - n * (ls - math.log(n)) + (beta - 1.0) * sum_ly - n)

    res = optimize.minimize_scalar(neg, bounds=(math.log(1e-3), math.log(1e3)), method="bounded",
                                   options={"xatol": 1e-11, "maxiter": 500})
    beta = math.exp(res.x)
    scale = math.exp((log_s(beta) - math.log(n)) / beta)
    return Weibull(beta, scale), -res.fun, int(res.nfev)


def _grp_generic_profile(gaps, q, variant, family, start: LifetimeDistribution):
    names = list(start.params())
    x0 = np.array([start.params()[k] for k in names], dtype=float)
    logged = [k != "mu" for k in names]
    x0 = np.where(logged, np.log(np.abs(x0) + 1e-300), x0)

    def unpack(z):
        return make_distribution(family, **{
            k: (math.exp(zi) if lg else zi) for k, zi, lg in zip(names, z, logged)
        })

    def neg(z):
        try:
            ll = loglik_grp(unpack(z), q, variant, gaps)
        except ReliabilityError:
            return _PENALTY
        return -ll if math.isfinite(ll) else _PENALTY

    # parameters live on a log scale, so xatol is a relative tolerance; the
    # value tolerance tracks the likelihood's own rounding level
    fatol = 1e-12 * max(1.0, abs(neg(x0)) if neg(x0) < _PENALTY else 1.0)
    res = optimize.minimize(neg, x0, method="Nelder-Mead",
                            options={"xatol": 1e-9, "fatol": fatol, "maxiter": 4000})
    return unpack(res.x), -res.fun, int(res.nfev)


def fit_grp(obs: ObservedEvents, family: str = "weibull", variant=KijimaVariant.I, *,
            q_bounds: tuple[float, float] = (0.0, 2.0), q: float | None = None,
            grid: int = 21) -> FitResult:
    """Generalized renewal process fit with Kijima virtual age.

    The likelihood conditions each gap on the virtual age reached before it.
    ``q`` is located by a grid over ``q_bounds`` followed by bounded Brent
    refinement around the best grid point (relative tolerance 1e-6); pass
    ``q`` to hold it fixed. For an exponential life model the likelihood
    does not depend on ``q`` and the fit reduces to a renewal fit.
    """
    _require(obs, "grp")
    variant = KijimaVariant.parse(variant)
    family = family.lower()
    gaps = obs.gaps()
    name = f"grp:{family}:{variant.value}"

    if family == "exponential":
        dist, _ = _renewal_mle("exponential", gaps)
        probe = np.linspace(q_bounds[0], q_bounds[1], 5)
        spread = np.ptp([loglik_grp(dist, qi, variant, gaps) for qi in probe])
        q_out = 0.0 if q is None else float(q)
        model = GRP(dist, q_out, variant)
        return FitResult(
            name, model, loglik_grp(dist, q_out, variant, gaps), 1,
            {"method": "closed_form", "q_identifiable": False,
             "q_loglik_spread": float(spread), "reduces_to": "renewal:exponential"},
        )

    renewal, _ = _renewal_mle(family, gaps)
    warm = [renewal]

    def profile(qv):
        if qv <= 0:
            # every virtual age is zero: the renewal fit is the exact profile
            return renewal, loglik_grp(renewal, qv, variant, gaps), 0
        if family == "weibull":
            return _grp_weibull_profile(gaps, qv, variant)
        dist, ll, nfev = _grp_generic_profile(gaps, qv, variant, family, warm[0])
        warm[0] = dist
        return dist, ll, nfev

    evaluations = 0
    if q is not None:
        dist, _, nfev = profile(float(q))
        q_hat = float(q)
        diag = {"method": "profile", "q_fixed": True, "evaluations": nfev}
        n_params = dist.n_params
    else:
        lo, hi = map(float, q_bounds)
        if not lo < hi:
            raise DomainError(f"q_bounds must satisfy lo < hi, got {q_bounds!r}")
        qs = np.linspace(lo, hi, grid)
        lls = []
        for qv in qs:
            _, ll, nfev = profile(qv)
            evaluations += nfev
            lls.append(ll)
        best = int(np.argmax(lls))
        a = qs[max(best - 1, 0)]
        b = qs[min(best + 1, grid - 1)]
        tol = 1e-6 * max(1.0, abs(qs[best]))

        def neg(qv):
            return -profile(qv)[1]

        res = optimize.minimize_scalar(neg, bounds=(a, b), method="bounded",
                                       options={"xatol": tol, "maxiter": 200})
        q_hat = float(res.x)
        if -res.fun < lls[best]:
            q_hat = float(qs[best])
        dist, _, nfev = profile(q_hat)
        evaluations += nfev + int(res.nfev)
        at_edge = best in (0, grid - 1) and abs(q_hat - qs[best]) <= 2 * tol
        diag = {
            "method": "grid_then_brent",
            "q_fixed": False,
            "q_bounds": [lo, hi],
            "grid_points": grid,
            "refine_iterations": int(res.nit) if hasattr(res, "nit") else None,
            "bracket_width": float(b - a),
            "q_tolerance": tol,
            "q_at_search_bound": bool(at_edge),
            "evaluations": evaluations,
        }
        n_params = dist.n_params + 1
    model = GRP(dist, q_hat, variant)
    return FitResult(name, model, loglik_grp(dist, q_hat, variant, gaps), n_params, diag)


# --------------------------------------------------------------------------


def fit_candidate(obs: ObservedEvents, candidate: str) -> FitResult:
    """Fit one candidate named ``hpp``, ``crow_amsaa``, ``renewal[:family]``
    or ``grp[:family[:variant]]``."""
    parts = candidate.strip().lower().split(":")
    kind = parts[0]
    if kind == "hpp" and len(parts) == 1:
        return fit_hpp(obs)
    if kind in ("crow_amsaa", "nhpp") and len(parts) == 1:
        return fit_crow_amsaa(obs)
    if kind in ("renewal", "rp") and len(parts) <= 2:
        return fit_renewal(obs, parts[1] if len(parts) > 1 else "weibull")
    if kind == "grp" and len(parts) <= 3:
        family = parts[1] if len(parts) > 1 else "weibull"
        variant = parts[2] if len(parts) > 2 else KijimaVariant.I
        return fit_grp(obs, family, variant)
    raise DomainError(f"unknown candidate {candidate!r}")


def candidate_kind(candidate: str) -> str:
    kind = candidate.strip().lower().split(":")[0]
    return {"nhpp": "crow_amsaa", "rp": "renewal"}.get(kind, kind)


def model_select(obs: ObservedEvents, candidates) -> ModelRanking:
    """Fit every candidate and rank by AIC (ties go to fewer parameters).

    A candidate that cannot be fitted is recorded in ``failures`` and does
    not stop the others.
    """
    candidates = list(candidates)
    if not candidates:
        raise DomainError("candidate set is empty")
    for c in candidates:
        if candidate_kind(c) not in MIN_EVENTS:
            raise DomainError(f"unknown candidate {c!r}")
    fits, failures = [], {}
    for c in candidates:
        try:
            fits.append(fit_candidate(obs, c))
        except ReliabilityError as exc:
            failures[c] = f"{type(exc).__name__}: {exc}"
    fits.sort(key=lambda r: (r.aic, r.n_params))
    return ModelRanking(tuple(fits), failures)


def trend_report(obs: ObservedEvents, alpha: float = 0.05) -> dict:
    """Test for a trend in the failure intensity.

    Under a homogeneous Poisson process ``2 * sum(ln(T / t_i))`` is
    chi-square with ``2n`` degrees of freedom (``2(n - 1)`` when failure
    truncated); a two-sided test at ``alpha`` decides between ``trend-free``
    and ``improving``/``deteriorating``. The Laplace statistic is reported
    alongside.
    """
    fit = fit_crow_amsaa(obs)
    beta = fit.model.rocof.beta
    t, T, n = obs.failure_times, obs.end, obs.n
    dof = 2 * n if obs.truncation is Truncation.TIME else 2 * (n - 1)
    stat = 2.0 * float(np.log(T / t).sum())
    cdf = stats.chi2.cdf(stat, dof)
    p_value = float(min(1.0, 2.0 * min(cdf, 1.0 - cdf)))
    laplace = float((t.mean() - T / 2.0) / (T * math.sqrt(1.0 / (12.0 * n))))
    if p_value >= alpha:
        verdict = "trend-free"
    else:
        verdict = "deteriorating" if beta > 1 else "improving"
    return {
        "beta": beta,
        "chi2_statistic": stat,
        "degrees_of_freedom": dof,
        "p_value": p_value,
        "laplace_u": laplace,
        "alpha": alpha,
        "verdict": verdict,
    }
