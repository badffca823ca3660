"""Expected counts, ROCOF, MTBF and availability.

Closed forms are used where they exist; everything else is estimated from a
simulated batch and returned with its Monte Carlo standard error. Aggregation
uses integer counts only, so estimates are independent of evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError, InsufficientEventsError
from ..lifetime import Exponential, Gamma
from .engine import SimulationBatch, simulate_batch
from .models import GRP, HPP, NHPP, RP, Instantaneous, SimulationConfig

__all__ = [
    "Estimate",
    "analytic_expected_count",
    "expected_count",
    "rocof_at",
    "mtbf",
    "availability",
    "count_curve",
    "availability_curve",
    "rocof_curve",
]


@dataclass(frozen=True)
class Estimate:
    """A value with its standard error; ``n == 0`` marks a closed form."""

    value: float
    stderr: float = 0.0
    n: int = 0
    method: str = "analytic"

    def __float__(self):
        return float(self.value)


def _exponential_rate(model):
    """Rate when the model is a Poisson process in disguise, else None."""
    if isinstance(model, HPP):
        return model.rate
    if isinstance(model, (RP, GRP)) and isinstance(model.ttf, Exponential):
        return model.ttf.rate
    return None


def analytic_expected_count(model, t: float):
    """Closed-form mean number of failures in ``[0, t]`` or ``None``.

    Closed forms: Poisson processes (``rate * t``), every NHPP intensity law,
    and the renewal process with Erlang-2 times to failure, whose renewal
    function is ``mu t / 2 - 1/4 + exp(-2 mu t) / 4``. All assume
    instantaneous repair.
    """
    rate = _exponential_rate(model)
    if rate is not None:
        return rate * t
    if isinstance(model, NHPP):
        return float(model.rocof.cumulative(t))
    if isinstance(model, RP) and isinstance(model.ttf, Gamma) and model.ttf.shape == 2.0:
        mu = model.ttf.rate
        return mu * t / 2.0 - 0.25 + 0.25 * math.exp(-2.0 * mu * t)
    return None


def _check_time(t, cfg):
    if t < 0 or (cfg is not None and t > cfg.horizon):
        upper = f", {cfg.horizon:g}" if cfg is not None else ", inf)"
        raise DomainError(f"t = {t!r} outside [0{upper}]")


def count_curve(batch: SimulationBatch, grid) -> tuple[np.ndarray, np.ndarray]:
    """Mean cumulative failure count and its standard error at each grid time.

    Per-trajectory second moments come from the identity
    ``N**2 = sum_{k=1..N} (2k - 1)``, so the whole curve needs one sort.
    """
    grid = np.asarray(grid, dtype=float)
    n = batch.n_trajectories
    idx = np.argsort(batch.fail, kind="stable")
    fails = batch.fail[idx]
    weight = 2 * (batch.order[idx] + 1) - 1
    csum = np.concatenate(([0], np.cumsum(weight, dtype=np.int64)))
    hits = np.searchsorted(fails, grid, side="right")
    total = hits.astype(np.int64)
    squares = csum[hits]
    mean = total / n
    if n > 1:
        var = (n * squares - total * total) / (n * (n - 1.0))
        se = np.sqrt(np.maximum(var, 0.0) / n)
    else:
        se = np.full(grid.shape, np.nan)
    return mean, se


def availability_curve(batch: SimulationBatch, grid) -> tuple[np.ndarray, np.ndarray]:
    """Fraction of trajectories not under repair at each grid time."""
    grid = np.asarray(grid, dtype=float)
    n = batch.n_trajectories
    fails = np.sort(batch.fail)
    ends = np.sort(batch.repair_end)
    down = np.searchsorted(fails, grid, side="right") - np.searchsorted(ends, grid, side="right")
    p = 1.0 - down / n
    return p, np.sqrt(p * (1.0 - p) / n)


def rocof_curve(batch: SimulationBatch, grid, window: float) -> tuple[np.ndarray, np.ndarray]:
    """Failures per unit time in a window centred on each grid time.

    The window is shifted, not shrunk, where it would leave ``[0, horizon]``.
    """
    grid = np.asarray(grid, dtype=float)
    n = batch.n_trajectories
    h = min(float(window), batch.horizon)
    rate = np.empty(grid.shape)
    se = np.empty(grid.shape)
    for i, t in enumerate(grid):
        a = min(max(t - 0.5 * h, 0.0), batch.horizon - h)
        b = a + h
        inside = (batch.fail > a) & (batch.fail <= b)
        counts = np.bincount(batch.position[inside], minlength=n)
        rate[i] = counts.mean() / h
        se[i] = counts.std(ddof=1) / math.sqrt(n) / h if n > 1 else math.nan
    return rate, se


def expected_count(model, t: float, cfg: SimulationConfig | None = None, *,
                   method: str = "auto", policy=None, workers: int = 1) -> Estimate:
    """Mean number of failures in ``[0, t]``.

    ``method`` is ``"auto"`` (closed form when one exists),
    ``"analytic"`` or ``"monte_carlo"``.
    """
    _check_time(t, cfg)
    policy = policy or Instantaneous()
    if method not in ("auto", "analytic", "monte_carlo"):
        raise DomainError(f"unknown method {method!r}")
    if method != "monte_carlo" and isinstance(policy, Instantaneous):
        value = analytic_expected_count(model, t)
        if value is not None:
            return Estimate(float(value))
    if method == "analytic":
        raise DomainError(f"no closed-form expected count for {model!r}")
    if cfg is None:
        raise DomainError("a SimulationConfig is needed for the Monte Carlo estimate")
    batch = simulate_batch(model, policy, cfg, workers=workers)
    mean, se = count_curve(batch, [t])
    return Estimate(float(mean[0]), float(se[0]), batch.n_trajectories, "monte_carlo")


def rocof_at(model, t: float, cfg: SimulationConfig | None = None, *,
             window: float | None = None, workers: int = 1) -> Estimate:
    """Rate of occurrence of failures at ``t``.

    Exact for Poisson processes; renewal-type models use a Monte Carlo
    finite difference over ``window`` (default ``horizon / 50``).
    """
    if t < 0:
        raise DomainError(f"t must be >= 0, got {t!r}")
    rate = _exponential_rate(model)
    if rate is not None:
        return Estimate(rate)
    if isinstance(model, NHPP):
        return Estimate(float(model.rocof.intensity(t)))
    if cfg is None:
        raise DomainError("a SimulationConfig is needed for the Monte Carlo ROCOF")
    _check_time(t, cfg)
    window = cfg.horizon / 50.0 if window is None else float(window)
    if not window > 0:
        raise DomainError("ROCOF window must be > 0")
    batch = simulate_batch(model, Instantaneous(), cfg, workers=workers)
    r, se = rocof_curve(batch, [t], window)
    return Estimate(float(r[0]), float(se[0]), batch.n_trajectories, "monte_carlo")


def mtbf(model, window: tuple[float, float], cfg: SimulationConfig | None = None, *,
         policy=None, workers: int = 1) -> Estimate:
    """Mean time between failures over ``window = (t0, t1)``.

    ``1 / rate`` for Poisson processes. Otherwise the window length divided
    by the mean failure count in the window, with a delta-method standard
    error.

    Raises
    ------
    InsufficientEventsError
        When no trajectory fails inside the window.
    """
    t0, t1 = map(float, window)
    if not t0 < t1:
        raise DomainError(f"window must satisfy t0 < t1, got {window!r}")
    if isinstance(model, HPP):
        return Estimate(1.0 / model.rate)
    if cfg is None:
        raise DomainError("a SimulationConfig is needed for the Monte Carlo MTBF")
    if t0 < 0 or t1 > cfg.horizon:
        raise DomainError(f"window {window!r} outside [0, {cfg.horizon:g}]")
    batch = simulate_batch(model, policy or Instantaneous(), cfg, workers=workers)
    inside = (batch.fail > t0) & (batch.fail <= t1)
    counts = np.bincount(batch.position[inside], minlength=batch.n_trajectories)
    total = int(counts.sum())
    if total == 0:
        raise InsufficientEventsError(
            f"no failures in ({t0:g}, {t1:g}] across {cfg.n_trajectories} trajectories",
            n_trajectories=cfg.n_trajectories,
        )
    n = batch.n_trajectories
    mean = total / n
    width = t1 - t0
    se_mean = counts.std(ddof=1) / math.sqrt(n) if n > 1 else math.nan
    return Estimate(width / mean, width * se_mean / mean**2, n, "monte_carlo")


def availability(model, policy, t: float, cfg: SimulationConfig, *, workers: int = 1) -> Estimate:
    """Probability the system is operating (not under repair) at time ``t``."""
    _check_time(t, cfg)
    batch = simulate_batch(model, policy, cfg, workers=workers)
    p, se = availability_curve(batch, [t])
    return Estimate(float(p[0]), float(se[0]), batch.n_trajectories, "monte_carlo")
