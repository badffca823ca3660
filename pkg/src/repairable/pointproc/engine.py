"""Vectorised Monte Carlo engine for failure/repair histories.

Trajectories advance in lock step: step ``k`` draws the failure uniform at
index ``2k`` and the repair uniform at index ``2k + 1`` of the trajectory's own
stream. Because every uniform is addressed by (seed, trajectory, index) the
history of trajectory ``i`` does not depend on which other trajectories are
simulated alongside it, how they are chunked, or how many threads run.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError
from ..rng import uniforms
from .models import GRP, EventHistory, Instantaneous, SimulationConfig

__all__ = ["SimulationBatch", "simulate_batch", "simulate_history"]

CHUNK = 8192


@dataclass(frozen=True, eq=False)
class SimulationBatch:
    """Events of many trajectories in flat arrays.

    Events are ordered by trajectory and, within a trajectory, by time.
    ``position`` maps each event to the row of its trajectory in
    ``trajectories``; ``order`` is the 0-based event number within the
    trajectory. ``repair_end`` is not clipped to the horizon.
    """

    trajectories: np.ndarray
    position: np.ndarray
    order: np.ndarray
    fail: np.ndarray
    repair_end: np.ndarray
    horizon: float
    seed: int

    @property
    def n_trajectories(self) -> int:
        return int(self.trajectories.size)

    @property
    def n_events(self) -> int:
        return int(self.fail.size)

    def history(self, row: int) -> EventHistory:
        lo, hi = np.searchsorted(self.position, [row, row + 1])
        fail = self.fail[lo:hi]
        end = self.repair_end[lo:hi]
        repair_open = bool(end.size and end[-1] > self.horizon)
        return EventHistory(
            fail_times=fail.copy(),
            repair_times=np.minimum(end, self.horizon),
            horizon=self.horizon,
            provenance="simulated",
            seed=self.seed,
            trajectory=int(self.trajectories[row]),
            repair_open=repair_open,
        )

    def histories(self):
        for row in range(self.n_trajectories):
            yield self.history(row)


def _run_chunk(model, policy, horizon, seed, ids):
    n = ids.size
    rows = np.arange(n)
    clock = np.zeros(n)
    age = np.zeros(n)
    is_grp = isinstance(model, GRP)
    instantaneous = isinstance(policy, Instantaneous)
    out_rows, out_order, out_fail, out_end = [], [], [], []
    k = 0
    while rows.size:
        log_u = np.log(uniforms(seed, ids[rows], 2 * k))
        fail, x = model._next(clock, age, log_u)
        # an explosive process stops once the clock no longer advances in floating point
        alive = (fail <= horizon) & ((fail > clock) | (k == 0))
        if not alive.all():
            rows, clock, age, fail, x = rows[alive], clock[alive], age[alive], fail[alive], x[alive]
            if not rows.size:
                break
        if instantaneous:
            end = fail
        else:
            end = fail + policy.durations(np.log(uniforms(seed, ids[rows], 2 * k + 1)))
        out_rows.append(rows)
        out_order.append(np.full(rows.size, k, dtype=np.int64))
        out_fail.append(fail)
        out_end.append(end)
        if is_grp:
            age = model._age(age, x)
        clock = end
        k += 1
    if not out_rows:
        empty = np.empty(0)
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64), empty, empty
    r = np.concatenate(out_rows)
    o = np.concatenate(out_order)
    idx = np.lexsort((o, r))
    return r[idx], o[idx], np.concatenate(out_fail)[idx], np.concatenate(out_end)[idx]


def simulate_batch(model, policy, cfg: SimulationConfig, indices=None, *, workers: int = 1,
                   chunk_size: int = CHUNK) -> SimulationBatch:
    """Simulate trajectories ``indices`` (default: all of ``cfg``).

    ``workers > 1`` spreads chunks over a thread pool; results are identical
    for any worker count or chunk size.
    """
    model.validate(cfg.horizon)
    if indices is None:
        ids = np.arange(cfg.n_trajectories, dtype=np.int64)
    else:
        ids = np.unique(np.asarray(indices, dtype=np.int64))
        if ids.size and (ids[0] < 0 or ids[-1] >= cfg.n_trajectories):
            raise DomainError("trajectory index outside [0, n_trajectories)")
    starts = list(range(0, ids.size, chunk_size)) or [0]
    chunks = [ids[s:s + chunk_size] for s in starts]

    def run(chunk):
        return _run_chunk(model, policy, cfg.horizon, cfg.seed, chunk)

    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]

    offsets = np.cumsum([0] + [c.size for c in chunks[:-1]])
    position = np.concatenate([p[0] + off for p, off in zip(parts, offsets)])
    return SimulationBatch(
        trajectories=ids,
        position=position,
        order=np.concatenate([p[1] for p in parts]),
        fail=np.concatenate([p[2] for p in parts]),
        repair_end=np.concatenate([p[3] for p in parts]),
        horizon=cfg.horizon,
        seed=cfg.seed,
    )


def simulate_history(model, policy, cfg: SimulationConfig, trajectory: int) -> EventHistory:
    """History of a single trajectory, reproducible in isolation."""
    if not 0 <= trajectory < cfg.n_trajectories:
        raise DomainError(
            f"trajectory index {trajectory} outside [0, {cfg.n_trajectories})"
        )
    return simulate_batch(model, policy, cfg, [trajectory]).history(0)
