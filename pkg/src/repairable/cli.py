"""Command-line interface.

Every command reads a TOML config (plus ``--set`` overrides), computes its
results in memory and only then writes them, atomically, under ``--out``.
A failing run therefore leaves no partial output behind.

Exit status: 0 success, 2 configuration or input error, 3 invalid model,
4 insufficient data, 5 invalid resiliency events, 6 unmet precondition.
"""

from __future__ import annotations

import argparse
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import Config, load_config
from .errors import ConfigError, InsufficientDataError, PreconditionError, ReliabilityError
from .estimation import MIN_EVENTS, ObservedEvents, Truncation, candidate_kind, model_select, trend_report
from .io import atomic_write_text, format_csv, format_history_csv, format_json, read_event_log, read_portfolio_csv
from .pointproc import (
    Instantaneous,
    analytic_expected_count,
    availability_curve,
    count_curve,
    rocof_curve,
    simulate_batch,
)
from .resiliency import mission_resiliency, performance_trajectory
from .risk import reliability_proxy, scenario_risk, system_risk
from .rng import entropy_seed

__all__ = ["main", "build_parser"]

DEFAULT_CANDIDATES = ("hpp", "crow_amsaa", "renewal:weibull", "grp:weibull")


class Outputs:
    """Files produced by a command, written together at the end."""

    def __init__(self):
        self.files: dict[str, str] = {}
        self.messages: list[str] = []

    def add(self, name: str, text: str):
        self.files[name] = text

    def note(self, message: str):
        self.messages.append(message)

    def commit(self, out_dir: Path, quiet: bool):
        for name, text in self.files.items():
            atomic_write_text(out_dir / name, text)
        if not quiet:
            for message in self.messages:
                print(message)
            print(f"wrote {len(self.files)} file(s) to {out_dir}")


def _threads(args, cfg: Config) -> int:
    n = args.threads if args.threads is not None else cfg.integer("sim.threads", 1)
    if n < 1:
        raise ConfigError(f"threads must be >= 1, got {n}")
    return n


def _seed(args, cfg: Config) -> int:
    seed = args.seed
    if seed is None and cfg.has("sim.seed"):
        seed = cfg.integer("sim.seed")
    if seed == -1:
        return entropy_seed()
    return seed


# --------------------------------------------------------------------------
# Commands


def cmd_simulate(args, cfg: Config, out: Outputs):
    model = cfg.model()
    policy = cfg.policy()
    sim = cfg.simulation(_seed(args, cfg))
    mode = cfg.string("sim.mode", "summary", choices={"summary", "histories"})
    workers = _threads(args, cfg)
    with cfg.anchor("model.kind"):
        batch = simulate_batch(model, policy, sim, workers=workers)

    if mode == "histories":
        width = max(6, len(str(sim.n_trajectories - 1)))
        for row in range(batch.n_trajectories):
            h = batch.history(row)
            out.add(f"histories/trajectory_{h.trajectory:0{width}d}.csv", format_history_csv(h))
        out.note(f"simulated {sim.n_trajectories} trajectories (seed {sim.seed})")
        return

    points = cfg.integer("sim.grid", 101)
    if points < 2:
        raise cfg.error("sim.grid", "needs at least 2 points")
    window = cfg.number("sim.rocof_window", sim.horizon / 50.0)
    if not window > 0:
        raise cfg.error("sim.rocof_window", f"must be > 0, got {window!r}")
    grid = np.linspace(0.0, sim.horizon, points)
    count, count_se = count_curve(batch, grid)
    avail, avail_se = availability_curve(batch, grid)
    rocof, rocof_se = rocof_curve(batch, grid, window)
    rows = []
    for i, t in enumerate(grid.tolist()):
        analytic = analytic_expected_count(model, t) if isinstance(policy, Instantaneous) else None
        rows.append([
            float(t), float(count[i]), float(count_se[i]),
            "" if analytic is None else float(analytic),
            float(avail[i]), float(avail_se[i]), float(rocof[i]), float(rocof_se[i]),
        ])
    header = ["t", "expected_count", "expected_count_se", "analytic_count",
              "availability", "availability_se", "rocof", "rocof_se"]
    comments = [
        f"model={model.kind}",
        f"horizon={sim.horizon!r}",
        f"trajectories={sim.n_trajectories}",
        f"seed={sim.seed}",
        f"rocof_window={window!r}",
    ]
    out.add("summary.csv", format_csv(header, rows, comments))
    out.note(f"final expected count {count[-1]:.6g} +/- {count_se[-1]:.2g} at t={sim.horizon:g}")


def _observed(cfg: Config, candidates) -> ObservedEvents:
    log = read_event_log(cfg.path_value("fit.events"))
    truncation = Truncation(cfg.string("fit.truncation", "time", choices={"time", "failure"}))
    if log.fail_times.size == 0:
        raise InsufficientDataError(
            "event log has no failures; " + _minimums(candidates),
            required=1, observed=0,
        )
    end = cfg.number("fit.end") if cfg.has("fit.end") else log.horizon
    if truncation is Truncation.TIME and end is None:
        raise cfg.error("fit.end", "time-truncated data needs an observation end "
                        "('# horizon=' in the log or fit.end)")
    with cfg.anchor("fit.events"):
        return ObservedEvents(log.fail_times, end, truncation, log.repair_times)


def _minimums(candidates) -> str:
    return "minimum failures per model: " + ", ".join(
        f"{c} >= {MIN_EVENTS[candidate_kind(c)]}" for c in candidates
    )


def _safe(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name)


def _candidates(cfg: Config) -> list[str]:
    candidates = cfg.get("fit.candidates", list(DEFAULT_CANDIDATES))
    if isinstance(candidates, str):
        candidates = [c.strip() for c in candidates.split(",") if c.strip()]
    if not isinstance(candidates, list) or not candidates or not all(isinstance(c, str) for c in candidates):
        raise cfg.error("fit.candidates", "expected a non-empty list of model names")
    for c in candidates:
        if candidate_kind(c) not in MIN_EVENTS:
            raise cfg.error("fit.candidates", f"unknown candidate {c!r}")
    return candidates


def cmd_fit(args, cfg: Config, out: Outputs):
    candidates = _candidates(cfg)
    obs = _observed(cfg, candidates)

    short = {c: MIN_EVENTS[candidate_kind(c)] for c in candidates if obs.n < MIN_EVENTS[candidate_kind(c)]}
    if len(short) == len(candidates):
        raise InsufficientDataError(
            f"event log has {obs.n} failure(s); {_minimums(candidates)}",
            required=min(short.values()), observed=obs.n,
        )
    ranking = model_select(obs, [c for c in candidates if c not in short])
    failures = {c: f"InsufficientDataError: needs at least {k} failures, got {obs.n}"
                for c, k in short.items()}
    failures.update(ranking.failures)
    if not ranking.ranked:
        raise InsufficientDataError(
            "no candidate could be fitted: " + "; ".join(f"{c}: {m}" for c, m in failures.items()),
            observed=obs.n,
        )
    for fit in ranking.ranked:
        out.add(f"fit_{_safe(fit.name)}.json", format_json(fit.to_dict()))
    payload = {
        "criterion": "aic",
        "n_failures": obs.n,
        "observation_end": obs.end,
        "truncation": obs.truncation.value,
        "ranking": [
            {"rank": i + 1, "name": f.name, "aic": f.aic, "log_likelihood": f.log_likelihood,
             "n_params": f.n_params}
            for i, f in enumerate(ranking.ranked)
        ],
        "failures": failures,
    }
    if obs.n >= MIN_EVENTS["crow_amsaa"]:
        try:
            payload["trend"] = trend_report(obs)
        except ReliabilityError as exc:
            payload["trend"] = {"error": str(exc)}
    out.add("ranking.json", format_json(payload))
    out.note(f"best model by AIC: {ranking.ranked[0].name}")


def cmd_resiliency(args, cfg: Config, out: Outputs):
    ctx = cfg.mission()
    events = cfg.events()
    with cfg.anchor("event"):
        assessment = mission_resiliency(events, ctx)
    out.add("resiliency.json", format_json(assessment.to_dict()))
    out.note(f"mission resiliency {assessment.mission_rho:.6g}")


def cmd_trajectory(args, cfg: Config, out: Outputs):
    if not cfg.has("dist"):
        raise PreconditionError("the trajectory needs a baseline life model in [dist]")
    ctx = cfg.mission(need_baseline=True)
    events = cfg.events()
    with cfg.anchor("event"):
        mission_resiliency(events, ctx)
    if not events:
        raise cfg.error("event", "at least one [[event]] is required")
    index = cfg.integer("mission.event", 0)
    if not 0 <= index < len(events):
        raise cfg.error("mission.event", f"no event with index {index}")
    resolution = cfg.integer("mission.resolution", 201)
    outage = cfg.number("mission.outage_level", 0.0)
    with cfg.anchor(f"event.{index}"):
        traj = performance_trajectory(ctx, events[index], resolution, outage)
    out.add("trajectory.csv", format_csv(["t", "level", "segment"], traj.rows()))
    out.note(f"trajectory with {traj.t.size} samples")


def cmd_risk(args, cfg: Config, out: Outputs):
    normalized = cfg.boolean("risk.normalized", False)
    want_proxy = cfg.boolean("risk.proxy", normalized)
    portfolio = read_portfolio_csv(cfg.path_value("risk.portfolio"), normalized)
    payload = {
        "normalized": portfolio.normalized,
        "scenarios": [
            {"id": s.id, "description": s.description, "consequence": s.consequence,
             "probability": s.probability, "risk": scenario_risk(s)}
            for s in portfolio
        ],
        "system_risk": system_risk(portfolio),
        "reliability_proxy": None,
    }
    if want_proxy:
        proxy = reliability_proxy(portfolio)
        payload["reliability_proxy"] = {"value": proxy.value, "saturated": proxy.saturated}
    out.add("risk.json", format_json(payload))
    out.note(f"system risk {payload['system_risk']:.6g}")


COMMANDS = {
    "simulate": (cmd_simulate, "simulate failure/repair histories or their summary curves"),
    "fit": (cmd_fit, "fit and rank point-process models on an event log"),
    "resiliency": (cmd_resiliency, "reactive resiliency of mission events"),
    "trajectory": (cmd_trajectory, "performance level over the mission for one event"),
    "risk": (cmd_risk, "scenario and system risk of a portfolio"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML configuration file")
    common.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="SECTION.KEY=VALUE", help="override a config key (repeatable)")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")
    common.add_argument("--seed", type=int, help="master seed; -1 draws one from OS entropy")
    common.add_argument("--threads", type=int, help="worker threads for simulation")
    common.add_argument("--quiet", action="store_true", help="print nothing on success")

    parser = argparse.ArgumentParser(prog="repairable", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text, description=help_text)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    func = COMMANDS[args.command][0]
    out = Outputs()
    try:
        cfg = load_config(args.config, args.overrides)
        func(args, cfg, out)
        out.commit(args.out, args.quiet)
    except ReliabilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
