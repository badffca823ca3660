"""Reading and writing event logs, risk portfolios and result files.

Event logs are CSV with ``#``-prefixed metadata lines followed by the header
``fail_time,repair_complete_time``. Floats are written with ``repr`` so a log
read back reproduces the original values bit for bit. Every file is written
atomically: the content goes to a temporary file in the target directory and
is moved into place with ``os.replace``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import ConfigError, ReliabilityError
from .pointproc.models import EventHistory
from .risk import RiskPortfolio, Scenario

__all__ = [
    "SCHEMA_VERSION",
    "HISTORY_HEADER",
    "RISK_HEADER",
    "atomic_write_text",
    "format_history_csv",
    "write_history_csv",
    "read_event_log",
    "EventLog",
    "to_jsonable",
    "format_json",
    "write_json",
    "format_csv",
    "read_portfolio_csv",
]

SCHEMA_VERSION = "1"
HISTORY_HEADER = ("fail_time", "repair_complete_time")
RISK_HEADER = ("id", "description", "consequence", "probability")


def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise
    return path


def _num(x) -> str:
    return repr(float(x))


# --------------------------------------------------------------------------
# Event logs


def format_history_csv(history: EventHistory) -> str:
    lines = [f"# horizon={_num(history.horizon)}"]
    if history.seed is not None:
        lines.append(f"# seed={int(history.seed)}")
    lines.append(f"# provenance={history.provenance}")
    if history.trajectory is not None:
        lines.append(f"# trajectory={int(history.trajectory)}")
    if history.repair_open:
        lines.append("# repair_open=true")
    lines.append(",".join(HISTORY_HEADER))
    for f, r in zip(history.fail_times.tolist(), history.repair_times.tolist()):
        lines.append(f"{_num(f)},{_num(r)}")
    return "\n".join(lines) + "\n"


def write_history_csv(history: EventHistory, path) -> Path:
    return atomic_write_text(path, format_history_csv(history))


class EventLog:
    """Parsed event-log file: times plus whatever metadata it declared."""

    def __init__(self, fail_times, repair_times, meta):
        self.fail_times = fail_times
        self.repair_times = repair_times
        self.meta = meta

    @property
    def horizon(self) -> float | None:
        h = self.meta.get("horizon")
        return None if h is None else float(h)

    def to_history(self, horizon: float | None = None) -> EventHistory:
        horizon = self.horizon if horizon is None else horizon
        if horizon is None:
            raise ConfigError("event log has no horizon; add '# horizon=...'")
        repair = self.repair_times if self.repair_times is not None else self.fail_times
        seed = self.meta.get("seed")
        trajectory = self.meta.get("trajectory")
        return EventHistory(
            self.fail_times,
            repair,
            horizon,
            provenance=self.meta.get("provenance", "observed"),
            seed=None if seed is None else int(seed),
            trajectory=None if trajectory is None else int(trajectory),
            repair_open=self.meta.get("repair_open", "false").lower() == "true",
        )


def read_event_log(path) -> EventLog:
    """Parse an event-log CSV.

    The ``repair_complete_time`` column is optional; without it repairs are
    taken as instantaneous. Errors name the offending line.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read event log: {exc.strerror}") from None
    meta: dict[str, str] = {}
    header = None
    fails, repairs = [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body and header is None:
                key, _, value = body.partition("=")
                meta[key.strip()] = value.strip()
            continue
        cells = [c.strip() for c in line.split(",")]
        if header is None:
            if tuple(cells) not in (HISTORY_HEADER, HISTORY_HEADER[:1]):
                raise ConfigError(
                    f"{path}:{lineno}: expected header 'fail_time,repair_complete_time', "
                    f"got {line!r}"
                )
            header = tuple(cells)
            continue
        if len(cells) != len(header):
            raise ConfigError(f"{path}:{lineno}: expected {len(header)} fields, got {len(cells)}")
        try:
            values = [float(c) for c in cells]
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: non-numeric value in {line!r}") from None
        if not all(math.isfinite(v) for v in values):
            raise ConfigError(f"{path}:{lineno}: times must be finite")
        fails.append(values[0])
        if len(values) > 1:
            repairs.append(values[1])
    if header is None:
        raise ConfigError(f"{path}: missing header 'fail_time,repair_complete_time'")
    for key in ("horizon", "seed", "trajectory"):
        if key in meta:
            try:
                float(meta[key]) if key == "horizon" else int(meta[key])
            except ValueError:
                raise ConfigError(f"{path}: bad metadata value {key}={meta[key]!r}") from None
    return EventLog(
        np.asarray(fails, dtype=float),
        np.asarray(repairs, dtype=float) if len(header) == 2 else None,
        meta,
    )


# --------------------------------------------------------------------------
# JSON / CSV results


def to_jsonable(obj):
    """Plain JSON types; non-finite floats become the strings 'inf'/'-inf'/'nan'."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "value") and isinstance(obj.value, str):
        return obj.value
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def format_json(payload: dict) -> str:
    body = {"schema_version": SCHEMA_VERSION}
    body.update(to_jsonable(payload))
    return json.dumps(body, indent=2, allow_nan=False) + "\n"


def write_json(path, payload: dict) -> Path:
    return atomic_write_text(path, format_json(payload))


def format_csv(header, rows, comments=()) -> str:
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_num(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


# --------------------------------------------------------------------------
# Risk portfolios


def read_portfolio_csv(path, normalized: bool = False) -> RiskPortfolio:
    """Read scenarios from ``id,description,consequence,probability`` CSV.

    Any malformed row raises ``ConfigError`` naming its line number.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read portfolio: {exc.strerror}") from None
    reader = csv.reader(io.StringIO(text))
    scenarios = []
    header = None
    seen = set()
    for row in reader:
        lineno = reader.line_num
        if not row or all(not c.strip() for c in row) or row[0].lstrip().startswith("#"):
            continue
        cells = [c.strip() for c in row]
        if header is None:
            if tuple(cells) != RISK_HEADER:
                raise ConfigError(
                    f"{path}:{lineno}: expected header '{','.join(RISK_HEADER)}', got {','.join(cells)!r}"
                )
            header = cells
            continue
        if len(cells) != len(RISK_HEADER):
            raise ConfigError(f"{path}:{lineno}: expected 4 fields, got {len(cells)}")
        sid, desc, cons, prob = cells
        try:
            c, p = float(cons), float(prob)
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: consequence and probability must be numbers") from None
        if sid in seen:
            raise ConfigError(f"{path}:{lineno}: duplicate scenario id {sid!r}")
        if normalized and c > 1:
            raise ConfigError(
                f"{path}:{lineno}: consequence {c!r} outside [0, 1] in a normalized portfolio"
            )
        try:
            scenarios.append(Scenario(sid, c, p, desc))
        except ReliabilityError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from None
        seen.add(sid)
    if header is None:
        raise ConfigError(f"{path}: missing header '{','.join(RISK_HEADER)}'")
    return RiskPortfolio(tuple(scenarios), normalized)
