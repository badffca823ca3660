"""Run configuration: a TOML file plus ``--set section.key=value`` overrides.

Errors point at the offending key as ``path:line`` when it came from the
file, or at the ``--set`` option that supplied it.

Recognised keys::

    [model]   kind = hpp | rp | nhpp | grp
              rate                      (hpp)
              rocof = powerlaw | loglinear | linear, lam, beta, alpha, a, b  (nhpp)
              q, variant = kijima1 | kijima2                                 (grp)
    [dist]    family = exponential | weibull | gamma | lognormal
              rate, shape, scale, mu, sigma   (as the family needs)
    [repair]  kind = instantaneous | fixed | distributed
              duration (fixed); family + parameters (distributed)
    [sim]     horizon, trajectories, seed, mode = histories | summary,
              grid, rocof_window, threads
    [mission] t_mission, outage_level, resolution, event
    [[event]] t_fail, t_res, q_res
    [fit]     events, candidates, truncation = time | failure, end
    [risk]    portfolio, normalized, proxy
"""

from __future__ import annotations

import contextlib
import re
from pathlib import Path

from .errors import ConfigError, ReliabilityError
from .lifetime import FAMILIES, LifetimeDistribution, make_distribution
from .pointproc.models import (
    GRP,
    HPP,
    NHPP,
    RP,
    Distributed,
    Fixed,
    Instantaneous,
    KijimaVariant,
    Linear,
    LogLinear,
    PowerLaw,
    SimulationConfig,
)
from .resiliency import MissionContext, ResiliencyEvent
from .rng import DEFAULT_SEED

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

__all__ = ["Config", "load_config", "parse_override"]

_MISSING = object()

KNOWN_KEYS = {
    "model": {"kind", "rate", "rocof", "lam", "beta", "alpha", "a", "b", "q", "variant"},
    "dist": {"family", "rate", "shape", "scale", "mu", "sigma"},
    "repair": {"kind", "duration", "family", "rate", "shape", "scale", "mu", "sigma"},
    "sim": {"horizon", "trajectories", "seed", "mode", "grid", "rocof_window", "threads"},
    "mission": {"t_mission", "outage_level", "resolution", "event"},
    "event": {"t_fail", "t_res", "q_res"},
    "fit": {"events", "candidates", "truncation", "end"},
    "risk": {"portfolio", "normalized", "proxy"},
}

FAMILY_PARAMS = {
    "exponential": ("rate",),
    "weibull": ("shape", "scale"),
    "gamma": ("shape", "rate"),
    "lognormal": ("mu", "sigma"),
}

_TABLE = re.compile(r"^\s*(\[\[?)\s*([A-Za-z0-9_.\-]+)\s*\]\]?")
_KEY = re.compile(r"^\s*([A-Za-z0-9_\-]+)\s*=")


def _line_index(text: str) -> dict[str, int]:
    """Map dotted keys (``sim.horizon``, ``event.0.t_fail``) to line numbers."""
    index: dict[str, int] = {}
    table = ""
    counts: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        m = _TABLE.match(line)
        if m:
            name = m.group(2)
            if m.group(1) == "[[":
                i = counts.get(name, 0)
                counts[name] = i + 1
                table = f"{name}.{i}"
                index.setdefault(name, lineno)
            else:
                table = name
            index.setdefault(table, lineno)
            continue
        m = _KEY.match(line)
        if m:
            key = f"{table}.{m.group(1)}" if table else m.group(1)
            index.setdefault(key, lineno)
    return index


def parse_override(item: str):
    """Split ``section.key=value``; the value is read as TOML, else as a string."""
    key, sep, raw = item.partition("=")
    key = key.strip()
    if not sep or not key or not re.fullmatch(r"[A-Za-z0-9_\-]+(\.[A-Za-z0-9_\-]+)*", key):
        raise ConfigError(f"--set {item}: expected section.key=value")
    try:
        value = tomllib.loads(f"v = {raw.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw.strip()
    return key, value


class Config:
    def __init__(self, data: dict, path: Path | None = None, text: str = "",
                 overridden: set[str] | None = None):
        self.data = data
        self.path = path
        self.base_dir = path.parent if path is not None else Path.cwd()
        self._lines = _line_index(text)
        self._overridden = overridden or set()

    # -- locating keys ------------------------------------------------------

    def where(self, key: str) -> str:
        if key in self._overridden:
            return f"--set {key}"
        if self.path is None:
            return "<config>"
        parts = key.split(".")
        while parts:
            line = self._lines.get(".".join(parts))
            if line is not None:
                return f"{self.path}:{line}"
            parts.pop()
        return str(self.path)

    def error(self, key: str, message: str) -> ConfigError:
        return ConfigError(f"{self.where(key)}: {key}: {message}")

    @contextlib.contextmanager
    def anchor(self, key: str):
        """Prefix any library error raised inside with the key's location."""
        try:
            yield
        except ReliabilityError as exc:
            if exc.args and isinstance(exc.args[0], str):
                exc.args = (f"{self.where(key)}: {key}: {exc.args[0]}",) + exc.args[1:]
            raise

    # -- access -------------------------------------------------------------

    def has(self, key: str) -> bool:
        return self._lookup(key) is not _MISSING

    def _lookup(self, key):
        node = self.data
        for part in key.split("."):
            if isinstance(node, list):
                try:
                    node = node[int(part)]
                except (ValueError, IndexError):
                    return _MISSING
            elif isinstance(node, dict) and part in node:
                node = node[part]
            else:
                return _MISSING
        return node

    def get(self, key, default=_MISSING):
        value = self._lookup(key)
        if value is _MISSING:
            if default is _MISSING:
                raise self.error(key, "required key is missing")
            return default
        return value

    def number(self, key, default=_MISSING) -> float:
        value = self.get(key, default)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise self.error(key, f"expected a number, got {value!r}")
        return float(value)

    def integer(self, key, default=_MISSING) -> int:
        value = self.get(key, default)
        if isinstance(value, bool) or not isinstance(value, int):
            raise self.error(key, f"expected an integer, got {value!r}")
        return value

    def string(self, key, default=_MISSING, choices=None) -> str:
        value = self.get(key, default)
        if not isinstance(value, str):
            raise self.error(key, f"expected a string, got {value!r}")
        value = value.strip().lower() if choices else value
        if choices and value not in choices:
            raise self.error(key, f"expected one of {', '.join(sorted(choices))}, got {value!r}")
        return value

    def boolean(self, key, default=_MISSING) -> bool:
        value = self.get(key, default)
        if not isinstance(value, bool):
            raise self.error(key, f"expected true or false, got {value!r}")
        return value

    def path_value(self, key) -> Path:
        p = Path(self.string(key)).expanduser()
        p = p if p.is_absolute() else self.base_dir / p
        if not p.is_file():
            raise self.error(key, f"file not found: {p}")
        return p

    def check_keys(self):
        for section, body in self.data.items():
            if section not in KNOWN_KEYS:
                raise self.error(section, "unknown section")
            tables = body if isinstance(body, list) else [body]
            for i, table in enumerate(tables):
                if not isinstance(table, dict):
                    raise self.error(section, "expected a table")
                for key in table:
                    if key not in KNOWN_KEYS[section]:
                        dotted = f"{section}.{i}.{key}" if isinstance(body, list) else f"{section}.{key}"
                        raise self.error(dotted, "unknown key")

    # -- builders -----------------------------------------------------------

    def distribution(self, section: str = "dist") -> LifetimeDistribution:
        family = self.string(f"{section}.family", choices=set(FAMILIES))
        params = {name: self.number(f"{section}.{name}") for name in FAMILY_PARAMS[family]}
        with self.anchor(f"{section}.family"):
            return make_distribution(family, **params)

    def model(self):
        kind = self.string("model.kind", choices={"hpp", "rp", "nhpp", "grp"})
        with self.anchor("model.kind"):
            if kind == "hpp":
                return HPP(self.number("model.rate"))
            if kind == "rp":
                return RP(self.distribution())
            if kind == "grp":
                variant = KijimaVariant(
                    self.string("model.variant", "kijima1", choices={"kijima1", "kijima2"})
                )
                return GRP(self.distribution(), self.number("model.q"), variant)
            law = self.string("model.rocof", choices={"powerlaw", "loglinear", "linear"})
            if law == "powerlaw":
                rocof = PowerLaw(self.number("model.lam"), self.number("model.beta"))
            elif law == "loglinear":
                rocof = LogLinear(self.number("model.alpha"), self.number("model.beta"))
            else:
                rocof = Linear(self.number("model.a"), self.number("model.b"))
            return NHPP(rocof)

    def policy(self):
        kind = self.string("repair.kind", "instantaneous",
                           choices={"instantaneous", "fixed", "distributed"})
        with self.anchor("repair.kind"):
            if kind == "instantaneous":
                return Instantaneous()
            if kind == "fixed":
                return Fixed(self.number("repair.duration"))
            return Distributed(self.distribution("repair"))

    def simulation(self, seed: int | None = None) -> SimulationConfig:
        horizon = self.number("sim.horizon")
        if not horizon > 0:
            raise self.error("sim.horizon", f"must be > 0, got {horizon!r}")
        n = self.integer("sim.trajectories", 1000)
        if n < 1:
            raise self.error("sim.trajectories", f"must be >= 1, got {n!r}")
        if seed is None:
            seed = self.integer("sim.seed", DEFAULT_SEED)
        with self.anchor("sim.seed"):
            return SimulationConfig(horizon, n, seed)

    def mission(self, need_baseline: bool = False) -> MissionContext:
        t_mission = self.number("mission.t_mission")
        if not t_mission > 0:
            raise self.error("mission.t_mission", f"must be > 0, got {t_mission!r}")
        baseline = None
        if self.has("dist") or need_baseline:
            baseline = self.distribution()
        return MissionContext(t_mission, baseline)

    def events(self) -> list[ResiliencyEvent]:
        raw = self.get("event", [])
        if isinstance(raw, dict):
            raw = [raw]
        if not isinstance(raw, list):
            raise self.error("event", "expected [[event]] tables")
        out = []
        for i in range(len(raw)):
            key = f"event.{i}"
            values = [self.number(f"{key}.{name}") for name in ("t_fail", "t_res", "q_res")]
            with self.anchor(key):
                out.append(ResiliencyEvent(*values))
        return out


def load_config(path=None, overrides=()) -> Config:
    """Read ``path`` (optional) and apply ``--set`` overrides in order."""
    data: dict = {}
    text = ""
    p = None
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"{p}: cannot read config: {exc.strerror}") from None
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            line = getattr(exc, "lineno", None)
            msg = getattr(exc, "msg", str(exc))
            raise ConfigError(f"{p}:{line}: {msg}" if line else f"{p}: {exc}") from None
    overridden = set()
    for item in overrides:
        key, value = parse_override(item)
        parts = key.split(".")
        node = data
        for part in parts[:-1]:
            if isinstance(node, list):
                # [[event]] blocks are addressed by position: event.0.t_res
                if not part.isdigit() or int(part) >= len(node):
                    raise ConfigError(f"--set {key}: no element {part!r} in the array")
                child = node[int(part)]
            else:
                child = node.setdefault(part, {})
            if not isinstance(child, (dict, list)):
                raise ConfigError(f"--set {key}: {part} is not a table")
            node = child
        if not isinstance(node, dict):
            raise ConfigError(f"--set {key}: cannot assign to an array element")
        node[parts[-1]] = value
        overridden.add(key)
    cfg = Config(data, p, text, overridden)
    cfg.check_keys()
    return cfg
