"""Scenario configuration: INI-style sections of flat key/value pairs.

Repeated sections such as ``[obstacle.NAME]`` and ``[m0.NAME]`` are collected
in file order.  Coordinates are whitespace-separated numbers; lists of points
or poses are separated by commas or semicolons.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from .grid import EDGE_NAMES, OPEN, WALL


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DomainSpec:
    bounds: tuple[float, float, float, float]
    h: float
    obstacles: tuple[tuple[tuple[float, float], ...], ...] = ()
    edges: tuple[tuple[str, str], ...] = tuple((e, WALL) for e in EDGE_NAMES)


@dataclass(frozen=True)
class FlowSpec:
    source: str = "cavity_like"
    mean_speed: float | None = None
    ratio: float | None = None
    scale: float = 1.0
    path: str | None = None
    period: float = 44640.0
    duration: float = 21600.0
    snapshots: int = 13
    eddy: float = 0.6
    velocity: tuple[float, float] = (0.0, 0.0)


@dataclass(frozen=True)
class M0Component:
    name: str
    kind: str
    weight: float
    polygon: tuple[tuple[float, float], ...] = ()
    center: tuple[float, float] = (0.0, 0.0)
    sigma: float = 0.0


@dataclass(frozen=True)
class FootprintSpec:
    kind: str = "gaussian"
    mu: float = 0.8
    sigma: float = 0.015
    r_d: float = 0.0
    width: float = 0.0
    height: float = 0.0


@dataclass(frozen=True)
class AgentSpec:
    count: int
    speed: float
    min_turn_radius: float
    clearance: float
    dt: float
    alpha: float
    bases: tuple[tuple[float, float, float], ...]
    footprint: FootprintSpec = FootprintSpec()
    potential_tol: float = 1e-8


@dataclass(frozen=True)
class TransportSpec:
    D: float | None = 0.0
    drift_error: float | None = None
    drift_time: float | None = None
    substeps: int = 10

    @property
    def diffusion(self) -> float:
        from .transport import diffusion_coefficient

        if self.drift_error is not None:
            return diffusion_coefficient(self.drift_error, self.drift_time)
        return float(self.D or 0.0)


@dataclass(frozen=True)
class MissionSpec:
    delay: float = 0.0
    phases: tuple[tuple[float, float], ...] = ((0.0, 900.0),)
    horizon: float | None = None

    @property
    def end(self) -> float:
        if self.horizon is not None:
            return self.horizon
        return max(s + d for s, d in self.phases)


@dataclass(frozen=True)
class TargetSpec:
    count: int = 1000
    seed: int = 0
    noise_sigma: float = 0.0


@dataclass(frozen=True)
class RunSpec:
    mode: str = "dynamic"
    output: str | None = None
    snapshot_every: int = 0
    agent_log_every: int = 1
    target_log_every: int = 100
    figures: bool = True


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    domain: DomainSpec
    flow: FlowSpec
    m0: tuple[M0Component, ...]
    agents: AgentSpec
    transport: TransportSpec = TransportSpec()
    mission: MissionSpec = MissionSpec()
    targets: TargetSpec = TargetSpec()
    run: RunSpec = RunSpec()
    source_path: str | None = field(default=None, compare=False)

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return replace(self, targets=replace(self.targets, seed=int(seed)))

    def with_mode(self, mode: str) -> "ScenarioConfig":
        return replace(self, run=replace(self.run, mode=mode))


def phase_windows(delay: float, n_phases: int, duration: float, gap: float) -> tuple[tuple[float, float], ...]:
    """Back-to-back flight windows separated by ``gap``, starting after ``delay``."""
    return tuple((delay + k * (duration + gap), duration) for k in range(n_phases))


# ---------------------------------------------------------------- parsing

_SPLIT_ITEMS = re.compile(r"[;,]")


def _floats(text: str, n: int | None = None, what: str = "value") -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in text.split())
    except ValueError as exc:
        raise ConfigError(f"bad number in {what}: {text!r}") from exc
    if n is not None and len(vals) != n:
        raise ConfigError(f"{what} needs {n} numbers, got {len(vals)}")
    return vals


def _points(text: str, width: int, what: str) -> tuple[tuple[float, ...], ...]:
    items = [s for s in (p.strip() for p in _SPLIT_ITEMS.split(text)) if s]
    return tuple(_floats(item, width, what) for item in items)


def _get(sec, key, conv=str, default=...):
    if key not in sec:
        if default is ...:
            raise ConfigError(f"[{sec.name}] missing key {key!r}")
        return default
    raw = sec[key].strip()
    try:
        return conv(raw)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"[{sec.name}] {key} = {raw!r}: {exc}") from exc


def _opt_float(text: str) -> float | None:
    return None if text.lower() in ("", "none") else float(text)


def parse_config(text: str, name: str = "scenario", source_path: str | None = None) -> ScenarioConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    for required in ("domain", "agents"):
        if not cp.has_section(required):
            raise ConfigError(f"missing section [{required}]")

    d = cp["domain"]
    edges = _get(d, "edges", str, "wall wall wall wall").split()
    if len(edges) != 4 or any(e not in (WALL, OPEN) for e in edges):
        raise ConfigError("domain edges must list four of wall/open for west east south north")
    obstacles = tuple(
        _points(cp[s]["polygon"], 2, f"[{s}] polygon") for s in cp.sections() if s.startswith("obstacle.")
    )
    domain = DomainSpec(
        bounds=_floats(_get(d, "bounds"), 4, "bounds"),
        h=_get(d, "h", float),
        obstacles=obstacles,
        edges=tuple(zip(EDGE_NAMES, edges)),
    )

    f = cp["flow"] if cp.has_section("flow") else cp["DEFAULT"]
    flow = FlowSpec(
        source=_get(f, "source", str, "cavity_like"),
        mean_speed=_get(f, "mean_speed", _opt_float, None),
        ratio=_get(f, "lambda", _opt_float, None),
        scale=_get(f, "scale", float, 1.0),
        path=_get(f, "path", str, None),
        period=_get(f, "period", float, 44640.0),
        duration=_get(f, "duration", float, 21600.0),
        snapshots=_get(f, "snapshots", int, 13),
        eddy=_get(f, "eddy", float, 0.6),
        velocity=_get(f, "velocity", lambda s: _floats(s, 2, "velocity"), (0.0, 0.0)),
    )

    comps = []
    for s in cp.sections():
        if not s.startswith("m0."):
            continue
        sec = cp[s]
        kind = _get(sec, "kind")
        comps.append(M0Component(
            name=s[3:],
            kind=kind,
            weight=_get(sec, "weight", float),
            polygon=_points(sec["polygon"], 2, f"[{s}] polygon") if kind == "uniform" else (),
            center=_floats(_get(sec, "center"), 2, "center") if kind == "gaussian" else (0.0, 0.0),
            sigma=_get(sec, "sigma", float, 0.0),
        ))

    a = cp["agents"]
    fp = FootprintSpec(
        kind=_get(a, "footprint", str, "gaussian"),
        mu=_get(a, "footprint_mu", float, 0.8),
        sigma=_get(a, "footprint_sigma", float, 0.0),
        r_d=_get(a, "footprint_rd", float, 0.0),
        width=_get(a, "footprint_width", float, 0.0),
        height=_get(a, "footprint_height", float, 0.0),
    )
    bases = tuple(
        (x, y, math.radians(hd)) for x, y, hd in _points(_get(a, "bases", str, ""), 3, "agent base x y heading_deg")
    )
    agents = AgentSpec(
        count=_get(a, "count", int),
        speed=_get(a, "speed", float),
        min_turn_radius=_get(a, "min_turn_radius", float),
        clearance=_get(a, "clearance", float),
        dt=_get(a, "dt", float),
        alpha=_get(a, "alpha", float),
        bases=bases,
        footprint=fp,
        potential_tol=_get(a, "potential_tol", float, 1e-8),
    )

    t = cp["transport"] if cp.has_section("transport") else None
    transport = TransportSpec() if t is None else TransportSpec(
        D=_get(t, "D", _opt_float, 0.0),
        drift_error=_get(t, "drift_error", _opt_float, None),
        drift_time=_get(t, "drift_time", _opt_float, None),
        substeps=_get(t, "substeps", int, 10),
    )

    mission = MissionSpec()
    if cp.has_section("mission"):
        ms = cp["mission"]
        delay = _get(ms, "delay", float, 0.0)
        if "windows" in ms:
            phases = tuple((s, dur) for s, dur in _points(ms["windows"], 2, "mission windows"))
        else:
            phases = phase_windows(
                delay, _get(ms, "phases", int, 1), _get(ms, "phase_duration", float), _get(ms, "gap", float, 0.0)
            )
        mission = MissionSpec(delay=delay, phases=phases, horizon=_get(ms, "horizon", _opt_float, None))

    targets = TargetSpec()
    if cp.has_section("targets"):
        ts = cp["targets"]
        targets = TargetSpec(
            count=_get(ts, "count", int, 1000),
            seed=_get(ts, "seed", int, 0),
            noise_sigma=_get(ts, "noise_sigma", float, 0.0),
        )

    run = RunSpec()
    if cp.has_section("run"):
        rs = cp["run"]
        run = RunSpec(
            mode=_get(rs, "mode", str, "dynamic"),
            output=_get(rs, "output", str, None),
            snapshot_every=_get(rs, "snapshot_every", int, 0),
            agent_log_every=_get(rs, "agent_log_every", int, 1),
            target_log_every=_get(rs, "target_log_every", int, 100),
            figures=_get(rs, "figures", lambda s: s.lower() in ("1", "true", "yes", "on"), True),
        )

    cfg = ScenarioConfig(name, domain, flow, tuple(comps), agents, transport, mission, targets, run, source_path)
    validate(cfg)
    return cfg


def load_config(path) -> ScenarioConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    return parse_config(text, name=p.stem, source_path=str(p))


def validate(cfg: ScenarioConfig) -> None:
    """Invariant checks that do not need any field to be built."""
    d = cfg.domain
    x0, y0, x1, y1 = d.bounds
    if not (x1 > x0 and y1 > y0):
        raise ConfigError(f"degenerate domain bounds {d.bounds}")
    if not d.h > 0:
        raise ConfigError("cell size h must be positive")
    for poly in d.obstacles:
        if len(poly) < 3:
            raise ConfigError("obstacle polygons need at least three vertices")

    fl = cfg.flow
    if fl.source not in ("cavity_like", "channel", "file", "uniform", "none"):
        raise ConfigError(f"unknown flow source {fl.source!r}")
    if fl.source == "file" and not fl.path:
        raise ConfigError("flow source 'file' needs a path")
    if fl.source in ("cavity_like", "channel") and fl.mean_speed is None and fl.ratio is None:
        raise ConfigError("synthetic flow needs mean_speed or lambda")
    if not fl.scale > 0:
        raise ConfigError("flow scale must be positive")

    if not cfg.m0:
        raise ConfigError("at least one [m0.*] component is required")
    for c in cfg.m0:
        if c.kind not in ("uniform", "gaussian"):
            raise ConfigError(f"m0 component {c.name}: unknown kind {c.kind!r}")
        if c.weight < 0:
            raise ConfigError(f"m0 component {c.name}: negative weight")
        if c.kind == "uniform" and len(c.polygon) < 3:
            raise ConfigError(f"m0 component {c.name}: polygon needs three vertices")
        if c.kind == "gaussian" and not c.sigma > 0:
            raise ConfigError(f"m0 component {c.name}: sigma must be positive")
    wsum = sum(c.weight for c in cfg.m0)
    if abs(wsum - 1.0) > 1e-6:
        raise ConfigError(f"m0 weights sum to {wsum}, expected 1")

    a = cfg.agents
    if a.count < 0:
        raise ConfigError("agent count must be >= 0")
    if a.count and len(a.bases) < a.count:
        raise ConfigError(f"{a.count} agents but only {len(a.bases)} base poses")
    for key in ("speed", "min_turn_radius", "clearance", "dt", "alpha"):
        if not getattr(a, key) > 0:
            raise ConfigError(f"agents.{key} must be positive")
    fp = a.footprint
    if fp.kind == "gaussian":
        if not (0 < fp.mu < 1 and fp.sigma > 0):
            raise ConfigError("gaussian footprint needs 0 < mu < 1 and sigma > 0")
    elif fp.kind == "rect":
        if not (0 <= fp.mu < 1 and fp.width > 0 and fp.height > 0):
            raise ConfigError("rect footprint needs 0 <= mu < 1, width > 0, height > 0")
    else:
        raise ConfigError(f"unknown footprint {fp.kind!r}")
    if not 0 < a.potential_tol <= 1e-4:
        raise ConfigError("potential_tol must lie in (0, 1e-4]")

    tr = cfg.transport
    if (tr.drift_error is None) != (tr.drift_time is None):
        raise ConfigError("drift_error and drift_time must be given together")
    if tr.drift_time is not None and not tr.drift_time > 0:
        raise ConfigError("drift_time must be positive")
    if tr.drift_error is None and tr.D is not None and tr.D < 0:
        raise ConfigError("D must be >= 0")
    if tr.substeps < 1:
        raise ConfigError("substeps must be >= 1")

    ms = cfg.mission
    prev_end = -math.inf
    for start, dur in ms.phases:
        if dur <= 0 or start < 0:
            raise ConfigError(f"bad phase window ({start}, {dur})")
        if start < prev_end:
            raise ConfigError("mission phases must be increasing and non-overlapping")
        prev_end = start + dur
    if ms.phases and ms.phases[0][0] < ms.delay:
        raise ConfigError("first phase starts before the search delay ends")
    if not ms.end > 0:
        raise ConfigError("mission horizon must be positive")

    if cfg.targets.count <= 0:
        raise ConfigError("target count must be positive")
    if cfg.targets.noise_sigma < 0:
        raise ConfigError("noise_sigma must be >= 0")
    if cfg.run.mode not in ("dynamic", "static"):
        raise ConfigError(f"mode must be dynamic or static, got {cfg.run.mode!r}")
