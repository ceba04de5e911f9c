"""Mission scheduling and the main control loop, plus the velocity-ratio sweep."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import fileformats
from .agents import AgentState, avoid_report, desired_turn_rate, step_agent
from .config import ScenarioConfig
from .flowgen import cavity_like_flow, channel_flow, scale_flow, uniform_flow
from .grid import FlowSeries, Grid2D, ScalarField, build_grid, points_in_polygon
from .metrics import StepRecord, eta, kappa, lambda_ratio, timing_summary, write_metrics, write_timings
from .potential import PotentialConfig, gradient_field, solve_potential, unit_gradients
from .sensing import GaussianDiskFootprint, RectFootprint, accumulate_coverage
from .targets import DETECTED, ESCAPED, STATUS_NAMES, DriftNoise, TargetSet, advect_targets, detection_trials, spawn_targets
from .transport import TransportConfig, apply_sensing, normalize, step_transport

log = logging.getLogger(__name__)

OUTPUT_ROOT_ENV = "ERGOSEARCH_OUTPUT_ROOT"


class ScenarioError(RuntimeError):
    """A module failed mid-run; carries the step index."""

    def __init__(self, step: int, cause: BaseException):
        super().__init__(f"step {step}: {type(cause).__name__}: {cause}")
        self.step = step
        self.cause = cause


# ------------------------------------------------------------ construction

def build_domain(cfg: ScenarioConfig) -> Grid2D:
    d = cfg.domain
    return build_grid(d.bounds, d.h, d.obstacles, dict(d.edges))


def base_flow(cfg: ScenarioConfig, grid: Grid2D) -> FlowSeries:
    """The configured flow before any ``scale`` is applied."""
    f = cfg.flow
    speed = f.mean_speed
    if speed is None and f.ratio is not None:
        speed = cfg.agents.speed / f.ratio
    if f.source == "cavity_like":
        return cavity_like_flow(grid, speed)
    if f.source == "channel":
        return channel_flow(grid, speed, period=f.period, duration=f.duration, n_snapshots=f.snapshots, eddy=f.eddy)
    if f.source == "uniform":
        return uniform_flow(grid, *f.velocity)
    if f.source == "none":
        return uniform_flow(grid, 0.0, 0.0)
    path = Path(f.path)
    if not path.is_absolute() and cfg.source_path:
        path = Path(cfg.source_path).parent / path
    return fileformats.read_flow(path, grid)


def build_flow(cfg: ScenarioConfig, grid: Grid2D) -> FlowSeries:
    return scale_flow(base_flow(cfg, grid), cfg.flow.scale)


def build_m0(cfg: ScenarioConfig, grid: Grid2D) -> ScalarField:
    """Weighted mixture of uniform polygons and isotropic Gaussians, normalized."""
    X, Y = grid.centers()
    total = np.zeros(grid.shape)
    for c in cfg.m0:
        if c.kind == "uniform":
            inside = points_in_polygon(np.column_stack([X.ravel(), Y.ravel()]), c.polygon).reshape(grid.shape)
            part = inside.astype(float)
        else:
            r2 = (X - c.center[0]) ** 2 + (Y - c.center[1]) ** 2
            part = np.exp(-0.5 * r2 / c.sigma**2)
        part = np.where(grid.fluid, part, 0.0)
        mass = part.sum() * grid.cell_area
        if mass <= 0:
            raise ValueError(f"m0 component {c.name} has no FLUID cells")
        total += c.weight * part / mass
    return normalize(ScalarField(grid, total))


def make_footprint(cfg: ScenarioConfig):
    fp = cfg.agents.footprint
    if fp.kind == "gaussian":
        return GaussianDiskFootprint(fp.mu, fp.sigma, fp.r_d)
    return RectFootprint(fp.mu, fp.width, fp.height)


def make_agents(cfg: ScenarioConfig) -> list[AgentState]:
    a = cfg.agents
    fp = make_footprint(cfg)
    return [
        AgentState.with_turn_radius(
            (x, y), th, a.speed, a.min_turn_radius, a.clearance, fp, active=False, ident=k
        )
        for k, (x, y, th) in enumerate(a.bases[: a.count])
    ]


def target_substep_count(flow: FlowSeries, dt: float) -> int:
    """Midpoint substeps so no target travels more than half a cell per substep."""
    vmax = float(np.sqrt(flow.wx**2 + flow.wy**2).max())
    return max(1, math.ceil(vmax * dt / (0.5 * flow.grid.h)))


# ------------------------------------------------------------ mission clock

@dataclass
class MissionClock:
    phases: tuple[tuple[float, float], ...]
    t: float = 0.0
    phase: int = -1

    def phase_at(self, t: float) -> int:
        """Index of the flight window holding ``t``, or -1 between windows."""
        eps = 1e-9 * max(1.0, abs(t))
        for k, (start, dur) in enumerate(self.phases):
            if start - eps <= t < start + dur - eps:
                return k
        return -1

    def active_at(self, t: float) -> bool:
        return self.phase_at(t) >= 0


# ------------------------------------------------------------ main loop

@dataclass
class RunResult:
    config: ScenarioConfig
    records: list[StepRecord]
    targets: TargetSet
    agents: list[AgentState]
    m: ScalarField
    lam: float | None
    summary: dict
    output: Path | None = None
    avoidance: list[dict] = field(default_factory=list)


def _output_dir(cfg: ScenarioConfig, out_dir) -> Path:
    if out_dir is not None:
        return Path(out_dir)
    root = Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))
    if cfg.run.output:
        p = Path(cfg.run.output)
        return p if p.is_absolute() else root / p
    return root / cfg.name


def run(
    cfg: ScenarioConfig,
    out_dir=None,
    write: bool = True,
    keep_avoidance: bool = False,
    flow: FlowSeries | None = None,
    horizon: float | None = None,
) -> RunResult:
    """Execute one scenario.

    Each control step: coverage from active agents, sensing sink on ``m``,
    potential solve, steering, avoidance and motion, transport of ``m`` over
    the step, then target detection and drift, then a record.  Before the
    first flight window only the transport, target and record stages run.
    """
    grid = flow.grid if flow is not None else build_domain(cfg)
    flow = flow if flow is not None else build_flow(cfg, grid)
    m0 = build_m0(cfg, grid)
    static = cfg.run.mode == "static"
    dt = cfg.agents.dt
    T = horizon if horizon is not None else cfg.mission.end
    n_steps = int(round(T / dt))
    tcfg = TransportConfig(cfg.transport.diffusion, cfg.transport.substeps)
    pcfg = PotentialConfig(cfg.agents.alpha, tol=cfg.agents.potential_tol)
    clock = MissionClock(cfg.mission.phases)
    target_substeps = target_substep_count(flow, dt)
    try:
        lam = lambda_ratio(cfg.agents.speed, flow)
    except ZeroDivisionError:
        lam = None

    seeds = np.random.SeedSequence(cfg.targets.seed).spawn(3)
    targets = spawn_targets(m0, cfg.targets.count, seeds[0])
    noise = DriftNoise(cfg.targets.noise_sigma, seeds[1])
    det_rng = np.random.default_rng(seeds[2])
    agents = make_agents(cfg)
    bases = [(a.z.copy(), a.theta) for a in agents]

    m = m0.copy()
    m_true = m0.copy() if static else None
    u = None

    out = _output_dir(cfg, out_dir) if write else None
    writers = _Logs(out, cfg, grid) if out is not None else None
    records: list[StepRecord] = []
    avoidance_log: list[dict] = []
    omegas = [0.0] * len(agents)
    step = 0
    try:
        for step in range(n_steps):
            t = step * dt
            phase = clock.phase_at(t)
            if phase != clock.phase:
                for k, a in enumerate(agents):
                    z, th = bases[k]
                    agents[k] = replace(a, z=z.copy(), theta=th, active=phase >= 0)
                clock.phase = phase
            clock.t = t
            active = phase >= 0 and len(agents) > 0
            sensors = agents
            t_pot = t_avo = 0.0

            t0 = time.perf_counter()
            if active:
                gamma = accumulate_coverage(agents, grid)
                m = apply_sensing(m, gamma, dt)
                if static:
                    m_true = apply_sensing(m_true, gamma, dt)
            t_sense = time.perf_counter() - t0

            if active:
                t0 = time.perf_counter()
                u = solve_potential(m, pcfg, guess=u)
                grad = gradient_field(u)
                t_pot = time.perf_counter() - t0

                t0 = time.perf_counter()
                pos = np.array([a.z for a in agents])
                inside = grid.contains(pos)
                dirs = np.full((len(agents), 2), np.nan)
                if inside.any():
                    dirs[inside] = unit_gradients(u, pos[inside], grad)
                proposals = [desired_turn_rate(a, dirs[k], dt) if a.active else 0.0 for k, a in enumerate(agents)]
                res = avoid_report(agents, proposals, grid, dt)
                omegas = res.omegas
                if keep_avoidance:
                    avoidance_log.append({
                        "t": t,
                        "z": pos.copy(),
                        "theta": np.array([a.theta for a in agents]),
                        "omega": np.array(omegas),
                        "feasible": np.array(res.feasible),
                        "horizon": res.horizon,
                    })
                agents = [step_agent(a, w, dt) for a, w in zip(agents, omegas)]
                t_avo = time.perf_counter() - t0
            else:
                omegas = [0.0] * len(agents)

            t0 = time.perf_counter()
            if static:
                m_true = step_transport(m_true, flow, tcfg, t, dt)
            else:
                m = step_transport(m, flow, tcfg, t, dt)
            t_trans = time.perf_counter() - t0 + t_sense

            targets = detection_trials(targets, sensors if active else [], dt, det_rng, t=t + dt)
            targets = advect_targets(targets, flow, t, dt, noise, substeps=target_substeps)

            e = eta(m)
            rec = StepRecord(
                t=(step + 1) * dt,
                eta=e,
                kappa=kappa(targets),
                mass_in_domain=m.integral(),
                n_detected=int(np.sum(targets.status == DETECTED)),
                n_escaped=int(np.sum(targets.status == ESCAPED)),
                eta_true=eta(m_true) if static else e,
                potential_ms=1e3 * t_pot,
                avoidance_ms=1e3 * t_avo,
                transport_ms=1e3 * t_trans,
            )
            records.append(rec)
            if writers is not None:
                writers.step(step + 1, rec.t, agents, omegas, targets, m, m_true)
    except Exception as exc:
        if writers is not None:
            writers.close(records, {"error": str(exc), "step": step})
        raise ScenarioError(step, exc) from exc

    summary = _summary(cfg, records, targets, lam, tcfg, T)
    if writers is not None:
        writers.close(records, summary)
    return RunResult(cfg, records, targets, agents, m, lam, summary, out, avoidance_log)


def _summary(cfg: ScenarioConfig, records, targets: TargetSet, lam, tcfg: TransportConfig, T: float) -> dict:
    last = records[-1] if records else None
    counts = targets.counts()
    out = {
        "scenario": cfg.name,
        "mode": cfg.run.mode,
        "seed": cfg.targets.seed,
        "horizon_s": T,
        "steps": len(records),
        "lambda": lam,
        "diffusion_m2_per_s": tcfg.D,
        "eta": last.eta if last else 0.0,
        "eta_true": last.eta_true if last else 0.0,
        "kappa": last.kappa if last else 0.0,
        "mass_in_domain": last.mass_in_domain if last else 1.0,
        "targets": counts,
        "timing_ms": timing_summary(records),
        "control_dt_s": cfg.agents.dt,
    }
    med = out["timing_ms"].get("step_ms_median")
    if med is not None:
        out["real_time_ok"] = med < 1e3 * cfg.agents.dt
    return out


class _Logs:
    """Incremental CSV/field writers for one run directory."""

    def __init__(self, out: Path, cfg: ScenarioConfig, grid: Grid2D):
        self.out = out
        self.cfg = cfg
        self.grid = grid
        out.mkdir(parents=True, exist_ok=True)
        (out / "fields").mkdir(exist_ok=True)
        fileformats.write_mask(out / "mask.bin", grid)
        self.agent_fh = open(out / "agents.csv", "w", newline="")
        self.agent_csv = csv.writer(self.agent_fh)
        self.agent_csv.writerow(["t", "agent_id", "x", "y", "theta", "omega", "active"])
        self.target_fh = open(out / "targets.csv", "w", newline="")
        self.target_csv = csv.writer(self.target_fh)
        self.target_csv.writerow(["t", "target_id", "x", "y", "status"])
        self.eta_series = []

    def step(self, k: int, t: float, agents, omegas, targets: TargetSet, m: ScalarField, m_true):
        run = self.cfg.run
        if run.agent_log_every and k % run.agent_log_every == 0:
            for a, w in zip(agents, omegas):
                self.agent_csv.writerow([repr(t), a.ident, repr(float(a.z[0])), repr(float(a.z[1])),
                                         repr(a.theta), repr(float(w)), int(a.active)])
        if run.target_log_every and k % run.target_log_every == 0:
            for i in range(len(targets)):
                self.target_csv.writerow([repr(t), i, repr(float(targets.y[i, 0])), repr(float(targets.y[i, 1])),
                                          STATUS_NAMES[int(targets.status[i])]])
        if run.snapshot_every and k % run.snapshot_every == 0:
            fileformats.write_field(self.out / "fields" / f"m_{k:06d}.bin", m, t)
            if m_true is not None:
                fileformats.write_field(self.out / "fields" / f"mtrue_{k:06d}.bin", m_true, t)

    def close(self, records, summary: dict):
        self.agent_fh.close()
        self.target_fh.close()
        write_metrics(self.out / "metrics.csv", records)
        write_timings(self.out / "timings.csv", records)
        (self.out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        if self.cfg.run.figures and records and "error" not in summary:
            from .report import metrics_figure

            metrics_figure(records, self.out / "metrics.png", title=f"{self.cfg.name} ({self.cfg.run.mode})")


# ------------------------------------------------------------ sweep

SWEEP_COLUMNS = ("lambda", "mode", "T", "eta", "kappa", "eta_true")


def _sweep_task(args):
    cfg, scale, mode, horizons = args
    cfg = replace(cfg, flow=replace(cfg.flow, scale=cfg.flow.scale * scale), run=replace(cfg.run, mode=mode))
    res = run(cfg, write=False, horizon=max(horizons))
    rows = []
    for T in horizons:
        k = int(round(T / cfg.agents.dt)) - 1
        r = res.records[min(max(k, 0), len(res.records) - 1)]
        rows.append((T, r.eta, r.kappa, r.eta_true))
    return rows


def sweep_lambda(cfg: ScenarioConfig, ratios, horizons, jobs: int = 1) -> list[dict]:
    """Run both modes at every velocity ratio and tabulate eta/kappa at each horizon.

    Rows are sorted by (lambda, mode, T) so parallel and serial runs agree.
    """
    grid = build_domain(cfg)
    flow0 = build_flow(cfg, grid)
    lam0 = lambda_ratio(cfg.agents.speed, flow0)
    horizons = sorted(float(T) for T in horizons)
    tasks, keys = [], []
    for lam in ratios:
        s = lam0 / float(lam)
        for mode in ("dynamic", "static"):
            tasks.append((cfg, s, mode, horizons))
            keys.append((float(lam), mode))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_task, tasks))
    else:
        results = [_sweep_task(t) for t in tasks]
    rows = []
    for (lam, mode), res in zip(keys, results):
        for T, e, k, et in res:
            rows.append({"lambda": lam, "mode": mode, "T": T, "eta": e, "kappa": k, "eta_true": et})
    rows.sort(key=lambda r: (r["lambda"], r["mode"], r["T"]))
    return rows


def write_sweep(path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            w.writerow([repr(r["lambda"]), r["mode"], repr(r["T"]), repr(r["eta"]), repr(r["kappa"]), repr(r["eta_true"])])
