"""Survey accomplishment, detection rate, velocity ratio, and per-step records."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .grid import FlowSeries, ScalarField
from .targets import DETECTED, TargetSet


def eta(m: ScalarField) -> float:
    """1 minus the probability mass left in the domain."""
    return 1.0 - m.integral()


def kappa(targets: TargetSet) -> float:
    """Fraction of all targets detected; escaped ones count as undetected."""
    n = len(targets)
    if n == 0:
        raise ValueError("kappa needs at least one target")
    return int(np.sum(targets.status == DETECTED)) / n


def mean_speed(flow: FlowSeries) -> float:
    fl = flow.grid.fluid
    speed = np.hypot(flow.wx, flow.wy)[:, fl]
    return float(speed.mean())


def lambda_ratio(v: float, flow: FlowSeries) -> float:
    """Agent speed over the FLUID- and snapshot-averaged flow speed."""
    s = mean_speed(flow)
    if s == 0:
        raise ZeroDivisionError("flow has zero mean speed; velocity ratio undefined")
    return v / s


@dataclass
class StepRecord:
    t: float
    eta: float
    kappa: float
    mass_in_domain: float
    n_detected: int
    n_escaped: int
    eta_true: float
    potential_ms: float = 0.0
    avoidance_ms: float = 0.0
    transport_ms: float = 0.0

    @property
    def total_ms(self) -> float:
        return self.potential_ms + self.avoidance_ms + self.transport_ms


METRIC_COLUMNS = ("t", "eta", "kappa", "mass_in_domain", "n_detected", "n_escaped", "eta_true")
TIMING_COLUMNS = ("t", "potential_ms", "avoidance_ms", "transport_ms")


def _fmt(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def write_metrics(path, records: list[StepRecord]) -> None:
    """Deterministic quantities only, so identical runs give identical bytes."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(METRIC_COLUMNS)
        for r in records:
            w.writerow([_fmt(getattr(r, c)) for c in METRIC_COLUMNS])


def write_timings(path, records: list[StepRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TIMING_COLUMNS + ("total_ms",))
        for r in records:
            w.writerow([_fmt(getattr(r, c)) for c in TIMING_COLUMNS] + [f"{r.total_ms:.4f}"])


def read_metrics(path) -> list[dict[str, float]]:
    with open(path, newline="") as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def timing_summary(records: list[StepRecord]) -> dict[str, float]:
    if not records:
        return {}
    out = {}
    for name in ("potential_ms", "avoidance_ms", "transport_ms"):
        vals = np.array([getattr(r, name) for r in records])
        out[f"{name}_total"] = float(vals.sum())
        out[f"{name}_median"] = float(np.median(vals))
    totals = np.array([r.total_ms for r in records])
    out["step_ms_median"] = float(np.median(totals))
    out["step_ms_max"] = float(totals.max())
    return out
