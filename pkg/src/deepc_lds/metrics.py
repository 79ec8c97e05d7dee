"""Per-segment frequency and effort metrics, and the controller comparison."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .schedule import DemandSchedule
from .simulate import Trajectory

SETTLING_THRESHOLD = 1e-3
SETTLING_HOLD = 20


def settling_index(signal, threshold: float = SETTLING_THRESHOLD, hold: int = SETTLING_HOLD) -> int | None:
    """First index from which ``signal`` stays below ``threshold`` to the end.

    ``None`` (unsettled) if that never happens or fewer than ``hold`` samples
    remain to confirm it.
    """
    sig = np.asarray(signal, dtype=float)
    above = np.flatnonzero(sig >= threshold)
    k = 0 if above.size == 0 else int(above[-1]) + 1
    if sig.size - k < min(hold, sig.size) or k >= sig.size:
        return None
    return k


@dataclass(frozen=True)
class SegmentMetrics:
    t_start: int
    t_end: int
    settling_time: int | None
    peak_frequency: float
    ise_frequency: float
    control_effort: float

    @property
    def settled(self) -> bool:
        return self.settling_time is not None

    def as_row(self) -> list:
        st = "unsettled" if self.settling_time is None else self.settling_time
        return [self.t_start, self.t_end, st, self.peak_frequency, self.ise_frequency, self.control_effort]


@dataclass(frozen=True)
class RunMetrics:
    segments: tuple
    threshold: float

    HEADER = ("t_start", "t_end", "settling_time", "peak_frequency", "ise_frequency", "control_effort")


def compute_metrics(
    traj: Trajectory,
    schedule: DemandSchedule,
    setpoints,
    g: int,
    threshold: float = SETTLING_THRESHOLD,
    hold: int = SETTLING_HOLD,
) -> RunMetrics:
    """Metrics for every schedule segment covered by ``traj``.

    Frequencies are the first ``g`` latent coordinates; control effort is
    measured against each segment's setpoint input.
    """
    if traj.x is None:
        raise ValidationError("metrics need the latent state (generator frequencies)")
    steps = len(traj)
    bounds = schedule.bounds(steps)
    if len(setpoints) < len(bounds):
        raise ValidationError(f"{len(bounds)} segments but only {len(setpoints)} setpoints")
    if threshold <= 0:
        raise ValidationError("threshold must be positive")
    omega = np.abs(traj.x[:, :g]).max(axis=1)
    out = []
    for (a, b), sp in zip(bounds, setpoints):
        seg = omega[a:b]
        du = traj.u[a:b] - sp.u_s
        out.append(
            SegmentMetrics(
                a,
                b,
                settling_index(seg, threshold, hold),
                float(seg.max(initial=0.0)),
                float(np.sum(traj.x[a:b, :g] ** 2)),
                float(np.sum(du**2)),
            )
        )
    return RunMetrics(tuple(out), threshold)


def settles_no_later(a: SegmentMetrics, b: SegmentMetrics) -> bool:
    """``a`` settles at least as fast as ``b``; unsettled counts as infinitely slow."""
    if a.settling_time is None:
        return b.settling_time is None
    return b.settling_time is None or a.settling_time <= b.settling_time


@dataclass(frozen=True)
class Comparison:
    deepc: RunMetrics
    droop: RunMetrics

    def rows(self):
        for a, b in zip(self.deepc.segments, self.droop.segments):
            yield ["deepc"] + a.as_row()
            yield ["droop"] + b.as_row()

    def report(self) -> str:
        lines = ["controller," + ",".join(RunMetrics.HEADER)]
        for row in self.rows():
            lines.append(",".join(_fmt(v) for v in row))
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def compare(deepc_metrics: RunMetrics, droop_metrics: RunMetrics) -> Comparison:
    if len(deepc_metrics.segments) != len(droop_metrics.segments):
        raise ValidationError("runs cover different numbers of segments")
    return Comparison(deepc_metrics, droop_metrics)
