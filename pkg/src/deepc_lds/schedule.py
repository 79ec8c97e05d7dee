"""Piecewise-constant power demand schedules."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from ._linalg import frozen
from .errors import ValidationError
from .grid import GridModel


@dataclass(frozen=True)
class DemandSchedule:
    """Segments ``(t_start, demand)`` with demand in internal bus order."""

    segments: tuple

    def __post_init__(self):
        segs = []
        for t_start, demand in self.segments:
            d = np.asarray(demand, dtype=float).ravel()
            segs.append((int(t_start), frozen(d)))
        if not segs:
            raise ValidationError("schedule needs at least one segment")
        if segs[0][0] != 0:
            raise ValidationError(f"first segment must start at t=0, got {segs[0][0]}")
        starts = [t for t, _ in segs]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValidationError(f"segment starts must be strictly increasing, got {starts}")
        sizes = {d.size for _, d in segs}
        if len(sizes) != 1:
            raise ValidationError("all demand vectors must have one length")
        for t, d in segs:
            if not np.all(np.isfinite(d)) or np.any(d < 0):
                raise ValidationError(f"demand at t={t} must be finite and nonnegative")
        object.__setattr__(self, "segments", tuple(segs))

    @classmethod
    def constant(cls, demand) -> "DemandSchedule":
        return cls(((0, demand),))

    @property
    def n(self) -> int:
        return self.segments[0][1].size

    @property
    def starts(self) -> list[int]:
        return [t for t, _ in self.segments]

    def segment_index(self, t: int) -> int:
        return int(np.searchsorted(self.starts, t, side="right")) - 1

    def demand_at(self, t: int) -> np.ndarray:
        return self.segments[self.segment_index(t)][1]

    def bounds(self, steps: int) -> list[tuple[int, int]]:
        """``[start, end)`` of every segment that begins before ``steps``."""
        starts = [t for t in self.starts if t < steps]
        ends = starts[1:] + [steps]
        return list(zip(starts, ends))

    def to_dict(self, grid: GridModel) -> dict:
        """File form with demand listed in original bus-label order."""
        order = sorted(grid.bus_labels)
        out = []
        for t, d in self.segments:
            out.append({"t_start": t, "demand": [float(d[grid.internal_index(lab)]) for lab in order]})
        return {"segments": out}


def _demand_vector(grid: GridModel, raw) -> np.ndarray:
    d = np.zeros(grid.n)
    if isinstance(raw, dict):
        for label, value in raw.items():
            try:
                d[grid.internal_index(int(label))] = float(value)
            except (KeyError, ValueError) as exc:
                raise ValidationError(f"unknown bus {label!r} in demand") from exc
        return d
    raw = list(raw)
    if len(raw) != grid.n:
        raise ValidationError(f"demand list must have {grid.n} entries, got {len(raw)}")
    for label, value in zip(sorted(grid.bus_labels), raw):
        d[grid.internal_index(label)] = float(value)
    return d


def schedule_from_dict(doc: dict, grid: GridModel) -> DemandSchedule:
    """Parse ``{segments: [{t_start, demand}]}``.

    ``demand`` is either a list in bus-label order or a ``{bus: value}``
    mapping where unlisted buses get zero.
    """
    if not isinstance(doc, dict) or "segments" not in doc:
        raise ValidationError("schedule file needs a 'segments' list")
    try:
        segs = [(int(s["t_start"]), _demand_vector(grid, s["demand"])) for s in doc["segments"]]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed schedule segment: {exc}") from None
    return DemandSchedule(tuple(segs))


def load_schedule(path: str | Path, grid: GridModel) -> DemandSchedule:
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except FileNotFoundError:
        raise ValidationError(f"schedule file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ValidationError(f"schedule file is not valid YAML: {exc}") from None
    return schedule_from_dict(doc, grid)


def default_schedule_path() -> Path:
    return Path(__file__).with_name("data") / "nine_bus_schedule.yaml"
