"""Proportional droop baseline ``p = p_tilde - K omega_G``."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ._linalg import frozen
from .errors import ValidationError
from .grid import DescriptorSystem, GridModel
from .pencil import QuasiWeierstrass
from .schedule import DemandSchedule
from .setpoint import compute_setpoint
from .simulate import Plant, Trajectory

log = logging.getLogger(__name__)

# Shipped gain, chosen by scripts/tune_droop.py on the default grid and schedule.
DEFAULT_GAIN = 0.7


@dataclass(frozen=True)
class DroopConfig:
    K: np.ndarray
    p_tilde: np.ndarray

    def __post_init__(self):
        K = np.atleast_2d(np.asarray(self.K, dtype=float))
        if K.shape[0] != K.shape[1]:
            raise ValidationError(f"K must be square, got {K.shape}")
        if np.any(K - np.diag(np.diag(K))):
            raise ValidationError("K must be diagonal")
        if np.any(np.diag(K) < 0):
            raise ValidationError("droop gains must be nonnegative")
        p = np.asarray(self.p_tilde, dtype=float).ravel()
        if p.shape != (K.shape[0],):
            raise ValidationError(f"p_tilde must have length {K.shape[0]}")
        object.__setattr__(self, "K", frozen(K))
        object.__setattr__(self, "p_tilde", frozen(p))

    @classmethod
    def uniform(cls, gain: float, p_tilde) -> "DroopConfig":
        p = np.asarray(p_tilde, dtype=float).ravel()
        return cls(gain * np.eye(p.size), p)


@dataclass(frozen=True)
class DroopResult:
    trajectory: Trajectory
    clip_events: int
    setpoints: list


def droop_input(cfg: DroopConfig, omega: np.ndarray) -> tuple[np.ndarray, bool]:
    """Commanded power clipped at zero, and whether clipping occurred."""
    p = cfg.p_tilde - cfg.K @ omega
    clipped = bool(np.any(p < 0))
    return np.maximum(p, 0.0), clipped


def run_droop(
    grid: GridModel,
    sys: DescriptorSystem,
    qw: QuasiWeierstrass,
    cfg: DroopConfig,
    schedule: DemandSchedule,
    steps: int,
    sharing: str = "equal",
) -> DroopResult:
    """Closed loop from the steady state of the first segment.

    ``p_tilde`` is held fixed through demand changes; the setpoints are
    returned only for reporting.
    """
    if schedule.n != grid.n:
        raise ValidationError(f"schedule has {schedule.n} buses, grid has {grid.n}")
    if steps < 1:
        raise ValidationError(f"steps must be >= 1, got {steps}")
    if cfg.p_tilde.size != grid.g:
        raise ValidationError(f"droop config is for {cfg.p_tilde.size} generators, grid has {grid.g}")
    setpoints = [compute_setpoint(grid, sys, d, sharing) for t, d in schedule.segments if t < steps]
    plant = Plant(sys, qw, setpoints[0].x_s)
    g = grid.g
    U, W, Y, X = [], [], [], []
    clips = 0
    for t in range(steps):
        omega = plant.dynamic_state()[:g]
        u, clipped = droop_input(cfg, omega)
        if clipped:
            clips += 1
            log.debug("t=%d: droop command clipped at zero power", t)
        w = schedule.demand_at(t)
        x, y = plant.step(u, w)
        U.append(u)
        W.append(w)
        Y.append(y)
        X.append(x)
    if clips:
        log.warning("droop command clipped at zero power in %d of %d steps", clips, steps)
    traj = Trajectory(np.array(U), np.array(W), np.array(Y), np.array(X))
    return DroopResult(traj, clips, setpoints)
