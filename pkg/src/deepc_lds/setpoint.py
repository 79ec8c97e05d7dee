"""Stationary operating points for a given demand."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._linalg import frozen
from .errors import NumericalError, ValidationError
from .grid import DescriptorSystem, GridModel, build_laplacian

SHARING_POLICIES = ("equal", "inertia")
STATIONARY_TOL = 1e-9


@dataclass(frozen=True)
class Setpoint:
    u_s: np.ndarray
    w_s: np.ndarray
    y_s: np.ndarray
    x_s: np.ndarray

    def __post_init__(self):
        for name in ("u_s", "w_s", "y_s", "x_s"):
            object.__setattr__(self, name, frozen(np.ravel(getattr(self, name))))

    def to_dict(self) -> dict:
        return {k: [float(v) for v in getattr(self, k)] for k in ("u_s", "w_s", "y_s", "x_s")}

    def stationarity_residual(self, sys: DescriptorSystem) -> float:
        r = (sys.E - sys.A) @ self.x_s - sys.B @ self.u_s - sys.F @ self.w_s
        return float(np.linalg.norm(r))


def share_generation(grid: GridModel, total: float, sharing: str = "equal") -> np.ndarray:
    if sharing == "equal":
        weights = np.ones(grid.g)
    elif sharing == "inertia":
        weights = grid.inertia
    else:
        raise ValidationError(f"sharing must be one of {SHARING_POLICIES}, got {sharing!r}")
    return total * weights / weights.sum()


def compute_setpoint(grid: GridModel, sys: DescriptorSystem, p_d, sharing: str = "equal") -> Setpoint:
    """Balanced dispatch with zero frequency deviation.

    Angles solve ``L theta = injection`` in the minimum-norm sense and are then
    shifted so that bus 1 (the first generator) sits at angle 0.
    """
    p_d = np.asarray(p_d, dtype=float).ravel()
    if p_d.shape != (grid.n,):
        raise ValidationError(f"demand vector must have length {grid.n}, got {p_d.shape}")
    if np.any(p_d < 0):
        raise ValidationError(f"demand must be nonnegative, bus {int(np.argmin(p_d)) + 1} has {p_d.min()}")
    u_s = share_generation(grid, p_d.sum(), sharing)
    if np.any(u_s < 0):
        k = int(np.argmin(u_s))
        raise ValidationError(f"sharing policy gives negative power {u_s[k]} on generator {k + 1}")
    g = grid.g
    injection = -p_d.copy()
    injection[:g] += u_s
    # balance makes the injection orthogonal to the Laplacian kernel
    assert abs(injection.sum()) <= 1e-9 * max(1.0, p_d.sum())
    L = build_laplacian(grid)
    theta = np.linalg.pinv(L) @ injection
    theta -= theta[0]
    x_s = np.concatenate([np.zeros(g), theta])
    sp = Setpoint(u_s, p_d, sys.C @ x_s, x_s)
    res = sp.stationarity_residual(sys)
    if res > STATIONARY_TOL * max(1.0, np.abs(p_d).max()):
        raise NumericalError(
            f"setpoint is not stationary (residual {res:.3g}); the descriptor matrices must use the physical convention"
        )
    return sp
