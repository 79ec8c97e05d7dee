"""Causal forward simulation of regular descriptor systems with ``s = 1``.

In quasi-Weierstrass coordinates ``x = P [z1; z2]`` the dynamics split into

    z1(t+1) = A1 z1(t) + [S (B u(t) + F w(t))]_1
    z2(t)   = -[S (B u(t) + F w(t))]_2

(the second line needs ``N = 0``).  The algebraic part is therefore fixed by
the current inputs, which is also how a load step instantly moves the
non-generator bus angles.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._linalg import frozen
from .errors import ValidationError
from .grid import DescriptorSystem
from .pencil import QuasiWeierstrass

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-9


@dataclass(frozen=True)
class Trajectory:
    """Time-indexed records; row ``k`` is time ``t0 + k``."""

    u: np.ndarray
    w: np.ndarray
    y: np.ndarray
    x: np.ndarray | None = None
    t0: int = 0

    def __post_init__(self):
        u, w, y = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (self.u, self.w, self.y))
        lengths = {u.shape[0], w.shape[0], y.shape[0]}
        if self.x is not None:
            x = np.atleast_2d(np.asarray(self.x, dtype=float))
            lengths.add(x.shape[0])
            object.__setattr__(self, "x", frozen(x))
        if len(lengths) != 1:
            raise ValidationError(f"trajectory sequences have different lengths: {sorted(lengths)}")
        object.__setattr__(self, "u", frozen(u))
        object.__setattr__(self, "w", frozen(w))
        object.__setattr__(self, "y", frozen(y))

    def __len__(self) -> int:
        return self.u.shape[0]

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.t0, self.t0 + len(self))

    def header(self) -> list[str]:
        cols = ["t"]
        cols += [f"u_{i + 1}" for i in range(self.u.shape[1])]
        cols += [f"w_{i + 1}" for i in range(self.w.shape[1])]
        cols += [f"y_{i + 1}" for i in range(self.y.shape[1])]
        if self.x is not None:
            cols += [f"x_{i + 1}" for i in range(self.x.shape[1])]
        return cols

    def rows(self):
        blocks = [self.u, self.w, self.y] + ([self.x] if self.x is not None else [])
        data = np.hstack(blocks)
        for t, row in zip(self.times, data):
            yield [int(t)] + [float(v) for v in row]

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.header())
            for row in self.rows():
                writer.writerow([row[0]] + [repr(v) for v in row[1:]])

    def descriptor_residuals(self, sys: DescriptorSystem) -> np.ndarray:
        """Per-step ``||E x(t+1) - A x(t) - B u(t) - F w(t)||``."""
        if self.x is None:
            raise ValidationError("trajectory carries no latent state")
        x = self.x
        R = x[1:] @ sys.E.T - x[:-1] @ sys.A.T - self.u[:-1] @ sys.B.T - self.w[:-1] @ sys.F.T
        return np.linalg.norm(R, axis=1)

    def residual_scale(self, sys: DescriptorSystem) -> float:
        """Magnitude the residual tolerance is measured against."""
        norms = [np.linalg.norm(M, 2) for M in (sys.E, sys.A, sys.B, sys.F) if M.size]
        mags = [np.abs(a).max() if a is not None and a.size else 0.0 for a in (self.x, self.u, self.w)]
        return max(1.0, max(norms) * max(mags))


def _require_index_one(qw: QuasiWeierstrass) -> None:
    if qw.s != 1:
        raise ValidationError(
            f"nilpotency index s={qw.s}: the algebraic part would anticipate future inputs; "
            "only s = 1 is simulated"
        )


class Plant:
    """Incremental stepper used by the simulator and the closed loops."""

    def __init__(self, sys: DescriptorSystem, qw: QuasiWeierstrass, x_init=None):
        _require_index_one(qw)
        self.sys = sys
        self.qw = qw
        q = qw.q
        self._P1 = qw.P[:, :q]
        self._P2 = qw.P[:, q:]
        self._SB = qw.S @ sys.B
        self._SF = qw.S @ sys.F
        self._Pinv = np.linalg.inv(qw.P)
        self._check_init = x_init is not None
        x_init = np.zeros(sys.nx) if x_init is None else np.asarray(x_init, dtype=float)
        if x_init.shape != (sys.nx,):
            raise ValidationError(f"initial state must have length {sys.nx}")
        self.z1 = (self._Pinv @ x_init)[:q]
        self._x_init = x_init
        self.t = 0

    def dynamic_state(self) -> np.ndarray:
        """``P1 z1``: the part of ``x(t)`` that is fixed before ``u(t)`` is chosen."""
        return self._P1 @ self.z1

    def _forcing(self, u, w) -> np.ndarray:
        return self._SB @ u + self._SF @ w

    def state(self, u, w) -> np.ndarray:
        f = self._forcing(u, w)
        return self._P1 @ self.z1 + self._P2 @ (-f[self.qw.q:])

    def step(self, u, w) -> tuple[np.ndarray, np.ndarray]:
        """Apply ``(u(t), w(t))``; return ``(x(t), y(t))`` and advance."""
        u = np.asarray(u, dtype=float)
        w = np.asarray(w, dtype=float)
        f = self._forcing(u, w)
        q = self.qw.q
        x = self._P1 @ self.z1 + self._P2 @ (-f[q:])
        if self.t == 0 and self._check_init:
            gap = np.linalg.norm(x - self._x_init)
            if gap > RESIDUAL_TOL * max(1.0, np.linalg.norm(self._x_init)):
                log.warning("initial state inconsistent with algebraic constraints; projected (|dx|=%.3g)", gap)
        y = self.sys.C @ x
        self.z1 = self.qw.A1 @ self.z1 + f[:q]
        self.t += 1
        return x, y


def make_consistent(sys: DescriptorSystem, qw: QuasiWeierstrass, x_guess, u0, w0) -> np.ndarray:
    """Keep the dynamic coordinates of ``x_guess``, overwrite the algebraic ones."""
    _require_index_one(qw)
    q = qw.q
    z = np.linalg.solve(qw.P, np.asarray(x_guess, dtype=float))
    f = qw.S @ (sys.B @ np.asarray(u0, dtype=float) + sys.F @ np.asarray(w0, dtype=float))
    z[q:] = -f[q:]
    return qw.P @ z


def simulate(sys: DescriptorSystem, qw: QuasiWeierstrass, x_init, u, w) -> Trajectory:
    """Run the plant over the given input and disturbance sequences.

    ``x_init=None`` starts from rest (zero dynamic part) without the
    consistency warning.
    """
    u = np.asarray(u, dtype=float).reshape(-1, sys.nu)
    w = np.asarray(w, dtype=float).reshape(-1, sys.nw)
    if u.shape[0] != w.shape[0]:
        raise ValidationError(f"input length {u.shape[0]} differs from disturbance length {w.shape[0]}")
    plant = Plant(sys, qw, x_init)
    T = u.shape[0]
    X = np.empty((T, sys.nx))
    Y = np.empty((T, sys.ny))
    for t in range(T):
        X[t], Y[t] = plant.step(u[t], w[t])
    return Trajectory(u, w, Y, X)
