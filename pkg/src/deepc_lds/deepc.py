"""Data-enabled predictive control for the descriptor grid model.

The optimisation variable is ``z = [u_hat, y_hat, alpha]`` where ``u_hat``
and ``y_hat`` are the predicted inputs and outputs over ``[t, t+L-1]`` and
``alpha`` weights the columns of the depth ``L+q+s-1`` Hankel matrices.
Keeping ``u_hat`` explicit lets nonnegativity stay a plain bound.
"""

from __future__ import annotations

import copy
import logging
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .behavior import DataArchive, required_pe_order
from .errors import InfeasibleError, NumericalError, ValidationError
from .grid import DescriptorSystem, GridModel
from .pencil import QuasiWeierstrass
from .qp import INFEASIBLE, OPTIMAL, QuadraticProgram, solve_qp
from .schedule import DemandSchedule
from .setpoint import Setpoint, compute_setpoint
from .simulate import Plant, Trajectory

log = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-8


def _spd(M: np.ndarray, name: str, size: int) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape != (size, size):
        raise ValidationError(f"{name} must be {size}x{size}, got {M.shape}")
    if not np.allclose(M, M.T, rtol=0, atol=1e-12 * max(1.0, np.abs(M).max())):
        raise ValidationError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(M).min() <= 0:
        raise ValidationError(f"{name} must be positive definite")
    return M


@dataclass(frozen=True)
class OcpConfig:
    """Horizon and weights; ``q`` and ``s`` come from the pencil analysis."""

    L: int
    Q: np.ndarray
    R: np.ndarray
    q: int
    s: int
    ridge: float = 0.0

    def __post_init__(self):
        if self.q < 0 or self.s < 1:
            raise ValidationError(f"invalid pencil indices q={self.q}, s={self.s}")
        L_min = 3 * self.s + 2 * self.q - 2
        if self.L < L_min:
            raise ValidationError(f"horizon L={self.L} below the minimum {L_min} for q={self.q}, s={self.s}")
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        object.__setattr__(self, "Q", _spd(Q, "Q", Q.shape[0]))
        object.__setattr__(self, "R", _spd(R, "R", R.shape[0]))
        if self.ridge < 0:
            raise ValidationError(f"ridge must be >= 0, got {self.ridge}")

    @property
    def past(self) -> int:
        """Consistency window length ``q + s - 1``."""
        return self.q + self.s - 1

    @property
    def depth(self) -> int:
        return self.L + self.past


@dataclass
class ControllerState:
    """Measurement window, data, and the current target."""

    history: deque
    archive: DataArchive
    setpoint: Setpoint
    demand_forecast: np.ndarray

    @classmethod
    def at_setpoint(cls, archive: DataArchive, setpoint: Setpoint, cfg: OcpConfig) -> "ControllerState":
        """History filled with the stationary triple of ``setpoint``."""
        hist = deque(maxlen=cfg.past)
        for _ in range(cfg.past):
            hist.append((setpoint.u_s.copy(), setpoint.w_s.copy(), setpoint.y_s.copy()))
        return cls(hist, archive, setpoint, np.array(setpoint.w_s))

    def push(self, u, w, y) -> None:
        self.history.append((np.asarray(u, dtype=float), np.asarray(w, dtype=float), np.asarray(y, dtype=float)))


@dataclass(frozen=True)
class OcpLayout:
    g: int
    m: int
    L: int
    N: int

    @property
    def u(self) -> slice:
        return slice(0, self.g * self.L)

    @property
    def y(self) -> slice:
        return slice(self.g * self.L, (self.g + self.m) * self.L)

    @property
    def alpha(self) -> slice:
        return slice((self.g + self.m) * self.L, (self.g + self.m) * self.L + self.N)

    @property
    def size(self) -> int:
        return (self.g + self.m) * self.L + self.N


@dataclass(frozen=True)
class OcpProblem:
    qp: QuadraticProgram
    layout: OcpLayout
    const: float
    blocks: dict = field(default_factory=dict)  # name -> row slice of A_eq


@dataclass(frozen=True)
class Prediction:
    u: np.ndarray
    y: np.ndarray
    alpha: np.ndarray


@dataclass(frozen=True)
class StepDiagnostics:
    cost: float
    kkt: float
    active_bounds: int
    solve_ms: float
    iterations: int


def alpha_dimension(T: int, L: int, q: int, s: int) -> int:
    return T - L - 2 * s - q + 3


def assemble_ocp(state: ControllerState, cfg: OcpConfig) -> OcpProblem:
    archive = state.archive
    p = cfg.past
    if len(state.history) != p:
        raise ValidationError(f"history holds {len(state.history)} samples, needs {p}")
    need = required_pe_order(cfg.L, cfg.q, cfg.s)
    if archive.pe_order_verified < need:
        raise ValidationError(f"archive excitation order {archive.pe_order_verified} below the required {need}")
    g, n, m = archive.u_bar.shape[1], archive.w_bar.shape[1], archive.y_bar.shape[1]
    if cfg.R.shape[0] != g or cfg.Q.shape[0] != m:
        raise ValidationError(f"weights must be R:{g}x{g}, Q:{m}x{m}")
    L = cfg.L
    Hu, Hw, Hy = archive.hankel_blocks(cfg.depth, cfg.s)
    N = Hu.shape[1]
    lay = OcpLayout(g, m, L, N)
    nz = lay.size

    u_hist = np.concatenate([h[0] for h in state.history])
    w_hist = np.concatenate([h[1] for h in state.history])
    y_hist = np.concatenate([h[2] for h in state.history])
    sp = state.setpoint
    d = np.asarray(state.demand_forecast, dtype=float)

    rows, rhs, blocks = [], [], {}
    start = 0

    def add(name, M, b):
        nonlocal start
        rows.append(M)
        rhs.append(b)
        blocks[name] = slice(start, start + M.shape[0])
        start += M.shape[0]

    def on_alpha(H):
        M = np.zeros((H.shape[0], nz))
        M[:, lay.alpha] = H
        return M

    add("initial", np.vstack([on_alpha(Hu[: p * g]), on_alpha(Hw[: p * n]), on_alpha(Hy[: p * m])]),
        np.concatenate([u_hist, w_hist, y_hist]))
    add("demand", on_alpha(Hw[p * n:]), np.tile(d, L))
    link = np.vstack([on_alpha(Hu[p * g:]), on_alpha(Hy[p * m:])])
    link[: g * L, lay.u] -= np.eye(g * L)
    link[g * L:, lay.y] -= np.eye(m * L)
    add("dynamics", link, np.zeros((g + m) * L))
    term = np.zeros(((g + m) * p, nz))
    term[: g * p, lay.u.start + g * (L - p): lay.u.stop] = np.eye(g * p)
    term[g * p:, lay.y.start + m * (L - p): lay.y.stop] = np.eye(m * p)
    add("terminal", term, np.concatenate([np.tile(sp.u_s, p), np.tile(sp.y_s, p)]))

    H = np.zeros((nz, nz))
    H[lay.u, lay.u] = 2 * np.kron(np.eye(L), cfg.R)
    H[lay.y, lay.y] = 2 * np.kron(np.eye(L), cfg.Q)
    if cfg.ridge:
        H[lay.alpha, lay.alpha] = 2 * cfg.ridge * np.eye(N)
    c = np.zeros(nz)
    c[lay.u] = -2 * np.tile(cfg.R @ sp.u_s, L)
    c[lay.y] = -2 * np.tile(cfg.Q @ sp.y_s, L)
    const = L * float(sp.u_s @ cfg.R @ sp.u_s + sp.y_s @ cfg.Q @ sp.y_s)
    qp = QuadraticProgram(H, c, np.vstack(rows), np.concatenate(rhs), np.arange(lay.u.start, lay.u.stop))
    return OcpProblem(qp, lay, const, blocks)


def _violated_block(problem: OcpProblem) -> str:
    """First constraint block (in order) that makes the equalities inconsistent, else the bounds."""
    A, b = problem.qp.A_eq, problem.qp.b_eq
    scale = max(1.0, np.abs(b).max(initial=0.0))
    picked = []
    for name, sl in problem.blocks.items():
        picked.extend(range(sl.start, sl.stop))
        x, *_ = np.linalg.lstsq(A[picked], b[picked], rcond=None)
        if np.abs(A[picked] @ x - b[picked]).max() > FEASIBILITY_TOL * scale:
            return name
    return "nonnegativity"


def deepc_step(state: ControllerState, cfg: OcpConfig):
    """Solve the OCP; return ``(u(t), Prediction, StepDiagnostics)``."""
    problem = assemble_ocp(state, cfg)
    t0 = time.perf_counter()
    sol = solve_qp(problem.qp)
    ms = 1e3 * (time.perf_counter() - t0)
    lay = problem.layout
    if sol.status == INFEASIBLE:
        block = _violated_block(problem)
        raise InfeasibleError(f"OCP infeasible: '{block}' constraints cannot be met", block=block)
    if sol.status != OPTIMAL:
        raise NumericalError(f"QP solver stopped with status {sol.status} after {sol.iterations} iterations")
    u_hat = sol.x[lay.u].reshape(lay.L, lay.g)
    y_hat = sol.x[lay.y].reshape(lay.L, lay.m)
    pred = Prediction(u_hat, y_hat, sol.x[lay.alpha])
    cost = max(sol.objective + problem.const, 0.0)
    diag = StepDiagnostics(cost, sol.kkt_residual, sol.active, ms, sol.iterations)
    return u_hat[0].copy(), pred, diag


@dataclass(frozen=True)
class ClosedLoopResult:
    trajectory: Trajectory
    diagnostics: list
    setpoints: list  # one per schedule segment that starts within the run

    def diagnostics_rows(self):
        for t, d in enumerate(self.diagnostics):
            yield [t, d.cost, d.kkt, d.active_bounds, d.solve_ms]


DIAGNOSTICS_HEADER = ["t", "cost", "kkt", "active_bounds", "solve_ms"]


def run_closed_loop(
    grid: GridModel,
    sys: DescriptorSystem,
    qw: QuasiWeierstrass,
    archive: DataArchive,
    cfg: OcpConfig,
    schedule: DemandSchedule,
    steps: int,
    sharing: str = "equal",
) -> ClosedLoopResult:
    """Receding-horizon loop from the steady state of the first segment."""
    if schedule.n != grid.n:
        raise ValidationError(f"schedule has {schedule.n} buses, grid has {grid.n}")
    if steps < 1:
        raise ValidationError(f"steps must be >= 1, got {steps}")
    setpoints = [compute_setpoint(grid, sys, d, sharing) for t, d in schedule.segments if t < steps]
    state = ControllerState.at_setpoint(archive, setpoints[0], cfg)
    plant = Plant(sys, qw, setpoints[0].x_s)
    U, W, Y, X, diags = [], [], [], [], []
    seg = 0
    for t in range(steps):
        k = schedule.segment_index(t)
        if k != seg:
            seg = k
            log.info("t=%d: demand change, new setpoint", t)
        state.setpoint = setpoints[k]
        state.demand_forecast = schedule.demand_at(t)
        w = schedule.demand_at(t)
        try:
            u, _, diag = deepc_step(state, cfg)
        except InfeasibleError as exc:
            dump = {
                "t": t,
                "history": [tuple(a.tolist() for a in h) for h in state.history],
                "setpoint": state.setpoint.to_dict(),
                "demand_forecast": state.demand_forecast.tolist(),
                "plant_state": plant.dynamic_state().tolist(),
            }
            raise InfeasibleError(f"t={t}: {exc}", block=exc.block, dump=dump) from None
        x, y = plant.step(u, w)
        state.push(u, w, y)
        U.append(u)
        W.append(w)
        Y.append(y)
        X.append(x)
        diags.append(diag)
    traj = Trajectory(np.array(U), np.array(W), np.array(Y), np.array(X))
    return ClosedLoopResult(traj, diags, setpoints)


def replay_prediction(plant: Plant, pred: Prediction, demand) -> np.ndarray:
    """Outputs of a copy of ``plant`` driven by the predicted inputs."""
    sim = copy.deepcopy(plant)
    return np.array([sim.step(u, demand)[1] for u in pred.u])
