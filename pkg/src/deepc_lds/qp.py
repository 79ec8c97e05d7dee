"""Dense convex QP with equalities and nonnegativity on an index subset.

    minimize    1/2 x'Hx + c'x
    subject to  A_eq x = b_eq,  x[i] >= 0 for i in nonneg_idx

Equalities are eliminated once through an SVD nullspace basis ``Z0``
(``x = x_p + Z0 v``); the bounds become general inequalities ``G v >= h``
and a primal active-set method runs in ``v``.  Singular reduced Hessians are
handled with minimum-norm steps, and zero-curvature descent directions are
followed until a bound blocks them.
"""

from __future__ import annotations

import hashlib
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls

from ._linalg import RANK_RTOL, orth
from .errors import ValidationError

KKT_TOL = 1e-8
BOUND_TOL = 1e-10
SYMMETRY_TOL = 1e-12

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
MAX_ITERATIONS = "max_iterations"
UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class QuadraticProgram:
    H: np.ndarray
    c: np.ndarray
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    nonneg_idx: np.ndarray | None = None

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        n = H.shape[0]
        if H.shape != (n, n):
            raise ValidationError(f"H must be square, got {H.shape}")
        if np.abs(H - H.T).max(initial=0.0) > SYMMETRY_TOL * max(1.0, np.abs(H).max(initial=0.0)):
            raise ValidationError("H must be symmetric")
        c = np.asarray(self.c, dtype=float).ravel()
        if c.shape != (n,):
            raise ValidationError(f"c must have length {n}")
        A = np.zeros((0, n)) if self.A_eq is None else np.asarray(self.A_eq, dtype=float).reshape(-1, n)
        b = np.zeros(0) if self.b_eq is None else np.asarray(self.b_eq, dtype=float).ravel()
        if b.shape != (A.shape[0],):
            raise ValidationError(f"b_eq must have length {A.shape[0]}")
        idx = np.zeros(0, dtype=int) if self.nonneg_idx is None else np.asarray(self.nonneg_idx, dtype=int).ravel()
        if idx.size and (idx.min() < 0 or idx.max() >= n or np.unique(idx).size != idx.size):
            raise ValidationError("nonneg_idx must hold distinct indices in range")
        object.__setattr__(self, "H", 0.5 * (H + H.T))
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A_eq", A)
        object.__setattr__(self, "b_eq", b)
        object.__setattr__(self, "nonneg_idx", idx)

    @property
    def n(self) -> int:
        return self.H.shape[0]

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.H @ x + self.c @ x)


@dataclass(frozen=True)
class QpSolution:
    x: np.ndarray
    y_eq: np.ndarray
    z_bound: np.ndarray
    kkt_residual: float
    status: str
    iterations: int = 0
    objective: float = np.nan

    @property
    def active(self) -> int:
        """Number of bounds with a positive multiplier or zero value."""
        return int(np.count_nonzero(self.z_bound > BOUND_TOL))


# -- equality factorization cache --------------------------------------------
# A_eq is identical across consecutive receding-horizon solves; only b_eq moves.

_CACHE: "OrderedDict[tuple, tuple]" = OrderedDict()
_CACHE_SIZE = 8


def _equality_factor(A: np.ndarray):
    key = (A.shape, hashlib.sha1(np.ascontiguousarray(A).tobytes()).digest())
    hit = _CACHE.get(key)
    if hit is not None:
        _CACHE.move_to_end(key)
        return hit
    n = A.shape[1]
    if A.shape[0] == 0:
        out = (np.zeros((n, 0)), np.zeros(0), np.zeros((0, 0)), np.eye(n))
    else:
        U, sv, Vt = np.linalg.svd(A, full_matrices=True)
        r = int(np.sum(sv > RANK_RTOL * sv[0])) if sv.size and sv[0] > 0 else 0
        out = (Vt[:r].T, sv[:r], U[:, :r], Vt[r:].T)
    _CACHE[key] = out
    if len(_CACHE) > _CACHE_SIZE:
        _CACHE.popitem(last=False)
    return out


def _kkt(qp: QuadraticProgram, x: np.ndarray, z_idx: np.ndarray, factor=None):
    """Equality duals and the max KKT violation for given bound duals."""
    n = qp.n
    Vr, sv, Ur, _ = _equality_factor(qp.A_eq) if factor is None else factor
    z = np.zeros(n)
    z[qp.nonneg_idx] = z_idx
    grad = qp.H @ x + qp.c - z
    if qp.A_eq.shape[0]:
        y = Ur @ ((Vr.T @ grad) / sv)  # least-squares duals via the cached SVD
        stat = grad - qp.A_eq.T @ y
        prim = qp.A_eq @ x - qp.b_eq
    else:
        y = np.zeros(0)
        stat = grad
        prim = np.zeros(0)
    xi = x[qp.nonneg_idx]
    parts = [
        np.abs(stat).max(initial=0.0),
        np.abs(prim).max(initial=0.0),
        max(0.0, -xi.min(initial=0.0)),
        max(0.0, -z_idx.min(initial=0.0)),
        np.abs(z_idx * xi).max(initial=0.0),
    ]
    return y, float(max(parts))


def _phase_one(G: np.ndarray, xp_I: np.ndarray, scale: float):
    """Find ``v`` with ``xp_I + G v >= 0`` or return None."""
    if G.shape[0] == 0 or np.all(xp_I >= 0):
        return np.zeros(G.shape[1])
    Q = orth(G)
    Pc = np.eye(G.shape[0]) - Q @ Q.T
    # y >= 0 with y - xp_I in range(G)  <=>  Pc (y - xp_I) = 0
    y, rnorm = nnls(Pc, Pc @ xp_I, maxiter=50 * G.shape[0])
    if rnorm > 1e-9 * scale:
        return None
    v, *_ = np.linalg.lstsq(G, y - xp_I, rcond=None)
    return v


def solve_qp(qp: QuadraticProgram, max_iter: int | None = None) -> QpSolution:
    n = qp.n
    idx = qp.nonneg_idx
    max_iter = 10 * n if max_iter is None else max_iter
    Vr, sv, Ur, Z0 = _equality_factor(qp.A_eq)

    b = qp.b_eq
    x_p = Vr @ ((Ur.T @ b) / sv) if sv.size else np.zeros(n)
    b_scale = max(1.0, np.abs(b).max(initial=0.0))
    eq_res = np.abs(qp.A_eq @ x_p - b).max(initial=0.0)
    empty = np.zeros(0)
    if eq_res > KKT_TOL * b_scale:
        return QpSolution(x_p, empty, np.zeros(idx.size), float(eq_res), INFEASIBLE)

    k = Z0.shape[1]
    Hr = Z0.T @ qp.H @ Z0
    gr = Z0.T @ (qp.H @ x_p + qp.c)
    G = Z0[idx]
    h = -x_p[idx]
    h_scale = max(1.0, np.abs(x_p).max(initial=0.0))

    # bounds fixed entirely by the equalities
    row_norm = np.linalg.norm(G, axis=1) if k else np.zeros(idx.size)
    fixed = row_norm <= RANK_RTOL
    if np.any(h[fixed] > BOUND_TOL * h_scale):
        return QpSolution(x_p, empty, np.zeros(idx.size), float(h[fixed].max()), INFEASIBLE)
    free = np.flatnonzero(~fixed)

    v = _phase_one(G[free], x_p[idx[free]], h_scale)
    if v is None:
        return QpSolution(x_p, empty, np.zeros(idx.size), np.inf, INFEASIBLE)

    h_norm = max(np.linalg.norm(Hr, 2), 1.0) if k else 1.0
    W: list[int] = []  # positions into idx
    status = MAX_ITERATIONS
    mu = np.zeros(0)
    it = 0
    for it in range(1, max_iter + 1):
        g = Hr @ v + gr
        GW = G[W]
        Zw = np.eye(k) if not W else _null(GW)
        Hw = Zw.T @ Hr @ Zw
        gw = Zw.T @ g
        if Zw.shape[1]:
            lam, U = np.linalg.eigh(0.5 * (Hw + Hw.T))
            pos = lam > RANK_RTOL * h_norm
            gn = U[:, ~pos].T @ gw
            if np.linalg.norm(gn) > 1e-12 * max(1.0, np.linalg.norm(g)):
                p = -Zw @ (U[:, ~pos] @ gn)
                ray = True
            else:
                p = -Zw @ (U[:, pos] @ ((U[:, pos].T @ gw) / lam[pos]))
                ray = False
        else:
            p = np.zeros(k)
            ray = False

        if not ray and np.linalg.norm(p) <= 1e-12 * max(1.0, np.linalg.norm(v)):
            if W:
                mu, *_ = np.linalg.lstsq(GW.T, g, rcond=None)
            else:
                mu = np.zeros(0)
            if mu.size == 0 or mu.min() >= -KKT_TOL * 1e-2:
                status = OPTIMAL
                break
            W.pop(int(np.argmin(mu)))
            continue

        # ratio test against inactive free bounds
        slack = G[free] @ v - h[free]
        Gp = G[free] @ p
        step, block = (np.inf if ray else 1.0), None
        for j, (sl, gp) in enumerate(zip(slack, Gp)):
            pos_j = int(free[j])
            if pos_j in W or gp >= -1e-14:
                continue
            t = max(sl, 0.0) / -gp
            if t < step:
                step, block = t, pos_j
        if not np.isfinite(step):
            status = UNBOUNDED
            break
        v = v + step * p
        if block is not None:
            W.append(block)

    x = x_p + Z0 @ v
    z_idx = np.zeros(idx.size)
    if status == OPTIMAL and W:
        z_idx[W] = np.maximum(mu, 0.0)
    y, kkt = _kkt(qp, x, z_idx, (Vr, sv, Ur, Z0))
    return QpSolution(x, y, z_idx, kkt, status, it, qp.objective(x))


def _null(M: np.ndarray) -> np.ndarray:
    _, sv, Vt = np.linalg.svd(M, full_matrices=True)
    r = int(np.sum(sv > RANK_RTOL * max(sv[0], 1e-300)))
    return Vt[r:].T
