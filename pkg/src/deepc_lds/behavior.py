"""Hankel matrices, persistency of excitation and data-based trajectory checks."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from ._linalg import RANK_RTOL, frozen, numerical_rank
from .errors import ValidationError
from .grid import DescriptorSystem
from .pencil import QuasiWeierstrass
from .simulate import simulate

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class HankelBlock:
    depth: int
    data: np.ndarray

    @property
    def channels(self) -> int:
        return self.data.shape[0] // self.depth

    @property
    def columns(self) -> int:
        return self.data.shape[1]


def _as_signal(signal) -> np.ndarray:
    sig = np.asarray(signal, dtype=float)
    if sig.ndim == 1:
        sig = sig[:, None]
    if sig.ndim != 2:
        raise ValidationError("signal must be a (T,) or (T, k) array")
    return sig


def hankel(signal, depth: int) -> HankelBlock:
    """Block Hankel matrix; column ``j`` stacks ``signal[j], ..., signal[j+depth-1]``."""
    sig = _as_signal(signal)
    T, k = sig.shape
    if depth < 1:
        raise ValidationError(f"Hankel depth must be >= 1, got {depth}")
    if depth > T:
        raise ValidationError(f"Hankel depth {depth} exceeds signal length {T}")
    cols = T - depth + 1
    windows = np.lib.stride_tricks.sliding_window_view(sig, depth, axis=0)  # (cols, k, depth)
    H = windows.transpose(2, 1, 0).reshape(depth * k, cols)
    return HankelBlock(depth, frozen(H))


def is_persistently_exciting(signal, order: int, rtol: float = RANK_RTOL) -> bool:
    sig = _as_signal(signal)
    T, k = sig.shape
    if order < 1:
        raise ValidationError(f"order must be >= 1, got {order}")
    if order > T or T - order + 1 < k * order:
        return False
    return numerical_rank(hankel(sig, order).data, rtol) == k * order


def max_pe_order(signal, rtol: float = RANK_RTOL) -> int:
    """Largest order for which ``signal`` is persistently exciting (0 if none)."""
    sig = _as_signal(signal)
    T, k = sig.shape
    hi = (T + 1) // (k + 1)  # beyond this the Hankel matrix is too wide
    lo = 0
    # PE of order j implies PE of every lower order
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if is_persistently_exciting(sig, mid, rtol):
            lo = mid
        else:
            hi = mid - 1
    return lo


def required_pe_order(L: int, q: int, s: int) -> int:
    """Excitation order needed by the predictive controller's Hankel window."""
    return L + 2 * (q + s - 1)


def minimum_data_length(L: int, q: int, s: int, g: int, n: int) -> int:
    """Smallest data length for the controller with horizon ``L``.

    The controller uses windows of length ``L + q + s - 1``; the larger of
    the fundamental-lemma length bound for that window and the column count
    needed for full row rank at the required excitation order is returned.
    """
    for name, val in (("L", L), ("q", q), ("s", s), ("g", g)):
        if val < 1:
            raise ValidationError(f"{name} must be >= 1, got {val}")
    if n < 0:
        raise ValidationError(f"n must be >= 0, got {n}")
    width = g + n
    window = L + q + s - 1
    lemma = (width + 1) * (window + q + s) - 1
    rank_needed = (width + 1) * required_pe_order(L, q, s) - 1
    return max(lemma, rank_needed)


@dataclass(frozen=True)
class DataArchive:
    u_bar: np.ndarray
    w_bar: np.ndarray
    y_bar: np.ndarray
    seed: int
    amplitude: float
    pe_order_verified: int
    excite_w: bool = True

    def __post_init__(self):
        for name in ("u_bar", "w_bar", "y_bar"):
            object.__setattr__(self, name, frozen(np.atleast_2d(getattr(self, name))))
        if not (self.u_bar.shape[0] == self.w_bar.shape[0] == self.y_bar.shape[0]):
            raise ValidationError("archive signals must share one length")

    @property
    def T(self) -> int:
        return self.u_bar.shape[0]

    @property
    def stacked_input(self) -> np.ndarray:
        return np.hstack([self.u_bar, self.w_bar])

    def hankel_blocks(self, depth: int, s: int = 1) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Hankel matrices of u, w, y over ``[0, T-s]``."""
        end = self.T - s + 1
        if depth > end:
            raise ValidationError(f"Hankel depth {depth} too large for archive of length {self.T} (s={s})")
        return (
            hankel(self.u_bar[:end], depth).data,
            hankel(self.w_bar[:end], depth).data,
            hankel(self.y_bar[:end], depth).data,
        )

    def metadata(self) -> dict:
        return {
            "T": self.T,
            "seed": int(self.seed),
            "amplitude": float(self.amplitude),
            "pe_order_verified": int(self.pe_order_verified),
            "excite_w": bool(self.excite_w),
            "inputs": int(self.u_bar.shape[1]),
            "disturbances": int(self.w_bar.shape[1]),
            "outputs": int(self.y_bar.shape[1]),
        }


def excitation(T: int, nu: int, nw: int, seed: int, amplitude: float, excite_w: bool = True):
    """Seeded i.i.d. uniform excitation for inputs and disturbances."""
    rng = np.random.default_rng(seed)
    stacked = rng.uniform(-amplitude, amplitude, size=(T, nu + nw))
    u, w = stacked[:, :nu], stacked[:, nu:]
    if not excite_w:
        w = np.zeros_like(w)
    return u, w


def collect_data(
    sys: DescriptorSystem,
    qw: QuasiWeierstrass,
    T: int,
    seed: int,
    amplitude: float = 1.0,
    excite_w: bool = True,
) -> DataArchive:
    """One offline experiment from rest with random excitation."""
    if T < 1:
        raise ValidationError(f"T must be >= 1, got {T}")
    u, w = excitation(T, sys.nu, sys.nw, seed, amplitude, excite_w)
    traj = simulate(sys, qw, None, u, w)
    order = max_pe_order(np.hstack([u, w]))
    return DataArchive(u, w, traj.y, int(seed), float(amplitude), order, excite_w)


def check_membership(archive: DataArchive, candidate, s: int = 1) -> float:
    """Least-squares residual of the Hankel system for a candidate window.

    ``candidate`` is a triple ``(u, w, y)`` of arrays with one row per time
    step.  A residual at rounding level means the window is a trajectory of
    the data-generating system (given sufficiently exciting data).
    """
    u, w, y = (np.atleast_2d(np.asarray(c, dtype=float)) for c in candidate)
    depth = u.shape[0]
    if not (w.shape[0] == depth and y.shape[0] == depth):
        raise ValidationError("candidate signals must share one length")
    Hu, Hw, Hy = archive.hankel_blocks(depth, s)
    H = np.vstack([Hu, Hw, Hy])
    v = np.concatenate([u.ravel(), w.ravel(), y.ravel()])
    alpha, *_ = np.linalg.lstsq(H, v, rcond=None)
    return float(np.linalg.norm(H @ alpha - v))


# ---------------------------------------------------------------------------
# files


def write_archive(archive: DataArchive, csv_path: str | Path) -> Path:
    """Write ``t,u_*,w_*,y_*`` rows plus a ``.meta.yaml`` sidecar; return the sidecar path."""
    csv_path = Path(csv_path)
    g, n, m = archive.u_bar.shape[1], archive.w_bar.shape[1], archive.y_bar.shape[1]
    header = ["t"] + [f"u_{i + 1}" for i in range(g)] + [f"w_{i + 1}" for i in range(n)]
    header += [f"y_{i + 1}" for i in range(m)]
    data = np.hstack([archive.u_bar, archive.w_bar, archive.y_bar])
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for t, row in enumerate(data):
            writer.writerow([t] + [repr(float(v)) for v in row])
    meta_path = csv_path.with_suffix(".meta.yaml")
    meta_path.write_text(yaml.safe_dump(archive.metadata(), sort_keys=True))
    return meta_path


def read_archive(csv_path: str | Path) -> DataArchive:
    csv_path = Path(csv_path)
    meta_path = csv_path.with_suffix(".meta.yaml")
    try:
        meta = yaml.safe_load(meta_path.read_text())
        with open(csv_path, newline="") as fh:
            rows = list(csv.reader(fh))
    except FileNotFoundError as exc:
        raise ValidationError(f"archive file missing: {exc.filename}") from None
    header, body = rows[0], rows[1:]
    data = np.array([[float(v) for v in row[1:]] for row in body]).reshape(len(body), -1)
    cols = header[1:]
    u_idx = [i for i, c in enumerate(cols) if c.startswith("u_")]
    w_idx = [i for i, c in enumerate(cols) if c.startswith("w_")]
    y_idx = [i for i, c in enumerate(cols) if c.startswith("y_")]
    return DataArchive(
        data[:, u_idx],
        data[:, w_idx],
        data[:, y_idx],
        int(meta["seed"]),
        float(meta["amplitude"]),
        int(meta["pe_order_verified"]),
        bool(meta.get("excite_w", True)),
    )
