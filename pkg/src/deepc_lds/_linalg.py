"""Shared rank and subspace helpers.

Every rank decision in the package goes through :func:`numerical_rank` so
that q, s, PE orders and QP nullspaces are all judged by one threshold.
"""

from __future__ import annotations

import numpy as np

#: relative singular-value threshold used library-wide
RANK_RTOL = 1e-10


def _threshold(sv: np.ndarray, rtol: float) -> float:
    if sv.size == 0:
        return 0.0
    return rtol * sv[0]


def numerical_rank(M: np.ndarray, rtol: float = RANK_RTOL) -> int:
    M = np.atleast_2d(np.asarray(M))
    if M.size == 0:
        return 0
    sv = np.linalg.svd(M, compute_uv=False)
    if sv[0] == 0.0:
        return 0
    return int(np.sum(sv > _threshold(sv, rtol)))


def rank_with_gap(M: np.ndarray, rtol: float = RANK_RTOL, scale: float | None = None) -> tuple[int, float, float]:
    """Return ``(rank, smallest kept singular value, largest dropped one)``.

    The last two quantify how clear the rank decision was; a dropped value
    of 0.0 means nothing was dropped.
    """
    M = np.atleast_2d(np.asarray(M))
    if M.size == 0:
        return 0, np.inf, 0.0
    sv = np.linalg.svd(M, compute_uv=False)
    ref = sv[0] if scale is None else scale
    if ref == 0.0:
        return 0, np.inf, 0.0
    r = int(np.sum(sv > rtol * ref))
    kept = float(sv[r - 1]) if r > 0 else np.inf
    dropped = float(sv[r]) if r < sv.size else 0.0
    return r, kept, dropped


def orth(M: np.ndarray, rtol: float = RANK_RTOL, scale: float | None = None) -> np.ndarray:
    """Orthonormal basis of the column space of ``M``.

    ``scale`` overrides the reference magnitude for the threshold, which
    matters when ``M`` is a product whose own largest singular value is
    tiny compared to the matrices it came from.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[1] == 0:
        return np.zeros((M.shape[0], 0))
    U, sv, _ = np.linalg.svd(M, full_matrices=False)
    ref = sv[0] if scale is None else scale
    if sv.size == 0 or ref == 0.0:
        return np.zeros((M.shape[0], 0))
    r = int(np.sum(sv > rtol * ref))
    return U[:, :r]


def null_space(M: np.ndarray, rtol: float = RANK_RTOL, scale: float | None = None) -> np.ndarray:
    """Orthonormal basis of ``ker M``."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    ncol = M.shape[1]
    if M.shape[0] == 0:
        return np.eye(ncol)
    _, sv, Vt = np.linalg.svd(M, full_matrices=True)
    ref = sv[0] if scale is None else scale
    if sv.size == 0 or ref == 0.0:
        return np.eye(ncol)
    r = int(np.sum(sv > rtol * ref))
    return Vt[r:].T.conj()


def frozen(a: np.ndarray) -> np.ndarray:
    """Copy of ``a`` as a read-only float array."""
    out = np.array(a, dtype=float, copy=True)
    out.setflags(write=False)
    return out
