"""Analysis of the matrix pencil ``(E, A)``.

The quasi-Weierstrass form is computed from the Wong sequences

    V_0 = R^n,  V_{k+1} = A^{-1}(E V_k)
    W_0 = {0},  W_{k+1} = E^{-1}(A W_k)

whose limits ``V*`` and ``W*`` are complementary exactly when the pencil is
regular.  With ``P = [V*, W*]`` and ``S = [E V*, A W*]^{-1}`` one gets
``S E P = diag(I_q, N)`` and ``S A P = diag(A1, I)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._linalg import RANK_RTOL, frozen, null_space, orth, rank_with_gap
from .errors import NumericalError, ValidationError
from .grid import GridModel, build_descriptor, build_laplacian

REGULARITY_SAMPLES = 8
REGULARITY_SEED = 20220901
DET_FLOOR = 1e-12
MAX_DOUBLINGS = 60


@dataclass(frozen=True)
class RankDecision:
    label: str
    rank: int
    smallest_kept: float
    largest_dropped: float

    @property
    def gap(self) -> float:
        if self.largest_dropped == 0.0:
            return np.inf
        return self.smallest_kept / self.largest_dropped


@dataclass(frozen=True)
class QuasiWeierstrass:
    S: np.ndarray
    P: np.ndarray
    A1: np.ndarray
    N: np.ndarray
    q: int
    s: int
    decisions: tuple[RankDecision, ...] = field(default=(), repr=False)

    @property
    def n(self) -> int:
        return self.S.shape[0]

    def residuals(self, E, A) -> tuple[float, float]:
        """Relative reconstruction errors of ``S E P`` and ``S A P``."""
        E, A = np.asarray(E), np.asarray(A)
        q, r = self.q, self.n - self.q
        target_E = np.block([[np.eye(q), np.zeros((q, r))], [np.zeros((r, q)), self.N]])
        target_A = np.block([[self.A1, np.zeros((q, r))], [np.zeros((r, q)), np.eye(r)]])
        rE = np.linalg.norm(self.S @ E @ self.P - target_E) / max(np.linalg.norm(E), 1.0)
        rA = np.linalg.norm(self.S @ A @ self.P - target_A) / max(np.linalg.norm(A), 1.0)
        return float(rE), float(rA)


@dataclass(frozen=True)
class PencilReport:
    regular: bool
    witness_lambda: complex | None
    q: int | None
    s: int | None
    r_controllable: bool | None
    r_observable: bool | None
    finite_eigenvalues: tuple[complex, ...]
    decisions: tuple[RankDecision, ...] = ()

    def to_dict(self) -> dict:
        def cplx(z):
            z = complex(z)
            return {"re": z.real, "im": z.imag}

        return {
            "regular": self.regular,
            "witness_lambda": None if self.witness_lambda is None else cplx(self.witness_lambda),
            "q": self.q,
            "s": self.s,
            "r_controllable": self.r_controllable,
            "r_observable": self.r_observable,
            "finite_eigenvalues": [cplx(z) for z in self.finite_eigenvalues],
            "rank_decisions": [
                {
                    "label": d.label,
                    "rank": d.rank,
                    "smallest_kept": d.smallest_kept,
                    "largest_dropped": d.largest_dropped,
                }
                for d in self.decisions
            ],
        }


def _check_square_pair(E, A) -> tuple[np.ndarray, np.ndarray]:
    E = np.atleast_2d(np.asarray(E, dtype=float))
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if E.ndim != 2 or E.shape[0] != E.shape[1] or E.shape != A.shape:
        raise ValidationError(f"E and A must be square with equal size, got {E.shape} and {A.shape}")
    return E, A


def det_is_nonzero(M: np.ndarray, floor: float = DET_FLOOR) -> tuple[bool, float]:
    """Decide ``det(M) != 0`` relative to the Hadamard bound of ``M``.

    Returns the decision and ``log|det M| - log(hadamard bound)``, which is
    at most 0.  Working with logs keeps large pencils from overflowing.
    """
    col = np.linalg.norm(M, axis=0)
    if np.any(col == 0):
        return False, -np.inf
    sign, logdet = np.linalg.slogdet(M)
    if sign == 0:
        return False, -np.inf
    rel = float(logdet - np.sum(np.log(col)))
    return rel > np.log(floor), rel


def is_regular(E, A, samples: int = REGULARITY_SAMPLES, seed: int = REGULARITY_SEED) -> tuple[bool, complex | None]:
    """Randomized regularity test.

    ``det(lambda E - A)`` is a polynomial in lambda; unless it vanishes
    identically, random samples on a circle hit a root with probability
    zero.  Returns ``(regular, witness)``.
    """
    E, A = _check_square_pair(E, A)
    nE = np.linalg.norm(E, 2)
    nA = np.linalg.norm(A, 2)
    radius = 1.0 + (nA / nE if nE > 0 else nA)
    rng = np.random.default_rng(seed)
    angles = rng.uniform(0.0, 2 * np.pi, size=samples)
    for phi in angles:
        lam = radius * np.exp(1j * phi)
        ok, _ = det_is_nonzero(lam * E - A)
        if ok:
            return True, complex(lam)
    return False, None


def shifted_laplacian(grid: GridModel, mu: float, convention: str = "physical") -> np.ndarray:
    """Schur complement ``K(mu)`` with ``det(lambda E - A) ∝ det K(mu)``.

    Here ``lambda = 1 + tau*mu``.  Eliminating the frequency block leaves the
    Laplacian with a generator-diagonal shift ``mu^2 M + mu D``, added for the
    physical convention and subtracted for the literal one.
    """
    L = build_laplacian(grid)
    g = grid.g
    shift = np.zeros_like(L)
    shift[:g, :g] = np.diag(mu**2 * grid.inertia + mu * grid.damping)
    return L + shift if convention == "physical" else L - shift


def is_irreducibly_dominant(K: np.ndarray) -> bool:
    """Weak row diagonal dominance, strict in one row, irreducible pattern."""
    from scipy.sparse.csgraph import connected_components

    diag = np.abs(np.diag(K))
    off = np.abs(K).sum(axis=1) - diag
    if np.any(diag < off):
        return False
    if not np.any(diag > off):
        return False
    pattern = (K != 0) | (K.T != 0)
    ncomp, _ = connected_components(pattern, directed=False)
    return ncomp == 1


def regularity_witness_by_dominance(grid: GridModel, convention: str = "physical") -> complex:
    """Constructive regularity witness for a grid pencil.

    Doubles ``lam0`` from 1 until ``shifted_laplacian(grid, lam0)`` is
    irreducibly diagonally dominant, hence invertible, and returns
    ``lambda = 1 + tau*lam0``.
    """
    sys = build_descriptor(grid, convention=convention)
    lam0 = 1.0
    for _ in range(MAX_DOUBLINGS):
        if is_irreducibly_dominant(shifted_laplacian(grid, lam0, convention)):
            lam = 1.0 + grid.tau * lam0
            ok, rel = det_is_nonzero(lam * sys.E - sys.A)
            if not ok:
                raise NumericalError(
                    f"dominance holds at lam0={lam0} but det(lambda E - A) is numerically zero (rel {rel:.3g})"
                )
            return complex(lam)
        lam0 *= 2.0
    raise NumericalError(f"diagonal dominance not reached after {MAX_DOUBLINGS} doublings; check grid data")


def _decide(label: str, M: np.ndarray, rtol: float, decisions: list, scale: float | None = None) -> int:
    r, kept, dropped = rank_with_gap(M, rtol, scale)
    decisions.append(RankDecision(label, r, kept, dropped))
    return r


def quasi_weierstrass(E, A, rtol: float = RANK_RTOL) -> QuasiWeierstrass:
    E, A = _check_square_pair(E, A)
    n = E.shape[0]
    scale_E = max(np.linalg.norm(E, 2), 1e-300)
    scale_A = max(np.linalg.norm(A, 2), 1e-300)
    decisions: list[RankDecision] = []
    eye = np.eye(n)

    V = eye
    for k in range(n + 1):
        U = orth(E @ V, rtol, scale=scale_E)
        M = (eye - U @ U.T) @ A
        V_next = null_space(M, rtol, scale=scale_A)
        _decide(f"V{k + 1}", M, rtol, decisions, scale_A)
        if V_next.shape[1] == V.shape[1]:
            V = V_next
            break
        V = V_next
    else:  # pragma: no cover - dimensions strictly decrease
        raise NumericalError("Wong V-sequence failed to stabilize")

    W = np.zeros((n, 0))
    s = 0
    for k in range(n + 1):
        U = orth(A @ W, rtol, scale=scale_A) if W.shape[1] else np.zeros((n, 0))
        M = (eye - U @ U.T) @ E
        W_next = null_space(M, rtol, scale=scale_E)
        _decide(f"W{k + 1}", M, rtol, decisions, scale_E)
        if W_next.shape[1] == W.shape[1]:
            break
        W = W_next
        s = k + 1
    else:  # pragma: no cover
        raise NumericalError("Wong W-sequence failed to stabilize")

    q = V.shape[1]
    P = np.hstack([V, W])
    rP = _decide("V*+W*", P, rtol, decisions)
    if P.shape[1] != n or rP != n:
        raise ValidationError(
            f"pencil is not regular: Wong limits have dimensions {q} + {W.shape[1]} "
            f"(rank {rP}) in R^{n}"
        )
    Sinv = np.hstack([E @ V, A @ W])
    rS = _decide("[EV*, AW*]", Sinv, rtol, decisions)
    if rS != n:
        raise ValidationError("pencil is not regular: [E V*, A W*] is singular")
    S = np.linalg.inv(Sinv)
    A1 = (S @ A @ V)[:q]
    N = (S @ E @ W)[q:]
    s = max(s, 1)  # empty nilpotent block: s = 1 by convention
    return QuasiWeierstrass(frozen(S), frozen(P), frozen(A1), frozen(N), q, s, tuple(decisions))


def finite_spectrum(E, A, qw: QuasiWeierstrass | None = None) -> np.ndarray:
    """Finite generalized eigenvalues, i.e. the spectrum of ``A1``."""
    if qw is None:
        qw = quasi_weierstrass(E, A)
    if qw.q == 0:
        return np.zeros(0, dtype=complex)
    return np.linalg.eigvals(qw.A1).astype(complex)


def _full_rank_on_spectrum(blocks_at, nx: int, spectrum, rtol: float) -> bool:
    for lam in spectrum:
        M = blocks_at(lam)
        r, _, _ = rank_with_gap(M, rtol)
        if r < nx:
            return False
    return True


def is_r_controllable(E, A, B, F=None, rtol: float = RANK_RTOL, qw: QuasiWeierstrass | None = None) -> bool:
    """PBH-type test ``rank [lambda E - A, B, F] = n`` for all complex lambda.

    Off the finite spectrum ``lambda E - A`` alone is invertible, so only the
    eigenvalues of ``A1`` need checking.
    """
    E, A = _check_square_pair(E, A)
    n = E.shape[0]
    BF = [np.asarray(B, dtype=float).reshape(n, -1)]
    if F is not None:
        BF.append(np.asarray(F, dtype=float).reshape(n, -1))
    inputs = np.hstack(BF).astype(complex)
    spectrum = finite_spectrum(E, A, qw)
    return _full_rank_on_spectrum(lambda lam: np.hstack([lam * E - A, inputs]), n, spectrum, rtol)


def is_r_observable(E, A, C, rtol: float = RANK_RTOL, qw: QuasiWeierstrass | None = None) -> bool:
    E, A = _check_square_pair(E, A)
    n = E.shape[0]
    C = np.asarray(C, dtype=float).reshape(-1, n).astype(complex)
    spectrum = finite_spectrum(E, A, qw)
    return _full_rank_on_spectrum(lambda lam: np.vstack([lam * E - A, C]), n, spectrum, rtol)


def analyze(E, A, B, F, C, rtol: float = RANK_RTOL) -> PencilReport:
    """Full pencil report; non-regular pencils get a report with ``regular=False``."""
    regular, witness = is_regular(E, A)
    if not regular:
        return PencilReport(False, None, None, None, None, None, ())
    qw = quasi_weierstrass(E, A, rtol)
    eig = finite_spectrum(E, A, qw)
    return PencilReport(
        regular=True,
        witness_lambda=witness,
        q=qw.q,
        s=qw.s,
        r_controllable=is_r_controllable(E, A, B, F, rtol, qw),
        r_observable=is_r_observable(E, A, C, rtol, qw),
        finite_eigenvalues=tuple(complex(z) for z in eig),
        decisions=qw.decisions,
    )


def analyze_system(sys, rtol: float = RANK_RTOL) -> PencilReport:
    return analyze(sys.E, sys.A, sys.B, sys.F, sys.C, rtol)
