"""Network data and the Euler-discretized linear descriptor model.

State ordering is ``x = [omega_G; theta_G; theta_{N\\G}]``, inputs are the
generator mechanical powers ``u = p`` and the disturbance is the bus demand
``w = p^d``.  Generators always occupy the first ``g`` buses; the loader
reorders buses to enforce this and remembers the original labels.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml
from scipy.sparse.csgraph import connected_components

from ._linalg import frozen
from .errors import ValidationError

DEFAULT_TAU = 0.01

#: matrix conventions accepted by :func:`build_descriptor`
CONVENTIONS = ("physical", "literal")


@dataclass(frozen=True)
class GeneratorParams:
    inertia: float
    damping: float

    def __post_init__(self):
        if not np.isfinite(self.inertia) or self.inertia <= 0:
            raise ValidationError(f"generator inertia must be positive, got {self.inertia}")
        if not np.isfinite(self.damping) or self.damping <= 0:
            raise ValidationError(f"generator damping must be positive, got {self.damping}")


@dataclass(frozen=True)
class GridModel:
    """Lossless network with second-order generators on buses ``0..g-1``.

    Parameters
    ----------
    susceptance : (n, n) array
        Symmetric line susceptance matrix with zero diagonal.
    generators : sequence of GeneratorParams
        One entry per generator bus, in bus order.
    tau : float
        Forward-Euler step in seconds.
    bus_labels : tuple of int, optional
        Original (file) label of each internal bus.  Defaults to ``1..n``.
    """

    susceptance: np.ndarray
    generators: tuple[GeneratorParams, ...]
    tau: float = DEFAULT_TAU
    bus_labels: tuple[int, ...] = field(default=())

    def __post_init__(self):
        Bbar = np.asarray(self.susceptance, dtype=float)
        if Bbar.ndim != 2 or Bbar.shape[0] != Bbar.shape[1]:
            raise ValidationError(f"susceptance must be square, got shape {Bbar.shape}")
        n = Bbar.shape[0]
        if n == 0:
            raise ValidationError("susceptance: grid needs at least one bus")
        if not np.all(np.isfinite(Bbar)):
            raise ValidationError("susceptance contains non-finite entries")
        if not np.array_equal(Bbar, Bbar.T):
            i, j = np.argwhere(Bbar != Bbar.T)[0]
            raise ValidationError(
                f"susceptance is not symmetric: entry ({i + 1},{j + 1}) = {Bbar[i, j]} "
                f"but ({j + 1},{i + 1}) = {Bbar[j, i]}"
            )
        if np.any(np.diag(Bbar) != 0):
            raise ValidationError("susceptance must have a zero diagonal (no self-loops)")
        if np.any(Bbar < 0):
            raise ValidationError("susceptance must have nonnegative off-diagonal entries")
        gens = tuple(self.generators)
        if not 1 <= len(gens) <= n:
            raise ValidationError(f"generators: need 1 <= g <= n={n}, got g={len(gens)}")
        for gen in gens:
            if not isinstance(gen, GeneratorParams):
                raise ValidationError("generators must be GeneratorParams instances")
        if not (np.isfinite(self.tau) and self.tau > 0):
            raise ValidationError(f"tau must be positive, got {self.tau}")
        ncomp, _ = connected_components(Bbar != 0, directed=False)
        if ncomp != 1:
            raise ValidationError(f"susceptance: network graph is disconnected ({ncomp} components)")
        labels = tuple(self.bus_labels) if self.bus_labels else tuple(range(1, n + 1))
        if len(labels) != n:
            raise ValidationError("bus_labels length must equal the bus count")
        object.__setattr__(self, "susceptance", frozen(Bbar))
        object.__setattr__(self, "generators", gens)
        object.__setattr__(self, "tau", float(self.tau))
        object.__setattr__(self, "bus_labels", labels)

    @property
    def n(self) -> int:
        return self.susceptance.shape[0]

    @property
    def g(self) -> int:
        return len(self.generators)

    @property
    def inertia(self) -> np.ndarray:
        return np.array([gen.inertia for gen in self.generators])

    @property
    def damping(self) -> np.ndarray:
        return np.array([gen.damping for gen in self.generators])

    def internal_index(self, label: int) -> int:
        """Internal 0-based position of the bus with file label ``label``."""
        try:
            return self.bus_labels.index(label)
        except ValueError:
            raise ValidationError(f"unknown bus label {label}") from None


@dataclass(frozen=True)
class DescriptorSystem:
    """``E x(t+1) = A x(t) + B u(t) + F w(t)``, ``y(t) = C x(t)``."""

    E: np.ndarray
    A: np.ndarray
    B: np.ndarray
    F: np.ndarray
    C: np.ndarray
    n_bus: int | None = None
    n_gen: int | None = None

    def __post_init__(self):
        E, A = np.atleast_2d(self.E), np.atleast_2d(self.A)
        nx = E.shape[0]
        if E.shape != (nx, nx) or A.shape != (nx, nx):
            raise ValidationError(f"E and A must be square and equal-sized, got {E.shape}, {A.shape}")
        B = np.asarray(self.B, dtype=float).reshape(nx, -1)
        F = np.asarray(self.F, dtype=float).reshape(nx, -1)
        C = np.asarray(self.C, dtype=float)
        C = C.reshape(-1, nx) if C.size else np.zeros((0, nx))
        for name, val in (("E", E), ("A", A), ("B", B), ("F", F), ("C", C)):
            object.__setattr__(self, name, frozen(val))

    @property
    def nx(self) -> int:
        return self.E.shape[0]

    @property
    def nu(self) -> int:
        return self.B.shape[1]

    @property
    def nw(self) -> int:
        return self.F.shape[1]

    @property
    def ny(self) -> int:
        return self.C.shape[0]

    def residual(self, x_next, x, u, w) -> np.ndarray:
        return self.E @ x_next - self.A @ x - self.B @ u - self.F @ w

    def with_output(self, C) -> "DescriptorSystem":
        return DescriptorSystem(self.E, self.A, self.B, self.F, C, self.n_bus, self.n_gen)


def build_laplacian(grid: GridModel) -> np.ndarray:
    Bbar = grid.susceptance
    L = np.diag(Bbar.sum(axis=1)) - Bbar
    # exact symmetry: the row-sum diagonal and symmetric Bbar already give it
    return L


def generator_angle_selector(grid: GridModel) -> list[int]:
    """State indices of ``theta_G`` (0-based)."""
    return list(range(grid.g, 2 * grid.g))


def build_descriptor(
    grid: GridModel,
    output_selector: Sequence[int] | None = None,
    convention: str = "physical",
) -> DescriptorSystem:
    """Assemble ``(E, A, B, F, C)`` for ``grid``.

    ``output_selector`` lists 0-based state indices measured by ``C``;
    the default measures the generator angles.

    ``convention="physical"`` discretizes ``theta' = omega`` and scales the
    generator power balance by the inverse inertia, as in the swing
    equation.  ``convention="literal"`` reproduces the printed block
    formula verbatim (``theta(t+1) = theta(t) - tau*omega(t)``, inputs not
    scaled by inertia); its dynamic part is unstable for typical data and
    it is kept for pencil analysis only.
    """
    if convention not in CONVENTIONS:
        raise ValidationError(f"convention must be one of {CONVENTIONS}, got {convention!r}")
    n, g, tau = grid.n, grid.g, grid.tau
    nx = n + g
    sel = generator_angle_selector(grid) if output_selector is None else list(output_selector)
    for idx in sel:
        if not (isinstance(idx, (int, np.integer)) and 0 <= idx < nx):
            raise ValidationError(f"output selector index {idx} outside 0..{nx - 1}")

    Minv = np.diag(1.0 / grid.inertia)
    Dg = np.diag(grid.damping)
    L = build_laplacian(grid)

    E = np.zeros((nx, nx))
    E[:g, g:2 * g] = np.eye(g)
    E[g:2 * g, :g] = np.eye(g)

    mass = np.eye(nx)
    mass[g:2 * g, g:2 * g] = Minv
    struct = np.zeros((nx, nx))
    struct[:g, :g] = -np.eye(g) if convention == "physical" else np.eye(g)
    struct[g:2 * g, :g] = Dg
    struct[g:, g:] = L
    A = E - tau * mass @ struct

    in_gain = Minv if convention == "physical" else np.eye(g)
    B = np.zeros((nx, g))
    B[g:2 * g, :] = tau * in_gain
    F = np.zeros((nx, n))
    F[g:2 * g, :g] = -tau * in_gain
    F[2 * g:, g:] = -tau * np.eye(n - g)

    C = np.zeros((len(sel), nx))
    C[np.arange(len(sel)), sel] = 1.0
    return DescriptorSystem(E, A, B, F, C, n_bus=n, n_gen=g)


# ---------------------------------------------------------------------------
# config files


def _parse_lines(n: int, labels: dict[int, int], lines: list) -> np.ndarray:
    directed = np.zeros((n, n))
    for k, line in enumerate(lines):
        try:
            a, b, val = int(line["from"]), int(line["to"]), float(line["susceptance"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"lines[{k}]: expected keys from, to, susceptance ({exc})") from None
        if a not in labels or b not in labels:
            raise ValidationError(f"lines[{k}]: bus label out of range 1..{n}")
        if a == b:
            raise ValidationError(f"lines[{k}]: self-loop on bus {a}")
        directed[labels[a], labels[b]] += val
    both = (directed != 0) & (directed.T != 0)
    # a pair listed in both directions must agree and counts once
    Bbar = np.where(both, directed, directed + directed.T)
    return Bbar


def grid_from_dict(doc: dict) -> GridModel:
    """Build a :class:`GridModel` from a parsed config document."""
    if not isinstance(doc, dict):
        raise ValidationError("grid config must be a mapping")
    try:
        n = int(doc["buses"])
    except (KeyError, TypeError, ValueError):
        raise ValidationError("buses: required integer bus count") from None
    if n < 1:
        raise ValidationError("buses: must be >= 1")
    gens_raw = doc.get("generators")
    if not isinstance(gens_raw, list) or not gens_raw:
        raise ValidationError("generators: required non-empty list")
    gen_labels, gens = [], []
    for k, item in enumerate(gens_raw):
        try:
            label = int(item["index"])
            params = GeneratorParams(float(item["inertia"]), float(item["damping"]))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"generators[{k}]: expected keys index, inertia, damping ({exc})") from None
        except ValidationError as exc:
            raise ValidationError(f"generators[{k}]: {exc}") from None
        if not 1 <= label <= n:
            raise ValidationError(f"generators[{k}].index: {label} outside 1..{n}")
        if label in gen_labels:
            raise ValidationError(f"generators[{k}].index: duplicate bus {label}")
        gen_labels.append(label)
        gens.append(params)
    order = gen_labels + [b for b in range(1, n + 1) if b not in gen_labels]
    pos = {label: i for i, label in enumerate(order)}

    if "susceptance" in doc:
        raw = np.asarray(doc["susceptance"], dtype=float)
        if raw.shape != (n, n):
            raise ValidationError(f"susceptance: expected {n}x{n} matrix, got {raw.shape}")
        perm = [label - 1 for label in order]
        Bbar = raw[np.ix_(perm, perm)]
    else:
        lines = doc.get("lines")
        if not isinstance(lines, list):
            raise ValidationError("lines: required list (or a dense 'susceptance' matrix)")
        Bbar = _parse_lines(n, pos, lines)
    tau = float(doc.get("tau", DEFAULT_TAU))
    return GridModel(Bbar, tuple(gens), tau=tau, bus_labels=tuple(order))


def load_grid(path: str | Path) -> GridModel:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except FileNotFoundError:
        raise ValidationError(f"grid config not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ValidationError(f"grid config parse error in {path}: {exc}") from None
    return grid_from_dict(doc)


def grid_to_dict(grid: GridModel) -> dict:
    """Inverse of :func:`grid_from_dict` (line-list form, original labels)."""
    lab = grid.bus_labels
    lines = [
        {"from": lab[i], "to": lab[j], "susceptance": float(grid.susceptance[i, j])}
        for i in range(grid.n)
        for j in range(i + 1, grid.n)
        if grid.susceptance[i, j] != 0
    ]
    gens = [
        {"index": lab[i], "inertia": gen.inertia, "damping": gen.damping}
        for i, gen in enumerate(grid.generators)
    ]
    return {"buses": grid.n, "tau": grid.tau, "generators": gens, "lines": lines}


def default_grid_path() -> Path:
    return Path(__file__).parent / "data" / "nine_bus.yaml"


def nine_bus(tau: float | None = None) -> GridModel:
    """The shipped nine-bus case."""
    grid = load_grid(default_grid_path())
    if tau is not None:
        grid = GridModel(grid.susceptance, grid.generators, tau, grid.bus_labels)
    return grid
