"""Membership residuals of clean and output-perturbed windows on the nine-bus archive.

Prints the residual quantiles for both populations and the separating
threshold the tests freeze (1e-4).  The threshold is accepted when it sits
well inside the gap: at least two decades above the largest clean residual
and below the smallest perturbed one.

    python3 scripts/calibrate_membership.py [--windows 500] [--noise 1e-2]
"""

from __future__ import annotations

import argparse

import numpy as np

from deepc_lds.behavior import check_membership, collect_data, minimum_data_length
from deepc_lds.grid import build_descriptor, generator_angle_selector, nine_bus
from deepc_lds.pencil import quasi_weierstrass
from deepc_lds.simulate import simulate

FROZEN_THRESHOLD = 1e-4
L_HORIZON = 20


def residuals(windows: int, noise: float, seed: int):
    grid = nine_bus()
    sys = build_descriptor(grid, generator_angle_selector(grid))
    qw = quasi_weierstrass(sys.E, sys.A)
    T = minimum_data_length(L_HORIZON, qw.q, qw.s, grid.g, grid.n)
    archive = collect_data(sys, qw, T, seed=1)
    rng = np.random.default_rng(seed)
    lo, hi = qw.q + qw.s + 2, L_HORIZON + qw.q + qw.s
    clean, noisy = [], []
    for _ in range(windows):
        depth = int(rng.integers(lo, hi))
        n = depth + 30
        traj = simulate(sys, qw, None, rng.uniform(-1, 1, (n, sys.nu)), rng.uniform(-1, 1, (n, sys.nw)))
        a = int(rng.integers(0, n - depth + 1))
        u, w, y = traj.u[a:a + depth], traj.w[a:a + depth], traj.y[a:a + depth]
        clean.append(check_membership(archive, (u, w, y)))
        noisy.append(check_membership(archive, (u, w, y + noise * rng.standard_normal(y.shape))))
    return np.array(clean), np.array(noisy)


def main(argv=None) -> bool:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--windows", type=int, default=500)
    ap.add_argument("--noise", type=float, default=1e-2)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args(argv)
    clean, noisy = residuals(args.windows, args.noise, args.seed)
    qs = [0.0, 0.01, 0.5, 0.99, 1.0]
    print("population,min,q01,median,q99,max")
    for name, r in (("clean", clean), ("perturbed", noisy)):
        print(name + "," + ",".join(f"{v:.3g}" for v in np.quantile(r, qs)))
    ok = clean.max() * 100 <= FROZEN_THRESHOLD < noisy.min()
    print(f"frozen threshold {FROZEN_THRESHOLD:g}: {'inside the gap' if ok else 'NOT separating'}")
    return ok


if __name__ == "__main__":
    main()
