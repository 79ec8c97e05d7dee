"""Sweep the uniform droop gain on the default grid and schedule.

A gain is admissible when the linear closed loop has no eigenvalue outside
the unit circle (the uniform angle shift always stays at 1) and the
command never hits the zero-power clip.  Among admissible gains the one
with the smallest total settling time is picked, where settling means the
generator frequencies stay within the threshold of the value they reach at
the end of the segment (droop without retargeting keeps a frequency
offset, so settling to zero is not a usable criterion here).  Ties go to
the smaller gain.

    python3 scripts/tune_droop.py [--max-gain 5] [--step 0.1]
"""

from __future__ import annotations

import argparse
import logging

import numpy as np

from deepc_lds.droop import DroopConfig, run_droop
from deepc_lds.grid import build_descriptor, generator_angle_selector, nine_bus
from deepc_lds.metrics import SETTLING_THRESHOLD, settling_index
from deepc_lds.pencil import quasi_weierstrass
from deepc_lds.schedule import default_schedule_path, load_schedule
from deepc_lds.setpoint import compute_setpoint

STEPS = 400


def closed_loop_radius(sys, qw, g, gain):
    q = qw.q
    SB = (qw.S @ sys.B)[:q]
    Omega = qw.P[:g, :q]  # frequencies in terms of the dynamic coordinates
    A_cl = qw.A1 - gain * SB @ Omega
    return float(np.abs(np.linalg.eigvals(A_cl)).max())


def sweep(gains):
    grid = nine_bus()
    sys = build_descriptor(grid, generator_angle_selector(grid))
    qw = quasi_weierstrass(sys.E, sys.A)
    schedule = load_schedule(default_schedule_path(), grid)
    u0 = compute_setpoint(grid, sys, schedule.demand_at(0)).u_s
    bounds = [b for b in schedule.bounds(STEPS) if b[0] > 0]
    rows = []
    for k in gains:
        rad = closed_loop_radius(sys, qw, grid.g, k)
        res = run_droop(grid, sys, qw, DroopConfig.uniform(k, u0), schedule, STEPS)
        omega = res.trajectory.x[:, : grid.g]
        total = 0
        for a, b in bounds:
            dev = np.abs(omega[a:b] - omega[b - 1]).max(axis=1)
            st = settling_index(dev, SETTLING_THRESHOLD)
            total = None if st is None or total is None else total + st
        ok = rad <= 1.0 + 1e-9 and res.clip_events == 0 and total is not None
        rows.append((k, rad, res.clip_events, total, ok))
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--max-gain", type=float, default=5.0)
    ap.add_argument("--step", type=float, default=0.1)
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.ERROR)
    gains = np.round(np.arange(args.step, args.max_gain + 1e-9, args.step), 6)
    rows = sweep(gains)
    print("gain,spectral_radius,clip_events,total_settling,admissible")
    for k, rad, clips, total, ok in rows:
        print(f"{k:g},{rad:.6f},{clips},{'unsettled' if total is None else total},{ok}")
    best = min((r for r in rows if r[4]), key=lambda r: (r[3], r[0]), default=None)
    print("selected gain:", "none" if best is None else f"{best[0]:g}")
    return best[0] if best else None


if __name__ == "__main__":
    main()
