"""Plot generator frequencies and inputs from a ``compare`` output directory.

Optional helper; needs matplotlib (``pip install .[plot]``).  The CSV files
are the contract, this only renders them.

    python3 scripts/plot_compare.py results/ [--save compare.png]
"""

from __future__ import annotations

import argparse
import csv
from pathlib import Path

import numpy as np


def read_columns(path: Path, prefix: str) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    cols = [i for i, c in enumerate(header) if c.startswith(prefix)]
    return body[:, 0], body[:, cols]


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("results", type=Path, help="directory written by 'deepc-lds compare'")
    ap.add_argument("--generators", type=int, default=3, help="number of generators (leading x columns)")
    ap.add_argument("--save", type=Path, help="write the figure instead of showing it")
    args = ap.parse_args(argv)

    import matplotlib

    if args.save:
        matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(2, 2, sharex=True, figsize=(10, 6))
    for col, name in enumerate(("deepc", "droop")):
        path = args.results / f"{name}_trajectory.csv"
        t, x = read_columns(path, "x_")
        _, u = read_columns(path, "u_")
        axes[0, col].plot(t, x[:, : args.generators])
        axes[0, col].set_title(f"{name}: generator frequency deviation")
        axes[1, col].plot(t, u)
        axes[1, col].set_title(f"{name}: mechanical power")
        axes[1, col].set_xlabel("step")
    fig.tight_layout()
    if args.save:
        fig.savefig(args.save, dpi=120)
    else:
        plt.show()


if __name__ == "__main__":
    main()
