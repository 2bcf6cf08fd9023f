#!/usr/bin/env python3
"""Plot the primal paths written by `dmd simulate`.

Usage: plot_trajectories.py OUT_DIR [--coords 1 2] [--save FILE]

Flow CSVs (`t,z_*,x_*,V,residual`) and discrete CSVs (`k,x_*,residual`)
are both accepted. Two coordinates give a phase portrait; a single
coordinate is plotted against time or iteration.
"""

import argparse
import csv
import json
from pathlib import Path

import matplotlib.pyplot as plt


def load(path):
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    clock = "t" if rows and "t" in rows[0] else "k"
    cols = {k: [float(r[k]) if r[k] != "" else float("nan") for r in rows] for k in rows[0]}
    return clock, cols


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("out_dir", type=Path)
    ap.add_argument("--coords", type=int, nargs="+", default=[1, 2])
    ap.add_argument("--save", type=Path)
    args = ap.parse_args()

    summary = json.loads((args.out_dir / "summary.json").read_text())
    fig, ax = plt.subplots(figsize=(6, 5))
    for run in summary["runs"]:
        clock, cols = load(args.out_dir / run["file"])
        label = f'{run["label"]} ({run["verdict"]["status"]})'
        if len(args.coords) >= 2:
            i, j = args.coords[:2]
            ax.plot(cols[f"x_{i}"], cols[f"x_{j}"], label=label, lw=1)
            ax.set_xlabel(f"x_{i}")
            ax.set_ylabel(f"x_{j}")
        else:
            i = args.coords[0]
            ax.plot(cols[clock], cols[f"x_{i}"], label=label, lw=1)
            ax.set_xlabel(clock)
            ax.set_ylabel(f"x_{i}")

    target = summary.get("target")
    if target and target["kind"] == "point" and len(args.coords) >= 2:
        i, j = args.coords[:2]
        ax.plot(target["x"][i - 1], target["x"][j - 1], "k*", ms=10, label="target")
    ax.set_title(summary["name"])
    ax.legend(fontsize=7)
    fig.tight_layout()
    if args.save:
        fig.savefig(args.save, dpi=150)
    else:
        plt.show()


if __name__ == "__main__":
    main()
