#!/usr/bin/env python3
"""
Companion plots for sweep CSVs: |Im E| extrema, IPR extrema, eta, rho, entropy,
gap ratio and winding numbers against the first axis, or a heat map for 2D sweeps.

Usage:
    python scripts/plot_sweep.py results/model1_J_cut.csv --axis J
    python scripts/plot_sweep.py results/model1_J_phi_map.csv --axis J --axis2 phi --column eta
"""

import argparse
import logging
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.exports import read_csv

logger = logging.getLogger(__name__)

PANELS = [
    ("e_imag_max", "e_imag_min", r"$\log_{10}|{\rm Im}\,E|$", True),
    ("ipr_max", "ipr_min", "IPR", False),
    ("eta", None, r"$\eta$", False),
    ("rho", None, r"$\rho$", False),
    ("S", None, "S", False),
    ("g_mean", None, r"$\bar g$", False),
    ("w1", "w2", r"$w_1, w_2$", False),
]


def plot_cut(frame, axis: str, out: Path) -> Path:
    panels = [p for p in PANELS if p[0] in frame and frame[p[0]].notna().any()]
    fig, axes = plt.subplots(len(panels), 1, figsize=(6, 1.8 * len(panels)), sharex=True)
    axes = np.atleast_1d(axes)
    for ax, (first, second, label, log) in zip(axes, panels):
        for column in (first, second):
            if column is None or column not in frame:
                continue
            values = frame[column].astype(float)
            if log:
                floor = frame["tol_imag"].astype(float)
                values = np.log10(np.maximum(values, floor))
            ax.plot(frame[axis], values, ".-", label=column)
        ax.set_ylabel(label)
        if second:
            ax.legend(fontsize="small")
    axes[-1].set_xlabel(axis)
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def plot_map(frame, axis: str, axis2: str, column: str, out: Path) -> Path:
    table = frame.pivot(index=axis2, columns=axis, values=column)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    mesh = ax.pcolormesh(table.columns, table.index, table.to_numpy(dtype=float), shading="nearest")
    fig.colorbar(mesh, ax=ax, label=column)
    ax.set_xlabel(axis)
    ax.set_ylabel(axis2)
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def main():
    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    parser = argparse.ArgumentParser(description="Plot a sweep CSV")
    parser.add_argument("csv")
    parser.add_argument("--axis", required=True)
    parser.add_argument("--axis2")
    parser.add_argument("--column", default="eta")
    parser.add_argument("--out")
    args = parser.parse_args()

    frame = read_csv(Path(args.csv))
    frame = frame[frame["status"] != "error"]
    out = Path(args.out) if args.out else Path(args.csv).with_suffix(".png")
    if args.axis2:
        plot_map(frame, args.axis, args.axis2, args.column, out)
    else:
        plot_cut(frame.sort_values(args.axis), args.axis, out)
    logger.info(f"Saved {out}")


if __name__ == "__main__":
    main()
