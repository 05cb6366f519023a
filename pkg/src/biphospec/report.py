"""Heatmap rendering for sweep results.

Renders one PNG per Fisher quantity over the (T_qent, sigma_p) grid next to
the delimited output.  Uses the Agg backend so it works headless.
"""

from __future__ import annotations

import csv
import os
from typing import List, Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

HEATMAP_METRICS = ["S_entropy", "Q_biph", "Q_total", "C_locc_identity",
                   "Q_reduced", "kappa", "varsigma"]


def _read_csv(path: str):
    columns, rows = None, []
    with open(path) as f:
        for line in f:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            if columns is None:
                columns = line.split(",")
                continue
            rows.append({c: v for c, v in zip(columns, line.split(","))})
    if columns is None:
        raise ValueError(f"no table found in {path}")
    return columns, rows


def render_rows(columns: List[str], rows: List[dict], outdir: Optional[str],
                base: str) -> List[str]:
    """Render what the row schema supports; returns the written paths."""
    outdir = outdir or os.path.dirname(os.path.abspath(base)) or "."
    os.makedirs(outdir, exist_ok=True)
    stem = os.path.splitext(os.path.basename(base))[0]
    paths: List[str] = []
    if "T_qent" in columns and "sigma_p" in columns:
        tq = np.array(sorted({float(r["T_qent"]) for r in rows}))
        sp = np.array(sorted({float(r["sigma_p"]) for r in rows}))
        for metric in HEATMAP_METRICS:
            if metric not in columns:
                continue
            Z = np.full((len(sp), len(tq)), np.nan)
            for r in rows:
                i = np.searchsorted(sp, float(r["sigma_p"]))
                j = np.searchsorted(tq, float(r["T_qent"]))
                Z[i, j] = float(r[metric])
            fig, ax = plt.subplots(figsize=(5.4, 4.2))
            mesh = ax.pcolormesh(tq, sp, Z, shading="nearest", cmap="viridis")
            fig.colorbar(mesh, ax=ax, label=metric)
            ax.set_xlabel("T_qent (ps)")
            ax.set_ylabel("sigma_p")
            ax.set_title(metric)
            fig.tight_layout()
            path = os.path.join(outdir, f"{stem}_{metric}.png")
            fig.savefig(path, dpi=150)
            plt.close(fig)
            paths.append(path)
    else:
        # 1-D sweeps (tau or angle on the x axis)
        xcol = "tau" if "tau" in columns else ("angle" if "angle" in columns else columns[0])
        x = np.array([float(r[xcol]) for r in rows])
        for metric in columns:
            if metric == xcol:
                continue
            try:
                y = np.array([float(r[metric]) for r in rows])
            except (TypeError, ValueError):
                continue
            fig, ax = plt.subplots(figsize=(5.4, 3.6))
            ax.plot(x, y, "o-")
            ax.set_xlabel(xcol)
            ax.set_ylabel(metric)
            fig.tight_layout()
            path = os.path.join(outdir, f"{stem}_{metric}.png")
            fig.savefig(path, dpi=150)
            plt.close(fig)
            paths.append(path)
    return paths


def render_from_csv(path: str, outdir: Optional[str] = None) -> List[str]:
    columns, rows = _read_csv(path)
    return render_rows(columns, rows, outdir, base=path)
