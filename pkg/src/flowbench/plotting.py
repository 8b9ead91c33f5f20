"""Snapshot and score-table rendering for generated datasets and reports."""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import matplotlib.tri as mtri
import numpy as np

from . import dataset as ds


def plot_snapshots(data_root: str | Path, variant: str, index: int,
                   timesteps: list[int], out_dir: str | Path) -> tuple[list[Path], int]:
    """Contoured velocity-magnitude/temperature snapshots at the requested
    timesteps. Returns (written files, skipped-timestep count)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pkg = ds.read_datapoint(Path(data_root) / variant / ds.dp_dirname(index))
    tri = mtri.Triangulation(pkg.mesh.coords[:, 0], pkg.mesh.coords[:, 1],
                             pkg.mesh.triangles)
    written = []
    skipped = 0
    for t in timesteps:
        if not 0 <= t < pkg.fields.shape[0]:
            print(f"warning: timestep {t} beyond stored range "
                  f"0..{pkg.fields.shape[0] - 1}; skipped")
            skipped += 1
            continue
        speed = np.hypot(pkg.fields[t, :, 0], pkg.fields[t, :, 1])
        temp = pkg.fields[t, :, 3]
        fig, axes = plt.subplots(1, 2, figsize=(13, 4))
        for ax, values, label in ((axes[0], speed, "speed [m/s]"),
                                  (axes[1], temp, "temperature [K]")):
            spread = float(values.max() - values.min())
            levels = 14 if spread > 1e-12 else np.linspace(values.min() - 1e-9,
                                                           values.max() + 1e-9, 3)
            mappable = ax.tricontourf(tri, values, levels=levels, cmap="viridis")
            fig.colorbar(mappable, ax=ax, label=label)
            ax.set_aspect("equal")
            ax.set_title(f"{variant} dp{index} step {t}")
        path = out_dir / f"{variant}_dp{index}_t{t}.png"
        fig.savefig(path, dpi=110, bbox_inches="tight")
        plt.close(fig)
        written.append(path)
    return written, skipped


def plot_report(report_path: str | Path, out_dir: str | Path) -> list[Path]:
    """Bar tables of performance and aspect scores from a report JSON."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = json.loads(Path(report_path).read_text(encoding="utf-8"))
    written = []

    perf = payload.get("performance", {})
    rows = [(f"{origin}->{target}", report["ps_mean"])
            for origin, targets in perf.items()
            for target, report in targets.items()]
    if rows:
        fig, ax = plt.subplots(figsize=(max(6, 0.8 * len(rows)), 4))
        ax.bar([r[0] for r in rows], [r[1] for r in rows], color="#468")
        ax.set_ylabel("performance score")
        ax.tick_params(axis="x", rotation=60)
        fig.tight_layout()
        path = out_dir / "performance_scores.png"
        fig.savefig(path, dpi=110)
        plt.close(fig)
        written.append(path)

    surf = payload.get("surf_gs")
    if surf:
        fig, ax = plt.subplots(figsize=(6, 4))
        keys = ["mesh", "topology", "range", "dynamic", "average"]
        ax.bar(keys, [surf[k] for k in keys], color="#684")
        ax.set_ylabel("generalization score")
        fig.tight_layout()
        path = out_dir / "surf_scores.png"
        fig.savefig(path, dpi=110)
        plt.close(fig)
        written.append(path)
    return written
