"""Line charts of metrics columns against environment frames."""

from __future__ import annotations

import os

from .trainer import read_metrics


class PlotError(ValueError):
    pass


def emit_plot(metrics_path, fields, out_dir=None) -> list[str]:
    """Write ``<field>.svg`` for each requested column; returns the paths."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if isinstance(fields, str):
        fields = [f.strip() for f in fields.split(",") if f.strip()]
    if not fields:
        raise PlotError("emit_plot: no fields requested")
    header, rows = read_metrics(metrics_path)
    if not header:
        raise PlotError(f"emit_plot: {metrics_path} has no header row")
    unknown = [f for f in fields if f not in header]
    if unknown:
        raise PlotError(f"emit_plot: unknown field(s) {unknown}; available: {', '.join(header)}")
    if not rows:
        raise PlotError(f"emit_plot: {metrics_path} holds no metrics rows to plot")
    out_dir = out_dir or os.path.dirname(os.path.abspath(metrics_path))
    os.makedirs(out_dir, exist_ok=True)
    frames = [r["env_frames"] for r in rows]
    paths = []
    for name in fields:
        fig, ax = plt.subplots(figsize=(6, 3.5))
        ax.plot(frames, [r[name] for r in rows], lw=1.2)
        ax.set_xlabel("environment frames")
        ax.set_ylabel(name)
        ax.grid(alpha=0.3)
        fig.tight_layout()
        path = os.path.join(out_dir, f"{name}.svg")
        # fixed metadata keeps the output reproducible
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        paths.append(path)
    return paths
