"""Per-round accept curves as CSV tables and (optionally) PNG figures.

Figures are rendered with the object-oriented matplotlib API on an Agg
canvas, so nothing touches pyplot's global state and no display is needed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

__all__ = ["CurveTable", "write_csv", "render_figure", "geometric_checkpoints"]

_STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


@dataclass
class CurveTable:
    """Columns of per-round values sharing the round index ``k``."""

    k: np.ndarray
    columns: dict[str, np.ndarray] = field(default_factory=dict)
    title: str = ""
    index_name: str = "k"
    reference_lines: dict[str, float] = field(default_factory=dict)

    def add(self, name: str, values) -> None:
        values = np.asarray(values, dtype=float)
        if values.shape != self.k.shape:
            raise ValueError(f"column {name!r} has shape {values.shape}, expected {self.k.shape}")
        self.columns[name] = values


def geometric_checkpoints(rounds: int, max_points: int = 512) -> np.ndarray:
    """All rounds when few, else a roughly log-spaced subset including 0 and ``rounds``."""
    if rounds + 1 <= max_points:
        return np.arange(rounds + 1)
    pts = np.unique(np.round(np.geomspace(1, rounds, max_points - 1)).astype(np.int64))
    return np.concatenate([[0], pts])


def write_csv(table: CurveTable, path) -> None:
    names = list(table.columns)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([table.index_name, *names])
        for i, k in enumerate(table.k):
            w.writerow([int(k), *(repr(float(table.columns[n][i])) for n in names)])


def render_figure(table: CurveTable, path, logx: bool | None = None) -> None:
    """Line plot of every column against ``k`` with optional horizontal references."""
    import matplotlib as mpl
    from matplotlib.backends.backend_agg import FigureCanvasAgg
    from matplotlib.figure import Figure

    with mpl.rc_context(_STYLE):
        fig = Figure(figsize=(5.0, 3.2), dpi=150)
        FigureCanvasAgg(fig)
        ax = fig.add_subplot(1, 1, 1)
        for name, vals in table.columns.items():
            ax.plot(table.k, vals, label=name, lw=1.4)
        for name, y in table.reference_lines.items():
            ax.axhline(y, ls="--", lw=0.9, color="0.4", label=name)
        if logx is None:
            logx = table.k.size > 1 and table.k.max() > 1000
        if logx:
            ax.set_xscale("symlog", linthresh=1.0)
            ax.set_xlim(0, table.k.max())
        ax.set_xlabel("rounds k" if table.index_name == "k" else table.index_name)
        ax.set_ylabel("probability")
        ax.set_ylim(-0.02, 1.02)
        if table.title:
            ax.set_title(table.title)
        ax.legend(frameon=False, loc="best")
        fig.tight_layout()
        fig.savefig(path, metadata={"Software": None})
