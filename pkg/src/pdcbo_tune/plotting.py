"""PNG figures for experiment records.

Uses the object-oriented matplotlib API with the Agg canvas, so nothing
touches pyplot's global state and sweep workers can render in parallel.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

RC = {"dpi": 120, "figsize": (7.0, 6.0)}


def _new_figure(nrows: int = 1, figsize=None):
    fig = Figure(figsize=figsize or RC["figsize"], dpi=RC["dpi"])
    FigureCanvasAgg(fig)
    axes = fig.subplots(nrows, 1, sharex=True, squeeze=False)[:, 0]
    return fig, axes


def _save(fig: Figure, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, format="png")
    return path


def plot_run(records, path, formulation: str = "discomfort_constrained", title: str | None = None) -> Path:
    """Running averages against the active threshold, plus the dual variable."""
    days = np.array([r.day for r in records])
    thr = np.array([r.active_threshold for r in records])
    avg_e = np.array([r.running_avg_energy for r in records])
    avg_d = np.array([r.running_avg_discomfort for r in records])
    lam = np.array([r.lam for r in records])

    fig, (ax_d, ax_e, ax_l) = _new_figure(3)
    ax_d.plot(days, avg_d, color="tab:red", label="running avg discomfort")
    ax_e.plot(days, avg_e, color="tab:blue", label="running avg energy")
    constrained = ax_e if formulation == "energy_constrained" else ax_d
    constrained.step(days, thr, where="post", color="k", ls="--", lw=1, label="threshold")
    ax_d.set_ylabel("K h / day")
    ax_e.set_ylabel("kWh / day")
    ax_l.plot(days, lam, color="tab:green")
    ax_l.set_ylabel("dual variable")
    ax_l.set_xlabel("day")
    for ax in (ax_d, ax_e):
        ax.legend(loc="upper right", fontsize=8)
    for ax in (ax_d, ax_e, ax_l):
        ax.grid(alpha=0.3)
    if title:
        ax_d.set_title(title)
    return _save(fig, path)


def plot_sweep(cells, path, formulation: str = "discomfort_constrained") -> Path:
    """Final averages per algorithm against the threshold.

    ``cells`` is an iterable of ``(algorithm, threshold, summary)`` where
    ``summary`` is the dict produced by ``harness.summarize``.
    """
    by_algo: dict[str, list] = {}
    for algo, thr, summary in cells:
        by_algo.setdefault(algo, []).append((thr, summary["final"]))

    fig, (ax_c, ax_o) = _new_figure(2, figsize=(6.0, 6.0))
    con_key, obj_key = "avg_discomfort_kh", "avg_energy_kwh"
    con_label, obj_label = "final avg discomfort (K h)", "final avg energy (kWh)"
    if formulation == "energy_constrained":
        con_key, obj_key = obj_key, con_key
        con_label, obj_label = obj_label, con_label
    all_thr = []
    for algo, rows in sorted(by_algo.items()):
        rows.sort(key=lambda r: r[0])
        t = [r[0] for r in rows]
        all_thr.extend(t)
        ax_c.plot(t, [r[1][con_key] for r in rows], marker="o", label=algo)
        ax_o.plot(t, [r[1][obj_key] for r in rows], marker="o", label=algo)
    lim = [min(all_thr), max(all_thr)]
    ax_c.plot(lim, lim, color="k", ls="--", lw=1, label="threshold")
    ax_c.set_ylabel(con_label)
    ax_o.set_ylabel(obj_label)
    ax_o.set_xlabel("threshold")
    for ax in (ax_c, ax_o):
        ax.grid(alpha=0.3)
        ax.legend(fontsize=8)
    return _save(fig, path)
