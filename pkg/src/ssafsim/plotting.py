"""PNG figures for the CLI report path."""

from __future__ import annotations

from pathlib import Path

import matplotlib as mpl
import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

STYLE = {
    "figure.figsize": (6.0, 4.2),
    "figure.dpi": 100,
    "savefig.dpi": 150,
    "font.size": 10,
    "axes.labelsize": 10,
    "axes.titlesize": 10,
    "axes.grid": True,
    "axes.grid.which": "both",
    "grid.linewidth": 0.4,
    "grid.alpha": 0.5,
    "legend.fontsize": 8,
    "legend.frameon": False,
    "lines.linewidth": 1.2,
    "lines.markersize": 4,
    "xtick.direction": "in",
    "ytick.direction": "in",
}

MARKERS = "osd^v<>ph*"


def _save(fig: Figure, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    FigureCanvasAgg(fig)
    fig.savefig(path)
    return path


def plot_wer(curves: dict[str, tuple], path, outage: dict[str, tuple] | None = None, title: str = "") -> Path:
    """Semilog WER against Eb/N0.

    ``curves`` and ``outage`` map a label to ``(snr_db, values)``.  Zero
    values are not drawn (they have no place on a log axis).
    """
    with mpl.rc_context(STYLE):
        fig = Figure()
        ax = fig.add_subplot()
        for i, (label, (snr, wer)) in enumerate(curves.items()):
            snr, wer = np.asarray(snr, float), np.asarray(wer, float)
            keep = wer > 0
            ax.semilogy(snr[keep], wer[keep], marker=MARKERS[i % len(MARKERS)], label=label)
        for label, (snr, p) in (outage or {}).items():
            snr, p = np.asarray(snr, float), np.asarray(p, float)
            keep = p > 0
            ax.semilogy(snr[keep], p[keep], "k--", label=label)
        ax.set_xlabel("Eb/N0 [dB]")
        ax.set_ylabel("word error rate")
        if title:
            ax.set_title(title)
        ax.legend()
        fig.tight_layout()
        return _save(fig, path)


def plot_outage(points, path, label: str = "outage") -> Path:
    snr = [p.snr_db for p in points]
    with mpl.rc_context(STYLE):
        fig = Figure()
        ax = fig.add_subplot()
        p = np.array([pt.p_out for pt in points])
        lo = np.array([pt.ci_low for pt in points])
        hi = np.array([pt.ci_high for pt in points])
        keep = p > 0
        ax.semilogy(np.asarray(snr)[keep], p[keep], marker="o", label=label)
        ax.fill_between(np.asarray(snr)[keep], lo[keep], hi[keep], alpha=0.25, linewidth=0)
        ax.set_xlabel("Eb/N0 [dB]")
        ax.set_ylabel("outage probability")
        ax.legend()
        fig.tight_layout()
        return _save(fig, path)


def plot_max_rate(rates: dict[int, tuple], path) -> Path:
    """Largest full-diversity coding rate against the number of extra slots.

    ``rates`` maps beta to ``(alpha values, rates)``.
    """
    with mpl.rc_context(STYLE):
        fig = Figure()
        ax = fig.add_subplot()
        for i, (beta, (alpha, r)) in enumerate(sorted(rates.items())):
            ax.plot(alpha, [float(x) for x in r], marker=MARKERS[i % len(MARKERS)], label=f"beta = {beta}")
        ax.set_xlabel("alpha (extra slots)")
        ax.set_ylabel("max full-diversity Rc")
        ax.set_ylim(0, 1.05)
        ax.legend()
        fig.tight_layout()
        return _save(fig, path)
