"""Deterministic rank-histogram rendering.

Figures are built on :class:`matplotlib.figure.Figure` directly (no pyplot,
no backend state) and saved as SVG with a fixed hash salt and no date
metadata, so identical inputs produce byte-identical files across runs and
machines with the same matplotlib/font stack.
"""

from __future__ import annotations

import io
from pathlib import Path

import matplotlib as mpl
import numpy as np
from matplotlib.figure import Figure

from .ranking import RankDistribution
from .report import write_bytes_atomic

SVG_HASHSALT = "srd-rank-histogram"

_PRIMARY_COLOR = "#20639b"
_OVERLAY_COLOR = "#3caea3"


class PlotError(ValueError):
    """Invalid plotting request."""


def render_rank_histogram_svg(
    dist: RankDistribution,
    overlay: RankDistribution | None = None,
    *,
    chance_line: bool = True,
    labels: tuple[str, str] = ("primary", "overlay"),
    model_curve: np.ndarray | None = None,
    title: str | None = None,
) -> bytes:
    """Render a rank histogram (optionally two, superimposed) to SVG bytes.

    ``model_curve`` draws a smooth pmf (one probability per rank) as a line
    over the bars, e.g. a fitted beta-binomial gamma.
    """
    N = dist.n_references
    if overlay is not None and overlay.n_references != N:
        raise PlotError(
            f"overlay covers {overlay.n_references} references, primary covers {N}"
        )
    if model_curve is not None:
        model_curve = np.asarray(model_curve, dtype=np.float64)
        if model_curve.shape != (N,):
            raise PlotError("model_curve needs one probability per rank")

    ranks = np.arange(1, N + 1)
    fig = Figure(figsize=(7.0, 3.4), dpi=100)
    ax = fig.add_subplot()
    ax.bar(ranks, dist.probabilities, width=0.9, color=_PRIMARY_COLOR, label=labels[0])
    if overlay is not None:
        ax.bar(
            ranks,
            overlay.probabilities,
            width=0.9,
            color=_OVERLAY_COLOR,
            alpha=0.6,
            label=labels[1],
        )
    if model_curve is not None:
        ax.plot(ranks, model_curve, color="#ed553b", lw=1.6, label="model")
    if chance_line:
        ax.axhline(1.0 / N, color="black", ls="--", lw=0.9, label="chance (1/N)")
    ax.set_xlabel("rank of matching reference")
    ax.set_ylabel("probability")
    ax.set_xlim(0.4, N + 0.6)
    ax.set_ylim(bottom=0.0)
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    fig.tight_layout()

    buffer = io.BytesIO()
    with mpl.rc_context({"svg.hashsalt": SVG_HASHSALT}):
        fig.savefig(buffer, format="svg", metadata={"Date": None})
    return buffer.getvalue()


def plot_rank_histogram(
    dist: RankDistribution,
    out_path: str | Path,
    overlay: RankDistribution | None = None,
    **kwargs,
) -> Path:
    """Render and atomically write a rank-histogram SVG; returns the path."""
    payload = render_rank_histogram_svg(dist, overlay, **kwargs)
    return write_bytes_atomic(out_path, payload)
