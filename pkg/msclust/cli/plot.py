"""Static vector figures of curves with pointwise intervals and bands."""

from __future__ import annotations

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from msclust.formats import CurveOutput  # noqa: E402

logger = logging.getLogger(__name__)

VECTOR_SUFFIXES = frozenset({".svg", ".pdf", ".eps"})


def plot_curves(
    curves: list[CurveOutput],
    path: Path,
    labels: list[str] | None = None,
    show_ci: bool = True,
    show_band: bool = True,
) -> Path:
    """Draw step curves with shaded bands and dashed pointwise limits.

    Args:
        curves: Curves to overlay (e.g. typical vs all-members, or the two arms)
        path: Output file; the suffix picks the format, .svg when it has none
        labels: Legend entries, defaulting to "target (weighting)"
        show_ci: Draw pointwise interval limits
        show_band: Shade the simultaneous band where one exists

    Returns:
        The path written.
    """
    if path.suffix.lower() not in VECTOR_SUFFIXES:
        path = path.with_suffix(".svg")
    labels = labels or [f"{c.metadata.target} ({c.metadata.weighting})" for c in curves]

    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for curve, label in zip(curves, labels, strict=True):
        (line,) = ax.plot(curve.t, curve.estimate, drawstyle="steps-post", label=label)
        color = line.get_color()
        if show_ci:
            ax.plot(curve.t, curve.ci_lo, drawstyle="steps-post", linestyle="--", linewidth=0.8, color=color)
            ax.plot(curve.t, curve.ci_hi, drawstyle="steps-post", linestyle="--", linewidth=0.8, color=color)
        if show_band and curve.domain_flag.any():
            inside = curve.domain_flag
            ax.fill_between(
                curve.t[inside],
                curve.band_lo[inside],
                curve.band_hi[inside],
                step="post",
                alpha=0.25,
                linewidth=0.0,
                color=color,
            )

    ax.set_xlabel("time")
    ax.set_ylabel("probability")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(loc="best", frameon=False)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    logger.info(f"Wrote figure {path}")
    return path
