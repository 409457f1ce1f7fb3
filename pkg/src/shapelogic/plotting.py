"""Matplotlib figures of an image with detection outlines drawn over it."""

from __future__ import annotations

from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.patches import Polygon  # noqa: E402

from .raster import GrayImage  # noqa: E402

STYLE = {
    "font.size": 8,
    "axes.titlesize": 9,
    "axes.linewidth": 0.6,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}


def detection_figure(img: GrayImage, detections: Sequence[dict], title: Optional[str] = None,
                     truth: Sequence[Sequence] = ()):
    """Build a figure showing ``img`` with each detection outlined.

    ``detections`` are entries of a detection document; the best one is drawn
    in a warmer color. ``truth`` polygons, if given, are drawn dashed.
    """
    with plt.rc_context(STYLE):
        scale = 4.0 / max(img.width, img.height)
        fig, ax = plt.subplots(figsize=(img.width * scale + 0.6, img.height * scale + 0.4))
        ax.imshow(img.pixels, cmap="gray", vmin=0, vmax=255, interpolation="nearest",
                  extent=(0, img.width, img.height, 0))
        for quad in truth:
            ax.add_patch(Polygon([tuple(p) for p in quad], closed=True, fill=False,
                                 ec="#7cfc00", lw=1.0, ls="--"))
        for rank, det in reversed(list(enumerate(detections))):
            pts = list(det["points"].values())
            color = "#ffd400" if rank == 0 else "#00b4ff"
            ax.add_patch(Polygon(pts, closed=True, fill=False, ec=color, lw=1.2 if rank == 0 else 0.7))
            ax.annotate(f"{det['score']:.3f}", pts[0], xytext=(2, -2), textcoords="offset points",
                        color=color, fontsize=6)
        ax.set_xlim(0, img.width)
        ax.set_ylim(img.height, 0)
        ax.set_xlabel("x (px)")
        ax.set_ylabel("y (px)")
        if title:
            ax.set_title(title)
    return fig


def save_figure(fig, path) -> None:
    with plt.rc_context(STYLE):
        fig.savefig(path, format="png", metadata={"Software": None})
    plt.close(fig)
