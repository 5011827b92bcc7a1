"""
Author: Imran Mughal
Email: imran@mughal.com
Date: October 18, 2026
"""

import logging
from pathlib import Path
from typing import List, Optional, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from metrics import BinStats  # noqa: E402

logger = logging.getLogger(__name__)


def render_reliability_svg(bins: List[BinStats], path: Union[str, Path], ece_value: Optional[float] = None,
                           title: str = "Reliability Diagram"):
    """Per-bin accuracy bars with the gap to mean confidence and the diagonal."""
    centers = [(b.lo + b.hi) / 2 for b in bins if b.count > 0]
    acc = [b.accuracy for b in bins if b.count > 0]
    conf = [b.mean_confidence for b in bins if b.count > 0]
    width = bins[0].hi - bins[0].lo if bins else 0.04

    fig, ax = plt.subplots(figsize=(5, 5))
    ax.bar(centers, height=acc, width=width, align="center", edgecolor="black", label="Output")
    ax.bar(centers, height=[c - a for c, a in zip(conf, acc)], bottom=acc, width=width, align="center",
           edgecolor="black", color="red", alpha=0.6, label="Gap")
    ax.plot([0, 1], [0, 1], color="gray", linestyle="--", label="Perfect Calibration")
    ax.set_xlim((0.0, 1.0))
    ax.set_ylim((0.0, 1.0))
    ax.set_xlabel("Confidence")
    ax.set_ylabel("Accuracy")
    ax.set_title(title)
    if ece_value is not None:
        ax.text(0.04, 0.92, f"ECE = {100 * ece_value:.2f}%", transform=ax.transAxes)
    ax.legend(loc="lower right")
    fig.tight_layout()

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # Fixed hash salt and no date keep reruns byte-identical
    with plt.rc_context({"svg.hashsalt": "calibkit"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.debug("Wrote reliability diagram to %s", path)
