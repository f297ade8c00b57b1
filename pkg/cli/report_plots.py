"""
Report plots - grafici log-log norma contro delta

One SVG per fitted series: measured points, the least-squares line and a guide line
with the predicted slope through the geometric mean of the data.
"""

import logging
import math
from typing import Dict, List, Sequence, Tuple

import matplotlib
matplotlib.use("Agg")
from matplotlib.figure import Figure

logger = logging.getLogger(__name__)

SVG_HASH_SALT = "node-gluing-lab"


def _guide_line(points: Sequence[Tuple[float, float]], slope: float):
    """Line of the given slope through the geometric mean of the points"""
    log_d = [math.log(d) for d, _ in points]
    log_v = [math.log(v) for _, v in points]
    mean_d, mean_v = sum(log_d) / len(log_d), sum(log_v) / len(log_v)
    xs = [min(log_d), max(log_d)]
    return [math.exp(x) for x in xs], [math.exp(mean_v + slope * (x - mean_d)) for x in xs]


def plot_decay_series(path: str, series: str, points: List[Tuple[float, float]],
                      fit: Dict) -> str:
    """
    Scrive il grafico SVG di una serie.

    Args:
        path: output .svg path
        series: series label
        points: (delta, value) pairs, values > 0
        fit: fit row with slope, intercept, predicted, mode and pass
    """
    points = sorted((float(d), float(v)) for d, v in points if float(v) > 0.0)
    if len(points) < 2:
        raise ValueError(f"La serie {series} ha meno di due punti positivi")

    with matplotlib.rc_context({"svg.hashsalt": SVG_HASH_SALT, "svg.fonttype": "none"}):
        fig = Figure(figsize=(6.0, 4.5))
        ax = fig.add_subplot(111)
        deltas = [d for d, _ in points]
        values = [v for _, v in points]
        ax.loglog(deltas, values, "o", color="tab:blue", label="misure")

        slope = float(fit["slope"])
        intercept = float(fit["intercept"])
        xs = [min(deltas), max(deltas)]
        ax.loglog(xs, [math.exp(intercept) * x ** slope for x in xs], "-", color="tab:blue",
                  label=f"fit: pendenza {slope:.3f}")

        predicted = float(fit["predicted"])
        gx, gy = _guide_line(points, predicted)
        ax.loglog(gx, gy, "--", color="tab:red",
                  label=f"attesa: {predicted:.3f} ({fit.get('mode', 'rate')})")

        status = "OK" if str(fit.get("pass")).lower() == "true" else "FALLITO"
        ax.set_title(f"{series} [{status}]")
        ax.set_xlabel("delta")
        ax.set_ylabel("norma")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend(loc="best", fontsize=8)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})

    logger.debug(f"Grafico scritto: {path}")
    return path
