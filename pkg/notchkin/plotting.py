"""Static SVG plots.

Figures are built with :class:`matplotlib.figure.Figure` directly so no
interactive backend is needed. The SVG hash salt and date are pinned so
identical inputs produce identical files.

"""

import logging

import matplotlib
import numpy as np
from matplotlib.figure import Figure

from notchkin.calibration import FIRST, STEADY, TRANSIENT, as_arrays

logger = logging.getLogger(__name__)

BAND_COLORS = {FIRST: "tab:red", TRANSIENT: "tab:blue", STEADY: "tab:green"}


def _save(fig, path):
    with matplotlib.rc_context({"svg.hashsalt": "notchkin"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    logger.info("Wrote %s", path)


def plot_sweep(stroke, deflection, path, title=None):
    """Deflection [deg] against stroke [mm]."""
    fig = Figure(figsize=(5, 4))
    ax = fig.subplots()
    ax.plot(stroke, deflection, color="tab:blue")
    ax.set_xlabel("Tendon stroke [mm]")
    ax.set_ylabel("Joint deflection [deg]")
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    _save(fig, path)


def plot_backbones(polylines, path):
    """Bent joint shapes, one polyline of ``(x, y)`` vertices per entry."""
    fig = Figure(figsize=(4, 5))
    ax = fig.subplots()
    for polyline in polylines:
        x, y = np.asarray(polyline).T
        ax.plot(x, y, color="tab:blue", linewidth=1)
    ax.set_aspect("equal")
    ax.set_xlabel("x [mm]")
    ax.set_ylabel("y [mm]")
    _save(fig, path)


def plot_cycles(cycle_set, path):
    """Deflection against stroke for every cycle, colored by band."""
    fig = Figure(figsize=(5, 4))
    ax = fig.subplots()
    seen = set()
    for cycle in cycle_set.cycles:
        _, stroke, _, deflection = as_arrays(cycle.actuation + cycle.relaxation)
        label = cycle.label if cycle.label not in seen else None
        seen.add(cycle.label)
        ax.plot(stroke, np.degrees(deflection), color=BAND_COLORS[cycle.label],
                linewidth=0.6, label=label)
    ax.set_xlabel("Tendon stroke [mm]")
    ax.set_ylabel("Joint deflection [deg]")
    ax.legend()
    _save(fig, path)


def plot_model_vs_data(samples, path):
    """Measured and modeled deflection of the last fitted cycle of each trial.

    :param list samples: ``(stroke, measured_deg, model_deg)`` array triples.

    """
    fig = Figure(figsize=(5, 4))
    ax = fig.subplots()
    for k, (stroke, measured, model) in enumerate(samples, start=1):
        order = np.argsort(stroke)
        ax.plot(stroke, measured, ".", markersize=2, label="Sample {:d}".format(k))
        ax.plot(stroke[order], model[order], "-", color="k", linewidth=1)
    ax.set_xlabel("Tendon stroke, deadband removed [mm]")
    ax.set_ylabel("Joint deflection [deg]")
    ax.legend()
    _save(fig, path)
