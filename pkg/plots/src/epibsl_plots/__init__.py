"""Offline figure generation from simulation CSVs.

Read-only consumers of the simulator's published CSV schemas: regret curves
with error bands and heatmaps over sweep grids. No metric is ever
recomputed here; columns are rendered as-is.
"""

from .plots import (PlotSpec, SchemaError, plot_fail_heatmap, plot_regret_curve,
                    plot_ugap_surface, render)

__version__ = "0.1.0"
