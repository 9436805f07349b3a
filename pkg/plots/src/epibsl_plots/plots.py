"""Renderers for the simulator's CSV outputs.

regret_curve.csv -> mean regret vs episode count with a +-2 stderr band and
a linear reference fit. sweep.csv -> heatmap of pr_fail (or mean_ugap) over
two sweep axes. Styling is fixed so smoke tests stay byte-stable in shape.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

KINDS = ("regret_curve", "fail_heatmap", "ugap_surface")
_DPI = 120


class SchemaError(ValueError):
    """Input CSV does not match the published schema."""


@dataclass(frozen=True)
class PlotSpec:
    input: str
    kind: str
    out: str
    x: str | None = None
    y: str | None = None


def _read_csv(path: str | Path) -> tuple[list[str], list[dict[str, str]]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise SchemaError(f"{path}: empty file, no CSV header")
        rows = list(reader)
    return list(reader.fieldnames), rows


def _require_columns(path, header: list[str], needed: list[str]) -> None:
    missing = [c for c in needed if c not in header]
    if missing:
        raise SchemaError(f"{path}: missing required column(s) "
                          + ", ".join(repr(c) for c in missing))


def _floats(rows, column) -> np.ndarray:
    try:
        return np.asarray([float(r[column]) for r in rows])
    except ValueError as err:
        raise SchemaError(f"column {column!r} holds a non-numeric value: {err}") from err


def plot_regret_curve(spec: PlotSpec) -> Path:
    header, rows = _read_csv(spec.input)
    _require_columns(spec.input, header, ["T", "breg_mean", "breg_stderr"])
    if not rows:
        raise SchemaError(f"{spec.input}: no data rows")
    t = _floats(rows, "T")
    mean = _floats(rows, "breg_mean")
    stderr = _floats(rows, "breg_stderr")

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(t, mean, color="tab:blue", lw=1.5, label="mean regret")
    ax.fill_between(t, mean - 2 * stderr, mean + 2 * stderr,
                    color="tab:blue", alpha=0.2, label="+-2 stderr")
    if len(t) >= 2:
        slope, intercept = np.polyfit(t, mean, 1)
        ax.plot(t, slope * t + intercept, color="tab:red", ls="--", lw=1.0,
                label=f"linear fit ({slope:.3g}/episode)")
    ax.set_xlabel("episodes")
    ax.set_ylabel("cumulative regret")
    ax.legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    out = Path(spec.out)
    fig.savefig(out, dpi=_DPI)
    plt.close(fig)
    return out


def _grid(rows, x_col, y_col, value_col):
    """Arrange sweep rows on a rectangular (y, x) grid; reject duplicates
    and holes."""
    def axis_values(col):
        seen = []
        for r in rows:
            if r[col] not in seen:
                seen.append(r[col])
        try:
            return sorted(seen, key=float)
        except ValueError:
            return sorted(seen)

    xs, ys = axis_values(x_col), axis_values(y_col)
    grid = np.full((len(ys), len(xs)), np.nan)
    for r in rows:
        i, j = ys.index(r[y_col]), xs.index(r[x_col])
        if not np.isnan(grid[i, j]):
            raise SchemaError(f"duplicate grid cell {x_col}={r[x_col]!r}, "
                              f"{y_col}={r[y_col]!r}")
        try:
            grid[i, j] = float(r[value_col])
        except ValueError as err:
            raise SchemaError(f"column {value_col!r} holds a non-numeric value: "
                              f"{err}") from err
    if np.isnan(grid).any():
        raise SchemaError(f"sweep grid over ({x_col}, {y_col}) is not rectangular")
    return xs, ys, grid


def _heatmap(spec: PlotSpec, value_col: str) -> Path:
    if not spec.x or not spec.y:
        raise SchemaError("heatmaps need --x and --y axis column names")
    header, rows = _read_csv(spec.input)
    _require_columns(spec.input, header, [spec.x, spec.y, value_col])
    if not rows:
        raise SchemaError(f"{spec.input}: no data rows")
    xs, ys, grid = _grid(rows, spec.x, spec.y, value_col)

    fig, ax = plt.subplots(figsize=(6, 4.5))
    im = ax.imshow(grid, origin="lower", aspect="auto", cmap="viridis",
                   vmin=min(0.0, float(grid.min())))
    ax.set_xticks(range(len(xs)), labels=[str(v) for v in xs], rotation=45,
                  ha="right", fontsize=8)
    ax.set_yticks(range(len(ys)), labels=[str(v) for v in ys], fontsize=8)
    ax.set_xlabel(spec.x)
    ax.set_ylabel(spec.y)
    fig.colorbar(im, ax=ax, label=value_col)
    fig.tight_layout()
    out = Path(spec.out)
    fig.savefig(out, dpi=_DPI)
    plt.close(fig)
    return out


def plot_fail_heatmap(spec: PlotSpec) -> Path:
    return _heatmap(spec, "pr_fail")


def plot_ugap_surface(spec: PlotSpec) -> Path:
    return _heatmap(spec, "mean_ugap")


def render(spec: PlotSpec) -> Path:
    if spec.kind == "regret_curve":
        return plot_regret_curve(spec)
    if spec.kind == "fail_heatmap":
        return plot_fail_heatmap(spec)
    if spec.kind == "ugap_surface":
        return plot_ugap_surface(spec)
    raise SchemaError(f"unknown plot kind {spec.kind!r}; choose from {KINDS}")
