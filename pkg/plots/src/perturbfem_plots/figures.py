"""Figure generation from convergence-study CSVs.

Consumes only the study CSV contract of the solver package: the header

    problem,dim,degree,upsilon,hausdorff_estimate,level,h_max,ndofs,
    l2_error,h1_error,h1_semi_error,solver_iterations,wall_time_s,error

Two figure kinds are produced: discretization error against mesh size
(one log-log curve per perturbation amplitude, with reference slope
triangles), and plateaued error against the perturbation amplitude (with
the fitted log-log slope annotated and a slope-1 reference line).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

REQUIRED_COLUMNS = [
    "problem", "dim", "degree", "upsilon", "hausdorff_estimate", "level",
    "h_max", "ndofs", "l2_error", "h1_error", "h1_semi_error",
    "solver_iterations", "wall_time_s", "error",
]

NORM_COLUMNS = {"l2": "l2_error", "h1": "h1_error"}
FIGURE_KINDS = ("error_vs_h", "error_vs_upsilon")


class PlotDataError(ValueError):
    """The CSV cannot support the requested figure."""


@dataclass(frozen=True)
class FigureSpec:
    """One figure request: which CSV, which kind, which norm, where to."""

    csv: str
    kind: str
    norm: str
    out: str

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise PlotDataError(
                f"unknown figure kind {self.kind!r}; "
                f"expected one of {FIGURE_KINDS}")
        if self.norm not in NORM_COLUMNS:
            raise PlotDataError(
                f"unknown norm {self.norm!r}; expected 'l2' or 'h1'")


@dataclass
class FigureResult:
    """What ended up in the image, for callers and tests."""

    out: str
    series: Dict[Tuple[int, float], List[Tuple[float, float]]]
    fitted_slope: float = None
    skipped_rows: int = 0
    notes: List[str] = field(default_factory=list)


def read_records(path) -> List[dict]:
    """Parse a study CSV, checking the contract columns are present."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise PlotDataError(f"{path}: empty file, no CSV header")
        missing = [c for c in REQUIRED_COLUMNS if c not in reader.fieldnames]
        if missing:
            raise PlotDataError(
                f"{path}: missing required columns {missing}")
        rows = list(reader)
    if not rows:
        raise PlotDataError(f"{path}: no data rows")
    records = []
    for row in rows:
        records.append({
            "problem": row["problem"],
            "degree": int(row["degree"]),
            "upsilon": float(row["upsilon"]),
            "level": int(row["level"]),
            "h_max": float(row["h_max"]),
            "l2_error": float(row["l2_error"]),
            "h1_error": float(row["h1_error"]),
            "error": row["error"],
        })
    return records


def _usable(records, norm_col):
    """Drop failed grid points and rows without a finite plottable value."""
    good, skipped = [], 0
    for rec in records:
        if rec["error"] or not math.isfinite(rec[norm_col]) \
                or rec[norm_col] <= 0.0 or not math.isfinite(rec["h_max"]):
            skipped += 1
        else:
            good.append(rec)
    return good, skipped


def fitted_upsilon_slope(pairs) -> float:
    """Least-squares log-log slope of (upsilon, error) pairs."""
    pairs = [(float(u), float(e)) for u, e in pairs]
    if len(pairs) < 3:
        raise PlotDataError("need at least 3 positive-upsilon points "
                            "to fit a slope")
    ups = np.array([p[0] for p in pairs])
    err = np.array([p[1] for p in pairs])
    if np.any(ups <= 0.0) or np.any(err <= 0.0):
        raise PlotDataError("upsilon and error values must be positive")
    slope, _ = np.polyfit(np.log(ups), np.log(err), 1)
    return float(slope)


def _series_by_group(records, norm_col):
    """(degree, upsilon) -> [(h_max, error)] sorted from coarse to fine."""
    series: Dict[Tuple[int, float], List[Tuple[float, float]]] = {}
    for rec in sorted(records, key=lambda r: (r["degree"], r["upsilon"],
                                              r["level"])):
        key = (rec["degree"], rec["upsilon"])
        series.setdefault(key, []).append((rec["h_max"], rec[norm_col]))
    return series


def _slope_triangle(ax, h0, e0, slope, scale=0.6):
    """Reference triangle anchored at (h0, e0) showing error ~ h^slope."""
    h1 = h0 * scale
    e1 = e0 * (h1 / h0) ** slope
    ax.plot([h0, h1, h0, h0], [e0, e1, e1, e0], color="0.4", lw=0.8)
    ax.annotate(f"{slope:g}", xy=(h0 * scale ** 0.5, e1), fontsize=8,
                color="0.3", ha="center", va="bottom")


def plot_error_vs_h(spec: FigureSpec) -> FigureResult:
    """Error against h_max, one log-log curve per perturbation amplitude."""
    norm_col = NORM_COLUMNS[spec.norm]
    records, skipped = _usable(read_records(spec.csv), norm_col)
    if not records:
        raise PlotDataError(f"{spec.csv}: no usable rows for {norm_col}")
    series = _series_by_group(records, norm_col)
    thin = [key for key, pts in series.items() if len(pts) < 2]
    if thin:
        raise PlotDataError(
            f"{spec.csv}: need at least 2 levels per group, got fewer for "
            f"(degree, upsilon) in {sorted(thin)}")

    degrees = sorted({deg for deg, _ in series})
    fig, axes = plt.subplots(1, len(degrees),
                             figsize=(5.2 * len(degrees), 4.2),
                             squeeze=False)
    notes = []
    for ax, degree in zip(axes[0], degrees):
        for (deg, upsilon), pts in sorted(series.items()):
            if deg != degree:
                continue
            h = [p[0] for p in pts]
            e = [p[1] for p in pts]
            ax.loglog(h, e, marker="o", ms=4,
                      label=f"\N{GREEK CAPITAL LETTER UPSILON} = {upsilon:g}")
        anchor_h, anchor_e = min(
            pts[-1] for (deg, _u), pts in series.items() if deg == degree)
        _slope_triangle(ax, anchor_h * 1.6, anchor_e * 1.4, degree)
        _slope_triangle(ax, anchor_h * 1.6, anchor_e * 0.5, degree + 1)
        ax.set_xlabel("h_max")
        ax.set_ylabel(f"{spec.norm.upper()} error")
        ax.set_title(f"degree {degree}")
        ax.grid(True, which="both", lw=0.3, alpha=0.5)
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(spec.out, dpi=150)
    plt.close(fig)
    if skipped:
        notes.append(f"skipped {skipped} unusable rows")
    return FigureResult(out=spec.out, series=series, skipped_rows=skipped,
                        notes=notes)


def plot_error_vs_upsilon(spec: FigureSpec) -> FigureResult:
    """Plateaued error against upsilon with the fitted slope annotated.

    For every positive upsilon (per degree) the finest-level record is
    taken as the plateau value; the fitted log-log slope is shown next to
    a slope-1 reference line.
    """
    norm_col = NORM_COLUMNS[spec.norm]
    records, skipped = _usable(read_records(spec.csv), norm_col)
    positive = [r for r in records if r["upsilon"] > 0.0]
    if not positive:
        raise PlotDataError(f"{spec.csv}: no positive-upsilon rows")
    degrees = sorted({r["degree"] for r in positive})

    fig, ax = plt.subplots(figsize=(5.2, 4.2))
    series: Dict[Tuple[int, float], List[Tuple[float, float]]] = {}
    slope = None
    for degree in degrees:
        plateau: Dict[float, dict] = {}
        for rec in positive:
            if rec["degree"] != degree:
                continue
            cur = plateau.get(rec["upsilon"])
            if cur is None or rec["level"] > cur["level"]:
                plateau[rec["upsilon"]] = rec
        pairs = sorted((u, r[norm_col]) for u, r in plateau.items())
        slope = fitted_upsilon_slope(pairs)
        ups = [p[0] for p in pairs]
        err = [p[1] for p in pairs]
        ax.loglog(ups, err, marker="o", ms=4,
                  label=f"degree {degree} (slope {slope:.3f})")
        for u, e in pairs:
            series[(degree, u)] = [(u, e)]
        # slope-1 reference through the first point
        ref = [err[0] * u / ups[0] for u in ups]
        ax.loglog(ups, ref, ls="--", color="0.4", lw=0.8,
                  label="slope 1" if degree == degrees[0] else None)
    ax.set_xlabel("\N{GREEK CAPITAL LETTER UPSILON}")
    ax.set_ylabel(f"plateaued {spec.norm.upper()} error")
    ax.grid(True, which="both", lw=0.3, alpha=0.5)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(spec.out, dpi=150)
    plt.close(fig)
    notes = [f"skipped {skipped} unusable rows"] if skipped else []
    return FigureResult(out=spec.out, series=series, fitted_slope=slope,
                        skipped_rows=skipped, notes=notes)


def render(spec: FigureSpec) -> FigureResult:
    if spec.kind == "error_vs_h":
        return plot_error_vs_h(spec)
    return plot_error_vs_upsilon(spec)
