"""Command line front end: one figure per invocation."""

from __future__ import annotations

import argparse
import sys

from .figures import FIGURE_KINDS, NORM_COLUMNS, FigureSpec, PlotDataError, \
    render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="perturbfem-plots",
        description="Render convergence-study CSVs as figures")
    parser.add_argument("--csv", required=True, help="study CSV input")
    parser.add_argument("--kind", required=True, choices=FIGURE_KINDS)
    parser.add_argument("--norm", default="l2", choices=sorted(NORM_COLUMNS))
    parser.add_argument("--out", required=True,
                        help="output image path (png/svg by extension)")
    args = parser.parse_args(argv)
    try:
        result = render(FigureSpec(csv=args.csv, kind=args.kind,
                                   norm=args.norm, out=args.out))
    except (PlotDataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    message = f"wrote {result.out} ({len(result.series)} series)"
    if result.fitted_slope is not None:
        message += f", fitted slope {result.fitted_slope!r}"
    for note in result.notes:
        message += f"; {note}"
    print(message)
    return 0


if __name__ == "__main__":
    sys.exit(main())
