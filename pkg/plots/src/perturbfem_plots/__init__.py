"""Figure generation for convergence-study CSVs."""

from .figures import (FigureSpec, FigureResult, PlotDataError,
                      REQUIRED_COLUMNS, read_records, fitted_upsilon_slope,
                      plot_error_vs_h, plot_error_vs_upsilon, render)
from .cli import main

__version__ = "0.1.0"
