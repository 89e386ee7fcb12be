"""Figure rendering for blindmaze sweep summaries (reads summary.csv only)."""

__version__ = "0.1.0"

from .render import FIGURES, SchemaError, render  # noqa: F401
