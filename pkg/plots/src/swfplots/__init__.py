"""Figure rendering for swfalloc sweep outputs."""

from swfplots.figures import FigureSpec, SchemaError, final_regrets, render

__version__ = "0.1.0"
