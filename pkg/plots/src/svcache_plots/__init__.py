"""Figure rendering for svcache experiment outputs."""

from .figures import FIGURE_IDS, FigureInputError, render

__version__ = "0.1.0"
