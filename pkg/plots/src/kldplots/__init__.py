"""Figure rendering for the waveform-design experiment harness."""

from .figures import FIGURE_KINDS, EmptyInput, FigureSpec, MissingColumn, render

__version__ = "0.1.0"
