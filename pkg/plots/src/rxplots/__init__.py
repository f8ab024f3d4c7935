"""Figure generation from bench sweep CSVs."""

from .curves import CurveSet, InputError, load_csv, snr_at_bler
from .figures import plot_tradeoff, plot_waterfall

__all__ = ["CurveSet", "InputError", "load_csv", "snr_at_bler",
           "plot_tradeoff", "plot_waterfall"]
__version__ = "1.0.0"
