"""Link-level MU-MIMO-OFDM simulation toolkit.

Classical iterative detection and decoding plus a deep-unfolded receiver with
trainable scalar hyperparameters, with self-counted real-multiplication
complexity accounting.
"""

from .errors import (ConfigurationError, InputError, NumericalError,
                     TrainingError, UnfoldrxError)

__version__ = "1.0.0"

__all__ = [
    "ConfigurationError",
    "InputError",
    "NumericalError",
    "TrainingError",
    "UnfoldrxError",
    "__version__",
]
