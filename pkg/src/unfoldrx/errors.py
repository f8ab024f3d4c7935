"""Exception types shared across the toolkit."""


class UnfoldrxError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(UnfoldrxError):
    """Inconsistent dimensions, parameters, or component wiring."""


class NumericalError(UnfoldrxError):
    """A numerical operation failed (singular/indefinite matrix, NaN inputs)."""


class InputError(UnfoldrxError):
    """Malformed external input (file, config, CSV)."""


class TrainingError(UnfoldrxError):
    """Training diverged or produced a non-finite loss."""
