"""Exception hierarchy for spikesim."""


class SpikeSimError(Exception):
    """Base class for all errors raised by spikesim."""


class ConfigurationError(SpikeSimError, ValueError):
    """Invalid or mutually inconsistent configuration / input shapes."""


class InvalidThresholdError(SpikeSimError, ValueError):
    """A threshold frame contained a non-positive entry."""


class DegenerateConfigError(ConfigurationError):
    """Fixed-pattern noise rejection sampling did not converge."""


class CalibrationDesignError(SpikeSimError, ValueError):
    """The calibration scenes cannot identify the per-pixel model."""


class InsufficientHorizonError(SpikeSimError, IndexError):
    """An ISI chain or decode step needs planes beyond those supplied."""


class FormatError(SpikeSimError, ValueError):
    """Base class for file parse errors."""


class BadMagicError(FormatError):
    pass


class VersionMismatchError(FormatError):
    pass


class TruncatedFileError(FormatError):
    pass
