# [file name]: atomsense/errors.py
"""
Error types raised by the simulator.
Every error carries the process exit code the CLI maps it to.
"""


class AtomSenseError(Exception):
    """Base class for all simulator errors (runtime failures, exit code 3)."""

    exit_code = 3


class ConfigError(AtomSenseError):
    """Invalid scenario configuration: schema, units or values."""

    exit_code = 2


class InputFormatError(ConfigError):
    """Malformed input file, reported with its 1-based line number."""

    def __init__(self, path, line_number: int, reason: str):
        self.path = str(path)
        self.line_number = line_number
        self.reason = reason
        super().__init__(f"{self.path}:{line_number}: {reason}")


class SmallAngleViolation(AtomSenseError):
    """Mirror tilt outside the small-angle range of the phase oracle."""


class DegenerateDoppler(AtomSenseError):
    """Light-shift formula evaluated at its pole 8ω_D = ±16ω_r."""


class GridTooNarrow(AtomSenseError):
    """Frequency grid does not reach the counter-propagating lines."""


class PeakNotFound(AtomSenseError):
    """Fewer than two counter-propagating peaks found in a spectrum."""


class AmbiguousPeaks(AtomSenseError):
    """More than two candidate counter-propagating peaks."""


class RateTooLow(AtomSenseError):
    """Sample rate below twice the highest spectral corner."""


class TraceTooShort(AtomSenseError):
    """Trace does not cover the requested convolution window."""


class FringeLost(AtomSenseError):
    """Mid-fringe lock left its linear range for consecutive updates."""


class FitFailed(AtomSenseError):
    """Fringe fit did not converge or contrast is below threshold."""


class SeriesTooShort(AtomSenseError):
    """Series too short for the requested averaging times."""


class NoCrossing(AtomSenseError):
    """Atomic and classical Allan deviation curves never cross."""
