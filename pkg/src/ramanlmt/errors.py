"""Exceptions and warning types shared across the package."""

from __future__ import annotations


class SimulationError(Exception):
    """Base class for physics-level failures."""


class LadderOverflow(SimulationError):
    """Population reached the edge rungs of the momentum ladder.

    Raised when the probability on the outermost |n| = N rungs after a pulse
    exceeds the configured threshold; results would depend on the truncation.
    The offending sample velocity is attached when known.
    """

    def __init__(self, message: str, velocity: float | None = None):
        super().__init__(message)
        self.velocity = velocity


class InvalidTiming(ValueError):
    """Pulse layout is impossible (overlapping pulses, negative gaps)."""


class NoPeaks(SimulationError):
    """Peak search found nothing above the prominence threshold."""


class SingularFit(SimulationError):
    """Fringe-model design matrix is rank deficient on the given grid."""


class ConfigError(ValueError):
    """Config file or override could not be parsed/validated."""


class ChannelOverlapWarning(UserWarning):
    """Side resonances closer than the spectral-width bound."""
