"""Exception types shared across the package."""

import numpy as np


class KldwaveError(Exception):
    """Base class for all package-specific errors."""


class NotPositiveDefinite(KldwaveError, np.linalg.LinAlgError):
    """A matrix required to be positive definite failed its pivot test."""


class ShapeMismatch(KldwaveError, ValueError):
    """Operands have inconsistent dimensions."""


class DidNotConverge(KldwaveError, RuntimeError):
    """An iterative routine exhausted its iteration budget."""


class IllPosedDetection(KldwaveError):
    """The hypothesis covariance difference is not positive definite,
    so the two hypotheses cannot be separated."""


class SingularNoise(KldwaveError):
    """The noise covariance is not positive definite."""


class InvalidGenerator(KldwaveError, ValueError):
    """Scenario generator parameters produce an invalid problem."""


class InfeasibleMu(KldwaveError, RuntimeError):
    """The power residual of the constrained waveform update could not be
    bracketed.  Defensive: unreachable for a nonzero right-hand side."""


class TooManyDevices(KldwaveError, ValueError):
    """Activity-pattern enumeration is capped at 12 devices."""


class InsufficientCalibration(KldwaveError, ValueError):
    """Too few calibration draws for the requested false-alarm rate."""


class ConfigError(KldwaveError, ValueError):
    """Invalid or unknown experiment configuration."""
