"""Exception types shared across the package.

Each class maps to one CLI exit code, so keep the hierarchy flat.
"""


class QrngLabError(Exception):
    """Base class for all package errors."""


class ConfigError(QrngLabError, ValueError):
    """Invalid configuration value or malformed config document."""


class CaptureFormatError(QrngLabError, ValueError):
    """Malformed or truncated binary capture/seed/key file."""


class EstimationError(QrngLabError, RuntimeError):
    """A statistical estimate came out inconsistent (e.g. negative variance)."""


class InsufficientEntropyError(QrngLabError, ValueError):
    """Extraction plan yields a non-positive output length."""


class EmptyMaskError(QrngLabError, ValueError):
    """Timing parameters leave no valid samples in the acquisition window."""
