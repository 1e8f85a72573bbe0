"""Exception types shared across the package."""


class RingrecError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(RingrecError, ValueError):
    """A parameter or precondition violation (bad inputs, not bad files)."""


class IntegrationError(RingrecError, RuntimeError):
    """The integrator hit a non-finite state; message carries the time."""


class AudioFormatError(RingrecError):
    """A WAV file could not be parsed (malformed, truncated or unsupported)."""
