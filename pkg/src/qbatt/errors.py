"""Exception hierarchy shared by all qbatt modules."""


class QBattError(Exception):
    """Base class for all qbatt errors."""


class ValidationError(QBattError):
    """Invalid parameters, indices, or malformed inputs."""


class SizeError(QBattError):
    """A requested system exceeds the configured dimension cap."""


class RangeError(QBattError):
    """A target charge/energy lies outside the admissible range."""


class ProtocolStuckError(QBattError):
    """A protocol ran out of admissible moves before reaching its target."""


class InternalError(QBattError):
    """An internal invariant was violated (bracketing failure, non-termination)."""
