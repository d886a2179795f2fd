"""Exception types raised across the package."""


class QtomoError(Exception):
    """Base class for every error raised by qtomo."""


class InvalidArgument(QtomoError, ValueError):
    pass


class FormatError(QtomoError, ValueError):
    """A file did not match its declared format."""


class DegenerateProblemError(QtomoError):
    """The region has no representable variation (no ray touches it)."""


class CapacityError(QtomoError):
    """A problem exceeds a configured size guard."""


class EmptyTableError(QtomoError, ValueError):
    pass


class TransportError(QtomoError):
    """Network failure talking to a remote solver, after retries."""


class ProtocolError(QtomoError):
    """A remote solver answered with a malformed response."""


class IntegrityError(QtomoError):
    """A remote solver reported an energy that does not re-verify locally."""
