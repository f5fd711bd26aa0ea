"""Exception hierarchy shared by all modules.

The CLI maps :class:`InputError` (and subclasses) to exit status 2.
"""


class SsmfError(Exception):
    """Base class for every error raised by the package."""


class InputError(SsmfError, ValueError):
    """Malformed or out-of-domain user input."""


class ScheduleError(InputError):
    """A numeric schedule violates one of its structural constraints."""


class ResourceError(SsmfError):
    """A computation would exceed a configured size cap."""


class ConstructionError(SsmfError):
    """A constructive procedure produced an empty or inconsistent object."""


class EstimationError(SsmfError):
    """An estimator cannot produce a meaningful value at the requested scales."""
