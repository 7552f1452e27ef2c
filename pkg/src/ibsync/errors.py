"""Exception types shared across the package."""


class IbsyncError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(IbsyncError, ValueError):
    """Static configuration is invalid (bad cutoffs, bin edges, ...)."""


class InputError(IbsyncError, ValueError):
    """Runtime data violates an operation's preconditions."""


class DegeneratePhaseError(InputError):
    """Phase content is undefined (all-zero signal, flat phase series)."""


class InsufficientChannelsError(InputError):
    """Fewer finite channel correlations than the pool size requires."""


class GapError(InputError):
    """A sample buffer is discontiguous where contiguity was required."""


class FramingError(InputError):
    """A wire frame could not be decoded. Carries the failing byte offset."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class ReplayError(IbsyncError):
    """A recording could not be replayed. Carries the failing position."""

    def __init__(self, message: str, position: int = 0):
        super().__init__(f"{message} (at record {position})")
        self.position = position
