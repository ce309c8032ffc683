"""Exception hierarchy shared by every module."""


class MimoSwitchError(Exception):
    """Base class; ``kind`` is the short tag printed by the CLI."""

    kind = "error"


class InvalidSizeError(MimoSwitchError, ValueError):
    kind = "invalid-size"


class SizeMismatchError(MimoSwitchError, ValueError):
    kind = "size-mismatch"


class SingularChannelError(MimoSwitchError):
    kind = "singular-channel"


class InfeasiblePowerError(MimoSwitchError):
    kind = "infeasible-power"


class DomainError(MimoSwitchError, ValueError):
    kind = "domain"


class SchemeMismatchError(MimoSwitchError):
    kind = "scheme-mismatch"


class DemandInfeasibleError(MimoSwitchError):
    kind = "demand-infeasible"

    def __init__(self, message, flow=None):
        super().__init__(message)
        self.flow = flow


class DegenerateChannelStreamError(MimoSwitchError):
    kind = "degenerate-channel-stream"


class CurveRangeError(MimoSwitchError, ValueError):
    kind = "range"


class ParseError(MimoSwitchError, ValueError):
    kind = "parse"
