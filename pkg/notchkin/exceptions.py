"""Exceptions raised by notchkin.

Everything derives from :class:`NotchkinError` so the CLI can map domain
failures to exit status 1 in one place. Parse failures additionally derive
from :class:`ValueError` and are mapped to exit status 2.

"""


class NotchkinError(Exception):
    """Base class for all notchkin errors."""


class InvalidGeometryError(NotchkinError, ValueError):
    """A tube, tendon or recipe violates one of its invariants."""


class OverlapError(InvalidGeometryError):
    """The tendon hole intersects a notch rectangle.

    :param int notch: Index of the notch that was hit.

    """

    def __init__(self, message, notch=None):
        super(OverlapError, self).__init__(message)
        self.notch = notch


class DomainError(NotchkinError, ValueError):
    """An input lies outside the domain of the model (e.g. negative angle)."""


class NotEngagedError(DomainError):
    """The tendon stroke does not cover the elastic elongation yet.

    :param float slack: Missing stroke in mm (``L_el(F) - L_t``).

    """

    def __init__(self, message, slack):
        super(NotEngagedError, self).__init__(message)
        self.slack = slack


class TrialFormatError(NotchkinError, ValueError):
    """A trial file does not match the documented CSV schema.

    :param int row: 1-based data row (header excluded), if known.
    :param str column: Offending column, if known.

    """

    def __init__(self, message, row=None, column=None):
        where = []
        if row is not None:
            where.append("row {:d}".format(row))
        if column is not None:
            where.append("column '{}'".format(column))
        if where:
            message = "{} ({})".format(message, ", ".join(where))
        super(TrialFormatError, self).__init__(message)
        self.row = row
        self.column = column


class NoCyclesFoundError(NotchkinError):
    """The stroke signal never leaves the hysteresis band."""


class InsufficientEngagementError(NotchkinError):
    """Deflection never sustains the engagement threshold long enough."""


class NonIdentifiableError(NotchkinError):
    """The fit objective does not depend on the parameter being fitted."""


class FitConvergenceError(NotchkinError):
    """Golden-section search did not converge.

    :param tuple bracket: ``(lower, upper)`` search bracket when the search
        stopped.

    """

    def __init__(self, message, bracket):
        super(FitConvergenceError, self).__init__(
            "{} (bracket {:.6g}..{:.6g})".format(message, *bracket))
        self.bracket = bracket


class PipelineError(NotchkinError):
    """Wraps an error raised by one stage of the calibration pipeline.

    :param str stage: Stage name (``load``, ``segment``, ``deadband``, ``fit``).
    :param Exception cause: The original error.

    """

    def __init__(self, stage, cause):
        super(PipelineError, self).__init__(
            "{} stage failed: {}".format(stage, cause))
        self.stage = stage
        self.cause = cause
