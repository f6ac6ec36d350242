"""Exception hierarchy shared by the package and mapped to CLI exit codes."""


class OcvError(Exception):
    """Base class for every error raised by ocvu."""


class InvalidModelError(OcvError, ValueError):
    """Model coefficients or form are malformed."""


class AmbiguousInverseError(OcvError, ValueError):
    """The OCV curve is not strictly increasing, so SOC lookup is ambiguous."""


class IllConditionedDeltaError(OcvError, ValueError):
    """Two SOC estimates are too close for capacity to be observable."""


class IncompatibleTablesError(OcvError, ValueError):
    """Charge and discharge tables do not share an SOC range."""


class InsufficientDataError(OcvError, ValueError):
    """Fewer table rows than model coefficients."""


class DegenerateFitError(OcvError, ValueError):
    """The least-squares regressor matrix is rank deficient."""


class ParseError(OcvError, ValueError):
    """Malformed CSV or JSON input."""
