"""Exception hierarchy shared by every admitfair module."""


class AdmitFairError(Exception):
    """Base class for all library errors."""


class DomainError(AdmitFairError, ValueError):
    """A numeric argument lies outside the mathematical domain of an operation."""


class StructureError(AdmitFairError, ValueError):
    """Groups or regions do not match what an operation requires."""


class CapacityError(AdmitFairError, ValueError):
    """Capacity g is non-positive or not strictly below the applicant total."""


class InfeasibleQuotaError(AdmitFairError, ValueError):
    """A quota would require an admit probability outside [0, 1]."""


class UnsupportedSettingError(AdmitFairError, ValueError):
    """The instance lies outside the setting a theorem check supports."""


class ParseError(AdmitFairError, ValueError):
    """A file is malformed. The message names the offending row or field."""


class ValidationError(AdmitFairError, ValueError):
    """Parsed values are well-formed but break an invariant."""
