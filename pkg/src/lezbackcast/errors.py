"""Exception hierarchy shared across the package."""


class LezError(Exception):
    """Base class for every error raised by lezbackcast."""


class StructuralError(LezError):
    """Array shapes do not agree with the scenario dimensions."""


class ValidationError(LezError, ValueError):
    """An input value violates a documented range or ordering."""


class ScenarioError(ValidationError):
    """A scenario file could not be parsed or failed validation.

    ``field`` names the offending entry with a dotted path so that callers can
    point the user at the exact location in the file.
    """

    def __init__(self, field: str, message: str) -> None:
        self.field = field
        super().__init__(f"{field}: {message}")


class PolicyViolation(ValidationError):
    """A control sequence breaks a ban-schedule constraint in strict mode."""


class FleetConsistencyError(LezError):
    """The simulated stock reached a negative entry."""


class EnumerationTooLarge(LezError):
    """The exhaustive search space exceeds the configured guard."""

    def __init__(self, size: int, bound: int) -> None:
        self.size = size
        self.bound = bound
        super().__init__(f"{size} candidate controls exceed enumeration bound {bound}")
