"""Exception types shared across the package."""


class ChawkesError(Exception):
    pass


class SpecParseError(ChawkesError):
    """Raised when a model document cannot be parsed.

    ``location`` names the offending field (e.g. ``"fertility[1][0]"``) or a
    ``line:column`` position for syntax errors.
    """

    def __init__(self, message, location=None):
        self.location = location
        if location is not None:
            message = f"{location}: {message}"
        super().__init__(message)


class SpecValidationError(ChawkesError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid model spec: " + "; ".join(self.violations))


class StatePositivityViolation(ChawkesError):
    """A constraint component left {1, 2, ...} after an event."""

    def __init__(self, index, mark, state):
        self.index = index
        self.mark = mark
        self.state = tuple(int(s) for s in state)
        super().__init__(
            f"event {index} (mark {mark}) drove the constraint variable to "
            f"{self.state}; the constraint sets do not guard positivity"
        )


class NotSubcritical(ChawkesError):
    def __init__(self, radius):
        self.radius = radius
        super().__init__(f"spectral radius of the fertility matrix is {radius:.6g} >= 1")


class InsufficientData(ChawkesError):
    pass
