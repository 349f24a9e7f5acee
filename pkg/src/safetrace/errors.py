"""Exception hierarchy shared across the package."""


class SafetraceError(Exception):
    """Base class for all errors raised by this package."""


class FormulaSyntaxError(SafetraceError):
    """Raised when a formula string cannot be parsed.

    Carries the 1-based ``line`` and ``column`` of the offending token and the
    set of token descriptions that would have been accepted there.
    """

    def __init__(self, message: str, line: int, column: int, expected: tuple[str, ...] = ()):
        detail = f"{message} at line {line}, column {column}"
        if expected:
            detail += " (expected: " + ", ".join(expected) + ")"
        super().__init__(detail)
        self.line = line
        self.column = column
        self.expected = expected


class AlphabetTooLargeError(SafetraceError):
    """Raised when a formula uses more propositions than a DFA can carry."""


class AlphabetMismatchError(SafetraceError):
    """Raised when two automata over different proposition sets are compared."""


class MonitorError(SafetraceError):
    """Raised on monitor protocol misuse (step after finalize, empty finalize)."""


class TemplateError(SafetraceError):
    """Raised for references to unknown property templates."""


class BindingError(SafetraceError):
    """Raised when template slot bindings are missing, unknown, or invalid."""


class TaskSpecError(SafetraceError):
    """Raised when a task specification document fails validation."""


class RolloutFormatError(SafetraceError):
    """Raised when a rollout document fails schema or consistency checks."""


class ScenarioError(SafetraceError):
    """Raised for unknown scenarios or infeasible scenario parameters."""
