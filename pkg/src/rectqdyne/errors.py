"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A configuration value is missing, malformed or out of range.

    ``field`` carries the dotted path of the offending entry when known.
    """

    def __init__(self, message, field=None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)


class EmptyInputError(ValueError):
    """An averaging pipeline received no usable (kept) traces."""


class FitError(RuntimeError):
    """Nonlinear fit did not converge.

    ``diagnostics`` is a dict with per-start status, cost and message.
    """

    def __init__(self, message, diagnostics=None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)
