"""Exception types shared across modules; the CLI maps them to exit codes."""


class ResourceCapError(ValueError):
    """A requested computation exceeds a configured size cap."""


class InvariantViolation(RuntimeError):
    """A physical or numerical invariant failed during a run."""


class ConfigError(ValueError):
    """Invalid experiment configuration."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")
