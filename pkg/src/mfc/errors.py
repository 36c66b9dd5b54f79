class InputError(ValueError):
    """Malformed or inconsistent input data (CLI exit code 2)."""


class ConfigError(ValueError):
    """Invalid configuration value or key (CLI exit code 3)."""
