"""Exception types that map onto the CLI exit codes."""


class ConfigError(Exception):
    """Invalid configuration file or option combination (exit code 2)."""


class MissingResourceError(Exception):
    """A required artifact (correlation stats, trained receiver) is absent
    (exit code 3)."""


class NumericError(Exception):
    """Numeric failure such as training divergence (exit code 4)."""
