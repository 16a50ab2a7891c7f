"""Exception hierarchy shared by all modules.

Each class carries the process exit code used by the CLI, so library errors
map one-to-one onto shell-visible failure categories.
"""


class EmgEvmError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1
    category = "error"


class ConfigError(EmgEvmError):
    """Invalid argument, option, or configuration value."""

    exit_code = 2
    category = "config"


class DataError(EmgEvmError):
    """Missing, malformed, or structurally inconsistent input data."""

    exit_code = 3
    category = "data"


class NumericError(EmgEvmError):
    """Degenerate numeric input or failed numeric procedure."""

    exit_code = 4
    category = "numeric"
