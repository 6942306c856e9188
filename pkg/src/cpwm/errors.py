"""Exception hierarchy shared by every solver module.

Each class carries the CLI exit code it maps to so the front end can turn any
module error into a machine-readable failure without a lookup table.
"""


class CpwmError(Exception):
    """Base class for all solver errors."""

    exit_code = 1
    kind = "error"


class InvalidModelError(CpwmError, ValueError):
    kind = "invalid_model"


class InvalidInputError(CpwmError, ValueError):
    kind = "invalid_input"


class ClosedChannelError(CpwmError, ValueError):
    """Energy at or below an asymptotic potential value."""

    kind = "closed_channel"


class TurningPointError(CpwmError, ValueError):
    """Energy at or below the effective trajectory potential."""

    kind = "turning_point"


class ConfigError(CpwmError, ValueError):
    kind = "config"

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class SequencingError(CpwmError, RuntimeError):
    """Grid shift requested off-cycle (internal bug, never user input)."""

    kind = "sequencing"


class DivergenceError(CpwmError, ArithmeticError):
    exit_code = 2
    kind = "divergence"


class ComparisonError(CpwmError):
    """A computed probability missed its reference value."""

    exit_code = 3
    kind = "comparison"


class NonConvergenceError(CpwmError):
    exit_code = 4
    kind = "non_convergence"
