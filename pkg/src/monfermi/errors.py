"""Exception types shared across the package.

Two failure families are distinguished because they map to different CLI
exit codes: bad inputs (validation, exit 2) versus numerical breakdown
during a run (exit 3).
"""


class ParameterError(ValueError):
    """Invalid argument or configuration value."""


class DegenerateStateError(RuntimeError):
    """Orbital matrix lost full column rank; the trajectory cannot continue."""
