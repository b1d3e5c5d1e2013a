"""Error types shared across the package.

ConfigError covers bad user input (config files, CLI arguments, invalid
parameter combinations); SimulationError covers runtime invariant
violations inside the simulator or numerical routines.  The CLI maps
these to distinct exit codes.
"""


class ConfigError(ValueError):
    """Invalid configuration or request parameters."""


class SimulationError(RuntimeError):
    """A runtime invariant of the simulator or a numerical routine failed."""
