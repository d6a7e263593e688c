"""Exception types shared across the package.

The CLI maps these onto exit codes, so library code should raise the most
specific class that applies.
"""


class ConfigError(ValueError):
    """Invalid configuration: bad field value, unknown key, malformed file."""


class NumericsError(RuntimeError):
    """A numerical procedure failed: grid cap exceeded, non-finite state, ..."""


class FitError(NumericsError):
    """A fitting routine could not produce a valid estimate."""


class OrbitSearchError(NumericsError):
    """No periodic orbit satisfying the search tolerance was found."""


class GridCapError(NumericsError):
    """The adaptive momentum lattice would exceed its hard size cap."""
