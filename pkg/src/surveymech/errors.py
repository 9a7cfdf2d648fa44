"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """An operation received arguments outside its documented domain."""


class OutOfRangeError(InvalidInputError):
    """A queried cost lies above the mechanism's cost cap."""


class SolverError(RuntimeError):
    """A solver could not produce a valid solution for a feasible-looking input."""


class ConfigError(ValueError):
    """A configuration mapping or generator descriptor is malformed."""
