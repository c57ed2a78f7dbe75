"""Exception types shared across the package."""


class HemError(Exception):
    pass


class ConfigError(HemError, ValueError):
    """Bad configuration or constructor arguments."""


class ShapeError(HemError, ValueError):
    pass


class NumericalError(HemError, ArithmeticError):
    pass


class InputError(HemError, ValueError):
    """Argument outside the domain of an operation (bad action, malformed trajectory)."""


class StateError(HemError, RuntimeError):
    """Operation not valid in the current state, e.g. sampling an empty buffer."""
