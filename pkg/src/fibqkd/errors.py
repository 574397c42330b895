"""Exception types shared across the simulator."""


class ConfigurationError(ValueError):
    """A parameter set that cannot be simulated (bad sizes, probabilities, paths)."""


class DomainError(ValueError):
    """A value outside the domain an operation is defined on."""


class ChannelCorruption(RuntimeError):
    """A classical bit that no honest configuration could have produced."""


class SchemeViolation(RuntimeError):
    """An exchange scheme that fails to let the partner decode uniquely.

    ``configuration`` holds the offending ``(pump, alice, bob)`` triple.
    """

    def __init__(self, message, configuration=None):
        super().__init__(message)
        self.configuration = configuration
