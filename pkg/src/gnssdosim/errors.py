"""Exception types shared across the simulator."""


class ConfigError(Exception):
    """Invalid or inconsistent configuration. Carries the offending key path."""

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}")


class ContractError(ValueError):
    """A caller violated an operation precondition."""


class SchedulingError(ContractError):
    """Pulse scheduling target lies in the past."""


class PsOverflowError(OverflowError):
    """Picosecond arithmetic left the supported 64-bit range."""
