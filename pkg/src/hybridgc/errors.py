"""Exception types shared across the simulator."""


class SimulatorError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(SimulatorError):
    """A configuration value is malformed or inconsistent."""


class AddressRangeError(SimulatorError):
    """An address falls outside the managed heap range."""


class OutOfChunks(SimulatorError):
    """A chunk free list has no chunk left to hand out."""


class DoubleFree(SimulatorError):
    """A chunk that is not in use was released."""


class HeapExhausted(SimulatorError):
    """Allocation cannot be satisfied even after collecting."""


class TraceError(SimulatorError):
    """A trace line or replayed operation is invalid.

    Carries enough position information to point at the offending input.
    """

    def __init__(self, message: str, *, line: int | None = None, op_index: int | None = None):
        super().__init__(message)
        self.line = line
        self.op_index = op_index

    def __str__(self) -> str:  # pragma: no cover - formatting only
        msg = super().__str__()
        if self.line is not None:
            msg = f"line {self.line}: {msg}"
        if self.op_index is not None:
            msg = f"op {self.op_index}: {msg}"
        return msg


class GcLogicError(SimulatorError):
    """A collection phase was requested that the configured collector lacks."""


class RateUndefined(SimulatorError):
    """A rate was requested over a zero-length interval."""
