"""Exception types shared across the simulator.

The CLI maps these onto process exit codes: ConfigurationError -> 2,
NumericError -> 3, FormatError and other I/O failures -> 4.
"""


class FedEDSError(Exception):
    """Base class for all simulator errors."""


class DimensionError(FedEDSError, ValueError):
    """Operand shapes are incompatible with the requested operation."""


class NumericError(FedEDSError, ArithmeticError):
    """A loss or update produced a non-finite value."""


class ConfigurationError(FedEDSError, ValueError):
    """A config value or combination of values is invalid."""


class FormatError(FedEDSError, ValueError):
    """A file does not conform to its declared binary format."""


class ProtocolError(FedEDSError, RuntimeError):
    """A federated message was used with the wrong counterpart state."""
