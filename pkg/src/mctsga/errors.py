"""Exception hierarchy. The CLI maps these onto exit codes."""


class MctsGaError(Exception):
    """Base class for all package errors."""


class DataError(MctsGaError, ValueError):
    """Bad input data or arguments (CLI exit code 2)."""


class StructureError(MctsGaError, ValueError):
    """Genome or model layout does not match the network spec."""


class NumericalError(MctsGaError, ArithmeticError):
    """Non-finite values during training or search (CLI exit code 3)."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch
