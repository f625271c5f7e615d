import sys
from typing import Sequence


class SaydreamError(Exception):
    """Base class for every error raised by the saydream library."""
    pass


class ShapeError(SaydreamError, ValueError):
    """
    Raised when the operand shapes of an operation do not conform. The
    message always names both offending shapes.
    """
    def __init__(self, op: str, shape_a: Sequence[int],
                 shape_b: Sequence[int], detail: str = ''):
        msg = f'{op}: shape mismatch {tuple(shape_a)} vs {tuple(shape_b)}'
        if (detail):
            msg += f' ({detail})'
        super().__init__(msg)
        self.shape_a = tuple(shape_a)
        self.shape_b = tuple(shape_b)


class NonFiniteError(SaydreamError, ArithmeticError):
    """Raised when an operation produces NaN or Inf values."""
    def __init__(self, where: str):
        super().__init__(f'non-finite values produced by {where}')
        self.where = where


class TapeConsumedError(SaydreamError, RuntimeError):
    """Raised on a second backward pass through an already freed graph."""
    pass


class MissingGradError(SaydreamError, RuntimeError):
    """Raised when the optimizer meets a parameter without a gradient."""
    pass


class LayoutError(SaydreamError):
    """Raised when no valid simulator layout can be sampled."""
    pass


class DatasetError(SaydreamError, OSError):
    """Raised on dataset / artifact I/O failures. Always carries the path."""
    def __init__(self, path: str, reason: str):
        super().__init__(f'{path}: {reason}')
        self.path = path


class CheckpointError(SaydreamError):
    """Raised for malformed or mismatching checkpoints."""
    pass


class DivergenceError(SaydreamError):
    """Raised when a training loss turns non-finite."""
    pass


class ConfigError(SaydreamError, ValueError):
    """Raised for unknown or invalid configuration entries."""
    pass


def error(*args, **kwargs) -> None:
    """
    Print an error message and exit with the runtime error code (3). All
    arguments and keyword-arguments given are in the format of the Python
    print statement
    """
    print("ERROR:", end=' ', file=sys.stderr)
    print(*args, **kwargs, file=sys.stderr)
    raise SystemExit(3)


def warning(*args, **kwargs) -> None:
    """
    Print a warning message and continue. All arguments and keyword-arguments
    given are in the format of the Python print statement
    """
    print("WARNING:", end=' ', file=sys.stderr)
    print(*args, **kwargs, file=sys.stderr)
