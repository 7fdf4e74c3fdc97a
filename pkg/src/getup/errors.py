"""Exception hierarchy. Each class maps to a distinct CLI exit code."""


class GetUpError(Exception):
    exit_code = 1


class ShapeError(GetUpError, ValueError):
    """Operand extents are inconsistent."""

    exit_code = 3


class ConfigError(GetUpError, ValueError):
    exit_code = 4


class DataError(GetUpError, ValueError):
    """Input data is degenerate or violates a data contract."""

    exit_code = 5


class PreconditionError(GetUpError, ValueError):
    exit_code = 6


class GraphStateError(GetUpError, RuntimeError):
    """backward() called without a recorded forward graph."""

    exit_code = 7


class NonFiniteError(GetUpError, FloatingPointError):
    exit_code = 8


class TrainingDiverged(GetUpError, RuntimeError):
    exit_code = 9


class CheckpointError(GetUpError, OSError):
    exit_code = 10


class GradientCheckFailed(GetUpError, AssertionError):
    exit_code = 11


# exit code for file-system failures (missing dataset files, unwritable output)
IO_EXIT_CODE = 12
