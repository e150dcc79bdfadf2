"""Exception hierarchy shared by every component, plus the CLI exit codes."""

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_USAGE = 2
EXIT_MISSING_FILE = 3
EXIT_CONFIG = 4
EXIT_NON_FINITE = 5
EXIT_CHECKPOINT = 6
EXIT_DATA = 7
EXIT_GRADCHECK = 8


class SailError(Exception):
    """Base class for all localizer errors."""

    exit_code = EXIT_UNEXPECTED


class ShapeError(SailError, ValueError):
    """Dimension mismatch; names the component that rejected the input."""

    exit_code = EXIT_DATA

    def __init__(self, component: str, message: str):
        self.component = component
        super().__init__(f"{component}: {message}")


class EmptyInputError(SailError, ValueError):
    exit_code = EXIT_DATA


class GraphCycleError(SailError, RuntimeError):
    """The recorded computation graph is not a DAG."""


class NonFiniteError(SailError, FloatingPointError):
    exit_code = EXIT_NON_FINITE


class ConfigError(SailError, ValueError):
    exit_code = EXIT_CONFIG


class CheckpointError(SailError, ValueError):
    exit_code = EXIT_CHECKPOINT


class DataError(SailError, ValueError):
    exit_code = EXIT_DATA


class GradCheckFailed(SailError):
    exit_code = EXIT_GRADCHECK
