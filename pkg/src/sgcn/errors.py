"""Exception hierarchy shared by every sgcn module."""


class SgcnError(Exception):
    """Base class for all errors raised by this package."""

    #: process exit code the CLI uses when this error escapes a subcommand
    exit_code = 1


class ShapeError(SgcnError, ValueError):
    pass


class EmptyInputError(SgcnError, ValueError):
    pass


class ContractError(SgcnError, ValueError):
    """A caller broke a documented precondition (e.g. backward on a non-scalar)."""


class NumericError(SgcnError, ArithmeticError):
    """A forward or backward pass produced NaN/Inf."""


class LabelIndexError(SgcnError, IndexError):
    pass


class ConfigError(SgcnError):
    exit_code = 2


class DataError(SgcnError):
    """Malformed or empty input files."""

    exit_code = 2


class SchemaError(SgcnError):
    """A checkpoint is truncated, incomplete, or from another format version."""

    exit_code = 2
