"""Error hierarchy shared by all modules.

Each class maps to a distinct CLI exit code so that stage failures are
distinguishable by scripts (see cli.EXIT_CODES).
"""


class ObeseBwError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1

    def __init__(self, message, stage=None):
        self.stage = stage
        if stage:
            message = "[%s] %s" % (stage, message)
        super().__init__(message)


class ParseError(ObeseBwError):
    """Malformed input document or constraint string."""

    exit_code = 2


class ValidationError(ObeseBwError):
    """Well-formed input violating a semantic precondition."""

    exit_code = 3


class ResourceError(ObeseBwError):
    """A configured resource cap (regions, avatars, enumeration) was hit."""

    exit_code = 4


class InternalConsistencyError(ObeseBwError):
    """A pipeline invariant failed; indicates a bug, not bad input."""

    exit_code = 5
