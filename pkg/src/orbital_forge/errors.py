"""Exception hierarchy. Each family maps to one CLI exit code."""


class OrbitalForgeError(Exception):
    exit_code = 1


class InputError(OrbitalForgeError, ValueError):
    """Malformed or out-of-range argument."""

    exit_code = 1


class SpecParseError(InputError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class PreconditionError(OrbitalForgeError):
    """An operation was called outside its domain (e.g. intransitive group)."""

    exit_code = 2


class ValidationError(OrbitalForgeError):
    """Amalgam data rejected; ``code`` names the failed condition."""

    exit_code = 2

    def __init__(self, code, message, witness=None):
        self.code = code
        self.witness = witness
        super().__init__(message)


class CapacityError(OrbitalForgeError):
    exit_code = 3

    def __init__(self, message, projected=None):
        self.projected = projected
        super().__init__(message)


class UnresolvedError(OrbitalForgeError):
    """A finite certificate could not be produced within the given caps."""

    exit_code = 4

    def __init__(self, message, partial=None):
        self.partial = partial
        super().__init__(message)


class ConsistencyError(OrbitalForgeError):
    """An internal re-check failed; indicates a bug, not bad input."""

    exit_code = 5
