"""Error types raised by the solver library."""

from __future__ import annotations


class MCNFLIError(Exception):
    """Base class for every error the library raises on purpose."""


class ConfigurationError(MCNFLIError, ValueError):
    pass


class InstanceFormatError(MCNFLIError, ValueError):
    """Malformed instance text; ``line`` is 1-based (0 when not tied to a line)."""

    def __init__(self, message: str, line: int = 0):
        self.line = line
        super().__init__(f"Line {line}: {message}" if line else message)


class InstanceError(MCNFLIError, ValueError):
    """Structurally invalid instance data; ``entity`` names the offender."""

    def __init__(self, message: str, entity: str = ""):
        self.entity = entity
        super().__init__(f"{entity}: {message}" if entity else message)


class BasisError(MCNFLIError):
    pass


class SingularMatrixError(MCNFLIError):
    pass


class IterationLimitError(MCNFLIError):
    def __init__(self, limit: int, phase: int):
        self.limit = limit
        self.phase = phase
        super().__init__(f"iteration cap of {limit} exceeded in phase {phase}")


class RoundingError(MCNFLIError):
    pass


class GenerationError(MCNFLIError):
    pass


class ZeroReferenceError(MCNFLIError, ZeroDivisionError):
    def __init__(self, approx_obj: float, reference_obj: float):
        self.approx_obj = approx_obj
        self.reference_obj = reference_obj
        super().__init__(
            f"relative error undefined for reference objective {reference_obj!r} "
            f"(approximate objective {approx_obj!r})"
        )


class NodeLimitError(MCNFLIError):
    def __init__(self, limit: int):
        self.limit = limit
        super().__init__(f"branch-and-bound node limit of {limit} exceeded")
