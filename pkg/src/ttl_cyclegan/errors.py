"""Exception hierarchy. Every error carries a short machine-readable ``code``."""


class TTLError(Exception):
    code = "ERROR"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)

    def tag(self) -> str:
        """Single-line ``CODE: message`` form used on stderr by the CLI."""
        msg = " ".join(str(self).split())
        return f"{self.code}: {msg}"


class MalformedConfig(TTLError):
    code = "MALFORMED_CONFIG"


class InvalidValue(TTLError):
    code = "INVALID_VALUE"


class IOFailure(TTLError):
    code = "IO_FAILURE"


class VersionMismatch(TTLError):
    code = "VERSION_MISMATCH"


class MissingCheckpoint(TTLError):
    code = "MISSING_CHECKPOINT"


class CorruptCheckpoint(TTLError):
    code = "CORRUPT_CHECKPOINT"


class MissingDistance(TTLError):
    code = "MISSING_DISTANCE"


class NonPositiveDistance(TTLError):
    code = "NONPOSITIVE_DISTANCE"


class EmptyClass(TTLError):
    code = "EMPTY_CLASS"


class InvalidSpec(TTLError):
    code = "INVALID_SPEC"


class ShapeMismatch(TTLError):
    code = "SHAPE_MISMATCH"


class NonFiniteInput(TTLError):
    code = "NON_FINITE_INPUT"


class LabelOutOfRange(TTLError):
    code = "LABEL_OUT_OF_RANGE"


class DataEmpty(TTLError):
    code = "DATA_EMPTY"


class FrozenViolation(TTLError):
    code = "FROZEN_VIOLATION"


class LabelLeak(TTLError):
    code = "LABEL_LEAK"


class FractionOutOfRange(TTLError):
    code = "FRACTION_OUT_OF_RANGE"


class NonFiniteGradient(TTLError):
    code = "NON_FINITE_GRADIENT"


class Diverged(TTLError):
    code = "DIVERGED"


class DimensionMismatch(TTLError):
    code = "DIMENSION_MISMATCH"


class UnknownExtractor(TTLError):
    code = "UNKNOWN_EXTRACTOR"
