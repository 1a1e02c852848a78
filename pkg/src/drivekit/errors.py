"""Exception hierarchy. Every error carries a stable machine-readable code."""


class DrivekitError(Exception):
    code = "ERROR"

    def __init__(self, message: str = ""):
        super().__init__(message)
        self.message = message

    def to_dict(self) -> dict:
        return {"error": self.code, "message": self.message}


class SchemaError(DrivekitError):
    code = "SCHEMA_ERROR"


class RefError(DrivekitError):
    code = "REF_ERROR"


class LengthError(DrivekitError):
    code = "LENGTH_ERROR"


class TopologyCycleError(DrivekitError):
    code = "TOPOLOGY_CYCLE"


class DegenerateError(DrivekitError):
    code = "DEGENERATE"


class InsufficientFutureError(DrivekitError):
    code = "INSUFFICIENT_FUTURE"


class AlignError(DrivekitError):
    code = "ALIGN_ERROR"


class NoLaneError(DrivekitError):
    code = "NO_LANE"


class ParamError(DrivekitError):
    code = "PARAM_ERROR"


class MagicError(DrivekitError):
    code = "MAGIC_ERROR"


class VersionError(DrivekitError):
    code = "VERSION_ERROR"


class TruncatedError(DrivekitError):
    code = "TRUNCATED"


class FormatError(DrivekitError):
    code = "FORMAT_ERROR"
