"""Exception hierarchy.

Every error raised deliberately by the library derives from :class:`MorError`.
The CLI maps the four families (config, data, numerical, I/O) onto distinct
exit codes.
"""


class MorError(Exception):
    """Base class for all library errors."""


class ContractError(MorError, ValueError):
    """A caller violated a shape or range precondition."""


class ConfigError(MorError):
    """Invalid run configuration or stage ordering."""


class StageOrderError(ConfigError):
    """A training stage was requested before its prerequisite."""


class DataError(MorError):
    """Snapshot data is inconsistent or missing."""


class RangeError(DataError, ValueError):
    """A parameter lies outside the unit box."""


class FileFormatError(DataError):
    """A MORSNAP1/MORBDL1 file could not be decoded."""


class MagicError(FileFormatError):
    """Magic bytes or format version do not match."""


class StructureError(FileFormatError):
    """Header and payload disagree (dims, offsets, lengths)."""


class TruncatedError(StructureError):
    """The file ends before the header-declared payload does."""


class ChecksumError(FileFormatError):
    """CRC-32 over the payload does not match the stored value."""


class NumericalError(MorError, ArithmeticError):
    """A numerical procedure failed."""


class SingularMatrixError(NumericalError):
    def __init__(self, pivot_index: int, pivot: float):
        super().__init__(f"matrix is singular to working precision at pivot {pivot_index} (|pivot|={pivot:.3e})")
        self.pivot_index = pivot_index
        self.pivot = pivot


class ConvergenceError(NumericalError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class TrainingError(NumericalError):
    """Non-finite gradients or losses during optimization."""
