"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigurationError -> 2,
ProtocolError -> 3, DivergenceError -> 4.
"""


class PriorpaintError(Exception):
    """Base class for all package errors."""


class ConfigurationError(PriorpaintError):
    """Invalid or inconsistent configuration (bad sizes, unknown keys, ...)."""


class DimensionError(PriorpaintError):
    """Tensor shapes violate an interface contract."""


class ProtocolError(PriorpaintError):
    """Data or evaluation-protocol violation (missing ids, out-of-range ratios)."""


class MaskGenerationError(ProtocolError):
    """Mask generator failed to hit the requested coverage bucket."""

    def __init__(self, message, achieved_ratio=None):
        super().__init__(message)
        self.achieved_ratio = achieved_ratio


class UnsupportedBackboneError(ConfigurationError):
    """Requested teacher backbone layout is not registered."""


class CheckpointError(PriorpaintError):
    """Checkpoint file missing, corrupted, or of an incompatible schema."""


class DivergenceError(PriorpaintError):
    """Training produced a non-finite loss; carries a diagnostic report."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
