"""Exception hierarchy shared by the simulator, encoders and experiment runner."""


class FBSNNError(Exception):
    """Base class for all package errors."""


class StructuralError(FBSNNError, ValueError):
    """Array shapes or sizes are inconsistent with the network layout."""


class NumericalDivergenceError(FBSNNError, FloatingPointError):
    """A state variable became NaN or infinite during simulation."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class EncodingSaturationError(FBSNNError, ValueError):
    """A requested rate implies a per-step spike probability above one."""


class ConfigurationError(FBSNNError, ValueError):
    """Invalid experiment or parameter configuration."""
