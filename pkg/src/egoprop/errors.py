"""Exception types shared across the package."""


class EgopropError(Exception):
    """Base class for all errors raised by this package."""


class GraphFormatError(EgopropError):
    """Malformed graph, activation, embedding, or series input file."""


class UnknownNodeError(EgopropError):
    """An external node id does not exist in the graph."""


class ConvergenceError(EgopropError):
    """An iterative solver hit its iteration cap before reaching tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class DimensionError(EgopropError):
    """Shapes of two coupled arrays disagree."""


class DegenerateScoresError(EgopropError):
    """A metric is undefined for the given inputs (e.g. single-class AUC)."""


class MonotonicityError(EgopropError):
    """A quantity required to be nondecreasing in time decreased."""


class ConfigError(EgopropError):
    """Invalid experiment configuration."""


class CheckpointError(EgopropError):
    """Checkpoint file is corrupt, truncated, or from an unknown version."""


class TrainingDiverged(EgopropError):
    """Training loss became non-finite; carries the trace recorded so far."""

    def __init__(self, message: str, trace):
        super().__init__(message)
        self.trace = trace
