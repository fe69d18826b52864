"""Exception hierarchy for PixelNav"""


class PixelNavError(Exception):
    """Base class for all PixelNav errors"""


class ConfigError(PixelNavError, ValueError):
    """Configuration could not be parsed or is inconsistent"""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InvalidConfig(PixelNavError, ValueError):
    """A configuration value violates its documented range"""


class CheckpointError(PixelNavError):
    """Checkpoint file is missing, corrupt or of an unknown version"""


# Trajectory geometry
class DuplicateKnot(PixelNavError, ValueError):
    """Two spline knots share a frame index"""


class TooFewKnots(PixelNavError, ValueError):
    """A spline needs at least two knots"""


class OutOfRange(PixelNavError, ValueError):
    """An index or coordinate lies outside its valid range"""


# Actions
class InvalidAction(PixelNavError, ValueError):
    """Action id outside 1..9"""


class InvalidDistribution(PixelNavError, ValueError):
    """Probability vector has a negative entry or does not sum to one"""


# Dataset
class SpecOutOfRange(PixelNavError, ValueError):
    """Episode window does not fit inside the trajectory span"""


class EmptyCorpus(PixelNavError, ValueError):
    """No trajectories or episodes to work with"""


# Tensor engine
class ShapeMismatch(PixelNavError, ValueError):
    """Operands have incompatible shapes"""


class NonFiniteValue(PixelNavError, FloatingPointError):
    """NaN or Inf detected while debug checks are enabled"""


# Models / training
class AllFramesMasked(PixelNavError, ValueError):
    """An observation clip has no valid frame"""


class EmptyBatch(PixelNavError, ValueError):
    """A loss was asked to reduce over zero transitions"""


class UntrainedModel(PixelNavError):
    """Model parameters were never initialised from training or a checkpoint"""


# Rollout / metrics
class TooFewPoints(PixelNavError, ValueError):
    """Extrapolation needs at least two observed points"""


class LengthMismatch(PixelNavError, ValueError):
    """Predicted and ground-truth sequences differ in length"""


class EmptyTrajectory(PixelNavError, ValueError):
    """A trajectory passed to a metric is empty"""


class TooFewPairs(PixelNavError, ValueError):
    """Signed-rank test needs at least five non-zero paired differences"""


class NoNonzeroDifferences(TooFewPairs):
    """All paired differences are zero"""
