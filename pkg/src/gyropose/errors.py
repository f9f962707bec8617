"""Exception types shared across the package."""


class GyroposeError(ValueError):
    """Base class for all domain errors raised by this package."""


class ZeroTranslation(GyroposeError):
    """Translation vector too close to zero to define a direction."""


class ZeroFocal(GyroposeError):
    """Focal parameter too close to zero to build a fundamental matrix."""


class AllZeroPolynomial(GyroposeError):
    """Polynomial has no effective degree (all coefficients ~ 0, or constant)."""


class ZeroResultant(GyroposeError):
    """Resultant vanished identically: the inputs share a common factor."""


class DegenerateSample(GyroposeError):
    """Minimal sample does not determine a unique/finite solution set."""


class TooFewSamples(GyroposeError):
    """Not enough gyro samples in the window."""


class OutOfRange(GyroposeError):
    """Requested time interval is not covered by the sample stream."""


class EmptyStream(GyroposeError):
    """Gyro stream contains no samples."""


class TooFewCorrespondences(GyroposeError):
    """Fewer correspondences than the minimal sample size."""


class NoModelFound(GyroposeError):
    """Every RANSAC trial was degenerate or rejected."""


class GenerationFailed(GyroposeError):
    """Synthetic scene generation exceeded the rejection-sampling budget."""


class EmptyInput(GyroposeError):
    """Operation requires at least one element."""
