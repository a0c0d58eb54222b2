"""Exception types raised by the library."""


class GradedNormsError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(GradedNormsError, ValueError):
    pass


class CombinatorialBlowup(GradedNormsError, ValueError):
    """Raised when an exhaustive subset sweep would be too large."""


class InvalidNormSpec(GradedNormsError, ValueError):
    pass


class NotInSubspace(GradedNormsError, ValueError):
    """Raised when a vector is not supported inside the required index set."""


class NonConvergence(GradedNormsError, RuntimeError):
    """An optimization-backed evaluation failed its accuracy certificate.

    Attributes
    ----------
    gap : float
        The best gap (or constraint violation) that was achieved.
    """

    def __init__(self, message, gap=float("nan")):
        super().__init__(f"{message} (achieved gap {gap:.3e})")
        self.gap = gap
