"""Exception types raised across the package."""


class WlsEnoError(Exception):
    """Base class for package errors."""


class MeshError(WlsEnoError):
    """Invalid mesh input: non-manifold facet, inverted element, bad vertex id."""


class DegenerateCellError(WlsEnoError):
    """A cell with zero (or negative) measure was used in a reconstruction."""


class UnsupportedDepthError(WlsEnoError):
    """A ring depth that is not a valid increment for the mesh dimension."""


class RankDeficientError(WlsEnoError):
    """The weighted least-squares system has numerical rank zero."""


class InadmissibleStateError(WlsEnoError):
    """A non-physical Euler state (non-positive density or pressure)."""


class BoundaryError(WlsEnoError):
    """A boundary facet carries no usable condition."""


class InstabilityError(WlsEnoError):
    """The time integration produced NaN or a positivity failure."""

    def __init__(self, message: str, time: float):
        super().__init__(f"{message} (t={time:.6g})")
        self.time = time
