class LepkitError(Exception):
    """Base class for numerical failures raised by the package."""


class DimensionError(LepkitError, ValueError):
    """Superoperator too large for dense eigendecomposition."""


class SpectrumError(LepkitError):
    """Eigensolver failed or its residuals are out of tolerance."""


class DefectiveSpectrumError(LepkitError):
    """Operation needs a diagonalizable generator but hit an exceptional point."""


class DegenerateStationaryError(LepkitError):
    """More than one (or no) zero eigenvalue."""


class EPAmbiguityError(LepkitError):
    """Eigenvalue clusters are too close to be separated at the given tolerance."""


class IntegrationError(LepkitError):
    """Step size rejected or the integrated state drifted out of the state space."""


class ConvergenceError(LepkitError):
    """Fock truncation did not converge."""
