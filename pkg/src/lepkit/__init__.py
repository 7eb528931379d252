"""Liouvillian spectra, exceptional points and relaxation engineering for Lindblad models."""

from .errors import (ConvergenceError, DefectiveSpectrumError, DegenerateStationaryError, DimensionError,
                     EPAmbiguityError, IntegrationError, LepkitError, SpectrumError)
from .liouville import (LindbladModel, Spectrum, Superoperator, build_superoperator, detect_ep,
                        eigenvalues, mode_decomposition, spectral_gap, spectrum, stationary_state,
                        steady_state, three_level_model)
from .qops import DensityMatrix, HilbertSpace, Operator, make_space
from .trajectory import Trajectory

__version__ = "0.1.0"
