"""Spectrum, scattering and transport of a PT-symmetric square well with a central delta."""

from .boundstates import BoundState, bound_density, bound_states, bound_wavefunction, make_bound_state, normalization_constant
from .core import InvalidParameterError, PhysicalParams, PTWellError, SingularParameterError, WellParams, alpha_pair, reduce
from .scattering import ScatterData, TransferMatrix, scattering_coefficients, transfer_matrix, unitarity_check
from .spectrum import EPRecord, SpectralBranch, continue_branch, find_real_roots, secular_residual, trace_spectrum
from .transport import TransportProfile, bound_flux, probability_flux, transport_profile

__version__ = "0.1.0"
