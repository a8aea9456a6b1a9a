"""Floquet tunnelling splittings of a driven pendulum and their resonance-assisted theory."""
__version__ = "0.1.0"

from .core import TAU, PhaseSpacePoint, SystemParams, hamiltonian, wrap_angle  # noqa: E402
from .floquet import (FloquetSpectrum, MomentumBasis, build_propagator,  # noqa: E402
                      circle_distance, diagonalize, floquet_spectrum)
from .phasespace import CoherentState, coherent_vector, husimi, overlaps, select_doublet  # noqa: E402

__all__ = [
    "TAU", "PhaseSpacePoint", "SystemParams", "hamiltonian", "wrap_angle",
    "FloquetSpectrum", "MomentumBasis", "build_propagator", "circle_distance", "diagonalize",
    "floquet_spectrum", "CoherentState", "coherent_vector", "husimi", "overlaps",
    "select_doublet",
]
