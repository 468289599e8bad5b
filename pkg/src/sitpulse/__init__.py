"""Solitary microwave pulse propagation through a dissipative qubit."""

__version__ = "0.1.0"

from .bath import DecoherenceProfile, SpectralDensity, decoherence_factor  # noqa: E402
from .dressed import QubitParams  # noqa: E402
from .lindblad import DensityMatrix2, ResponseFactor, evolve  # noqa: E402
from .numerics import Grid  # noqa: E402
from .propagation import PropagationParams, PulseState  # noqa: E402

__all__ = [
    "DecoherenceProfile",
    "DensityMatrix2",
    "Grid",
    "PropagationParams",
    "PulseState",
    "QubitParams",
    "ResponseFactor",
    "SpectralDensity",
    "decoherence_factor",
    "evolve",
]
