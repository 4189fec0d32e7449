"""Cross-resonance gate metrics for capacitively coupled fluxonium qubits."""

__version__ = "0.1.0"

from .fluxonium import (
    FluxoniumParams,
    FluxoniumSpectrum,
    WellGeometry,
    diagonalize,
    transition_frequency,
    well_geometry,
)

__all__ = [
    "FluxoniumParams",
    "FluxoniumSpectrum",
    "WellGeometry",
    "diagonalize",
    "transition_frequency",
    "well_geometry",
    "__version__",
]
