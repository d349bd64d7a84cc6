"""Single-atom phase shift and extinction of a strongly focused probe beam."""

from .focus import FocusGeometry, dipole_overlap_ratio, phase_vs_focusing, scattering_ratio
from .interferometer import MZIConfig, PowerPair, SpectrumRecord, simulate_sequence
from .lineshape import (AtomicTransition, LineshapeParams, amplitude_ratio, phase_extremum,
                        phase_shift, transmission_model)
from .motion import PositionSpread, TrapConfig, effective_scattering_ratio, thermal_sigma

__all__ = [
    "AtomicTransition", "FocusGeometry", "LineshapeParams", "MZIConfig", "PositionSpread",
    "PowerPair", "SpectrumRecord", "TrapConfig", "amplitude_ratio", "dipole_overlap_ratio",
    "effective_scattering_ratio", "phase_extremum", "phase_shift", "phase_vs_focusing",
    "scattering_ratio", "simulate_sequence", "thermal_sigma", "transmission_model",
]
