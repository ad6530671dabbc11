"""Impact-echo, surface-wave and resistivity analysis plus condition maps."""

from .impact_echo import IEBands, IEResult, analyze_ie, full_thickness_frequency, ie_classify, ie_depth
from .mapping import ClassBands, ConditionGrid, DEFAULT_BANDS, grid_condition_map, render_heatmap, write_heatmap
from .resistivity import ERResult, analyze_er, er_resistivity, wenner_voltage
from .slab import NDEPhysics, SlabModel, StationSignals, synth_station_signals, validation_slab
from .spectrum import AmplitudeSpectrum, TimeSignal, amplitude_spectrum, dominant_frequency
from .surface_waves import PhaseVelocityCurve, USWResult, analyze_usw, usw_modulus, usw_phase_velocity

__all__ = [
    "AmplitudeSpectrum", "ClassBands", "ConditionGrid", "DEFAULT_BANDS", "ERResult", "IEBands", "IEResult",
    "NDEPhysics", "PhaseVelocityCurve", "SlabModel", "StationSignals", "TimeSignal", "USWResult",
    "amplitude_spectrum", "analyze_er", "analyze_ie", "analyze_usw", "dominant_frequency", "er_resistivity",
    "full_thickness_frequency", "grid_condition_map", "ie_classify", "ie_depth", "render_heatmap",
    "synth_station_signals", "usw_modulus", "usw_phase_velocity", "validation_slab", "wenner_voltage",
    "write_heatmap",
]
