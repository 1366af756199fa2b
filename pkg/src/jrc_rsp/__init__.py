"""Three-dimensional (range, azimuth, Doppler) radar signal processing for an
802.11ad-style joint radar-communication receiver."""

from .params import RadarParams, Scenario, TargetSpec, load_scenario
from .fxp import FxFormat, parse_mode

__all__ = ["RadarParams", "Scenario", "TargetSpec", "load_scenario", "FxFormat", "parse_mode"]
__version__ = "0.1.0"
