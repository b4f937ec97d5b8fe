"""Division-based receiver-agnostic RF fingerprint extraction for
WiFi-style OFDM preambles: waveform generation, impairment and channel
simulation, acquisition, three division extractors, reference selection,
classification, and an experiment harness."""

__version__ = "0.1.0"

from . import (  # noqa: F401
    channel,
    classify,
    data_io,
    features,
    harness,
    impairments,
    preprocess,
    refselect,
    signals,
    waveform,
)
from .signals import ComplexSignal  # noqa: F401
