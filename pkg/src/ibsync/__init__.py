"""Real-time inter-brain synchrony engine.

Computes a circular-correlation synchrony metric from two multi-channel EEG
streams, gates it on motion artifacts, quantizes it into five feedback
levels, and drives visual/auditory/haptic feedback. Includes an offline
post-study analysis pipeline and a synthetic dual-EEG source so the whole
system runs without lab hardware.
"""

from .errors import (
    ConfigError,
    DegeneratePhaseError,
    FramingError,
    GapError,
    IbsyncError,
    InputError,
    InsufficientChannelsError,
    ReplayError,
)
from .feedback import (
    ChordSpec,
    DEFAULT_BIN_EDGES,
    HapticPattern,
    OSC_ADDRESS,
    RingSpec,
    encode_osc,
    map_audio,
    map_haptic,
    map_visual,
    quantize_level,
)
from .metric import IbsMetric, ccorr, circular_mean, compute_ibs, fisher_z, inverse_fisher_z, pool_top_k
from .motion import (
    MotionGate,
    MotionSample,
    MotionVerdict,
    classify_segment,
    estimate_velocities,
    gate,
)
from .signals import (
    EEG_CHANNELS,
    EEG_SAMPLE_RATE,
    EpochWindow,
    FilterSpec,
    SampleFrame,
    StreamBuffer,
    apply_bandpass,
    instantaneous_phase,
    slide_windows,
    wrap_phase,
)
from .synth import ArtifactBurst, SynthConfig, SynthSource, synthesize

__version__ = "0.1.0"

__all__ = [
    "ArtifactBurst",
    "ChordSpec",
    "ConfigError",
    "DEFAULT_BIN_EDGES",
    "DegeneratePhaseError",
    "EEG_CHANNELS",
    "EEG_SAMPLE_RATE",
    "EpochWindow",
    "FilterSpec",
    "FramingError",
    "GapError",
    "HapticPattern",
    "IbsMetric",
    "IbsyncError",
    "InputError",
    "InsufficientChannelsError",
    "MotionGate",
    "MotionSample",
    "MotionVerdict",
    "OSC_ADDRESS",
    "ReplayError",
    "RingSpec",
    "SampleFrame",
    "StreamBuffer",
    "SynthConfig",
    "SynthSource",
    "apply_bandpass",
    "ccorr",
    "circular_mean",
    "classify_segment",
    "compute_ibs",
    "encode_osc",
    "estimate_velocities",
    "fisher_z",
    "gate",
    "instantaneous_phase",
    "inverse_fisher_z",
    "map_audio",
    "map_haptic",
    "map_visual",
    "pool_top_k",
    "quantize_level",
    "slide_windows",
    "synthesize",
    "wrap_phase",
]
