"""Signal primitives shared by the real-time and offline paths.

Band-pass filtering, analytic-signal instantaneous phase, and sliding-window
epoching. Everything here is a pure function over numpy arrays (plus a small
per-stream buffer class); no shared mutable state, safe from any thread.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import signal as sps

from .errors import ConfigError, DegeneratePhaseError, InputError

EEG_SAMPLE_RATE = 256.0
EEG_CHANNELS = 14
MOTION_CHANNELS = 7  # x, y, z (mm), qw, qx, qy, qz

DEFAULT_LOW_HZ = 1.0
DEFAULT_HIGH_HZ = 48.0
DEFAULT_WINDOW_S = 3.0
DEFAULT_HOP_S = 1.5

# Samples excluded at each end of a window before phase statistics, to keep
# analytic-signal edge distortion out of the correlation.
EDGE_TRIM = 32

# Minimum series length for a meaningful analytic phase.
MIN_PHASE_SAMPLES = 64

# Optional per-band mode (broadband 1-48 Hz is the default everywhere).
BANDS = {"theta": (4.0, 8.0), "alpha": (8.0, 13.0), "beta": (13.0, 30.0)}


@dataclass(frozen=True)
class FilterSpec:
    """Band-pass filter parameters.

    ``mode`` is "causal" (single forward pass, streaming-safe) or
    "zero_phase" (forward-backward, no group delay; offline only).
    """

    low_cut: float = DEFAULT_LOW_HZ
    high_cut: float = DEFAULT_HIGH_HZ
    order: int = 4
    mode: str = "causal"

    def validate(self, fs: float) -> None:
        if self.mode not in ("causal", "zero_phase"):
            raise ConfigError(f"unknown filter mode {self.mode!r}")
        if self.order < 1:
            raise ConfigError(f"filter order must be >= 1, got {self.order}")
        if not (0.0 < self.low_cut < self.high_cut < fs / 2.0):
            raise ConfigError(
                f"need 0 < low_cut < high_cut < fs/2, got "
                f"low={self.low_cut}, high={self.high_cut}, fs={fs}"
            )


@dataclass(frozen=True)
class SampleFrame:
    """One timestamped multi-channel sample on one stream (the ingest unit)."""

    stream_id: int
    timestamp_us: int
    channels: tuple[float, ...]


@dataclass(frozen=True)
class EpochWindow:
    """A fixed-length channel x sample matrix cut from one participant's stream."""

    participant_id: str  # "A" or "B"
    start_timestamp_us: int
    data: np.ndarray  # shape (channels, samples)
    sample_rate: float

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def end_timestamp_us(self) -> int:
        return self.start_timestamp_us + round(self.n_samples * 1e6 / self.sample_rate)


@lru_cache(maxsize=32)
def _design_sos(low_cut: float, high_cut: float, order: int, fs: float) -> np.ndarray:
    return sps.butter(order, [low_cut, high_cut], btype="bandpass", output="sos", fs=fs)


def apply_bandpass(spec: FilterSpec, x: np.ndarray, fs: float) -> np.ndarray:
    """Band-pass ``x`` along its last axis. Output has the input's shape."""
    spec.validate(fs)
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] < 3 * spec.order:
        raise InputError(
            f"signal too short to filter: {x.shape[-1]} samples < 3 x order {spec.order}"
        )
    sos = _design_sos(spec.low_cut, spec.high_cut, spec.order, fs)
    if spec.mode == "zero_phase":
        try:
            return sps.sosfiltfilt(sos, x, axis=-1)
        except ValueError as exc:  # too short for the default pad length
            raise InputError(str(exc)) from exc
    return sps.sosfilt(sos, x, axis=-1)


def wrap_phase(phi: np.ndarray | float) -> np.ndarray | float:
    """Wrap angles into (-pi, pi]."""
    wrapped = np.mod(phi, 2.0 * np.pi)
    return np.where(wrapped > np.pi, wrapped - 2.0 * np.pi, wrapped)


def instantaneous_phase(x: np.ndarray) -> np.ndarray:
    """Per-sample phase of the analytic signal, each value in (-pi, pi].

    The analytic signal is built in the frequency domain (negative
    frequencies zeroed, positive doubled); the input should already be
    band-limited.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] < MIN_PHASE_SAMPLES:
        raise InputError(
            f"need >= {MIN_PHASE_SAMPLES} samples for phase extraction, got {x.shape[-1]}"
        )
    if not np.any(x):
        raise DegeneratePhaseError("phase of an all-zero signal is undefined")
    analytic = sps.hilbert(x, axis=-1)
    return wrap_phase(np.angle(analytic))


class StreamBuffer:
    """Per-stream sample store tolerant of dropped samples.

    Appends must have strictly increasing timestamps. A jump of more than
    1.5 nominal sample periods closes the current contiguous segment and
    starts a new one; windows never span a gap.
    """

    def __init__(self, sample_rate: float, channel_count: int):
        self.sample_rate = float(sample_rate)
        self.channel_count = int(channel_count)
        self.period_us = 1e6 / self.sample_rate
        # Each segment: [start_timestamp_us, list-of-channel-rows]
        self._segments: list[list] = []
        self._last_ts: int | None = None
        self.gap_count = 0

    def append(self, timestamp_us: int, row) -> bool:
        """Add one sample. Returns True when this append opened a new segment."""
        row = np.asarray(row, dtype=np.float64)
        if row.shape != (self.channel_count,):
            raise InputError(
                f"expected {self.channel_count} channels, got shape {row.shape}"
            )
        if self._last_ts is not None and timestamp_us <= self._last_ts:
            raise InputError(
                f"timestamps must be strictly increasing "
                f"({timestamp_us} after {self._last_ts})"
            )
        gapped = (
            not self._segments
            or timestamp_us - self._last_ts > 1.5 * self.period_us
        )
        if gapped:
            if self._segments:
                self.gap_count += 1
            self._segments.append([int(timestamp_us), []])
        self._segments[-1][1].append(row)
        self._last_ts = int(timestamp_us)
        return gapped

    def append_frame(self, frame: SampleFrame) -> bool:
        return self.append(frame.timestamp_us, frame.channels)

    @property
    def segments(self) -> list[tuple[int, int]]:
        """(start_timestamp_us, n_samples) per contiguous segment."""
        return [(start, len(rows)) for start, rows in self._segments]

    @property
    def last_timestamp_us(self) -> int | None:
        return self._last_ts

    def sample_timestamp(self, segment_index: int, sample_index: int) -> int:
        start = self._segments[segment_index][0]
        return start + round(sample_index * self.period_us)

    def cut(self, segment_index: int, sample_index: int, n_samples: int) -> np.ndarray:
        """(channels, n_samples) matrix from one contiguous segment."""
        rows = self._segments[segment_index][1]
        if sample_index < 0 or sample_index + n_samples > len(rows):
            raise InputError("window extends past the buffered segment")
        return np.asarray(rows[sample_index : sample_index + n_samples]).T

    def locate(self, timestamp_us: int) -> tuple[int, int] | None:
        """(segment_index, sample_index) of the sample nearest ``timestamp_us``
        within half a period, or None if no such sample is buffered."""
        for seg_i, (start, rows) in enumerate(self._segments):
            idx = round((timestamp_us - start) / self.period_us)
            if 0 <= idx < len(rows):
                if abs(start + idx * self.period_us - timestamp_us) <= 0.5 * self.period_us:
                    return seg_i, idx
        return None

    def drop_before(self, timestamp_us: int) -> None:
        """Release samples strictly older than ``timestamp_us`` (memory bound)."""
        kept: list[list] = []
        for start, rows in self._segments:
            cut_idx = int(np.ceil((timestamp_us - start) / self.period_us))
            if cut_idx <= 0:
                kept.append([start, rows])
            elif cut_idx < len(rows):
                new_start = start + round(cut_idx * self.period_us)
                kept.append([new_start, rows[cut_idx:]])
        self._segments = kept


def slide_windows(
    buffer: StreamBuffer,
    window_s: float = DEFAULT_WINDOW_S,
    hop_s: float = DEFAULT_HOP_S,
    participant_id: str = "A",
) -> list[EpochWindow]:
    """All complete windows in the buffer, restarting after each gap.

    Windows start at each segment's first sample and advance by ``hop_s``;
    every window holds exactly ``window_s * sample_rate`` samples.
    """
    if hop_s <= 0 or window_s <= 0:
        raise ConfigError("window_s and hop_s must be positive")
    if hop_s > window_s:
        raise ConfigError(f"hop {hop_s}s exceeds window {window_s}s")
    fs = buffer.sample_rate
    win_n = round(window_s * fs)
    hop_n = round(hop_s * fs)
    out = []
    for seg_i, (_, n_samples) in enumerate(buffer.segments):
        idx = 0
        while idx + win_n <= n_samples:
            out.append(
                EpochWindow(
                    participant_id=participant_id,
                    start_timestamp_us=buffer.sample_timestamp(seg_i, idx),
                    data=buffer.cut(seg_i, idx, win_n),
                    sample_rate=fs,
                )
            )
            idx += hop_n
    return out
