"""Synthetic dual-EEG and motion source with controllable phase coupling.

Stands in for two live participants: per channel, participant A's phase is a
band-limited random-walk oscillator; participant B's phase blends A's with an
independent oscillator through the coupling factor, so coupling 0 emulates
unrelated brains and coupling near 1 emulates strong synchrony. Signals are
sin(phase) plus 1/f noise. Scheduled artifact bursts add large low-frequency
EEG deflections and super-threshold velocities on the motion stream.

Not a biophysical EEG model; a controllable ground truth for desk testing.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from scipy import signal as sps

from .errors import ConfigError
from .signals import EEG_CHANNELS, EEG_SAMPLE_RATE, MOTION_CHANNELS, SampleFrame
from .wire import STREAM_EEG_A, STREAM_EEG_B, STREAM_MOTION_A, STREAM_MOTION_B

BAND_CENTER_HZ = {"theta": 6.0, "alpha": 10.5, "beta": 21.5}
BAND_FREQ_JITTER_HZ = {"theta": 1.0, "alpha": 1.2, "beta": 3.0}

# Frequency jitter is an Ornstein-Uhlenbeck walk with this time constant;
# it sets how fast uncoupled oscillators drift apart within a window.
FREQ_JITTER_TAU_S = 0.35

PHASE_NOISE_SD_RAD = 0.15  # scaled by (1 - coupling) so coupling 1 stays exact

MOTION_SAMPLE_RATE = 100.0
CHUNK_S = 0.25  # 64 EEG samples + 25 motion samples at the defaults

ARTIFACT_EEG_UV = 150.0
ARTIFACT_EEG_HZ = 2.0
ARTIFACT_LINEAR_MM_S = 400.0
ARTIFACT_ANGULAR_RAD_S = 2.0

# Quiet-baseline wander, far below the 200 mm/s / 1 rad/s thresholds.
BASELINE_POS_MM = 0.5
BASELINE_POS_HZ = 0.3
BASELINE_ANGLE_RAD = 0.002
BASELINE_ANGLE_HZ = 0.2

# 1/f amplitude shaping of white noise (first-order IIR cascade).
_PINK_B = np.array([0.049922035, -0.095993537, 0.050612699, -0.004408786])
_PINK_A = np.array([1.0, -2.494956002, 2.017265875, -0.522189400])


@dataclass(frozen=True)
class ArtifactBurst:
    start_s: float
    duration_s: float
    participant: str  # "A" or "B"

    @property
    def end_s(self) -> float:
        return self.start_s + self.duration_s


@dataclass(frozen=True)
class SynthConfig:
    duration_s: float
    sample_rate: float = EEG_SAMPLE_RATE
    coupling: float = 0.7
    carrier_band: str = "alpha"
    carrier_uv: float = 20.0
    noise_sigma: float = 4.0  # uV of 1/f noise
    artifact_schedule: tuple[ArtifactBurst, ...] = ()
    motion_rate: float = MOTION_SAMPLE_RATE

    def validate(self) -> None:
        if self.duration_s <= 0:
            raise ConfigError("duration must be positive")
        if not 0.0 <= self.coupling <= 1.0:
            raise ConfigError(f"coupling must be in [0, 1], got {self.coupling}")
        if self.carrier_band not in BAND_CENTER_HZ:
            raise ConfigError(f"unknown carrier band {self.carrier_band!r}")
        for burst in self.artifact_schedule:
            if burst.participant not in ("A", "B"):
                raise ConfigError(f"burst participant must be A or B, got {burst.participant!r}")
            if burst.start_s < 0 or burst.end_s > self.duration_s:
                raise ConfigError(f"burst {burst} outside the session duration")


@dataclass
class SynthResult:
    """Generated session: channel x sample EEG, 7 x sample motion, truth trace."""

    config: SynthConfig
    seed: int
    eeg: dict  # "A"/"B" -> (channels, n) float
    eeg_ts_us: np.ndarray
    motion: dict  # "A"/"B" -> (7, m) float
    motion_ts_us: np.ndarray
    coupling_trace: list  # (timestamp_us, coupling) change points

    def frames(self) -> Iterator[SampleFrame]:
        """All frames merged in (timestamp, stream id) order."""

        def stream(ids_ts, stream_id, data):
            # float32 quantization here, exactly as the wire format carries it,
            # so a recorded session replays bit-identically to the live feed
            quantized = data.astype(np.float32)
            for i, ts in enumerate(ids_ts):
                yield (int(ts), stream_id), SampleFrame(
                    stream_id=stream_id,
                    timestamp_us=int(ts),
                    channels=tuple(float(v) for v in quantized[:, i]),
                )

        merged = heapq.merge(
            stream(self.eeg_ts_us, STREAM_EEG_A, self.eeg["A"]),
            stream(self.eeg_ts_us, STREAM_EEG_B, self.eeg["B"]),
            stream(self.motion_ts_us, STREAM_MOTION_A, self.motion["A"]),
            stream(self.motion_ts_us, STREAM_MOTION_B, self.motion["B"]),
            key=lambda pair: pair[0],
        )
        for _, frame in merged:
            yield frame


class _PhaseWalker:
    """One participant-worth of independent band-limited phase oscillators."""

    def __init__(self, rng: np.random.Generator, band: str, fs: float, channels: int):
        self.rng = rng
        self.fs = fs
        self.center_hz = BAND_CENTER_HZ[band]
        sd = BAND_FREQ_JITTER_HZ[band]
        dt = 1.0 / fs
        self.ar = float(np.exp(-dt / FREQ_JITTER_TAU_S))
        self.innovation_sd = sd * float(np.sqrt(1.0 - self.ar**2))
        self.jitter = rng.normal(0.0, sd, size=channels)  # stationary start
        self.phase = rng.uniform(-np.pi, np.pi, size=channels)

    def increments(self, n: int) -> np.ndarray:
        """Phase increments (channels, n); advances internal state."""
        white = self.rng.normal(0.0, self.innovation_sd, size=(len(self.jitter), n))
        zi = (self.ar * self.jitter)[:, None]
        jitter, _ = sps.lfilter([1.0], [1.0, -self.ar], white, axis=-1, zi=zi)
        self.jitter = jitter[:, -1]
        freq = self.center_hz + jitter
        return 2.0 * np.pi * freq / self.fs


class _PinkNoise:
    """1/f-shaped Gaussian noise, continuous across chunks."""

    def __init__(self, rng: np.random.Generator, channels: int, sigma: float):
        self.rng = rng
        self.sigma = float(sigma)
        impulse = np.zeros(8192)
        impulse[0] = 1.0
        gain = float(np.sqrt(np.sum(sps.lfilter(_PINK_B, _PINK_A, impulse) ** 2)))
        self.scale = self.sigma / gain if gain > 0 else 0.0
        self.zi = np.zeros((channels, max(len(_PINK_A), len(_PINK_B)) - 1))

    def chunk(self, n: int) -> np.ndarray:
        white = self.rng.normal(0.0, 1.0, size=(self.zi.shape[0], n))
        shaped, self.zi = sps.lfilter(_PINK_B, _PINK_A, white, axis=-1, zi=self.zi)
        return self.scale * shaped


class SynthSource:
    """Chunked generator; the coupling factor may change between chunks.

    Deterministic: one (config, seed) pair always yields bit-identical
    streams for the same sequence of set_coupling calls.
    """

    def __init__(self, config: SynthConfig, seed: int = 0):
        config.validate()
        self.config = config
        self.seed = int(seed)
        self.coupling = float(config.coupling)
        self.coupling_trace: list[tuple[int, float]] = [(0, self.coupling)]

        seeds = np.random.SeedSequence(self.seed).spawn(5)
        rngs = [np.random.default_rng(s) for s in seeds]
        self.walker_a = _PhaseWalker(rngs[0], config.carrier_band, config.sample_rate, EEG_CHANNELS)
        self.walker_b = _PhaseWalker(rngs[1], config.carrier_band, config.sample_rate, EEG_CHANNELS)
        self.pink_a = _PinkNoise(rngs[2], EEG_CHANNELS, config.noise_sigma)
        self.pink_b = _PinkNoise(rngs[3], EEG_CHANNELS, config.noise_sigma)
        self.phase_rng = rngs[4]

        self._phase_a = self.walker_a.phase.copy()
        self._phase_b = (
            self.coupling * self.walker_a.phase
            + (1.0 - self.coupling) * self.walker_b.phase
        )
        self._eeg_index = 0
        self._motion_index = 0
        self._chunk_eeg = round(CHUNK_S * config.sample_rate)
        self._chunk_motion = round(CHUNK_S * config.motion_rate)
        self._total_eeg = round(config.duration_s * config.sample_rate)
        self._total_motion = round(config.duration_s * config.motion_rate)

    def set_coupling(self, coupling: float) -> None:
        if not 0.0 <= coupling <= 1.0:
            raise ConfigError(f"coupling must be in [0, 1], got {coupling}")
        self.coupling = float(coupling)
        t_us = round(self._eeg_index * 1e6 / self.config.sample_rate)
        self.coupling_trace.append((t_us, self.coupling))

    @property
    def exhausted(self) -> bool:
        return self._eeg_index >= self._total_eeg

    def _burst_mask(self, t_s: np.ndarray, participant: str) -> np.ndarray:
        mask = np.zeros(t_s.shape, dtype=bool)
        for burst in self.config.artifact_schedule:
            if burst.participant == participant:
                mask |= (t_s >= burst.start_s) & (t_s < burst.end_s)
        return mask

    def _burst_offset_s(self, t_s: np.ndarray, participant: str) -> np.ndarray:
        """Seconds since the start of the covering burst (0 outside bursts)."""
        offset = np.zeros(t_s.shape)
        for burst in self.config.artifact_schedule:
            if burst.participant == participant:
                inside = (t_s >= burst.start_s) & (t_s < burst.end_s)
                offset[inside] = t_s[inside] - burst.start_s
        return offset

    def next_chunk(self):
        """(eeg_a, eeg_b, eeg_ts_us, motion_a, motion_b, motion_ts_us) or None."""
        if self.exhausted:
            return None
        cfg = self.config
        n = min(self._chunk_eeg, self._total_eeg - self._eeg_index)
        m = min(self._chunk_motion, self._total_motion - self._motion_index)

        inc_a = self.walker_a.increments(n)
        inc_b_ind = self.walker_b.increments(n)
        k = self.coupling
        inc_b = k * inc_a + (1.0 - k) * inc_b_ind
        phase_a = self._phase_a[:, None] + np.cumsum(inc_a, axis=-1)
        phase_b = self._phase_b[:, None] + np.cumsum(inc_b, axis=-1)
        self._phase_a = phase_a[:, -1].copy()
        self._phase_b = phase_b[:, -1].copy()
        phase_noise = self.phase_rng.normal(0.0, PHASE_NOISE_SD_RAD, size=phase_b.shape)

        eeg_a = cfg.carrier_uv * np.sin(phase_a) + self.pink_a.chunk(n)
        eeg_b = cfg.carrier_uv * np.sin(phase_b + (1.0 - k) * phase_noise) + self.pink_b.chunk(n)

        eeg_idx = np.arange(self._eeg_index, self._eeg_index + n)
        eeg_t_s = eeg_idx / cfg.sample_rate
        eeg_ts_us = np.round(eeg_idx * 1e6 / cfg.sample_rate).astype(np.int64)
        for participant, eeg in (("A", eeg_a), ("B", eeg_b)):
            mask = self._burst_mask(eeg_t_s, participant)
            if np.any(mask):
                offs = self._burst_offset_s(eeg_t_s, participant)
                deflection = ARTIFACT_EEG_UV * np.sin(2.0 * np.pi * ARTIFACT_EEG_HZ * offs)
                eeg[:, mask] += deflection[mask]

        motion_idx = np.arange(self._motion_index, self._motion_index + m)
        motion_t_s = motion_idx / cfg.motion_rate
        motion_ts_us = np.round(motion_idx * 1e6 / cfg.motion_rate).astype(np.int64)
        motion = {
            "A": self._motion_rows(motion_t_s, "A"),
            "B": self._motion_rows(motion_t_s, "B"),
        }

        self._eeg_index += n
        self._motion_index += m
        return eeg_a, eeg_b, eeg_ts_us, motion["A"], motion["B"], motion_ts_us

    def _motion_rows(self, t_s: np.ndarray, participant: str) -> np.ndarray:
        """7 x n rows: x, y, z (mm), qw, qx, qy, qz."""
        rows = np.zeros((MOTION_CHANNELS, t_s.size))
        phase_shift = 0.0 if participant == "A" else np.pi / 3.0
        rows[0] = BASELINE_POS_MM * np.sin(2.0 * np.pi * BASELINE_POS_HZ * t_s + phase_shift)
        rows[1] = BASELINE_POS_MM * np.sin(2.0 * np.pi * BASELINE_POS_HZ * t_s * 0.7)
        angle = BASELINE_ANGLE_RAD * np.sin(2.0 * np.pi * BASELINE_ANGLE_HZ * t_s + phase_shift)

        mask = self._burst_mask(t_s, participant)
        if np.any(mask):
            offs = self._burst_offset_s(t_s, participant)
            burst_pos = (
                ARTIFACT_LINEAR_MM_S
                / (2.0 * np.pi * ARTIFACT_EEG_HZ)
                * np.sin(2.0 * np.pi * ARTIFACT_EEG_HZ * offs)
            )
            rows[0, mask] += burst_pos[mask]
            angle = angle + np.where(mask, ARTIFACT_ANGULAR_RAD_S * offs, 0.0)

        rows[3] = np.cos(angle / 2.0)  # qw; rotation about z
        rows[6] = np.sin(angle / 2.0)  # qz
        return rows


def synthesize(config: SynthConfig, seed: int = 0) -> SynthResult:
    """Run a source to completion and stack the chunks."""
    source = SynthSource(config, seed)
    eeg_a, eeg_b, eeg_ts = [], [], []
    mot_a, mot_b, mot_ts = [], [], []
    while (chunk := source.next_chunk()) is not None:
        a, b, ts, ma, mb, mts = chunk
        eeg_a.append(a)
        eeg_b.append(b)
        eeg_ts.append(ts)
        mot_a.append(ma)
        mot_b.append(mb)
        mot_ts.append(mts)
    return SynthResult(
        config=config,
        seed=seed,
        eeg={"A": np.concatenate(eeg_a, axis=-1), "B": np.concatenate(eeg_b, axis=-1)},
        eeg_ts_us=np.concatenate(eeg_ts),
        motion={"A": np.concatenate(mot_a, axis=-1), "B": np.concatenate(mot_b, axis=-1)},
        motion_ts_us=np.concatenate(mot_ts),
        coupling_trace=list(source.coupling_trace),
    )
