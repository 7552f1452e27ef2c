"""Deterministic processing core shared by live and batch runs.

Feeding the same frames in the same order always yields the same update
sequence; the live engine adds threads, pacing, and dispatch around this.
One pipeline instance owns all mutable state and must be driven from a
single thread.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InputError
from .feedback import (
    DEFAULT_BIN_EDGES,
    NEUTRAL_LEVEL,
    ChordSpec,
    HapticPattern,
    RingSpec,
    map_audio,
    map_haptic,
    map_visual,
    quantize_level,
)
from .metric import IbsMetric, compute_ibs
from .motion import MAX_HOLD_EPOCHS, MotionGate, MotionSample, MotionVerdict, classify_segment, estimate_velocities
from .recording import CONDITIONS, Recorder
from .signals import (
    DEFAULT_HOP_S,
    DEFAULT_WINDOW_S,
    EEG_CHANNELS,
    EEG_SAMPLE_RATE,
    EpochWindow,
    FilterSpec,
    SampleFrame,
    StreamBuffer,
)
from .wire import (
    EEG_STREAMS,
    MOTION_STREAMS,
    STREAM_EEG_A,
    STREAM_EEG_B,
    STREAM_MOTION_A,
    STREAM_MOTION_B,
    participant_of,
)

MODALITIES = ("none", "visual", "auditory", "haptic")

_CONDITION_MODALITY = {
    "Visual": "visual",
    "Auditory": "auditory",
    "Haptic": "haptic",
    "Non-sync": "none",
    "No Feedback": "none",
}

# Window availability states.
_READY, _WAIT, _GAP = range(3)


@dataclass(frozen=True)
class EngineConfig:
    window_s: float = DEFAULT_WINDOW_S
    hop_s: float = DEFAULT_HOP_S
    tick_ms: int = 100
    filter_spec: FilterSpec = field(default_factory=FilterSpec)
    bin_edges: tuple = DEFAULT_BIN_EDGES
    modality: str = "none"
    audio_preset: str = "linear"
    haptic_table: tuple | None = None  # ((bpm, intensity) for levels 1..5)
    osc_host: str | None = None
    osc_port: int = 9000
    haptic_url: str | None = None
    console_port: int | None = None
    budget_ms: float = 60.0
    max_hold: int = MAX_HOLD_EPOCHS
    sample_rate: float = EEG_SAMPLE_RATE

    def validate(self) -> None:
        if not 0 < self.hop_s <= self.window_s:
            raise ConfigError(f"need 0 < hop_s <= window_s, got {self.hop_s}/{self.window_s}")
        if self.tick_ms <= 0 or self.tick_ms > self.hop_s * 1000:
            raise ConfigError(f"tick_ms must be in (0, hop_s*1000], got {self.tick_ms}")
        if self.modality not in MODALITIES:
            raise ConfigError(f"modality must be one of {MODALITIES}, got {self.modality!r}")
        if self.haptic_table is not None:
            map_haptic(1, table=dict(enumerate(self.haptic_table, start=1)))
        self.filter_spec.validate(self.sample_rate)

    def snapshot(self) -> dict:
        return {
            "window_s": self.window_s,
            "hop_s": self.hop_s,
            "tick_ms": self.tick_ms,
            "filter": {
                "low_cut": self.filter_spec.low_cut,
                "high_cut": self.filter_spec.high_cut,
                "order": self.filter_spec.order,
                "mode": self.filter_spec.mode,
            },
            "bin_edges": list(self.bin_edges),
            "modality": self.modality,
            "audio_preset": self.audio_preset,
            "haptic_table": [list(row) for row in self.haptic_table] if self.haptic_table else None,
            "sample_rate": self.sample_rate,
        }


@dataclass(frozen=True)
class IbsUpdate:
    """One published engine result: the metric plus actuator state."""

    metric: IbsMetric
    level: int
    ring: RingSpec | None
    chord: ChordSpec | None
    haptic: HapticPattern | None
    condition: str
    trial_id: int | None
    compute_latency_ms: float
    stage_ms: dict = field(default_factory=dict, compare=False)

    def key_fields(self) -> tuple:
        """The deterministic identity used by replay-equivalence checks."""
        return (
            self.metric.epoch_start_us,
            self.metric.value,
            self.metric.valid,
            self.metric.held,
            self.level,
        )


class LatencyStats:
    """Per-stage latency percentiles across published updates."""

    def __init__(self):
        self._samples: dict[str, list[float]] = {}

    def record(self, stage: str, ms: float) -> None:
        self._samples.setdefault(stage, []).append(float(ms))

    def record_stages(self, stage_ms: dict) -> None:
        for stage, ms in stage_ms.items():
            self.record(stage, ms)

    def stats(self) -> dict:
        """{stage: {p50, p95, max, count}}, empty dict when nothing recorded."""
        out = {}
        for stage, values in self._samples.items():
            if not values:
                continue
            arr = np.asarray(values)
            out[stage] = {
                "p50": float(np.percentile(arr, 50)),
                "p95": float(np.percentile(arr, 95)),
                "max": float(np.max(arr)),
                "count": int(arr.size),
            }
        return out

    def reset(self) -> None:
        self._samples.clear()


class SessionState:
    """Condition label, trial bookkeeping, and the active modality."""

    def __init__(self, modality: str = "none"):
        self.condition = "No Feedback"
        self.modality = modality
        self.trial_open = False
        self.trial_id: int | None = None
        self._next_trial_id = 1
        self._had_trial = False

    @property
    def muted(self) -> bool:
        """True between trials: neutral feedback once trials are in use."""
        return self._had_trial and not self.trial_open

    def set_condition(self, label: str) -> tuple[bool, str | None]:
        if label not in CONDITIONS:
            return False, f"unknown condition {label!r}"
        if self.trial_open:
            return False, "condition changes are rejected while a trial is open"
        self.condition = label
        self.modality = _CONDITION_MODALITY[label]
        return True, None

    def set_modality(self, modality: str) -> tuple[bool, str | None]:
        if modality not in MODALITIES:
            return False, f"unknown modality {modality!r}"
        self.modality = modality
        return True, None

    def mark_trial(self, action: str) -> tuple[bool, str | None]:
        if action == "start":
            if self.trial_open:
                return True, "trial already open; start ignored"
            self.trial_open = True
            self._had_trial = True
            self.trial_id = self._next_trial_id
            self._next_trial_id += 1
            return True, None
        if action == "stop":
            if not self.trial_open:
                return True, "no open trial; stop ignored"
            self.trial_open = False
            return True, None
        return False, f"unknown trial action {action!r}"

    def as_dict(self) -> dict:
        return {
            "condition": self.condition,
            "modality": self.modality,
            "trial_open": self.trial_open,
            "trial_id": self.trial_id,
        }


class Pipeline:
    """Buffers four streams, cuts aligned hop windows, gates, and maps feedback."""

    def __init__(self, config: EngineConfig, recorder: Recorder | None = None):
        config.validate()
        self.config = config
        self.recorder = recorder
        fs = config.sample_rate
        self.eeg = {
            STREAM_EEG_A: StreamBuffer(fs, EEG_CHANNELS),
            STREAM_EEG_B: StreamBuffer(fs, EEG_CHANNELS),
        }
        self.motion: dict[str, list[MotionSample]] = {"A": [], "B": []}
        self.gate = MotionGate(max_hold=config.max_hold)
        self.session = SessionState(config.modality)
        self.stats = LatencyStats()
        self.clock_us = 0  # latest ingested timestamp
        self.finished = False  # sources exhausted; stop waiting for coverage
        self._win_n = round(config.window_s * fs)
        self._hop_us = round(config.hop_s * 1e6)
        self._next_start_us: int | None = None
        self._motion_period_us = round(1e6 / 100.0)
        self._motion_last_ts: dict[str, int | None] = {"A": None, "B": None}
        # Grace before processing a window whose motion stream went silent.
        self._motion_grace_us = 1_000_000
        self._haptic_table = (
            dict(enumerate(config.haptic_table, start=1))
            if config.haptic_table is not None
            else None
        )

    # -- ingest ------------------------------------------------------------

    def feed(self, frame: SampleFrame) -> None:
        self.clock_us = max(self.clock_us, frame.timestamp_us)
        self.finished = False  # a resumed source re-opens coverage waiting
        if self.recorder is not None:
            self.recorder.add_frame(frame)
        if frame.stream_id in EEG_STREAMS:
            self.eeg[frame.stream_id].append_frame(frame)
        elif frame.stream_id in MOTION_STREAMS:
            participant = participant_of(frame.stream_id)
            self.motion[participant].append(
                MotionSample.from_channels(participant, frame.timestamp_us, frame.channels)
            )
            self._motion_last_ts[participant] = frame.timestamp_us
        else:
            raise InputError(f"unknown stream id {frame.stream_id}")

    # -- session control ---------------------------------------------------

    def set_condition(self, label: str) -> tuple[bool, str | None]:
        return self.session.set_condition(label)

    def set_modality(self, modality: str) -> tuple[bool, str | None]:
        return self.session.set_modality(modality)

    def mark_trial(self, action: str) -> tuple[bool, str | None]:
        ok, message = self.session.mark_trial(action)
        if ok and message is None and self.recorder is not None:
            self.recorder.add_marker(
                f"trial_{action}",
                self.clock_us,
                condition=self.session.condition if action == "start" else None,
                trial_id=self.session.trial_id,
            )
        return ok, message

    # -- processing --------------------------------------------------------

    def process(self) -> list[IbsUpdate]:
        """Emit every update currently computable; safe to call repeatedly."""
        updates = []
        while True:
            update = self._advance_one()
            if update is None:
                return updates
            updates.append(update)

    def _advance_one(self) -> IbsUpdate | None:
        buf_a = self.eeg[STREAM_EEG_A]
        buf_b = self.eeg[STREAM_EEG_B]
        if self._next_start_us is None:
            if not buf_a.segments or not buf_b.segments:
                return None
            start = max(buf_a.segments[0][0], buf_b.segments[0][0])
            loc = buf_a.locate(start)
            if loc is not None:
                start = buf_a.sample_timestamp(*loc)
            self._next_start_us = start

        start = self._next_start_us
        state_a, loc_a = self._window_state(buf_a, start)
        state_b, loc_b = self._window_state(buf_b, start)
        if state_a == _GAP or state_b == _GAP:
            update = self._invalid_update(start)
            self._advance_past(start)
            return update
        if state_a == _WAIT or state_b == _WAIT:
            return None

        ts_a = buf_a.sample_timestamp(*loc_a)
        ts_b = buf_b.sample_timestamp(*loc_b)
        if abs(ts_a - ts_b) >= buf_a.period_us:
            # clock skew beyond one sample period: pair unusable
            update = self._invalid_update(start)
            self._advance_past(start)
            return update
        if not self._motion_covered(ts_a + round(self.config.window_s * 1e6)):
            return None

        epoch_a = EpochWindow("A", ts_a, buf_a.cut(loc_a[0], loc_a[1], self._win_n), buf_a.sample_rate)
        epoch_b = EpochWindow("B", ts_b, buf_b.cut(loc_b[0], loc_b[1], self._win_n), buf_b.sample_rate)

        stage_ms: dict[str, float] = {}
        metric = compute_ibs(epoch_a, epoch_b, self.config.filter_spec, stage_ms=stage_ms)

        t0 = time.perf_counter()
        verdict_a = self._motion_verdict("A", ts_a, epoch_a.end_timestamp_us)
        verdict_b = self._motion_verdict("B", ts_b, epoch_b.end_timestamp_us)
        gated = self.gate.apply(metric, verdict_a, verdict_b)
        stage_ms["gate"] = (time.perf_counter() - t0) * 1e3

        update = self._assemble(gated, stage_ms)
        self._advance_past(start)
        self._trim(start)
        return update

    def _motion_covered(self, end_us: int) -> bool:
        """True once verdicts for a window ending at ``end_us`` are final.

        A motion stream that has produced samples must reach past the window
        (plus one period) before the window is processed, so live and batch
        runs see identical verdict inputs. Exhausted sources and long-silent
        motion streams stop blocking.
        """
        if self.finished:
            return True
        eeg_clock = max(
            (b.last_timestamp_us or 0 for b in self.eeg.values()), default=0
        )
        needed = end_us + self._motion_period_us
        for participant in ("A", "B"):
            last = self._motion_last_ts[participant]
            if last is None:
                continue  # no motion data for this participant at all
            if last < needed and eeg_clock < end_us + self._motion_grace_us:
                return False
        return True

    def _window_state(self, buf: StreamBuffer, start_us: int):
        loc = buf.locate(start_us)
        segments = buf.segments
        if loc is None:
            if any(seg_start > start_us for seg_start, _ in segments):
                return _GAP, None
            return _WAIT, None
        seg_i, idx = loc
        if idx + self._win_n <= segments[seg_i][1]:
            return _READY, loc
        if seg_i == len(segments) - 1:
            return _WAIT, None
        return _GAP, None

    def _advance_past(self, start_us: int) -> None:
        nxt = start_us + self._hop_us
        buf_a = self.eeg[STREAM_EEG_A]
        if buf_a.locate(nxt) is None:
            # resume exactly at the next contiguous data if it begins mid-hop
            future = [s for s, _ in buf_a.segments if s > nxt]
            if future and future[0] - nxt < self._hop_us:
                nxt = future[0]
        self._next_start_us = nxt

    def _trim(self, start_us: int) -> None:
        horizon = start_us - round(self.config.window_s * 1e6)
        for buf in self.eeg.values():
            buf.drop_before(horizon)
        for participant in ("A", "B"):
            samples = self.motion[participant]
            cutoff = horizon - 2 * self._motion_period_us
            self.motion[participant] = [s for s in samples if s.timestamp_us >= cutoff]

    def _motion_verdict(self, participant: str, start_us: int, end_us: int) -> MotionVerdict:
        margin = self._motion_period_us
        window = [
            s
            for s in self.motion[participant]
            if start_us - margin <= s.timestamp_us <= end_us + margin
        ]
        if len(window) < 3:
            return classify_segment(np.empty((0, 2)), start_us, end_us)
        velocities = estimate_velocities(window)
        return classify_segment(velocities, start_us, end_us)

    def _invalid_update(self, start_us: int) -> IbsUpdate:
        metric = IbsMetric(value=0.0, epoch_start_us=start_us, valid=False, held=False)
        return self._assemble(metric, {})

    def _assemble(self, metric: IbsMetric, stage_ms: dict) -> IbsUpdate:
        level = quantize_level(metric, self.config.bin_edges)
        ring = chord = haptic = None
        if self.session.muted:
            level = NEUTRAL_LEVEL
        else:
            modality = self.session.modality
            if modality == "visual":
                ring = map_visual(level)
            elif modality == "auditory":
                chord = map_audio(level, self.config.audio_preset)
            elif modality == "haptic":
                haptic = map_haptic(level, table=self._haptic_table)
        compute_ms = sum(stage_ms.values())
        if stage_ms:  # gap placeholders must not dilute the latency stats
            self.stats.record_stages(stage_ms)
            self.stats.record("total", compute_ms)
        return IbsUpdate(
            metric=metric,
            level=level,
            ring=ring,
            chord=chord,
            haptic=haptic,
            condition=self.session.condition,
            trial_id=self.session.trial_id if self.session.trial_open else None,
            compute_latency_ms=compute_ms,
            stage_ms=stage_ms,
        )
