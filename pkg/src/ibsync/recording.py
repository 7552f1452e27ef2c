"""Session recording and replay.

A recording is a directory: a JSON manifest (session id, config snapshot,
stream table, trial markers) plus one length-delimited frame log per stream.
Markers live in the manifest, not in-band, so the sample path stays simple.
Replaying a recording reproduces the frame sequence byte-for-byte.
"""
from __future__ import annotations

import heapq
import json
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterator

from .errors import InputError, ReplayError
from .signals import EEG_CHANNELS, MOTION_CHANNELS, SampleFrame
from .wire import EEG_STREAMS, STREAM_KINDS, FrameLogWriter, read_frame_log

CONDITIONS = ("Non-sync", "No Feedback", "Visual", "Auditory", "Haptic")

MANIFEST_NAME = "manifest.json"

DEFAULT_STREAMS = tuple(
    {
        "stream_id": sid,
        "kind": kind,
        "channels": EEG_CHANNELS if sid in EEG_STREAMS else MOTION_CHANNELS,
        "log": f"stream_{sid:02d}.nrlog",
    }
    for sid, kind in sorted(STREAM_KINDS.items())
)


@dataclass(frozen=True)
class Marker:
    kind: str  # "trial_start" | "trial_stop"
    timestamp_us: int
    condition: str | None = None
    trial_id: int | None = None


@dataclass(frozen=True)
class Trial:
    trial_id: int
    condition: str
    start_us: int
    stop_us: int


class Recorder:
    """Writes frames and markers as they happen; close() emits the manifest."""

    def __init__(self, directory: str | Path, session_id: str, config_snapshot: dict | None = None):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.session_id = session_id
        self.config_snapshot = dict(config_snapshot or {})
        self.markers: list[Marker] = []
        self._writers = {
            entry["stream_id"]: FrameLogWriter(self.directory / entry["log"])
            for entry in DEFAULT_STREAMS
        }
        self._closed = False

    def add_frame(self, frame: SampleFrame) -> None:
        writer = self._writers.get(frame.stream_id)
        if writer is None:
            raise InputError(f"unknown stream id {frame.stream_id}")
        writer.append(frame)

    def add_marker(self, kind: str, timestamp_us: int, condition: str | None = None,
                   trial_id: int | None = None) -> None:
        if kind not in ("trial_start", "trial_stop"):
            raise InputError(f"unknown marker kind {kind!r}")
        if condition is not None and condition not in CONDITIONS:
            raise InputError(f"unknown condition {condition!r}")
        self.markers.append(Marker(kind, int(timestamp_us), condition, trial_id))

    def close(self) -> Path:
        if self._closed:
            return self.directory / MANIFEST_NAME
        for writer in self._writers.values():
            writer.close()
        manifest = {
            "session_id": self.session_id,
            "created_utc": datetime.now(timezone.utc).isoformat(),
            "config": self.config_snapshot,
            "streams": list(DEFAULT_STREAMS),
            "markers": [
                {
                    "kind": m.kind,
                    "timestamp_us": m.timestamp_us,
                    "condition": m.condition,
                    "trial_id": m.trial_id,
                }
                for m in self.markers
            ],
        }
        path = self.directory / MANIFEST_NAME
        path.write_text(json.dumps(manifest, indent=2) + "\n")
        self._closed = True
        return path

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class Recording:
    """A loaded session directory."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        manifest_path = self.directory / MANIFEST_NAME
        if not manifest_path.exists():
            raise ReplayError(f"no manifest in {self.directory}")
        self.manifest = json.loads(manifest_path.read_text())
        self.session_id = self.manifest.get("session_id", "")
        self.streams = self.manifest.get("streams", [])
        self.markers = [
            Marker(
                kind=m["kind"],
                timestamp_us=int(m["timestamp_us"]),
                condition=m.get("condition"),
                trial_id=m.get("trial_id"),
            )
            for m in self.manifest.get("markers", [])
        ]

    def stream_frames(self, stream_id: int) -> Iterator[SampleFrame]:
        for entry in self.streams:
            if entry["stream_id"] == stream_id:
                yield from read_frame_log(self.directory / entry["log"])
                return
        raise ReplayError(f"stream {stream_id} not in manifest")

    def frames(self) -> Iterator[SampleFrame]:
        """All frames merged in (timestamp, stream id) order."""
        iterators = [
            ((f.timestamp_us, f.stream_id, f) for f in self.stream_frames(e["stream_id"]))
            for e in self.streams
        ]
        for _, _, frame in heapq.merge(*iterators, key=lambda item: item[:2]):
            yield frame

    def trials(self) -> list[Trial]:
        """Pair start/stop markers in order; unmatched starts are dropped."""
        trials = []
        open_marker: Marker | None = None
        for marker in sorted(self.markers, key=lambda m: m.timestamp_us):
            if marker.kind == "trial_start":
                open_marker = marker
            elif marker.kind == "trial_stop" and open_marker is not None:
                trials.append(
                    Trial(
                        trial_id=open_marker.trial_id if open_marker.trial_id is not None else len(trials) + 1,
                        condition=open_marker.condition or "No Feedback",
                        start_us=open_marker.timestamp_us,
                        stop_us=marker.timestamp_us,
                    )
                )
                open_marker = None
        return trials


def replay(recording: Recording, speed: float | None = None) -> Iterator[SampleFrame]:
    """Frames in timestamp order; ``speed`` paces delivery against the wall
    clock (2.0 = twice real time), None delivers as fast as the consumer pulls.
    """
    if speed is not None and speed <= 0:
        raise InputError(f"speed must be positive, got {speed}")
    wall_start = time.monotonic()
    first_ts: int | None = None
    for frame in recording.frames():
        if speed is not None:
            if first_ts is None:
                first_ts = frame.timestamp_us
            target = wall_start + (frame.timestamp_us - first_ts) / (speed * 1e6)
            delay = target - time.monotonic()
            if delay > 0:
                time.sleep(delay)
        yield frame


def record_frames(directory: str | Path, frames, session_id: str = "session",
                  config_snapshot: dict | None = None,
                  markers: list[Marker] | None = None) -> Recording:
    """Convenience: write a complete frame iterable as a recording."""
    with Recorder(directory, session_id, config_snapshot) as recorder:
        for frame in frames:
            recorder.add_frame(frame)
        for marker in markers or []:
            recorder.add_marker(marker.kind, marker.timestamp_us, marker.condition, marker.trial_id)
    return Recording(directory)
