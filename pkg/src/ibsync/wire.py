"""Binary wire framing for sample streams, plus length-delimited frame logs.

Frame layout (little-endian):
    0..1   magic "NR"
    2      stream id
    3      channel count
    4..11  timestamp, unsigned microseconds since session start
    12..   channel_count x float32 samples

A 14-channel EEG frame is 68 bytes; a 7-channel motion frame is 40.
"""
from __future__ import annotations

import struct
from pathlib import Path
from typing import Iterable, Iterator

from .errors import FramingError
from .signals import SampleFrame

MAGIC = b"NR"
HEADER = struct.Struct("<2sBBQ")  # magic, stream_id, channel_count, timestamp_us
MAX_CHANNELS = 64

# Canonical stream ids for a two-participant session.
STREAM_EEG_A = 0
STREAM_EEG_B = 1
STREAM_MOTION_A = 2
STREAM_MOTION_B = 3
STREAM_KINDS = {
    STREAM_EEG_A: "eeg_a",
    STREAM_EEG_B: "eeg_b",
    STREAM_MOTION_A: "motion_a",
    STREAM_MOTION_B: "motion_b",
}
EEG_STREAMS = (STREAM_EEG_A, STREAM_EEG_B)
MOTION_STREAMS = (STREAM_MOTION_A, STREAM_MOTION_B)


def participant_of(stream_id: int) -> str:
    if stream_id in (STREAM_EEG_A, STREAM_MOTION_A):
        return "A"
    if stream_id in (STREAM_EEG_B, STREAM_MOTION_B):
        return "B"
    raise FramingError(f"unknown stream id {stream_id}")

LOG_MAGIC = b"NRLOG1"
LOG_VERSION = 1
LOG_HEADER_LEN = 16
_RECORD_LEN = struct.Struct("<I")


def frame_length(channel_count: int) -> int:
    return HEADER.size + 4 * channel_count


def encode_frame(frame: SampleFrame) -> bytes:
    n = len(frame.channels)
    if not 1 <= n <= MAX_CHANNELS:
        raise FramingError(f"channel count {n} out of range")
    if frame.timestamp_us < 0:
        raise FramingError(f"negative timestamp {frame.timestamp_us}")
    header = HEADER.pack(MAGIC, frame.stream_id, n, frame.timestamp_us)
    return header + struct.pack(f"<{n}f", *frame.channels)


def decode_frame(buf: bytes, expected_channels: int | None = None) -> SampleFrame:
    """Decode exactly one frame; raises FramingError with the byte offset."""
    if len(buf) < HEADER.size:
        raise FramingError(f"truncated header: {len(buf)} bytes", offset=len(buf))
    magic, stream_id, n, timestamp_us = HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise FramingError(f"bad magic {magic!r}", offset=0)
    if not 1 <= n <= MAX_CHANNELS:
        raise FramingError(f"channel count {n} out of range", offset=3)
    if expected_channels is not None and n != expected_channels:
        raise FramingError(f"expected {expected_channels} channels, frame has {n}", offset=3)
    total = frame_length(n)
    if len(buf) < total:
        raise FramingError(f"truncated frame: {len(buf)} of {total} bytes", offset=len(buf))
    if len(buf) > total:
        raise FramingError(f"{len(buf) - total} trailing bytes after frame", offset=total)
    samples = struct.unpack_from(f"<{n}f", buf, HEADER.size)
    return SampleFrame(stream_id=stream_id, timestamp_us=timestamp_us, channels=samples)


class FrameDecoder:
    """Incremental decoder for a TCP byte stream of frames."""

    def __init__(self, expected_channels: int | None = None):
        self._buf = bytearray()
        self._expected = expected_channels
        self.consumed = 0  # bytes successfully decoded, for error reporting

    def feed(self, data: bytes) -> list[SampleFrame]:
        self._buf.extend(data)
        frames = []
        while True:
            if len(self._buf) < HEADER.size:
                return frames
            magic, _, n, _ = HEADER.unpack_from(self._buf)
            if magic != MAGIC:
                raise FramingError("bad magic in stream", offset=self.consumed)
            if not 1 <= n <= MAX_CHANNELS:
                raise FramingError(f"channel count {n} out of range", offset=self.consumed + 3)
            total = frame_length(n)
            if len(self._buf) < total:
                return frames
            frames.append(decode_frame(bytes(self._buf[:total]), self._expected))
            del self._buf[:total]
            self.consumed += total


class FrameLogWriter:
    """Length-delimited frame log with a fixed 16-byte header."""

    def __init__(self, path: str | Path, stream_count: int = 1):
        self.path = Path(path)
        self._fh = open(self.path, "wb")
        header = LOG_MAGIC + bytes([LOG_VERSION, stream_count])
        self._fh.write(header.ljust(LOG_HEADER_LEN, b"\x00"))

    def append(self, frame: SampleFrame) -> None:
        payload = encode_frame(frame)
        self._fh.write(_RECORD_LEN.pack(len(payload)))
        self._fh.write(payload)

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_frame_log(path: str | Path) -> Iterator[SampleFrame]:
    """Yield frames from a log file; FramingError on any corruption."""
    with open(path, "rb") as fh:
        header = fh.read(LOG_HEADER_LEN)
        if len(header) < LOG_HEADER_LEN or not header.startswith(LOG_MAGIC):
            raise FramingError(f"not a frame log: {path}", offset=0)
        if header[len(LOG_MAGIC)] != LOG_VERSION:
            raise FramingError(f"unsupported log version {header[len(LOG_MAGIC)]}", offset=6)
        offset = LOG_HEADER_LEN
        while True:
            length_bytes = fh.read(_RECORD_LEN.size)
            if not length_bytes:
                return
            if len(length_bytes) < _RECORD_LEN.size:
                raise FramingError("truncated record length", offset=offset)
            (length,) = _RECORD_LEN.unpack(length_bytes)
            if length > frame_length(MAX_CHANNELS):
                raise FramingError(f"record length {length} out of range", offset=offset)
            payload = fh.read(length)
            if len(payload) < length:
                raise FramingError("truncated record", offset=offset)
            yield decode_frame(payload)
            offset += _RECORD_LEN.size + length


def write_frame_log(path: str | Path, frames: Iterable[SampleFrame]) -> int:
    """Write all frames; returns the count."""
    count = 0
    with FrameLogWriter(path) as writer:
        for frame in frames:
            writer.append(frame)
            count += 1
    return count
