"""Quantization of the synchrony metric into five feedback levels and the
mappings onto the three modalities, plus the OSC and haptic-REST transports.

Level 1 is lowest synchrony, level 5 highest. All mapping functions are
pure; the network senders carry hard timeouts so a slow device can never
stall the metric path.
"""
from __future__ import annotations

import json
import logging
import math
import socket
import struct
import time
import urllib.error
import urllib.request
from dataclasses import dataclass

from .errors import ConfigError
from .metric import IbsMetric

log = logging.getLogger(__name__)

LEVELS = (1, 2, 3, 4, 5)
NEUTRAL_LEVEL = 3

# Equal fifths of the clamped [0, 1] metric range.
DEFAULT_BIN_EDGES = (0.2, 0.4, 0.6, 0.8)

OSC_ADDRESS = "/neuresonance/ibs"

# Middle-note endpoints of the auditory mapping, Hz.
MIDDLE_HZ_LOW = 547.0
MIDDLE_HZ_HIGH = 659.0

# Major-triad ratios around the middle note: root:middle:fifth = 4:5:6.
CHORD_ROOT_HZ = MIDDLE_HZ_HIGH * 4.0 / 5.0  # 527.2
CHORD_FIFTH_HZ = MIDDLE_HZ_HIGH * 6.0 / 5.0  # 790.8

# One level down = one 5 % multiplicative step down from the top middle note.
GEOMETRIC_STEP = 0.95

RING_MAX_AMPLITUDE = 0.25
RING_BASE_RADIUS = 0.8
RING_SPIKE_COUNT = 24
RING_COLOR = "orange"

# level -> (bpm, intensity %); faster and stronger signals lower synchrony.
DEFAULT_HAPTIC_TABLE = {
    1: (180, 100),
    2: (150, 80),
    3: (120, 60),
    4: (80, 40),
    5: (50, 20),
}
HAPTIC_PULSE_MS = 150  # within the 150-200 ms immediate-perception window

HAPTIC_TIMEOUT_S = 0.25


@dataclass(frozen=True)
class RingSpec:
    """Oscillating-ring visual: amplitude 0 means a still circle (level 5)."""

    base_radius: float
    wave_amplitude: float
    spike_count: int = RING_SPIKE_COUNT
    color: str = RING_COLOR


@dataclass(frozen=True)
class ChordSpec:
    """Triad frequencies; only the middle note moves with the level."""

    root_hz: float
    middle_hz: float
    fifth_hz: float


@dataclass(frozen=True)
class HapticPattern:
    bpm: int
    intensity: int  # percent of max drive
    pulse_ms: int = HAPTIC_PULSE_MS


@dataclass(frozen=True)
class DeliveryResult:
    ok: bool
    status: int | None = None
    error: str | None = None
    suppressed: bool = False
    elapsed_ms: float = 0.0


def quantize_level(metric: IbsMetric, bin_edges=DEFAULT_BIN_EDGES) -> int:
    """Map a metric to level 1..5 over left-closed bins of the clamped value.

    Invalid metrics quantize to the neutral level 3 so actuators never
    freeze on a stale extreme.
    """
    edges = tuple(float(e) for e in bin_edges)
    if len(edges) != 4 or any(e2 <= e1 for e1, e2 in zip(edges, edges[1:])) or not all(
        0.0 < e < 1.0 for e in edges
    ):
        raise ConfigError(f"bin edges must be 4 strictly ascending values in (0, 1), got {edges}")
    if not metric.valid:
        return NEUTRAL_LEVEL
    value = min(max(metric.value, 0.0), 1.0)
    return 1 + sum(value >= e for e in edges)


def map_visual(level: int) -> RingSpec:
    """Wave amplitude decreases linearly with level; exactly 0 at level 5."""
    _check_level(level)
    amplitude = RING_MAX_AMPLITUDE * (5 - level) / 4.0
    return RingSpec(base_radius=RING_BASE_RADIUS, wave_amplitude=amplitude)


def map_audio(level: int, preset: str = "linear") -> ChordSpec:
    """Middle note rises toward the pure major third as synchrony rises.

    "linear" spaces the middle note evenly across 547..659 Hz; "geometric"
    walks 5 % multiplicative steps down from 659 Hz per level below 5.
    Root and fifth are fixed so the 2:3 frame never moves.
    """
    _check_level(level)
    if preset == "linear":
        middle = MIDDLE_HZ_LOW + (MIDDLE_HZ_HIGH - MIDDLE_HZ_LOW) * (level - 1) / 4.0
    elif preset == "geometric":
        middle = MIDDLE_HZ_HIGH * GEOMETRIC_STEP ** (5 - level)
    else:
        raise ConfigError(f"unknown audio preset {preset!r}")
    return ChordSpec(root_hz=CHORD_ROOT_HZ, middle_hz=middle, fifth_hz=CHORD_FIFTH_HZ)


def map_haptic(level: int, table=None) -> HapticPattern:
    """Beats per minute and intensity both fall as synchrony rises."""
    _check_level(level)
    table = _validate_haptic_table(DEFAULT_HAPTIC_TABLE if table is None else table)
    bpm, intensity = table[level]
    return HapticPattern(bpm=bpm, intensity=intensity)


def _check_level(level: int) -> None:
    if level not in LEVELS:
        raise ConfigError(f"feedback level must be 1..5, got {level}")


def _validate_haptic_table(table) -> dict:
    table = {int(k): (int(v[0]), int(v[1])) for k, v in dict(table).items()}
    if sorted(table) != list(LEVELS):
        raise ConfigError("haptic table must define exactly levels 1..5")
    for lo, hi in zip(LEVELS, LEVELS[1:]):
        if not (table[lo][0] > table[hi][0] and table[lo][1] > table[hi][1]):
            raise ConfigError("haptic bpm and intensity must strictly decrease with level")
    return table


def _osc_pad(data: bytes) -> bytes:
    return data + b"\x00" * (4 - len(data) % 4)  # always >= 1 NUL terminator


def encode_osc(metric_value: float, level: int) -> bytes:
    """OSC 1.0 message "/neuresonance/ibs" with a float32 and an int32.

    Address and type-tag string are NUL-padded to 4-byte boundaries;
    arguments are big-endian. The packet length is always a multiple of 4.
    """
    if not math.isfinite(metric_value):
        raise ConfigError(f"metric value must be finite, got {metric_value}")
    packet = _osc_pad(OSC_ADDRESS.encode("ascii"))
    packet += _osc_pad(b",fi")
    packet += struct.pack(">f", metric_value)
    packet += struct.pack(">i", int(level))
    return packet


class OscSender:
    """Fire-and-forget UDP sender for the metric/level message."""

    def __init__(self, host: str, port: int):
        self.address = (host, int(port))
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)

    def send(self, metric_value: float, level: int) -> None:
        self._sock.sendto(encode_osc(metric_value, level), self.address)

    def close(self) -> None:
        self._sock.close()


class HapticClient:
    """POSTs vibration patterns to the band's REST endpoint.

    Consecutive identical patterns are suppressed (change-only dispatch) and
    every request carries a hard timeout, so a dead device costs at most one
    timeout per pattern change and never blocks the caller's loop beyond it.
    """

    def __init__(self, endpoint: str, timeout_s: float = HAPTIC_TIMEOUT_S):
        self.endpoint = endpoint.rstrip("/")
        self.timeout_s = float(timeout_s)
        self.error_count = 0
        self._last_sent: HapticPattern | None = None

    def send(self, pattern: HapticPattern) -> DeliveryResult:
        if pattern == self._last_sent:
            return DeliveryResult(ok=True, suppressed=True)
        started = time.perf_counter()
        body = json.dumps(
            {"bpm": pattern.bpm, "intensity": pattern.intensity, "pulse_ms": pattern.pulse_ms}
        ).encode()
        request = urllib.request.Request(
            f"{self.endpoint}/vibrate",
            data=body,
            headers={"Content-Type": "application/json"},
            method="POST",
        )
        try:
            with urllib.request.urlopen(request, timeout=self.timeout_s) as response:
                status = response.status
        except urllib.error.HTTPError as exc:
            self.error_count += 1
            log.warning("haptic endpoint returned %s", exc.code)
            return DeliveryResult(ok=False, status=exc.code, error=str(exc),
                                  elapsed_ms=(time.perf_counter() - started) * 1e3)
        except (urllib.error.URLError, TimeoutError, OSError) as exc:
            self.error_count += 1
            log.warning("haptic send failed: %s", exc)
            return DeliveryResult(ok=False, error=str(exc),
                                  elapsed_ms=(time.perf_counter() - started) * 1e3)
        elapsed_ms = (time.perf_counter() - started) * 1e3
        if 200 <= status < 300:
            self._last_sent = pattern
            return DeliveryResult(ok=True, status=status, elapsed_ms=elapsed_ms)
        self.error_count += 1
        return DeliveryResult(ok=False, status=status, error=f"HTTP {status}", elapsed_ms=elapsed_ms)
