"""Live orchestration around the deterministic pipeline.

Thread layout: one ingestion thread per source feeds bounded per-stream
queues; a single processing thread owns the pipeline and runs the tick
cadence; a dispatch thread delivers OSC/REST so a slow device never delays
the next metric; the control channel broadcasts immutable update snapshots.
"""
from __future__ import annotations

import collections
import logging
import queue
import socket
import threading
import time
from dataclasses import asdict

import numpy as np

from .errors import FramingError
from .feedback import HapticClient, OscSender
from .metric import compute_ibs
from .motion import MotionSample, classify_segment, estimate_velocities
from .pipeline import EngineConfig, IbsUpdate, Pipeline
from .recording import Recorder
from .signals import EEG_CHANNELS, EpochWindow, FilterSpec, SampleFrame
from .synth import SynthConfig, SynthSource
from .wire import EEG_STREAMS, STREAM_KINDS, FrameDecoder

log = logging.getLogger(__name__)

# Back-pressure bound: drop oldest past this much buffered stream time.
QUEUE_SECONDS = 5.0


class _StreamQueues:
    """Bounded per-stream frame queues; overflow drops the oldest frame."""

    def __init__(self, config: EngineConfig):
        self._lock = threading.Lock()
        self._queues = {}
        for stream_id in STREAM_KINDS:
            rate = config.sample_rate if stream_id in EEG_STREAMS else 100.0
            self._queues[stream_id] = collections.deque(maxlen=int(QUEUE_SECONDS * rate))
        self.dropped = 0

    def put(self, frame: SampleFrame) -> None:
        with self._lock:
            q = self._queues[frame.stream_id]
            if len(q) == q.maxlen:
                self.dropped += 1  # oldest falls out; the buffer flags the gap
            q.append(frame)

    def drain(self) -> list[SampleFrame]:
        with self._lock:
            frames = []
            for q in self._queues.values():
                frames.extend(q)
                q.clear()
        frames.sort(key=lambda f: (f.timestamp_us, f.stream_id))
        return frames


class Dispatcher:
    """Off-critical-path delivery of OSC packets and haptic REST calls."""

    def __init__(self, config: EngineConfig, stats):
        self.osc = OscSender(config.osc_host, config.osc_port) if config.osc_host else None
        self.haptic = HapticClient(config.haptic_url) if config.haptic_url else None
        self.stats = stats
        self.error_count = 0
        self._queue: queue.Queue = queue.Queue()
        self._thread = threading.Thread(target=self._run, name="ibsync-dispatch", daemon=True)
        self._thread.start()

    def submit(self, update: IbsUpdate) -> None:
        self._queue.put(update)

    def _run(self) -> None:
        while True:
            update = self._queue.get()
            if update is None:
                return
            started = time.perf_counter()
            try:
                if self.osc is not None:
                    self.osc.send(update.metric.value, update.level)
                if self.haptic is not None and update.haptic is not None:
                    result = self.haptic.send(update.haptic)
                    if not result.ok:
                        self.error_count += 1
            except Exception:  # dispatch must never kill the engine
                self.error_count += 1
                log.exception("dispatch failed")
            self.stats.record("dispatch", (time.perf_counter() - started) * 1e3)

    def close(self) -> None:
        self._queue.put(None)
        self._thread.join(timeout=5.0)
        if self.osc is not None:
            self.osc.close()


def update_as_dict(update: IbsUpdate) -> dict:
    """JSON-ready snapshot of one published update."""
    return {
        "type": "update",
        "epoch_start_us": update.metric.epoch_start_us,
        "value": update.metric.value,
        "valid": update.metric.valid,
        "held": update.metric.held,
        "level": update.level,
        "ring": asdict(update.ring) if update.ring else None,
        "chord": asdict(update.chord) if update.chord else None,
        "haptic": asdict(update.haptic) if update.haptic else None,
        "condition": update.condition,
        "trial_id": update.trial_id,
        "compute_latency_ms": update.compute_latency_ms,
    }


class Engine:
    """Runs the pipeline over live sources or batch frame iterables."""

    def __init__(self, config: EngineConfig, recorder: Recorder | None = None):
        config.validate()
        self.config = config
        self.pipeline = Pipeline(config, recorder=recorder)
        self.updates: list[IbsUpdate] = []
        self.update_listeners: list = []  # callables taking an IbsUpdate
        self.synth_source: SynthSource | None = None
        self._dispatcher: Dispatcher | None = None
        self._queues = _StreamQueues(config)
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self._state_lock = threading.RLock()
        self._source_done = False
        self._tcp_listener: socket.socket | None = None
        self._idle_flush_s: float | None = None  # set by TCP mode
        self._last_frame_wall = time.monotonic()

    # -- batch -------------------------------------------------------------

    def run_batch(self, frames) -> list[IbsUpdate]:
        """Deterministic fold over an ordered frame iterable."""
        for frame in frames:
            self.pipeline.feed(frame)
            self._collect(self.pipeline.process())
        self.pipeline.finished = True
        self._collect(self.pipeline.process())
        return self.updates

    def _collect(self, updates: list[IbsUpdate]) -> None:
        for update in updates:
            self.updates.append(update)
            if self._dispatcher is not None:
                self._dispatcher.submit(update)
            for listener in list(self.update_listeners):
                try:
                    listener(update)
                except Exception:
                    log.exception("update listener failed")

    # -- live --------------------------------------------------------------

    def start_live(self, frame_source, dispatch: bool = True) -> None:
        """Start ingestion + processing threads over an iterable of frames."""
        if dispatch and (self.config.osc_host or self.config.haptic_url):
            self._dispatcher = Dispatcher(self.config, self.pipeline.stats)
        ingest = threading.Thread(
            target=self._ingest_loop, args=(frame_source,), name="ibsync-ingest", daemon=True
        )
        process = threading.Thread(target=self._process_loop, name="ibsync-process", daemon=True)
        self._threads = [ingest, process]
        ingest.start()
        process.start()

    def start_synth(self, synth_config: SynthConfig, seed: int = 0, speed: float = 1.0,
                    dispatch: bool = True) -> None:
        """Run a synthetic session as the live source, paced by ``speed``."""
        self.synth_source = SynthSource(synth_config, seed=seed)
        self.start_live(self._synth_frames(self.synth_source, speed), dispatch=dispatch)

    def _synth_frames(self, source: SynthSource, speed: float):
        from .synth import CHUNK_S

        wall_start = time.monotonic()
        session_s = 0.0
        while not self._stop.is_set():
            with self._state_lock:
                chunk = source.next_chunk()
            if chunk is None:
                return
            eeg_a, eeg_b, eeg_ts, mot_a, mot_b, mot_ts = chunk
            frames = []
            for sid, data, ts_arr in (
                (0, eeg_a, eeg_ts),
                (1, eeg_b, eeg_ts),
                (2, mot_a, mot_ts),
                (3, mot_b, mot_ts),
            ):
                quantized = data.astype(np.float32)  # match the wire format
                for i, ts in enumerate(ts_arr):
                    frames.append(
                        SampleFrame(sid, int(ts), tuple(float(v) for v in quantized[:, i]))
                    )
            frames.sort(key=lambda f: (f.timestamp_us, f.stream_id))
            yield from frames
            session_s += CHUNK_S
            target = wall_start + session_s / speed
            delay = target - time.monotonic()
            if delay > 0:
                time.sleep(delay)

    def start_tcp_server(self, port: int = 0, dispatch: bool = True) -> int:
        """Accept wire-framed TCP streams until stop(); returns the bound port.

        Each connection carries frames in the binary wire format; a framing
        error drops that connection (with a log line) and never the engine.
        """
        if dispatch and (self.config.osc_host or self.config.haptic_url):
            self._dispatcher = Dispatcher(self.config, self.pipeline.stats)
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        listener.bind(("0.0.0.0", port))
        listener.listen(8)
        self._tcp_listener = listener

        def client_loop(conn: socket.socket) -> None:
            decoder = FrameDecoder()
            try:
                with conn:
                    while not self._stop.is_set():
                        data = conn.recv(8192)
                        if not data:
                            return
                        for frame in decoder.feed(data):
                            self._queues.put(frame)
            except FramingError as exc:
                log.warning("dropping stream connection: %s", exc)
            except OSError:
                pass

        def accept_loop() -> None:
            while not self._stop.is_set():
                try:
                    conn, _ = listener.accept()
                except OSError:
                    return
                threading.Thread(target=client_loop, args=(conn,), daemon=True).start()

        accept = threading.Thread(target=accept_loop, name="ibsync-tcp-accept", daemon=True)
        self._idle_flush_s = 2.0  # flush pending windows when streams go quiet
        process = threading.Thread(target=self._process_loop, name="ibsync-process", daemon=True)
        self._threads = [process]  # accept thread blocks until close; joined via stop()
        accept.start()
        process.start()
        return listener.getsockname()[1]

    def _ingest_loop(self, frame_source) -> None:
        try:
            for frame in frame_source:
                if self._stop.is_set():
                    return
                self._queues.put(frame)
        except Exception:
            log.exception("ingestion failed")
        finally:
            self._source_done = True

    def _process_loop(self) -> None:
        tick_s = self.config.tick_ms / 1000.0
        while not self._stop.is_set():
            started = time.monotonic()
            frames = self._queues.drain()
            with self._state_lock:
                for frame in frames:
                    try:
                        self.pipeline.feed(frame)
                    except Exception:
                        log.exception("bad frame dropped")
                if frames:
                    self._last_frame_wall = started
                if self._source_done and not frames:
                    self.pipeline.finished = True
                elif (
                    not frames
                    and self._idle_flush_s is not None
                    and started - self._last_frame_wall > self._idle_flush_s
                ):
                    self.pipeline.finished = True
                self._collect(self.pipeline.process())
            if self._source_done and not frames and self.pipeline.finished:
                return
            delay = tick_s - (time.monotonic() - started)
            if delay > 0:
                time.sleep(delay)

    def wait(self, timeout: float | None = None) -> bool:
        """Block until the processing thread finishes; True when it did."""
        for thread in self._threads:
            thread.join(timeout=timeout)
        return all(not t.is_alive() for t in self._threads)

    def stop(self) -> None:
        self._stop.set()
        if self._tcp_listener is not None:
            try:
                self._tcp_listener.close()
            except OSError:
                pass
            self._tcp_listener = None
        for thread in self._threads:
            thread.join(timeout=5.0)
        if self._dispatcher is not None:
            self._dispatcher.close()
            self._dispatcher = None

    # -- control surface (thread-safe) --------------------------------------

    def set_condition(self, label: str):
        with self._state_lock:
            return self.pipeline.set_condition(label)

    def set_modality(self, modality: str):
        with self._state_lock:
            return self.pipeline.set_modality(modality)

    def mark_trial(self, action: str):
        with self._state_lock:
            return self.pipeline.mark_trial(action)

    def set_synth_coupling(self, coupling: float):
        with self._state_lock:
            if self.synth_source is None:
                return False, "no synthetic source attached"
            try:
                self.synth_source.set_coupling(coupling)
            except Exception as exc:
                return False, str(exc)
            return True, None

    def session_state(self) -> dict:
        with self._state_lock:
            state = self.pipeline.session.as_dict()
            if self.synth_source is not None:
                state["coupling"] = self.synth_source.coupling
            return state

    def latency_stats(self) -> dict:
        with self._state_lock:
            return self.pipeline.stats.stats()

    def reset_latency_stats(self) -> None:
        with self._state_lock:
            self.pipeline.stats.reset()


def bench(n_updates: int = 200, seed: int = 0, config: EngineConfig | None = None) -> dict:
    """Latency suite: times the full metric path on realistic window pairs.

    Returns {stage: {p50, p95, max, count}} over ``n_updates`` iterations of
    a 2 x 14 x 768-sample metric computation plus a motion classification of
    a matching 100 Hz segment.
    """
    config = config or EngineConfig()
    rng = np.random.default_rng(seed)
    fs = config.sample_rate
    win_n = round(config.window_s * fs)
    spec = config.filter_spec

    from .pipeline import LatencyStats

    stats = LatencyStats()
    t = np.arange(win_n) / fs
    base = np.sin(2 * np.pi * 10.0 * t)
    motion_n = round(config.window_s * 100.0) + 2
    motion_ts = (np.arange(motion_n) * 10_000).astype(np.int64)

    for i in range(n_updates):
        data_a = base + 0.5 * rng.standard_normal((EEG_CHANNELS, win_n))
        data_b = base + 0.5 * rng.standard_normal((EEG_CHANNELS, win_n))
        epoch_a = EpochWindow("A", 0, data_a, fs)
        epoch_b = EpochWindow("B", 0, data_b, fs)
        stage_ms: dict = {}
        compute_ibs(epoch_a, epoch_b, spec, stage_ms=stage_ms)

        positions = rng.normal(0.0, 0.2, size=(motion_n, 3))
        samples = [
            MotionSample("A", int(ts), tuple(positions[j]), (1.0, 0.0, 0.0, 0.0))
            for j, ts in enumerate(motion_ts)
        ]
        t0 = time.perf_counter()
        velocities = estimate_velocities(samples)
        classify_segment(velocities, 0, int(motion_ts[-1]))
        stage_ms["gate"] = (time.perf_counter() - t0) * 1e3

        stage_ms["total"] = sum(stage_ms.values())
        stats.record_stages(stage_ms)
    return stats.stats()
