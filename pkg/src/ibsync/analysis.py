"""Post-study analysis of recorded sessions.

Re-epochs each trial at a fine hop, trims settling-in edges, rejects noisy
epochs by an STFT spectral-centroid energy score (and motion, when motion
data exists), enforces the 50 % valid-epoch trial rule, and reports pooled
circular correlation per trial and per condition. The per-epoch metric goes
through the same compute path as the real-time engine.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError
from .metric import compute_ibs, fisher_z, inverse_fisher_z
from .motion import MotionSample, classify_segment, estimate_velocities
from .recording import Recording, Trial
from .signals import BANDS, EEG_CHANNELS, EpochWindow, FilterSpec, StreamBuffer, apply_bandpass
from .wire import MOTION_STREAMS, STREAM_EEG_A, STREAM_EEG_B, participant_of

OFFLINE_HOP_S = 0.5
EDGE_EPOCHS_TRIMMED = 3
NOISE_THRESHOLD_K = 3.0

STFT_WINDOW = 256
STFT_HOP = 128

_MOTION_PERIOD_US = 10_000


@dataclass(frozen=True)
class EpochPair:
    """Aligned raw (unfiltered) epochs for both participants."""

    index: int
    epoch_a: EpochWindow
    epoch_b: EpochWindow

    @property
    def start_us(self) -> int:
        return self.epoch_a.start_timestamp_us


@dataclass(frozen=True)
class EpochValidity:
    index: int
    score: float
    valid: bool
    motion_ok: bool = True
    spectral_ok: bool = True


@dataclass
class TrialResult:
    trial_id: int
    condition: str
    total_epochs: int
    trimmed: int
    analyzable: int
    valid: int
    invalid: int
    too_short: bool
    threshold: float | None
    trial_valid: bool
    pooled_ccorr: float | None
    band_pooled: dict = field(default_factory=dict)
    note: str | None = None


@dataclass
class AnalysisReport:
    trials: list[TrialResult]
    conditions: dict  # condition -> {"mean_pooled_ccorr": float|None, "n_trials": int}
    warnings: list[str]
    parameters: dict

    def to_dict(self) -> dict:
        return {
            "parameters": self.parameters,
            "trials": [
                {
                    "trial_id": t.trial_id,
                    "condition": t.condition,
                    "total_epochs": t.total_epochs,
                    "trimmed": t.trimmed,
                    "analyzable": t.analyzable,
                    "valid": t.valid,
                    "invalid": t.invalid,
                    "too_short": t.too_short,
                    "threshold": t.threshold,
                    "trial_valid": t.trial_valid,
                    "pooled_ccorr": t.pooled_ccorr,
                    **({"band_pooled": t.band_pooled} if t.band_pooled else {}),
                    **({"note": t.note} if t.note else {}),
                }
                for t in self.trials
            ],
            "conditions": self.conditions,
            "warnings": self.warnings,
        }


def _load_streams(recording: Recording):
    """(eeg buffer A, eeg buffer B, motion samples per participant)."""
    buffers = {
        STREAM_EEG_A: StreamBuffer(256.0, EEG_CHANNELS),
        STREAM_EEG_B: StreamBuffer(256.0, EEG_CHANNELS),
    }
    motion: dict[str, list[MotionSample]] = {"A": [], "B": []}
    for frame in recording.frames():
        if frame.stream_id in buffers:
            buffers[frame.stream_id].append_frame(frame)
        elif frame.stream_id in MOTION_STREAMS:
            participant = participant_of(frame.stream_id)
            motion[participant].append(
                MotionSample.from_channels(participant, frame.timestamp_us, frame.channels)
            )
    return buffers[STREAM_EEG_A], buffers[STREAM_EEG_B], motion


def epoch_offline(
    recording: Recording,
    window_s: float = 3.0,
    hop_s: float = OFFLINE_HOP_S,
    _streams=None,
) -> list[tuple[Trial, list[EpochPair], str | None]]:
    """Cut aligned epoch pairs per trial, confined within trial boundaries.

    Recordings without trial markers yield an empty list (reported upstream).
    """
    buf_a, buf_b, _ = _streams if _streams is not None else _load_streams(recording)
    fs = buf_a.sample_rate
    win_n = round(window_s * fs)
    hop_us = round(hop_s * 1e6)
    window_us = round(window_s * 1e6)

    out = []
    for trial in recording.trials():
        pairs: list[EpochPair] = []
        note = None
        loc = buf_a.locate(trial.start_us)
        if loc is not None:
            start = buf_a.sample_timestamp(*loc)
        else:
            # marker predates the data (e.g. dropped frames): resume at the
            # first in-trial sample
            later = [s for s, _ in buf_a.segments if s >= trial.start_us]
            if later and later[0] + window_us <= trial.stop_us:
                start = later[0]
                note = "trial start snapped to first available EEG data"
            else:
                out.append((trial, pairs, "no EEG data within the trial"))
                continue
        index = 0
        while start + window_us <= trial.stop_us:
            loc_a = buf_a.locate(start)
            loc_b = buf_b.locate(start)
            ok = loc_a is not None and loc_b is not None
            if ok:
                seg_a, idx_a = loc_a
                seg_b, idx_b = loc_b
                ok = (
                    idx_a + win_n <= buf_a.segments[seg_a][1]
                    and idx_b + win_n <= buf_b.segments[seg_b][1]
                )
            if ok:
                pairs.append(
                    EpochPair(
                        index=index,
                        epoch_a=EpochWindow("A", buf_a.sample_timestamp(seg_a, idx_a),
                                            buf_a.cut(seg_a, idx_a, win_n), fs),
                        epoch_b=EpochWindow("B", buf_b.sample_timestamp(seg_b, idx_b),
                                            buf_b.cut(seg_b, idx_b, win_n), fs),
                    )
                )
                index += 1
            else:
                note = "epochs skipped over a stream gap"
            start += hop_us
        out.append((trial, pairs, note))
    return out


def trim_edges(epochs: list, n: int = EDGE_EPOCHS_TRIMMED) -> tuple[list, bool]:
    """Drop the first and last ``n`` epochs; flags trials left empty."""
    if n < 0:
        raise InputError(f"trim count must be >= 0, got {n}")
    too_short = len(epochs) <= 2 * n
    if too_short:
        return [], True
    return epochs[n : len(epochs) - n], False


def frame_spectral_features(channel: np.ndarray, fs: float = 256.0) -> tuple[np.ndarray, np.ndarray]:
    """(centroids Hz, energies) per Hann-windowed STFT frame of one channel."""
    channel = np.asarray(channel, dtype=np.float64)
    if channel.size < STFT_WINDOW:
        raise InputError(f"epoch shorter than one STFT window ({channel.size} < {STFT_WINDOW})")
    window = np.hanning(STFT_WINDOW)
    freqs = np.fft.rfftfreq(STFT_WINDOW, d=1.0 / fs)
    centroids, energies = [], []
    for start in range(0, channel.size - STFT_WINDOW + 1, STFT_HOP):
        spectrum = np.abs(np.fft.rfft(channel[start : start + STFT_WINDOW] * window))
        mass = float(np.sum(spectrum))
        centroids.append(float(np.sum(freqs * spectrum)) / mass if mass > 0 else 0.0)
        energies.append(float(np.sum(spectrum**2)))
    return np.asarray(centroids), np.asarray(energies)


def spectral_energy_score(epoch_data: np.ndarray, fs: float = 256.0) -> float:
    """Centroid-weighted STFT energy, summed over channels.

    Per channel: Hann-windowed 256-sample frames with hop 128; per frame the
    spectral centroid sum(f*|X|)/sum(|X|) weights the frame energy
    sum(|X|^2); the channel score is the mean over frames and the epoch
    score the sum over channels. High-frequency noise (muscle and motion
    artifacts) scores high; a zero epoch scores 0.
    """
    data = np.atleast_2d(np.asarray(epoch_data, dtype=np.float64))
    total = 0.0
    for channel in data:
        centroids, energies = frame_spectral_features(channel, fs)
        total += float(np.mean(centroids * energies))
    return total


def reject_noisy_epochs(
    scores, threshold_k: float = NOISE_THRESHOLD_K
) -> tuple[list[EpochValidity], float | None, str | None]:
    """Median + k*MAD outlier rule, computed per trial.

    Returns (validities, threshold, note). Fewer than 5 scores: everything
    passes with a low-confidence note. Identical scores (MAD = 0) all pass,
    since rejection needs a score strictly above the threshold.
    """
    scores = [float(s) for s in scores]
    if len(scores) < 5:
        return (
            [EpochValidity(i, s, True) for i, s in enumerate(scores)],
            None,
            "fewer than 5 epochs: spectral rejection skipped (low confidence)",
        )
    median = float(np.median(scores))
    mad = float(np.median(np.abs(np.asarray(scores) - median)))
    threshold = median + threshold_k * mad
    validities = [
        EpochValidity(i, s, s <= threshold, spectral_ok=s <= threshold)
        for i, s in enumerate(scores)
    ]
    return validities, threshold, None


def _motion_ok(motion: list[MotionSample], start_us: int, end_us: int) -> bool:
    window = [
        s for s in motion if start_us - _MOTION_PERIOD_US <= s.timestamp_us <= end_us + _MOTION_PERIOD_US
    ]
    if len(window) < 3:
        return True  # no motion coverage: cannot reject on motion
    verdict = classify_segment(estimate_velocities(window), start_us, end_us)
    return not verdict.rejected


def _pool_epoch_values(values: list[float]) -> float | None:
    if not values:
        return None
    return inverse_fisher_z(float(np.mean([fisher_z(v) for v in values])))


def _epoch_metrics(pairs, validities, filter_spec: FilterSpec) -> list[float]:
    """Per-epoch metric values over the valid epochs; unpairable epochs
    (pathological gap alignment) contribute nothing."""
    values = []
    for pair, validity in zip(pairs, validities):
        if not validity.valid:
            continue
        try:
            metric = compute_ibs(pair.epoch_a, pair.epoch_b, filter_spec)
        except InputError:
            continue
        if metric.valid:
            values.append(metric.value)
    return values


def analyze(
    recording: Recording,
    window_s: float = 3.0,
    hop_s: float = OFFLINE_HOP_S,
    trim_n: int = EDGE_EPOCHS_TRIMMED,
    threshold_k: float = NOISE_THRESHOLD_K,
    filter_spec: FilterSpec | None = None,
    per_band: bool = False,
) -> AnalysisReport:
    """Full offline pipeline over one recording."""
    filter_spec = filter_spec or FilterSpec(mode="zero_phase")
    warnings: list[str] = []
    trials_out: list[TrialResult] = []

    streams = _load_streams(recording)
    per_trial = epoch_offline(recording, window_s=window_s, hop_s=hop_s, _streams=streams)
    if not per_trial:
        warnings.append("recording has no trial markers; nothing to analyze")
    motion = streams[2]

    for trial, pairs, note in per_trial:
        total = len(pairs)
        kept, too_short = trim_edges(pairs, trim_n)
        trimmed = total - len(kept)
        if too_short or not kept:
            trials_out.append(
                TrialResult(
                    trial_id=trial.trial_id,
                    condition=trial.condition,
                    total_epochs=total,
                    trimmed=trimmed,
                    analyzable=0,
                    valid=0,
                    invalid=0,
                    too_short=True,
                    threshold=None,
                    trial_valid=False,
                    pooled_ccorr=None,
                    note=note or "trial too short after edge trimming",
                )
            )
            continue

        scores = []
        for pair in kept:
            filtered = np.vstack(
                [
                    apply_bandpass(filter_spec, pair.epoch_a.data, pair.epoch_a.sample_rate),
                    apply_bandpass(filter_spec, pair.epoch_b.data, pair.epoch_b.sample_rate),
                ]
            )
            scores.append(spectral_energy_score(filtered, pair.epoch_a.sample_rate))
        validities, threshold, reject_note = reject_noisy_epochs(scores, threshold_k)
        if reject_note:
            note = f"{note}; {reject_note}" if note else reject_note

        final: list[EpochValidity] = []
        for pair, validity in zip(kept, validities):
            end_us = pair.epoch_a.end_timestamp_us
            motion_ok = _motion_ok(motion["A"], pair.start_us, end_us) and _motion_ok(
                motion["B"], pair.start_us, end_us
            )
            final.append(
                EpochValidity(
                    index=validity.index,
                    score=validity.score,
                    valid=validity.valid and motion_ok,
                    motion_ok=motion_ok,
                    spectral_ok=validity.spectral_ok,
                )
            )

        analyzable = len(kept)
        n_valid = sum(1 for v in final if v.valid)
        trial_valid = n_valid >= 0.5 * analyzable and analyzable > 0

        pooled = None
        band_pooled: dict = {}
        if trial_valid:
            pooled = _pool_epoch_values(_epoch_metrics(kept, final, filter_spec))
            if per_band:
                for band, (low, high) in BANDS.items():
                    band_spec = FilterSpec(low, high, filter_spec.order, filter_spec.mode)
                    band_pooled[band] = _pool_epoch_values(_epoch_metrics(kept, final, band_spec))

        trials_out.append(
            TrialResult(
                trial_id=trial.trial_id,
                condition=trial.condition,
                total_epochs=total,
                trimmed=trimmed,
                analyzable=analyzable,
                valid=n_valid,
                invalid=analyzable - n_valid,
                too_short=False,
                threshold=threshold,
                trial_valid=trial_valid,
                pooled_ccorr=pooled,
                band_pooled=band_pooled,
                note=note,
            )
        )

    conditions: dict = {}
    for trial_result in trials_out:
        if trial_result.trial_valid and trial_result.pooled_ccorr is not None:
            conditions.setdefault(trial_result.condition, []).append(trial_result.pooled_ccorr)
    condition_table = {
        condition: {
            "mean_pooled_ccorr": float(np.mean(values)),
            "n_trials": len(values),
        }
        for condition, values in sorted(conditions.items())
    }
    if per_trial and not condition_table:
        warnings.append("all trials rejected; condition table is empty")

    return AnalysisReport(
        trials=trials_out,
        conditions=condition_table,
        warnings=warnings,
        parameters={
            "window_s": window_s,
            "hop_s": hop_s,
            "trim_n": trim_n,
            "threshold_k": threshold_k,
            "filter_mode": filter_spec.mode,
            "per_band": per_band,
        },
    )


_CSV_FIELDS = [
    "trial_id",
    "condition",
    "total_epochs",
    "trimmed",
    "analyzable",
    "valid",
    "invalid",
    "too_short",
    "threshold",
    "trial_valid",
    "pooled_ccorr",
]


def write_report(report: AnalysisReport, out_dir: str | Path) -> tuple[Path, Path]:
    """Emit report.json and report.csv with stable field ordering."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path = out_dir / "report.json"
    json_path.write_text(json.dumps(report.to_dict(), indent=2) + "\n")

    csv_path = out_dir / "report.csv"
    with open(csv_path, "w", newline="") as fh:
        bands = sorted({band for t in report.trials for band in t.band_pooled})
        writer = csv.writer(fh)
        writer.writerow(_CSV_FIELDS + [f"pooled_{band}" for band in bands])
        for t in report.trials:
            row = [getattr(t, name) for name in _CSV_FIELDS]
            row += [t.band_pooled.get(band) for band in bands]
            writer.writerow(row)
    return json_path, csv_path
