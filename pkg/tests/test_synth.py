import numpy as np
import pytest

from ibsync import (
    ArtifactBurst,
    ConfigError,
    EpochWindow,
    FilterSpec,
    SynthConfig,
    SynthSource,
    compute_ibs,
    synthesize,
)
from ibsync.motion import MotionSample, estimate_velocities
from ibsync.wire import STREAM_EEG_A, STREAM_EEG_B, STREAM_MOTION_A


def pooled_ibs_trace(result, spec=None):
    spec = spec or FilterSpec()
    fs = result.config.sample_rate
    values = []
    start = 0
    n = result.eeg_ts_us.size
    while start + 768 <= n:
        ea = EpochWindow("A", int(result.eeg_ts_us[start]), result.eeg["A"][:, start : start + 768], fs)
        eb = EpochWindow("B", int(result.eeg_ts_us[start]), result.eeg["B"][:, start : start + 768], fs)
        metric = compute_ibs(ea, eb, spec)
        if metric.valid:
            values.append(metric.value)
        start += 384
    return values


class TestDeterminism:
    def test_identical_seed_and_config_bit_identical(self):
        config = SynthConfig(duration_s=4.0, coupling=0.5)
        r1, r2 = synthesize(config, seed=9), synthesize(config, seed=9)
        for key in ("A", "B"):
            assert np.array_equal(r1.eeg[key], r2.eeg[key])
            assert np.array_equal(r1.motion[key], r2.motion[key])
        assert np.array_equal(r1.eeg_ts_us, r2.eeg_ts_us)

    def test_different_seeds_differ(self):
        config = SynthConfig(duration_s=4.0, coupling=0.5)
        assert not np.array_equal(synthesize(config, 1).eeg["A"], synthesize(config, 2).eeg["A"])

    def test_frame_stream_deterministic(self):
        config = SynthConfig(duration_s=2.0)
        assert list(synthesize(config, 3).frames()) == list(synthesize(config, 3).frames())


class TestCouplingLimits:
    def test_perfect_coupling_no_noise_near_unity(self):
        result = synthesize(SynthConfig(duration_s=3.0, coupling=1.0, noise_sigma=0.0), seed=4)
        ea = EpochWindow("A", 0, result.eeg["A"][:, :768], 256.0)
        eb = EpochWindow("B", 0, result.eeg["B"][:, :768], 256.0)
        metric = compute_ibs(ea, eb, FilterSpec())
        assert metric.valid
        assert metric.value >= 0.99

    def test_uncoupled_below_strongly_coupled(self):
        # Sign test over paired seeds, and a >= 10 % mean separation.
        low, high = [], []
        for seed in range(20):
            low.append(np.mean(pooled_ibs_trace(synthesize(SynthConfig(12.0, coupling=0.0), seed))))
            high.append(np.mean(pooled_ibs_trace(synthesize(SynthConfig(12.0, coupling=0.8), seed))))
        wins = sum(h > l for h, l in zip(high, low))
        assert wins >= 15  # sign test: P(X >= 15 | n=20, p=0.5) < 0.05
        assert np.mean(high) >= 1.10 * np.mean(low)

    def test_coupling_monotone_in_mean(self):
        means = []
        for kappa in (0.0, 0.4, 0.8):
            per_seed = [
                np.mean(pooled_ibs_trace(synthesize(SynthConfig(9.0, coupling=kappa), seed)))
                for seed in range(20)
            ]
            means.append(np.mean(per_seed))
        assert means[0] <= means[1] <= means[2]


class TestArtifacts:
    def test_burst_drives_motion_over_threshold(self):
        config = SynthConfig(duration_s=16.0, artifact_schedule=(ArtifactBurst(10.0, 2.0, "A"),))
        result = synthesize(config, seed=0)
        samples = [
            MotionSample.from_channels("A", int(ts), result.motion["A"][:, i])
            for i, ts in enumerate(result.motion_ts_us)
        ]
        velocities = estimate_velocities(samples)
        t = result.motion_ts_us[1:-1] / 1e6
        burst = (t >= 10.2) & (t <= 11.8)
        quiet = (t >= 1.0) & (t <= 9.0)
        assert velocities[burst, 0].max() > 200.0
        assert velocities[burst, 1].max() > 1.0
        assert velocities[quiet, 0].max() < 200.0
        assert velocities[quiet, 1].max() < 1.0

    def test_burst_deflects_eeg(self):
        config = SynthConfig(duration_s=8.0, artifact_schedule=(ArtifactBurst(4.0, 2.0, "B"),))
        result = synthesize(config, seed=0)
        burst_slice = result.eeg["B"][:, 4 * 256 : 6 * 256]
        quiet_slice = result.eeg["B"][:, 1 * 256 : 3 * 256]
        assert np.abs(burst_slice).max() > 3 * np.abs(quiet_slice).max()

    def test_burst_only_affects_scheduled_participant(self):
        config = SynthConfig(duration_s=8.0, artifact_schedule=(ArtifactBurst(4.0, 2.0, "B"),))
        result = synthesize(config, seed=0)
        samples = [
            MotionSample.from_channels("A", int(ts), result.motion["A"][:, i])
            for i, ts in enumerate(result.motion_ts_us)
        ]
        velocities = estimate_velocities(samples)
        assert velocities[:, 0].max() < 200.0

    def test_schedule_validation(self):
        with pytest.raises(ConfigError):
            SynthSource(SynthConfig(duration_s=5.0, artifact_schedule=(ArtifactBurst(4.0, 2.0, "A"),)))
        with pytest.raises(ConfigError):
            SynthSource(SynthConfig(duration_s=5.0, artifact_schedule=(ArtifactBurst(1.0, 1.0, "C"),)))
        with pytest.raises(ConfigError):
            SynthSource(SynthConfig(duration_s=5.0, coupling=1.5))


class TestFrames:
    def test_frames_ordered_and_complete(self):
        result = synthesize(SynthConfig(duration_s=2.0), seed=1)
        frames = list(result.frames())
        eeg_a = [f for f in frames if f.stream_id == STREAM_EEG_A]
        eeg_b = [f for f in frames if f.stream_id == STREAM_EEG_B]
        motion_a = [f for f in frames if f.stream_id == STREAM_MOTION_A]
        assert len(eeg_a) == len(eeg_b) == 512
        assert len(motion_a) == 200
        keys = [(f.timestamp_us, f.stream_id) for f in frames]
        assert keys == sorted(keys)
        assert all(len(f.channels) == 14 for f in eeg_a)
        assert all(len(f.channels) == 7 for f in motion_a)

    def test_live_coupling_change_recorded_in_trace(self):
        source = SynthSource(SynthConfig(duration_s=4.0, coupling=0.0), seed=0)
        source.next_chunk()
        source.set_coupling(0.8)
        assert source.coupling_trace[0] == (0, 0.0)
        t_us, kappa = source.coupling_trace[1]
        assert kappa == 0.8
        assert t_us == 250_000  # one chunk in

    def test_chunked_source_matches_batch(self):
        config = SynthConfig(duration_s=3.0, coupling=0.6)
        batch = synthesize(config, seed=5)
        source = SynthSource(config, seed=5)
        chunks = []
        while (chunk := source.next_chunk()) is not None:
            chunks.append(chunk[0])
        assert np.array_equal(np.concatenate(chunks, axis=-1), batch.eeg["A"])
