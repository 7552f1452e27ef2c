import numpy as np
import pytest

from ibsync import (
    ConfigError,
    DegeneratePhaseError,
    EpochWindow,
    FilterSpec,
    InputError,
    StreamBuffer,
    apply_bandpass,
    instantaneous_phase,
    slide_windows,
    wrap_phase,
)

from oracles import tone_amplitude

FS = 256.0


def tone(freq, seconds=3.0, fs=FS, phase=0.0):
    t = np.arange(round(seconds * fs)) / fs
    return np.sin(2 * np.pi * freq * t + phase)


class TestBandpass:
    def test_passband_tone_preserved(self):
        x = tone(10.0)
        for mode in ("causal", "zero_phase"):
            y = apply_bandpass(FilterSpec(mode=mode), x, FS)
            amplitude = tone_amplitude(y[256:-256], FS, 10.0)
            assert 0.7 <= amplitude <= 1.0 + 1e-6, mode

    def test_stopband_tone_attenuated_20db(self):
        # Oracle: FFT tone amplitudes of the zero-phase output, which doubles
        # the single-pass rolloff; 60 Hz sits 1.25x above the 48 Hz edge.
        spec = FilterSpec(mode="zero_phase")
        in_band = apply_bandpass(spec, tone(10.0, seconds=4.0), FS)
        out_band = apply_bandpass(spec, tone(60.0, seconds=4.0), FS)
        amp_10 = tone_amplitude(in_band[256:-256], FS, 10.0)
        amp_60 = tone_amplitude(out_band[256:-256], FS, 60.0)
        attenuation_db = 20 * np.log10(amp_10 / amp_60)
        assert attenuation_db >= 20.0

    def test_zero_in_zero_out(self):
        y = apply_bandpass(FilterSpec(), np.zeros(768), FS)
        assert np.allclose(y, 0.0)

    def test_linearity(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(768)
        spec = FilterSpec()
        base = apply_bandpass(spec, x, FS)
        for scale in (-10.0, -0.5, 2.0, 10.0):
            assert np.allclose(apply_bandpass(spec, scale * x, FS), scale * base, atol=1e-9)

    def test_stability_bounded_output(self):
        rng = np.random.default_rng(1)
        x = rng.uniform(-1.0, 1.0, size=1_000_000)
        y = apply_bandpass(FilterSpec(), x, FS)
        assert np.all(np.abs(y) <= 10.0)

    def test_zero_phase_has_no_lag(self):
        x = tone(10.0, seconds=4.0)
        y = apply_bandpass(FilterSpec(mode="zero_phase"), x, FS)
        xc, yc = x[256:-256], y[256:-256]
        lags = range(-5, 6)
        corr = [np.dot(yc[max(0, l):len(yc)+min(0, l)], xc[max(0, -l):len(xc)+min(0, -l)]) for l in lags]
        assert lags[int(np.argmax(corr))] == 0

    def test_causal_mode_is_single_pass(self):
        # A causal filter cannot anticipate: output before the impulse is 0.
        x = np.zeros(768)
        x[400] = 1.0
        y = apply_bandpass(FilterSpec(), x, FS)
        assert np.allclose(y[:400], 0.0, atol=1e-12)

    def test_invalid_spec_rejected(self):
        with pytest.raises(ConfigError):
            apply_bandpass(FilterSpec(low_cut=50.0, high_cut=48.0), tone(10), FS)
        with pytest.raises(ConfigError):
            apply_bandpass(FilterSpec(high_cut=130.0), tone(10), FS)  # above Nyquist
        with pytest.raises(ConfigError):
            apply_bandpass(FilterSpec(low_cut=0.0), tone(10), FS)

    def test_short_signal_rejected(self):
        with pytest.raises(InputError):
            apply_bandpass(FilterSpec(), np.ones(8), FS)

    def test_multichannel_shape_preserved(self):
        x = np.vstack([tone(10), tone(20)])
        y = apply_bandpass(FilterSpec(), x, FS)
        assert y.shape == x.shape


class TestInstantaneousPhase:
    def test_phase_slope_of_pure_tone(self):
        x = tone(8.0)
        phase = instantaneous_phase(x)
        unwrapped = np.unwrap(phase)[32:-32]
        slope = np.mean(np.diff(unwrapped))
        assert slope == pytest.approx(2 * np.pi * 8.0 / FS, abs=1e-2)

    def test_quadrature_offset(self):
        t = np.arange(768) / FS
        cos_phase = instantaneous_phase(np.cos(2 * np.pi * 8 * t))
        sin_phase = instantaneous_phase(np.sin(2 * np.pi * 8 * t))
        diff = wrap_phase(cos_phase - sin_phase)[32:-32]
        assert np.allclose(diff, np.pi / 2, atol=1e-2)

    def test_negation_shifts_by_pi(self):
        x = tone(8.0)
        p1 = instantaneous_phase(x)[32:-32]
        p2 = instantaneous_phase(-x)[32:-32]
        diff = np.abs(wrap_phase(p1 - p2))
        assert np.allclose(diff, np.pi, atol=1e-9)

    def test_output_in_wrap_range(self):
        rng = np.random.default_rng(2)
        x = apply_bandpass(FilterSpec(), rng.standard_normal(768), FS)
        phase = instantaneous_phase(x)
        assert np.all(phase > -np.pi) and np.all(phase <= np.pi)

    def test_all_zero_rejected(self):
        with pytest.raises(DegeneratePhaseError):
            instantaneous_phase(np.zeros(768))

    def test_too_short_rejected(self):
        with pytest.raises(InputError):
            instantaneous_phase(np.ones(32))


class TestWrapPhase:
    def test_wrap_range_and_fixed_points(self):
        assert wrap_phase(np.pi) == pytest.approx(np.pi)
        assert wrap_phase(-np.pi) == pytest.approx(np.pi)  # -pi maps to +pi
        assert wrap_phase(0.0) == 0.0
        values = wrap_phase(np.linspace(-20, 20, 10001))
        assert np.all(values > -np.pi) and np.all(values <= np.pi)

    def test_wrap_preserves_angle_mod_2pi(self):
        x = np.linspace(-20, 20, 1001)
        assert np.allclose(np.exp(1j * wrap_phase(x)), np.exp(1j * x), atol=1e-12)


def fill_buffer(buffer, n, fs=FS, t0_us=0, channels=1):
    for i in range(n):
        buffer.append(t0_us + round(i * 1e6 / fs), np.full(channels, float(i)))


class TestSlideWindows:
    def test_six_seconds_gives_three_windows(self):
        buf = StreamBuffer(FS, 1)
        fill_buffer(buf, round(6 * FS))
        windows = slide_windows(buf, 3.0, 1.5)
        assert len(windows) == 3
        assert [w.n_samples for w in windows] == [768, 768, 768]
        assert [w.start_timestamp_us for w in windows] == [0, 1_500_000, 3_000_000]
        # windows start at samples 0, 384, 768
        assert [int(w.data[0, 0]) for w in windows] == [0, 384, 768]

    def test_exactly_one_window(self):
        buf = StreamBuffer(FS, 1)
        fill_buffer(buf, 768)
        assert len(slide_windows(buf, 3.0, 1.5)) == 1

    def test_insufficient_data(self):
        buf = StreamBuffer(FS, 1)
        fill_buffer(buf, round(2.9 * FS))
        assert slide_windows(buf, 3.0, 1.5) == []

    def test_window_count_formula(self):
        for duration_s in (3.0, 4.5, 7.5, 12.0, 20.25):
            buf = StreamBuffer(FS, 1)
            fill_buffer(buf, round(duration_s * FS))
            expected = int(np.floor((duration_s - 3.0) / 1.5)) + 1
            assert len(slide_windows(buf, 3.0, 1.5)) == expected, duration_s

    def test_gap_restarts_emission(self):
        buf = StreamBuffer(FS, 1)
        fill_buffer(buf, round(4 * FS))
        # one second of missing samples
        fill_buffer(buf, round(4 * FS), t0_us=5_000_000)
        assert buf.gap_count == 1
        windows = slide_windows(buf, 3.0, 1.5)
        assert len(windows) == 2
        assert windows[0].start_timestamp_us == 0
        assert windows[1].start_timestamp_us == 5_000_000

    def test_hop_larger_than_window_rejected(self):
        buf = StreamBuffer(FS, 1)
        fill_buffer(buf, 768)
        with pytest.raises(ConfigError):
            slide_windows(buf, 3.0, 4.0)

    def test_non_monotonic_timestamp_rejected(self):
        buf = StreamBuffer(FS, 1)
        buf.append(0, [0.0])
        with pytest.raises(InputError):
            buf.append(0, [1.0])


class TestStreamBuffer:
    def test_drop_before_keeps_later_windows(self):
        buf = StreamBuffer(FS, 1)
        fill_buffer(buf, round(6 * FS))
        buf.drop_before(1_500_000)
        windows = slide_windows(buf, 3.0, 1.5)
        assert windows[0].start_timestamp_us == 1_500_000
        assert int(windows[0].data[0, 0]) == 384

    def test_locate_tolerates_half_period(self):
        buf = StreamBuffer(FS, 1)
        fill_buffer(buf, 768)
        seg, idx = buf.locate(1_500_000)  # sample 384
        assert (seg, idx) == (0, 384)
        assert buf.locate(1_500_000 + 1500) == (0, 384)  # within half a period
        assert buf.locate(10_000_000) is None
