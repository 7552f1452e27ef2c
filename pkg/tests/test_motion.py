import math

import numpy as np
import pytest

from ibsync import (
    InputError,
    IbsMetric,
    MotionGate,
    MotionSample,
    MotionVerdict,
    classify_segment,
    estimate_velocities,
    gate,
)


def pose(participant, ts_us, position=(0.0, 0.0, 0.0), angle_rad=0.0):
    """Sample rotated about z by angle_rad."""
    q = (math.cos(angle_rad / 2), 0.0, 0.0, math.sin(angle_rad / 2))
    return MotionSample(participant, ts_us, tuple(position), q)


def constant_pose_series(n=30, dt_us=10_000):
    return [pose("A", i * dt_us) for i in range(n)]


class TestEstimateVelocities:
    def test_linear_translation(self):
        # 10 mm per 10 ms sample: central difference gives 20 mm / 20 ms.
        samples = [pose("A", i * 10_000, position=(10.0 * i, 0.0, 0.0)) for i in range(10)]
        velocities = estimate_velocities(samples)
        assert velocities.shape == (8, 2)
        assert np.allclose(velocities[:, 0], 1000.0)

    def test_constant_rotation(self):
        # 0.02 rad per sample at 100 Hz = 2 rad/s.
        samples = [pose("A", i * 10_000, angle_rad=0.02 * i) for i in range(10)]
        velocities = estimate_velocities(samples)
        assert np.allclose(velocities[:, 1], 2.0, atol=1e-9)

    def test_stationary(self):
        velocities = estimate_velocities(constant_pose_series())
        assert np.allclose(velocities, 0.0)

    def test_oracle_finite_difference(self):
        rng = np.random.default_rng(0)
        positions = rng.normal(0, 5, size=(20, 3))
        samples = [pose("A", i * 10_000, position=tuple(positions[i])) for i in range(20)]
        velocities = estimate_velocities(samples)
        for i in range(1, 19):
            expected = np.linalg.norm(positions[i + 1] - positions[i - 1]) / 0.02
            assert velocities[i - 1, 0] == pytest.approx(expected, rel=1e-9)

    def test_too_few_samples(self):
        with pytest.raises(InputError):
            estimate_velocities(constant_pose_series(2))

    def test_non_monotonic_timestamps(self):
        samples = [pose("A", 0), pose("A", 10_000), pose("A", 10_000)]
        with pytest.raises(InputError):
            estimate_velocities(samples)


class TestClassifySegment:
    def test_fast_linear_rejected(self):
        velocities = np.array([[250.0, 0.2], [100.0, 0.1]])
        verdict = classify_segment(velocities, 0, 1_000_000)
        assert verdict.rejected
        assert verdict.linear_peak_mm_s == 250.0

    def test_slow_motion_accepted(self):
        velocities = np.array([[100.0, 0.5], [80.0, 0.3]])
        assert not classify_segment(velocities, 0, 1_000_000).rejected

    def test_exact_thresholds_pass(self):
        # "over" is strict: exactly 200 mm/s and 1.0 rad/s are acceptable.
        velocities = np.array([[200.0, 1.0]])
        assert not classify_segment(velocities, 0, 1_000_000).rejected
        assert classify_segment(np.array([[200.0001, 1.0]]), 0, 1).rejected
        assert classify_segment(np.array([[200.0, 1.0001]]), 0, 1).rejected

    def test_fast_angular_rejected(self):
        velocities = np.array([[50.0, 1.5]])
        assert classify_segment(velocities, 0, 1).rejected

    def test_empty_segment_accepted_with_flag(self):
        verdict = classify_segment(np.empty((0, 2)), 0, 1)
        assert not verdict.rejected
        assert verdict.empty

    def test_monotone_safety_under_stricter_thresholds(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            velocities = rng.uniform(0, 400, size=(10, 2)) * np.array([1.0, 0.005])
            rejected = classify_segment(velocities, 0, 1).rejected
            stricter = classify_segment(
                velocities, 0, 1, linear_threshold=150.0, angular_threshold=0.5
            ).rejected
            if rejected:
                assert stricter


def metric(value, start=0, valid=True, held=False):
    return IbsMetric(value=value, epoch_start_us=start, valid=valid, held=held)


def verdict(rejected):
    return MotionVerdict(0, 3_000_000, 0.0, 0.0, rejected)


class TestGate:
    def test_both_accepted_passes_through(self):
        m = metric(0.6)
        assert gate(m, verdict(False), verdict(False), last_valid=None) is m

    def test_either_rejected_holds_last_valid(self):
        held = gate(metric(0.9, start=1_500_000), verdict(False), verdict(True), metric(0.42))
        assert held.value == 0.42  # exact equality: carried value is reused as-is
        assert held.held and held.valid
        assert held.epoch_start_us == 1_500_000

    def test_rejected_without_history_is_invalid(self):
        out = gate(metric(0.9), verdict(True), verdict(False), last_valid=None)
        assert not out.valid and not out.held
        assert math.isfinite(out.value)


class TestMotionGate:
    def test_hold_then_recover(self):
        g = MotionGate()
        first = g.apply(metric(0.5, 0), verdict(False), verdict(False))
        assert first.value == 0.5 and not first.held
        held = g.apply(metric(0.9, 1), verdict(True), verdict(False))
        assert held.held and held.value == 0.5
        recovered = g.apply(metric(0.7, 2), verdict(False), verdict(False))
        assert not recovered.held and recovered.value == 0.7

    def test_staleness_cap_after_five_holds(self):
        g = MotionGate()
        g.apply(metric(0.5, 0), verdict(False), verdict(False))
        outputs = [g.apply(metric(0.9, i), verdict(True), verdict(True)) for i in range(1, 8)]
        assert all(o.held and o.valid and o.value == 0.5 for o in outputs[:5])
        assert all((not o.valid) and (not o.held) for o in outputs[5:])

    def test_hold_counter_resets_on_clean_epoch(self):
        g = MotionGate()
        g.apply(metric(0.5, 0), verdict(False), verdict(False))
        for i in range(4):
            g.apply(metric(0.9, i), verdict(True), verdict(False))
        g.apply(metric(0.6, 10), verdict(False), verdict(False))
        out = g.apply(metric(0.9, 11), verdict(True), verdict(False))
        assert out.held and out.value == 0.6

    def test_never_emits_non_finite(self):
        g = MotionGate()
        rng = np.random.default_rng(2)
        for i in range(200):
            rejected = bool(rng.integers(0, 2))
            out = g.apply(metric(float(rng.uniform(-1, 1)), i), verdict(rejected), verdict(False))
            assert math.isfinite(out.value)

    def test_held_output_equals_previously_emitted_valid_value(self):
        g = MotionGate()
        rng = np.random.default_rng(3)
        emitted_valid: list[float] = []
        for i in range(300):
            rejected = rng.uniform() < 0.4
            out = g.apply(metric(float(rng.uniform(0, 1)), i), verdict(rejected), verdict(False))
            if out.held:
                assert out.value in emitted_valid
            elif out.valid:
                emitted_valid.append(out.value)
