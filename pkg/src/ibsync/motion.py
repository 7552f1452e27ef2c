"""Motion-capture velocity gating of the synchrony metric.

Segments where either participant's head moves too fast are rejected and the
last valid metric is held instead, up to a staleness cap.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .metric import IbsMetric

LINEAR_THRESHOLD_MM_S = 200.0
ANGULAR_THRESHOLD_RAD_S = 1.0
MOTION_SAMPLE_RATE = 100.0

# Consecutive held epochs allowed before the output is declared stale
# (5 epochs = 7.5 s at the default 1.5 s hop).
MAX_HOLD_EPOCHS = 5

_QUAT_NORM_TOL = 1e-6


@dataclass(frozen=True)
class MotionSample:
    """One tracker pose: position in mm plus a unit quaternion (w, x, y, z)."""

    participant_id: str
    timestamp_us: int
    position: tuple[float, float, float]
    orientation: tuple[float, float, float, float]

    def __post_init__(self):
        norm = float(np.linalg.norm(self.orientation))
        if abs(norm - 1.0) > _QUAT_NORM_TOL:
            raise InputError(f"orientation quaternion norm {norm} is not 1")

    @classmethod
    def from_channels(cls, participant_id: str, timestamp_us: int, channels) -> "MotionSample":
        """Build from the 7-channel wire layout x, y, z, qw, qx, qy, qz."""
        x, y, z, qw, qx, qy, qz = (float(v) for v in channels)
        q = np.array([qw, qx, qy, qz])
        norm = float(np.linalg.norm(q))
        if norm <= 0.0:
            raise InputError("zero quaternion on motion stream")
        if abs(norm - 1.0) > _QUAT_NORM_TOL:
            q = q / norm  # float32 wire quantization
        return cls(participant_id, int(timestamp_us), (x, y, z), tuple(q))


@dataclass(frozen=True)
class MotionVerdict:
    """Artifact classification of one time segment.

    ``empty`` flags a segment judged without any velocity samples
    (accepted by default, low confidence).
    """

    segment_start_us: int
    segment_end_us: int
    linear_peak_mm_s: float
    angular_peak_rad_s: float
    rejected: bool
    empty: bool = False


def estimate_velocities(samples: list[MotionSample]) -> np.ndarray:
    """(linear mm/s, angular rad/s) per interior sample, shape (n-2, 2).

    Linear speed is a central finite difference of position; angular speed
    sums the two adjacent consecutive-quaternion geodesic angles over the
    same two-sample span.
    """
    if len(samples) < 3:
        raise InputError(f"need >= 3 motion samples, got {len(samples)}")
    ts = np.array([s.timestamp_us for s in samples], dtype=np.float64)
    if np.any(np.diff(ts) <= 0):
        raise InputError("motion timestamps must be strictly increasing")
    pos = np.array([s.position for s in samples])
    quat = np.array([s.orientation for s in samples])

    t_s = ts * 1e-6
    dt2 = t_s[2:] - t_s[:-2]
    linear = np.linalg.norm(pos[2:] - pos[:-2], axis=1) / dt2
    dots = np.clip(np.abs(np.sum(quat[1:] * quat[:-1], axis=1)), 0.0, 1.0)
    step_angles = 2.0 * np.arccos(dots)  # consecutive-sample geodesic angles
    angular = (step_angles[:-1] + step_angles[1:]) / dt2
    return np.column_stack([linear, angular])


def classify_segment(
    velocities: np.ndarray,
    segment_start_us: int,
    segment_end_us: int,
    linear_threshold: float = LINEAR_THRESHOLD_MM_S,
    angular_threshold: float = ANGULAR_THRESHOLD_RAD_S,
) -> MotionVerdict:
    """Reject iff any velocity strictly exceeds a threshold.

    "Over" is read literally: a peak of exactly 200 mm/s or 1 rad/s passes.
    An empty velocity set is accepted with the ``empty`` warning flag.
    """
    velocities = np.asarray(velocities, dtype=np.float64).reshape(-1, 2)
    if velocities.shape[0] == 0:
        return MotionVerdict(segment_start_us, segment_end_us, 0.0, 0.0, False, empty=True)
    linear_peak = float(np.max(velocities[:, 0]))
    angular_peak = float(np.max(velocities[:, 1]))
    rejected = linear_peak > linear_threshold or angular_peak > angular_threshold
    return MotionVerdict(segment_start_us, segment_end_us, linear_peak, angular_peak, rejected)


def gate(
    metric: IbsMetric,
    verdict_a: MotionVerdict,
    verdict_b: MotionVerdict,
    last_valid: IbsMetric | None,
) -> IbsMetric:
    """Hold the last valid value when either participant's segment is rejected.

    With no history to hold, a rejected epoch yields valid=False (the
    feedback layer then emits its neutral level). Never returns a
    non-finite value.
    """
    if not (verdict_a.rejected or verdict_b.rejected):
        return metric
    if last_valid is not None:
        return IbsMetric(
            value=last_valid.value,
            epoch_start_us=metric.epoch_start_us,
            valid=True,
            held=True,
        )
    return IbsMetric(value=0.0, epoch_start_us=metric.epoch_start_us, valid=False, held=False)


class MotionGate:
    """Stateful gate: tracks the last valid metric and the hold-run length.

    After ``max_hold`` consecutive held epochs the output drops to
    valid=False instead of repeating an ever-staler value.
    """

    def __init__(self, max_hold: int = MAX_HOLD_EPOCHS):
        self.max_hold = int(max_hold)
        self.last_valid: IbsMetric | None = None
        self.consecutive_held = 0

    def apply(self, metric: IbsMetric, verdict_a: MotionVerdict, verdict_b: MotionVerdict) -> IbsMetric:
        rejected = verdict_a.rejected or verdict_b.rejected
        if not rejected:
            self.consecutive_held = 0
            if metric.valid:
                self.last_valid = metric
            return metric
        if self.last_valid is not None and self.consecutive_held < self.max_hold:
            self.consecutive_held += 1
            return gate(metric, verdict_a, verdict_b, self.last_valid)
        # Stale (or no history): keep the value finite but unusable.
        value = self.last_valid.value if self.last_valid is not None else 0.0
        return IbsMetric(value=value, epoch_start_us=metric.epoch_start_us, valid=False, held=False)

    def reset(self) -> None:
        self.last_valid = None
        self.consecutive_held = 0
