"""Circular statistics pooled into the inter-brain synchrony metric.

The per-channel-pair coefficient is the circular analogue of Pearson
correlation: sine deviations around each series' circular mean,

    r = sum(sin(a - a_mean) * sin(b - b_mean))
        / sqrt(sum(sin^2(a - a_mean)) * sum(sin^2(b - b_mean)))

Per-epoch pooling takes the five highest of the 14 homologous channel-pair
coefficients, averages them in Fisher-z space, and transforms back.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePhaseError, InputError, InsufficientChannelsError
from .signals import EDGE_TRIM, EpochWindow, FilterSpec, apply_bandpass, instantaneous_phase, wrap_phase

# |r| is clamped here before the z-transform, which diverges at |r| = 1.
R_CLAMP = 1.0 - 1e-7

MIN_SERIES_LENGTH = 64
TOP_K = 5

# More dropped pairs than this leaves fewer than TOP_K values to pool.
MAX_DROPPED_PAIRS = 9

_RESULTANT_FLOOR = 1e-12
_ENERGY_FLOOR = 1e-12  # sum of squared sine deviations below this is "flat"


@dataclass(frozen=True)
class IbsMetric:
    """Pooled circular-correlation value for one epoch pair.

    ``held`` marks a carry-forward emitted by the motion gate; a held value
    always equals a previously emitted valid value. Consumers must not
    quantize from a metric with ``valid=False``.
    """

    value: float
    epoch_start_us: int
    valid: bool
    held: bool = False


def circular_mean(phases: np.ndarray) -> float:
    """Argument of the mean resultant vector, in (-pi, pi]."""
    phases = np.asarray(phases, dtype=np.float64)
    if phases.size == 0:
        raise InputError("circular mean of an empty series")
    s = np.mean(np.sin(phases))
    c = np.mean(np.cos(phases))
    if np.hypot(s, c) <= _RESULTANT_FLOOR:
        raise DegeneratePhaseError("zero resultant: circular mean undefined")
    return float(wrap_phase(np.arctan2(s, c)))


def ccorr(
    phase_a: np.ndarray,
    phase_b: np.ndarray,
    printed_denominator: bool = False,
) -> float:
    """Circular correlation of two phase series, in [-1, 1].

    ``printed_denominator=True`` selects a non-normalized variant
    (single sum of squared-sine products, no square root) kept only for
    comparison experiments; the default is the standard normalized form.
    """
    a = np.asarray(phase_a, dtype=np.float64)
    b = np.asarray(phase_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise InputError(f"phase series must be equal-length 1-D, got {a.shape} vs {b.shape}")
    if a.size < MIN_SERIES_LENGTH:
        raise InputError(f"need >= {MIN_SERIES_LENGTH} samples, got {a.size}")
    sin_a = np.sin(a - circular_mean(a))
    sin_b = np.sin(b - circular_mean(b))
    num = float(np.sum(sin_a * sin_b))
    energy_a = float(np.sum(sin_a**2))
    energy_b = float(np.sum(sin_b**2))
    if energy_a <= _ENERGY_FLOOR or energy_b <= _ENERGY_FLOOR:
        raise DegeneratePhaseError("constant phase series: correlation undefined")
    if printed_denominator:
        den = float(np.sum(sin_a**2 * sin_b**2))
        if den <= _ENERGY_FLOOR:
            raise DegeneratePhaseError("zero denominator in non-normalized variant")
        return num / den
    return float(np.clip(num / np.sqrt(energy_a * energy_b), -1.0, 1.0))


def fisher_z(r: float) -> float:
    """Variance-stabilizing transform z = atanh(r), with |r| clamped below 1."""
    r = float(np.clip(r, -R_CLAMP, R_CLAMP))
    return float(np.arctanh(r))


def inverse_fisher_z(z: float) -> float:
    """Inverse transform tanh(z), always in (-1, 1)."""
    return float(np.tanh(z))


def pool_top_k(values, k: int = TOP_K) -> float:
    """Fisher-z average of the k highest coefficients, transformed back.

    Non-finite entries are ignored; ties keep channel order (stable sort)
    so replays are deterministic.
    """
    values = np.asarray(values, dtype=np.float64)
    finite = values[np.isfinite(values)]
    if finite.size < k:
        raise InsufficientChannelsError(
            f"need {k} finite coefficients to pool, got {finite.size}"
        )
    order = np.argsort(-finite, kind="stable")
    top = finite[order[:k]]
    z_mean = float(np.mean([fisher_z(r) for r in top]))
    return inverse_fisher_z(z_mean)


def compute_ibs(
    epoch_a: EpochWindow,
    epoch_b: EpochWindow,
    spec: FilterSpec,
    stage_ms: dict | None = None,
) -> IbsMetric:
    """Filter -> per-channel phase -> per-pair ccorr -> top-k pooling.

    Degenerate channels are dropped pair-wise; if more than
    MAX_DROPPED_PAIRS pairs drop, the metric is emitted with valid=False.
    When ``stage_ms`` is given it receives per-stage wall times in ms
    (keys: filter, phase, ccorr, pool).
    """
    if epoch_a.data.shape != epoch_b.data.shape:
        raise InputError(
            f"epoch shapes differ: {epoch_a.data.shape} vs {epoch_b.data.shape}"
        )
    period_us = 1e6 / epoch_a.sample_rate
    if abs(epoch_a.start_timestamp_us - epoch_b.start_timestamp_us) >= period_us:
        raise InputError(
            "epochs misaligned: starts differ by "
            f"{abs(epoch_a.start_timestamp_us - epoch_b.start_timestamp_us)} us"
        )

    t0 = time.perf_counter()
    filtered_a = apply_bandpass(spec, epoch_a.data, epoch_a.sample_rate)
    filtered_b = apply_bandpass(spec, epoch_b.data, epoch_b.sample_rate)
    t1 = time.perf_counter()

    n_channels = filtered_a.shape[0]
    phases_a: list[np.ndarray | None] = []
    phases_b: list[np.ndarray | None] = []
    for ch in range(n_channels):
        pair: list[np.ndarray | None] = []
        for row in (filtered_a[ch], filtered_b[ch]):
            try:
                pair.append(instantaneous_phase(row)[EDGE_TRIM:-EDGE_TRIM])
            except DegeneratePhaseError:
                pair.append(None)
        phases_a.append(pair[0])
        phases_b.append(pair[1])
    t2 = time.perf_counter()

    correlations = np.full(n_channels, np.nan)
    for ch in range(n_channels):
        if phases_a[ch] is None or phases_b[ch] is None:
            continue
        try:
            correlations[ch] = ccorr(phases_a[ch], phases_b[ch])
        except DegeneratePhaseError:
            continue
    t3 = time.perf_counter()

    dropped = int(np.sum(~np.isfinite(correlations)))
    if dropped > MAX_DROPPED_PAIRS or n_channels - dropped < TOP_K:
        value, valid = 0.0, False
    else:
        value, valid = pool_top_k(correlations, TOP_K), True
    t4 = time.perf_counter()

    if stage_ms is not None:
        stage_ms["filter"] = (t1 - t0) * 1e3
        stage_ms["phase"] = (t2 - t1) * 1e3
        stage_ms["ccorr"] = (t3 - t2) * 1e3
        stage_ms["pool"] = (t4 - t3) * 1e3

    return IbsMetric(
        value=value,
        epoch_start_us=epoch_a.start_timestamp_us,
        valid=valid,
        held=False,
    )
