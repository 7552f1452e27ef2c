import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # makes oracles/wsclient importable

from ibsync import EpochWindow, SynthConfig, synthesize


@pytest.fixture(scope="session")
def coupled_session():
    """One 30 s strongly coupled synthetic session shared across tests."""
    return synthesize(SynthConfig(duration_s=30.0, coupling=0.8), seed=42)


@pytest.fixture
def epoch_pair(coupled_session):
    """First aligned 3 s window pair of the shared session."""
    result = coupled_session
    fs = result.config.sample_rate
    ea = EpochWindow("A", int(result.eeg_ts_us[0]), result.eeg["A"][:, :768], fs)
    eb = EpochWindow("B", int(result.eeg_ts_us[0]), result.eeg["B"][:, :768], fs)
    return ea, eb


def make_epoch(data: np.ndarray, participant="A", start_us=0, fs=256.0) -> EpochWindow:
    return EpochWindow(participant, start_us, np.asarray(data, dtype=np.float64), fs)
