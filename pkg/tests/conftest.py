"""
Shared fixtures: small synthetic trial sets and the repository root on sys.path.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from fbcsp_decoder.data_loader import TrialSet  # noqa: E402
from fbcsp_decoder.synth import SynthConfig, generate  # noqa: E402


def make_trialset(n_per_class=(20, 20), n_channels=4, fs_hz=100.0, interval_ms=(0.0, 1000.0), seed=0,
                  scale=1.0):
    """White-noise trials with balanced or unbalanced labels."""
    rng = np.random.default_rng(seed)
    n_trials = sum(n_per_class)
    n_samples = int(round((interval_ms[1] - interval_ms[0]) / 1000.0 * fs_hz))
    return TrialSet(
        fs_hz=fs_hz,
        channel_names=[f"C{i}" for i in range(n_channels)],
        trials=rng.standard_normal((n_trials, n_channels, n_samples)) * scale,
        labels=np.repeat([0, 1], n_per_class),
        interval_ms=interval_ms,
    )


@pytest.fixture
def trialset_factory():
    return make_trialset


@pytest.fixture
def white_trials():
    return make_trialset()


@pytest.fixture(scope="session")
def planted_config():
    """Strong 10-12 Hz effect on 8 channels, 3 s trials at 500 Hz."""
    return SynthConfig(
        n_channels=8,
        n_trials_per_class=(100, 100),
        fs_hz=500.0,
        interval_ms=(0.0, 3000.0),
        planted_band=(10.0, 12.0),
        variance_ratio=8.0,
        sensor_noise_uv=50.0,
        seed=11,
    )


@pytest.fixture(scope="session")
def planted(planted_config):
    """(TrialSet, GroundTruth) drawn from planted_config."""
    return generate(planted_config)


@pytest.fixture(scope="session")
def null_data():
    """Same generator with no class difference."""
    config = SynthConfig(
        n_channels=8,
        n_trials_per_class=(200, 200),
        fs_hz=500.0,
        interval_ms=(0.0, 2000.0),
        variance_ratio=1.0,
        seed=5,
    )
    return generate(config)
