import math

import numpy as np
import pytest

from fbcsp_decoder.errors import ConfigError
from fbcsp_decoder.pipeline import fit_band_patterns
from fbcsp_decoder.preprocessor import mark_rejected_trials
from fbcsp_decoder.synth import (SynthConfig, band_power, generate, likelihood_ratio_threshold, mixing_matrix,
                                 oracle_accuracy, true_unmixing, with_ratio)


def short_config(**overrides):
    settings = dict(n_channels=8, n_trials_per_class=(20, 20), fs_hz=500.0, interval_ms=(0.0, 2000.0), seed=3)
    settings.update(overrides)
    return SynthConfig(**settings)


@pytest.mark.parametrize("overrides", [
    {"variance_ratio": 0.5},
    {"n_channels": 1},
    {"n_sources": 0},
    {"n_sources": 9},
    {"n_trials_per_class": (0, 10)},
    {"artifact_fraction": 1.5},
    {"seed": -1},
    {"planted_band": (10.0, 260.0)},
    {"interval_ms": (1000.0, 0.0)},
    {"mixing": "identity"},
    {"mixing": np.eye(3)},
])
def test_invalid_settings(overrides):
    with pytest.raises(ConfigError):
        short_config(**overrides)


def test_defaults():
    config = SynthConfig()
    assert config.n_channels == 16
    assert config.n_sources == 16
    assert config.n_trials == 400
    assert config.interval_ms == (-1000.0, 7600.0)
    assert config.n_samples == 4300
    assert config.covers((0.0, 7600.0), pre_ms=500.0)
    assert not config.covers((-500.0, 3000.0), pre_ms=600.0)


def test_trials_and_labels():
    config = short_config(n_trials_per_class=(12, 30))
    trialset, truth = generate(config)

    assert trialset.trials.shape == (42, 8, 1000)
    assert trialset.class_counts() == (12, 30)
    assert trialset.channel_names[0] == "Ch01"
    assert truth.oracle is None
    assert truth.artifact_trial_ids == ()


def test_same_seed_same_data():
    config = short_config()
    first, _ = generate(config, n_jobs=1)
    second, _ = generate(config, n_jobs=2)
    np.testing.assert_array_equal(first.trials, second.trials)
    np.testing.assert_array_equal(first.labels, second.labels)

    other, _ = generate(short_config(seed=4))
    assert not np.array_equal(first.trials, other.trials)


def test_orthonormal_mixing_and_unmixing():
    config = short_config(n_sources=5)
    mixing = mixing_matrix(config)
    assert mixing.shape == (8, 5)
    np.testing.assert_allclose(mixing.T @ mixing, np.eye(5), atol=1e-12)

    unmixing = true_unmixing(mixing)
    assert np.linalg.norm(unmixing) == pytest.approx(1.0)
    response = unmixing @ mixing
    assert abs(response[0]) == pytest.approx(1.0)
    np.testing.assert_allclose(response[1:], 0.0, atol=1e-12)


def test_explicit_mixing_matrix():
    config = short_config(n_channels=4, mixing=np.eye(4))
    trialset, truth = generate(config)
    np.testing.assert_array_equal(truth.mixing, np.eye(4))
    assert truth.to_dict()["config"]["mixing"] == "explicit"
    assert trialset.n_channels == 4


def test_likelihood_ratio_threshold():
    assert likelihood_ratio_threshold(1.0, 4.0) == pytest.approx(math.log(4.0) / 0.75)
    assert likelihood_ratio_threshold(2.0, 2.0) == math.inf


def test_oracle_without_effect_is_chance():
    estimate = oracle_accuracy(short_config(variance_ratio=1.0), n_mc=2000)
    assert estimate.accuracy == 0.5
    assert estimate.stderr == 0.0


def test_oracle_with_huge_effect():
    estimate = oracle_accuracy(short_config(variance_ratio=100.0, sensor_noise_uv=5.0), n_mc=2000)
    assert estimate.accuracy > 0.99
    assert estimate.class_power[1] > 50.0 * estimate.class_power[0]


def test_oracle_rises_with_the_ratio():
    base = short_config()
    accuracies = [oracle_accuracy(with_ratio(base, r), n_mc=4000).accuracy for r in (1.0, 1.5, 2.0, 4.0, 8.0)]
    assert all(b >= a - 0.01 for a, b in zip(accuracies, accuracies[1:]))
    assert accuracies[-1] > accuracies[0] + 0.2


def test_oracle_needs_enough_draws():
    with pytest.raises(ConfigError):
        oracle_accuracy(short_config(), n_mc=500)


def test_generate_can_attach_the_oracle():
    _, truth = generate(short_config(variance_ratio=2.0), n_mc=1000)
    assert 0.5 <= truth.oracle.accuracy <= 1.0
    assert truth.to_dict()["oracle"]["n_mc"] == 1000


def test_likelihood_rule_on_generated_trials_matches_the_oracle():
    config = short_config(n_trials_per_class=(400, 400), variance_ratio=2.0, seed=8)
    oracle = oracle_accuracy(config, n_mc=10000)
    trialset, truth = generate(config)

    power = band_power(config, np.einsum('c,tcs->ts', truth.unmixing, trialset.trials))
    predictions = (power > oracle.threshold).astype(int)
    per_class = [np.mean(predictions[trialset.labels == c] == c) for c in (0, 1)]

    assert abs(np.mean(per_class) - oracle.accuracy) <= 0.06


def test_planted_band_power_ratio():
    config = short_config(n_channels=16, n_trials_per_class=(400, 400), interval_ms=(0.0, 4000.0),
                          variance_ratio=4.0, sensor_noise_uv=1.0, seed=9)
    trialset, truth = generate(config)

    power = band_power(config, np.einsum('c,tcs->ts', truth.unmixing, trialset.trials))
    ratio = power[trialset.labels == 1].mean() / power[trialset.labels == 0].mean()

    assert ratio == pytest.approx(4.0, rel=0.10)


def test_artifact_trials_are_the_rejected_ones():
    config = short_config(n_trials_per_class=(30, 30), sensor_noise_uv=20.0, artifact_fraction=0.1)
    trialset, truth = generate(config)

    assert len(truth.artifact_trial_ids) == 6
    flagged = mark_rejected_trials(trialset, threshold_uv=600.0)
    rejected = tuple(int(t) for t in flagged.trial_ids[flagged.rejected])
    assert rejected == truth.artifact_trial_ids


def test_csp_recovers_the_true_filter(planted):
    trialset, truth = planted
    model = fit_band_patterns(trialset, (10.0, 12.0), m=3)

    w = model.selected_filters[:, -1]
    cosine = abs(w @ truth.unmixing) / np.linalg.norm(w)

    assert cosine > 0.95
