from dataclasses import replace

import numpy as np
import pytest

from fbcsp_decoder.errors import ConfigError, DatasetError, LeakageError
from fbcsp_decoder.filters import BandSpec, build_filter_bank
from fbcsp_decoder.pipeline import (audit_leakage, balanced_accuracy, band_covariances, class_accuracies,
                                    make_folds, resolve_interval, run_band_csp, run_band_sweep, run_fbcsp)


@pytest.fixture(scope="module")
def planted_folds(planted):
    trialset, _ = planted
    return make_folds(trialset, k=10, seed=0)


@pytest.fixture(scope="module")
def bank():
    return build_filter_bank(500.0)


@pytest.fixture(scope="module")
def below20_sweep(planted, planted_folds, bank):
    trialset, _ = planted
    return run_band_sweep(trialset, bank.subset('below20'), planted_folds, m=3)


# Folds

def test_ten_balanced_folds(trialset_factory):
    trialset = trialset_factory(n_per_class=(50, 50), fs_hz=50.0)
    plan = make_folds(trialset, k=10, seed=0)

    assert plan.k == 10
    labels = dict(zip(trialset.trial_ids.tolist(), trialset.labels.tolist()))
    for fold in plan.test_folds:
        assert sum(labels[t] == 0 for t in fold) == 5
        assert sum(labels[t] == 1 for t in fold) == 5

    every = [t for fold in plan.test_folds for t in fold]
    assert sorted(every) == list(range(100))
    assert len(set(every)) == 100


def test_unbalanced_classes_are_stratified(trialset_factory):
    trialset = trialset_factory(n_per_class=(43, 29), fs_hz=50.0)
    plan = make_folds(trialset, k=10, seed=3)
    for fold in plan.test_folds:
        n1 = sum(1 for t in fold if t >= 43)
        assert 4 <= len(fold) - n1 <= 5
        assert 2 <= n1 <= 3


def test_fold_seed(trialset_factory):
    trialset = trialset_factory(n_per_class=(30, 30), fs_hz=50.0)
    assert make_folds(trialset, seed=1) == make_folds(trialset, seed=1)
    assert make_folds(trialset, seed=1).test_folds != make_folds(trialset, seed=2).test_folds


def test_blocked_folds_keep_recording_order(trialset_factory):
    trialset = trialset_factory(n_per_class=(50, 50), fs_hz=50.0)
    plan = make_folds(trialset, k=10, scheme='blocked')
    assert plan.test_folds[0] == (0, 1, 2, 3, 4, 50, 51, 52, 53, 54)
    assert plan.to_dict()["scheme"] == 'blocked'


def test_fold_errors(trialset_factory):
    trialset = trialset_factory(n_per_class=(5, 20), fs_hz=50.0)
    with pytest.raises(DatasetError):
        make_folds(trialset, k=10)
    with pytest.raises(ConfigError):
        make_folds(trialset, k=1)
    with pytest.raises(ConfigError):
        make_folds(trialset, k=5, scheme='random')


# Accuracy

def test_balanced_accuracy_of_constant_predictions():
    assert balanced_accuracy([0, 0, 0, 0], [0, 0, 1, 1]) == pytest.approx(0.5)


def test_balanced_accuracy_averages_classes():
    labels = np.repeat([0, 1], 10)
    predictions = np.r_[np.zeros(9), np.ones(1), np.ones(5), np.zeros(5)]
    assert class_accuracies(predictions, labels) == pytest.approx([0.9, 0.5])
    assert balanced_accuracy(predictions, labels) == pytest.approx(0.7)


def test_balanced_accuracy_needs_two_classes():
    with pytest.raises(DatasetError):
        balanced_accuracy([0, 1], [1, 1])


def test_interval_presets():
    assert resolve_interval('late', 'exp1') == (3300.0, 7500.0)
    assert resolve_interval('intermediate', 'exp1') == (-500.0, 3000.0)
    assert resolve_interval('intermediate', 'exp2') == (4000.0, 7000.0)
    with pytest.raises(ConfigError):
        resolve_interval('early')
    with pytest.raises(ConfigError):
        resolve_interval('full', 'exp3')


# Single bands

def test_planted_band_is_decoded(below20_sweep):
    by_band = {(r.band.lo_hz, r.band.hi_hz): r for r in below20_sweep}
    assert by_band[(10.0, 12.0)].mean_accuracy >= 0.85
    assert by_band[(10.0, 12.0)].mean_accuracy > by_band[(2.0, 4.0)].mean_accuracy + 0.2


def test_band_without_signal_is_at_chance(planted, planted_folds):
    trialset, _ = planted
    result = run_band_csp(trialset, (60.0, 66.0), planted_folds)
    assert abs(result.mean_accuracy - 0.5) <= 0.12


def test_every_trial_is_predicted_once(below20_sweep, planted):
    trialset, _ = planted
    for result in below20_sweep:
        assert np.all(result.predictions >= 0)
        assert audit_leakage(result, trialset) == []


def test_rejected_trials_are_predicted_but_never_trained(planted, planted_folds):
    trialset, _ = planted
    rejected = np.zeros(trialset.n_trials, dtype=bool)
    rejected[::7] = True
    flagged = trialset.replace(rejected=rejected)

    result = run_band_csp(flagged, (10.0, 12.0), planted_folds)

    rejected_ids = set(flagged.trial_ids[rejected].tolist())
    for fold in result.folds:
        assert not rejected_ids & set(fold.train_ids)
    assert np.all(result.predictions[rejected] >= 0)
    assert audit_leakage(result, flagged) == []


def test_audit_reports_overlap(planted, planted_folds):
    trialset, _ = planted
    result = run_band_csp(trialset, (10.0, 12.0), planted_folds)
    first = result.folds[0]
    result.folds[0] = replace(first, train_ids=first.train_ids + first.test_ids[:1])

    violations = audit_leakage(result, trialset)

    assert any("both train and test" in v for v in violations)


def test_fold_plan_that_skips_trials_raises_leakage_error(trialset_factory):
    trialset = trialset_factory(n_per_class=(20, 20), n_channels=6, fs_hz=100.0)
    plan = make_folds(trialset, k=5)
    partial = replace(plan, test_folds=plan.test_folds[1:])

    with pytest.raises(LeakageError, match="predicted 0 times") as excinfo:
        run_band_csp(trialset, (8.0, 12.0), partial, m=2)
    assert isinstance(excinfo.value, DatasetError)


def test_training_fold_without_a_class(trialset_factory):
    trialset = trialset_factory(n_per_class=(20, 20), n_channels=6, fs_hz=100.0)
    flagged = trialset.replace(rejected=trialset.labels == 1)
    plan = make_folds(trialset, k=5)
    with pytest.raises(DatasetError):
        run_band_csp(flagged, (8.0, 12.0), plan)


def test_too_many_filter_pairs(planted, planted_folds):
    trialset, _ = planted
    with pytest.raises(ConfigError):
        run_band_csp(trialset, (10.0, 12.0), planted_folds, m=5)


def test_decoding_is_deterministic(planted, planted_folds):
    trialset, _ = planted
    first = run_band_csp(trialset, (10.0, 12.0), planted_folds, n_jobs=1)
    second = run_band_csp(trialset, (10.0, 12.0), planted_folds, n_jobs=2)
    np.testing.assert_array_equal(first.predictions, second.predictions)
    np.testing.assert_array_equal(first.scores, second.scores)


@pytest.mark.parametrize("alpha", [0.1, 10.0, 1000.0])
def test_amplitude_scale_does_not_change_predictions(planted, planted_folds, alpha):
    trialset, _ = planted
    base = run_band_csp(trialset, (10.0, 12.0), planted_folds)
    scaled = run_band_csp(trialset.replace(trials=trialset.trials * alpha), (10.0, 12.0), planted_folds)
    np.testing.assert_array_equal(scaled.predictions, base.predictions)
    assert scaled.mean_accuracy == base.mean_accuracy


@pytest.mark.parametrize("alpha", [0.1, 1000.0])
def test_amplitude_scale_does_not_change_fbcsp_predictions(planted, planted_folds, bank, alpha):
    trialset, _ = planted
    base = run_fbcsp(trialset, bank.subset('below20'), planted_folds)
    scaled = run_fbcsp(trialset.replace(trials=trialset.trials * alpha), bank.subset('below20'), planted_folds)
    np.testing.assert_array_equal(scaled.predictions, base.predictions)


def test_covariances_can_be_precomputed(planted, planted_folds):
    trialset, _ = planted
    bands = [BandSpec(8.0, 10.0), BandSpec(10.0, 12.0)]
    covariances = band_covariances(trialset, bands, decode_interval_ms=(500.0, 2500.0))
    assert covariances[0].shape == (trialset.n_trials, 8, 8)

    shared = run_band_sweep(trialset, bands, planted_folds, decode_interval_ms=(500.0, 2500.0),
                            covariances=covariances)
    direct = run_band_sweep(trialset, bands, planted_folds, decode_interval_ms=(500.0, 2500.0))
    for a, b in zip(shared, direct):
        np.testing.assert_array_equal(a.predictions, b.predictions)


# Filter bank

def test_fbcsp_below20(planted, planted_folds, bank, below20_sweep):
    trialset, _ = planted
    result = run_fbcsp(trialset, bank.subset('below20'), planted_folds, subset='below20')

    assert result.n_features == 6 * 10
    assert len(result.bands) == 10
    best_single = max(r.mean_accuracy for r in below20_sweep)
    assert result.mean_accuracy >= best_single - 0.08
    assert result.p_value is None


def test_fbcsp_above60_is_at_chance(planted, planted_folds, bank):
    trialset, _ = planted
    result = run_fbcsp(trialset, bank.subset('above60'), planted_folds, subset='above60')
    assert result.n_features == 6 * 14
    assert abs(result.mean_accuracy - 0.5) <= 0.12


def test_fbcsp_with_permutation_test(planted, planted_folds):
    trialset, _ = planted
    bands = [BandSpec(8.0, 10.0), BandSpec(10.0, 12.0), BandSpec(12.0, 14.0)]
    result = run_fbcsp(trialset, bands, planted_folds, interval='late', decode_interval_ms=(1000.0, 3000.0),
                       n_permutations=2000, seed=4)

    assert result.interval_ms == (1000.0, 3000.0)
    assert result.p_value == pytest.approx(1.0 / 2001.0)
    data = result.to_dict(include_trials=False)
    assert data["interval"] == 'late'
    assert data["permutation"]["n_resamples"] == 2000
    assert "trials" not in data


def test_fbcsp_needs_bands(planted, planted_folds):
    trialset, _ = planted
    with pytest.raises(ConfigError):
        run_fbcsp(trialset, [], planted_folds)
