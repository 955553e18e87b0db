import numpy as np
import pytest

from fbcsp_decoder.errors import ConfigError, DatasetError
from fbcsp_decoder.stats import (PermutationResult, exact_pvalue_small, permutation_pvalue,
                                 significance_stars)


def graded_predictions(n_correct, n_per_class=20):
    """Labels 20/20 with n_correct hits per class; always half the predictions are 1."""
    labels = np.repeat([0, 1], n_per_class)
    class0 = np.r_[np.zeros(n_correct), np.ones(n_per_class - n_correct)]
    class1 = np.r_[np.ones(n_correct), np.zeros(n_per_class - n_correct)]
    return np.r_[class0, class1].astype(int), labels


SMALL_CASES = [
    ([0, 0, 1, 1], [0, 0, 1, 1]),
    ([0, 1, 1, 1, 0, 1], [0, 0, 0, 1, 1, 1]),
    ([0, 0, 0, 1, 1, 0, 1, 1], [0, 0, 0, 0, 1, 1, 1, 1]),
    ([1, 0, 0, 1, 1, 1, 0, 1, 0, 0], [0, 0, 0, 0, 0, 1, 1, 1, 1, 1]),
    ([0, 0, 1, 0, 0, 1, 1, 1, 1, 0, 1, 1], [0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1]),
    ([0, 1, 0, 1, 1], [0, 0, 1, 1, 1]),
]


def test_exact_four_trials():
    assert exact_pvalue_small([0, 0, 1, 1], [0, 0, 1, 1]) == pytest.approx(0.0625)


def test_exact_one_trial_per_class():
    assert exact_pvalue_small([0, 1], [0, 1]) == pytest.approx(0.25)


def test_exact_constant_predictions():
    assert exact_pvalue_small([0, 0, 0, 0], [0, 0, 1, 1]) == pytest.approx(1.0)


def test_exact_without_replacement():
    assert exact_pvalue_small([0, 0, 1, 1], [0, 0, 1, 1], replace=False) == pytest.approx(1.0 / 6.0)


def test_exact_is_limited_to_small_sets():
    with pytest.raises(ConfigError):
        exact_pvalue_small(np.zeros(13, dtype=int), np.r_[np.zeros(6), np.ones(7)].astype(int))


@pytest.mark.parametrize("predictions,labels", SMALL_CASES)
@pytest.mark.parametrize("replace", [True, False])
def test_resampling_agrees_with_enumeration(predictions, labels, replace):
    n = 20000
    exact = exact_pvalue_small(predictions, labels, replace=replace)
    estimate = permutation_pvalue(predictions, labels, n=n, seed=3, replace=replace, raw_fraction=True)
    sigma = np.sqrt(exact * (1.0 - exact) / n)
    assert abs(estimate.p_value - exact) <= 3.0 * sigma + 2.0 / n


def test_perfect_decoding_is_significant():
    predictions, labels = graded_predictions(20)
    result = permutation_pvalue(predictions, labels, n=100000, seed=0)
    assert result.observed_accuracy == 1.0
    assert result.p_value < 1e-4
    assert result.stars == "**"


def test_chance_decoding_is_not_significant():
    predictions, labels = graded_predictions(10)
    result = permutation_pvalue(predictions, labels, n=20000, seed=0)
    assert result.observed_accuracy == 0.5
    assert 0.5 <= result.p_value <= 0.65
    assert result.stars == ""


def test_p_value_falls_as_accuracy_rises():
    p_values = [permutation_pvalue(*graded_predictions(k), n=20000, seed=1).p_value for k in (10, 13, 16, 19)]
    assert all(a > b for a, b in zip(p_values, p_values[1:]))


def test_add_one_correction_bounds_the_p_value():
    predictions, labels = graded_predictions(20)
    corrected = permutation_pvalue(predictions, labels, n=1000, seed=0)
    raw = permutation_pvalue(predictions, labels, n=1000, seed=0, raw_fraction=True)
    assert corrected.p_value == pytest.approx(1.0 / 1001.0)
    assert raw.p_value == 0.0


def test_same_seed_same_p_value():
    predictions, labels = graded_predictions(14)
    first = permutation_pvalue(predictions, labels, n=5000, seed=42)
    second = permutation_pvalue(predictions, labels, n=5000, seed=42)
    assert first == second


def test_worker_count_does_not_change_the_result():
    predictions, labels = graded_predictions(13)
    serial = permutation_pvalue(predictions, labels, n=25000, seed=7, n_jobs=1)
    parallel = permutation_pvalue(predictions, labels, n=25000, seed=7, n_jobs=2)
    assert serial.p_value == parallel.p_value


def test_invalid_inputs():
    with pytest.raises(ConfigError):
        permutation_pvalue([0, 1], [0, 1], n=0)
    with pytest.raises(DatasetError):
        permutation_pvalue([0, 1, 1], [0, 1], n=10)
    with pytest.raises(DatasetError):
        permutation_pvalue([0, 1], [1, 1], n=10)
    with pytest.raises(DatasetError):
        permutation_pvalue([0, 2], [0, 1], n=10)
    with pytest.raises(DatasetError, match="binary"):
        permutation_pvalue([0, 1, 0], [0, 0.5, 1], n=10)


@pytest.mark.parametrize("p_value,stars", [
    (0.001, "**"), (0.0099, "**"), (0.01, "*"), (0.049, "*"), (0.05, ""), (0.7, ""), (None, ""),
])
def test_significance_stars(p_value, stars):
    assert significance_stars(p_value) == stars


def test_result_serializes():
    result = PermutationResult(p_value=0.02, n_resamples=100, observed_accuracy=0.7, seed=1)
    data = result.to_dict()
    assert data["stars"] == "*"
    assert data["replace"] is True
