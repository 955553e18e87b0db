"""
Randomization test for decoding accuracies.

Every resample draws, independently for each trial, a predicted label
from the multiset of original predictions and scores it against the true
labels with balanced accuracy.
"""

from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed

from .data_loader import binary_labels
from .errors import ConfigError, DatasetError

N_PERMUTATIONS = 100000
CHUNK_SIZE = 10000
EXACT_MAX_TRIALS = 12
STREAM_PERMUTATION = 2
TIE_TOL = 1e-12


@dataclass(frozen=True)
class PermutationResult:
    p_value: float
    n_resamples: int
    observed_accuracy: float
    seed: int
    replace: bool = True
    raw_fraction: bool = False

    @property
    def stars(self):
        return significance_stars(self.p_value)

    def to_dict(self):
        return {
            "p_value": self.p_value,
            "n_resamples": self.n_resamples,
            "observed_accuracy": self.observed_accuracy,
            "seed": self.seed,
            "replace": self.replace,
            "raw_fraction": self.raw_fraction,
            "stars": self.stars,
        }


def significance_stars(p_value):
    """'**' below 0.01, '*' below 0.05, '' otherwise."""
    if p_value is None:
        return ""
    if p_value < 0.01:
        return "**"
    if p_value < 0.05:
        return "*"
    return ""


def _check(predictions, labels):
    predictions = binary_labels(predictions)
    labels = binary_labels(labels)
    if len(predictions) != len(labels):
        raise DatasetError(f"{len(predictions)} predictions for {len(labels)} labels")
    if np.bincount(labels, minlength=2).min() == 0:
        raise DatasetError("Both classes must be present in the labels")
    return predictions, labels


def _balanced_rows(draws, labels):
    """Balanced accuracy of every row of a [resample][trial] matrix."""
    correct = draws == labels
    acc0 = correct[:, labels == 0].mean(axis=1)
    acc1 = correct[:, labels == 1].mean(axis=1)
    return (acc0 + acc1) / 2.0


def _count_chunk(predictions, labels, observed, size, seed, index, replace):
    rng = np.random.default_rng([seed, STREAM_PERMUTATION, index])
    n = len(predictions)
    if replace:
        draws = predictions[rng.integers(0, n, size=(size, n))]
    else:
        draws = rng.permuted(np.tile(predictions, (size, 1)), axis=1)
    return int(np.count_nonzero(_balanced_rows(draws, labels) >= observed - TIE_TOL))


def permutation_pvalue(predictions, labels, n=N_PERMUTATIONS, seed=0, replace=True,
                       raw_fraction=False, n_jobs=1):
    """
    Randomization p-value of the balanced accuracy of predictions.

    Args:
        predictions: Predicted labels, one per trial.
        labels: True labels.
        n: Number of resamples.
        seed: Non-negative integer; chunk i draws from SeedSequence([seed, 2, i]).
        replace: Draw with replacement from the predictions (False permutes them).
        raw_fraction: Report count / n instead of (count + 1) / (n + 1).
        n_jobs: joblib workers; the result does not depend on it.

    Returns:
        PermutationResult.
    """
    if n < 1:
        raise ConfigError(f"Number of resamples must be at least 1, got {n}")
    predictions, labels = _check(predictions, labels)
    observed = float(_balanced_rows(predictions[None, :], labels)[0])

    sizes = [CHUNK_SIZE] * (n // CHUNK_SIZE)
    if n % CHUNK_SIZE:
        sizes.append(n % CHUNK_SIZE)
    counts = Parallel(n_jobs=n_jobs)(
        delayed(_count_chunk)(predictions, labels, observed, size, seed, index, replace)
        for index, size in enumerate(sizes)
    )
    count = sum(counts)
    p_value = count / n if raw_fraction else (count + 1) / (n + 1)

    return PermutationResult(
        p_value=float(p_value),
        n_resamples=int(n),
        observed_accuracy=observed,
        seed=int(seed),
        replace=replace,
        raw_fraction=raw_fraction,
    )


def exact_pvalue_small(predictions, labels, replace=True):
    """
    Exact probability that a resampled prediction vector reaches the
    observed balanced accuracy, by enumerating every binary assignment.

    With replacement each assignment is weighted by the empirical
    prediction distribution; without replacement every arrangement of the
    original predictions is equally likely.
    """
    predictions, labels = _check(predictions, labels)
    n = len(predictions)
    if n > EXACT_MAX_TRIALS:
        raise ConfigError(f"Exact enumeration supports at most {EXACT_MAX_TRIALS} trials, got {n}")

    observed = float(_balanced_rows(predictions[None, :], labels)[0])
    assignments = (np.arange(2 ** n)[:, None] >> np.arange(n)) & 1
    ones = assignments.sum(axis=1)

    if replace:
        p1 = predictions.mean()
        weights = p1 ** ones * (1.0 - p1) ** (n - ones)
    else:
        weights = (ones == predictions.sum()).astype(np.float64)
        weights /= weights.sum()

    hits = _balanced_rows(assignments, labels) >= observed - TIE_TOL
    return float(weights[hits].sum())
