"""
Cross-validated CSP decoding.

Per band: band-pass the preprocessed trials, cut them to the decoding
interval, fit CSP and rLDA inside each training fold and predict the test
fold. Rejected trials never enter a training fold but are predicted like
every other trial. FBCSP concatenates the per-band features of a band
subset into one rLDA.
"""

from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed
from sklearn.metrics import balanced_accuracy_score
from sklearn.model_selection import StratifiedKFold

from .classifier import fit_rlda, predict_rlda
from .csp import (N_FILTER_PAIRS, average_covariance, class_covariance, csp_features,
                  fit_csp, select_filters, trial_covariances)
from .data_loader import binary_labels, crop
from .errors import ConfigError, DatasetError, LeakageError
from .filters import BANDPASS_ORDER, BandSpec, FilterBank, bandpass_trials
from .stats import N_PERMUTATIONS, permutation_pvalue

K_FOLDS = 10
FOLD_SCHEMES = ('stratified', 'blocked')
STREAM_FOLDS = 1

INTERVAL_PRESETS = {
    'exp1': {'full': (0.0, 7600.0), 'late': (3300.0, 7500.0), 'intermediate': (-500.0, 3000.0)},
    'exp2': {'full': (0.0, 7000.0), 'late': (5100.0, 6900.0), 'intermediate': (4000.0, 7000.0)},
}


def resolve_interval(name, experiment='exp1'):
    """
    Named interval of an experiment, in ms relative to the epoching events.

    exp1 'intermediate' (-500, 3000) is timed from the moment the liquid
    first becomes visible, not from video onset. Epoch that dataset on
    visibility events before decoding it; on onset-locked trials this
    preset selects the wrong window.
    """
    if experiment not in INTERVAL_PRESETS:
        raise ConfigError(f"Unknown experiment '{experiment}', expected one of {', '.join(INTERVAL_PRESETS)}")
    presets = INTERVAL_PRESETS[experiment]
    if name not in presets:
        raise ConfigError(f"Unknown interval '{name}' for {experiment}, expected one of {', '.join(presets)}")
    return presets[name]


@dataclass(frozen=True)
class FoldPlan:
    """Test-fold trial ids of a k-fold partition."""

    test_folds: tuple
    seed: int
    scheme: str = 'stratified'

    @property
    def k(self):
        return len(self.test_folds)

    def to_dict(self):
        return {
            "k": self.k,
            "seed": self.seed,
            "scheme": self.scheme,
            "test_folds": [list(map(int, fold)) for fold in self.test_folds],
        }


def make_folds(trialset, k=K_FOLDS, seed=0, scheme='stratified'):
    """
    Stratified k-fold partition of the trial ids.

    'stratified' shuffles within each class with a seed derived from
    SeedSequence([seed, 1]); 'blocked' keeps recording order within each
    class so every test fold is a contiguous block per class.
    """
    if scheme not in FOLD_SCHEMES:
        raise ConfigError(f"Unknown fold scheme '{scheme}', expected one of {', '.join(FOLD_SCHEMES)}")
    if k < 2:
        raise ConfigError(f"Cross-validation needs at least 2 folds, got {k}")
    counts = trialset.class_counts()
    if min(counts) < k:
        raise DatasetError(f"Each class needs at least {k} trials for {k}-fold cross-validation, got {counts}")

    if scheme == 'stratified':
        random_state = int(np.random.SeedSequence([seed, STREAM_FOLDS]).generate_state(1)[0])
        splitter = StratifiedKFold(n_splits=k, shuffle=True, random_state=random_state)
    else:
        splitter = StratifiedKFold(n_splits=k, shuffle=False)

    folds = []
    for _, test_idx in splitter.split(np.zeros(trialset.n_trials), trialset.labels):
        folds.append(tuple(sorted(int(i) for i in trialset.trial_ids[test_idx])))
    return FoldPlan(test_folds=tuple(folds), seed=int(seed), scheme=scheme)


def class_accuracies(predictions, labels):
    """Accuracy within each class."""
    predictions = np.asarray(predictions)
    labels = binary_labels(labels)
    counts = np.bincount(labels, minlength=2)
    if counts.min() == 0:
        raise DatasetError("Balanced accuracy needs both classes in the labels")
    return [float(np.mean(predictions[labels == c] == c)) for c in (0, 1)]


def balanced_accuracy(predictions, labels):
    """Mean of the per-class accuracies."""
    class_accuracies(predictions, labels)
    return float(balanced_accuracy_score(np.asarray(labels), np.asarray(predictions)))


@dataclass
class FoldResult:
    fold: int
    train_ids: tuple
    test_ids: tuple
    predictions: np.ndarray
    scores: np.ndarray
    balanced_accuracy: float
    gamma: float

    def to_dict(self):
        return {
            "fold": self.fold,
            "n_train": len(self.train_ids),
            "n_test": len(self.test_ids),
            "balanced_accuracy": self.balanced_accuracy,
            "gamma": self.gamma,
        }


@dataclass
class _Decoded:
    """Fields shared by band and FBCSP results."""

    folds: list
    trial_ids: np.ndarray
    labels: np.ndarray
    rejected: np.ndarray
    predictions: np.ndarray
    scores: np.ndarray

    @property
    def fold_accuracies(self):
        return [f.balanced_accuracy for f in self.folds]

    @property
    def mean_accuracy(self):
        return float(np.mean(self.fold_accuracies))

    @property
    def pooled_accuracy(self):
        return balanced_accuracy(self.predictions, self.labels)

    @property
    def class_accuracies(self):
        return class_accuracies(self.predictions, self.labels)

    def trials_dict(self):
        return [
            {
                "trial_id": int(t),
                "label": int(y),
                "prediction": int(p),
                "score": float(s),
                "rejected": bool(r),
            }
            for t, y, p, s, r in zip(self.trial_ids, self.labels, self.predictions, self.scores, self.rejected)
        ]

    def summary_dict(self):
        return {
            "fold_accuracies": self.fold_accuracies,
            "mean_accuracy": self.mean_accuracy,
            "pooled_accuracy": self.pooled_accuracy,
            "class_accuracies": self.class_accuracies,
            "folds": [f.to_dict() for f in self.folds],
        }


@dataclass
class BandResult(_Decoded):
    band: BandSpec = None

    def to_dict(self, include_trials=True):
        data = {"band": self.band.to_dict(), **self.summary_dict()}
        if include_trials:
            data["trials"] = self.trials_dict()
        return data


@dataclass
class FbcspResult(_Decoded):
    subset: str = 'all'
    interval: str = 'full'
    interval_ms: tuple = None
    bands: tuple = ()
    n_features: int = 0
    permutation: object = None

    @property
    def p_value(self):
        return None if self.permutation is None else self.permutation.p_value

    def to_dict(self, include_trials=True):
        data = {
            "subset": self.subset,
            "interval": self.interval,
            "interval_ms": None if self.interval_ms is None else list(self.interval_ms),
            "bands": [b.to_dict() for b in self.bands],
            "n_features": self.n_features,
            **self.summary_dict(),
            "p_value": self.p_value,
            "permutation": None if self.permutation is None else self.permutation.to_dict(),
        }
        if include_trials:
            data["trials"] = self.trials_dict()
        return data


def _band_covariance(trialset, band, decode_interval_ms, order, zero_phase):
    filtered = bandpass_trials(trialset.trials, band, trialset.fs_hz, order, zero_phase)
    cut = crop(trialset.replace(trials=filtered), decode_interval_ms or trialset.interval_ms)
    return trial_covariances(cut.trials)


def band_covariances(trialset, bands, decode_interval_ms=None, order=BANDPASS_ORDER, zero_phase=False, n_jobs=1):
    """
    Per-trial covariances of every band, computed on the full epoch and
    cut to the decoding interval after filtering.

    Returns:
        List (one entry per band) of arrays [trial][channel][channel].
    """
    bands = list(bands)
    for band in bands:
        band.validate(trialset.fs_hz)
    return Parallel(n_jobs=n_jobs)(
        delayed(_band_covariance)(trialset, band, decode_interval_ms, order, zero_phase)
        for band in bands
    )


def _fold_indices(trialset, foldplan):
    position = {int(t): i for i, t in enumerate(trialset.trial_ids)}
    unknown = [t for fold in foldplan.test_folds for t in fold if t not in position]
    if unknown:
        raise DatasetError(f"Fold plan references unknown trial ids: {unknown[:5]}")
    plans = []
    all_idx = np.arange(trialset.n_trials)
    for fold in foldplan.test_folds:
        test_idx = np.array(sorted(position[t] for t in fold), dtype=np.int64)
        held_out = np.zeros(trialset.n_trials, dtype=bool)
        held_out[test_idx] = True
        train_idx = all_idx[~held_out & ~trialset.rejected]
        plans.append((train_idx, test_idx))
    return plans


def _run_fold(index, covariances, labels, trial_ids, train_idx, test_idx, m, gamma):
    train_labels = labels[train_idx]
    counts = np.bincount(train_labels, minlength=2)
    if counts.min() == 0:
        raise DatasetError(
            f"Training set of fold {index} has no trials of class {int(np.argmin(counts))} after rejection"
        )

    features = []
    for covs in covariances:
        train_covs = covs[train_idx]
        model = fit_csp(average_covariance(train_covs[train_labels == 1]),
                        average_covariance(train_covs[train_labels == 0]))
        model = select_filters(model, m)
        features.append(csp_features(model, covs[np.concatenate([train_idx, test_idx])]))
    features = np.concatenate(features, axis=1)

    n_train = len(train_idx)
    rlda = fit_rlda(features[:n_train], train_labels, gamma)
    predictions, scores = predict_rlda(rlda, features[n_train:])
    return FoldResult(
        fold=index,
        train_ids=tuple(int(t) for t in trial_ids[train_idx]),
        test_ids=tuple(int(t) for t in trial_ids[test_idx]),
        predictions=predictions,
        scores=scores,
        balanced_accuracy=balanced_accuracy(predictions, labels[test_idx]),
        gamma=rlda.gamma,
    ), features.shape[1]


def _assemble(trialset, fold_results):
    predictions = np.full(trialset.n_trials, -1, dtype=np.int64)
    scores = np.full(trialset.n_trials, np.nan)
    position = {int(t): i for i, t in enumerate(trialset.trial_ids)}
    for fold in fold_results:
        idx = [position[t] for t in fold.test_ids]
        predictions[idx] = fold.predictions
        scores[idx] = fold.scores
    return dict(
        folds=list(fold_results),
        trial_ids=np.asarray(trialset.trial_ids),
        labels=np.asarray(trialset.labels),
        rejected=np.asarray(trialset.rejected),
        predictions=predictions,
        scores=scores,
    )


def _check_m(trialset, m):
    if m < 1 or 2 * m > trialset.n_channels:
        raise ConfigError(f"Cannot select {m} filter pairs from {trialset.n_channels} channels")


def run_band_sweep(trialset, bands, foldplan, m=N_FILTER_PAIRS, decode_interval_ms=None, gamma='auto',
                   order=BANDPASS_ORDER, zero_phase=False, covariances=None, n_jobs=1):
    """
    Frequency-resolved decoding: one CSP + rLDA per band.

    Returns:
        List of BandResult in band order.
    """
    bands = list(bands)
    _check_m(trialset, m)
    if covariances is None:
        covariances = band_covariances(trialset, bands, decode_interval_ms, order, zero_phase, n_jobs)
    plans = _fold_indices(trialset, foldplan)
    labels = np.asarray(trialset.labels)

    grid = Parallel(n_jobs=n_jobs)(
        delayed(_run_fold)(i, [covariances[b]], labels, trialset.trial_ids, train_idx, test_idx, m, gamma)
        for b in range(len(bands))
        for i, (train_idx, test_idx) in enumerate(plans)
    )

    results = []
    k = len(plans)
    for b, band in enumerate(bands):
        fold_results = [fold for fold, _ in grid[b * k:(b + 1) * k]]
        result = BandResult(band=band, **_assemble(trialset, fold_results))
        _raise_on_leakage(result, trialset)
        results.append(result)
    return results


def run_band_csp(trialset, band, foldplan, m=N_FILTER_PAIRS, decode_interval_ms=None, gamma='auto',
                 order=BANDPASS_ORDER, zero_phase=False, n_jobs=1):
    """Cross-validated CSP decoding in a single band."""
    if not isinstance(band, BandSpec):
        band = BandSpec(*band)
    return run_band_sweep(trialset, [band], foldplan, m, decode_interval_ms, gamma, order, zero_phase,
                          n_jobs=n_jobs)[0]


def run_fbcsp(trialset, bands, foldplan, m=N_FILTER_PAIRS, subset='all', interval='full',
              decode_interval_ms=None, gamma='auto', order=BANDPASS_ORDER, zero_phase=False,
              n_permutations=0, seed=0, replace=True, raw_fraction=False, covariances=None, n_jobs=1):
    """
    Filter-bank CSP: features of every band in the subset feed one rLDA.

    Args:
        trialset: Preprocessed TrialSet (CAR'd, rejection flags set).
        bands: FilterBank or sequence of BandSpec.
        foldplan: FoldPlan from make_folds.
        m: Filter pairs per band.
        subset: Tag recorded in the result ('all', 'below20', 'above60').
        interval: Interval tag recorded in the result.
        decode_interval_ms: Interval to cut after filtering; None keeps the epoch.
        gamma: rLDA shrinkage, 'auto' or fixed.
        n_permutations: Resamples for the randomization test; 0 skips it.
        seed: Seed of the randomization test.
        covariances: Precomputed band_covariances for these bands.
        n_jobs: joblib workers.

    Returns:
        FbcspResult.
    """
    bands = list(bands.bands if isinstance(bands, FilterBank) else bands)
    if not bands:
        raise ConfigError("FBCSP needs at least one band")
    _check_m(trialset, m)
    if covariances is None:
        covariances = band_covariances(trialset, bands, decode_interval_ms, order, zero_phase, n_jobs)
    plans = _fold_indices(trialset, foldplan)
    labels = np.asarray(trialset.labels)

    grid = Parallel(n_jobs=n_jobs)(
        delayed(_run_fold)(i, covariances, labels, trialset.trial_ids, train_idx, test_idx, m, gamma)
        for i, (train_idx, test_idx) in enumerate(plans)
    )
    fold_results = [fold for fold, _ in grid]
    result = FbcspResult(
        subset=subset,
        interval=interval,
        interval_ms=tuple(decode_interval_ms or trialset.interval_ms),
        bands=tuple(bands),
        n_features=grid[0][1],
        **_assemble(trialset, fold_results),
    )
    _raise_on_leakage(result, trialset)

    if n_permutations:
        result.permutation = permutation_pvalue(
            result.predictions, result.labels, n=n_permutations, seed=seed,
            replace=replace, raw_fraction=raw_fraction, n_jobs=n_jobs,
        )
    return result


def audit_leakage(result, trialset):
    """
    Check a decoding result for train/test leakage.

    Returns:
        List of violation messages; empty when the run is clean.
    """
    violations = []
    rejected_ids = set(int(t) for t, r in zip(trialset.trial_ids, trialset.rejected) if r)
    predicted = {}
    for fold in result.folds:
        train, test = set(fold.train_ids), set(fold.test_ids)
        if train & test:
            violations.append(f"fold {fold.fold}: {len(train & test)} trials in both train and test")
        if train & rejected_ids:
            violations.append(f"fold {fold.fold}: {len(train & rejected_ids)} rejected trials in training")
        for t in test:
            predicted[t] = predicted.get(t, 0) + 1
    for t in trialset.trial_ids:
        count = predicted.get(int(t), 0)
        if count != 1:
            violations.append(f"trial {int(t)} predicted {count} times")
    return violations


def _raise_on_leakage(result, trialset):
    violations = audit_leakage(result, trialset)
    if violations:
        raise LeakageError(f"Cross-validation leakage: {'; '.join(violations[:5])}")


def fit_band_patterns(trialset, band, m=N_FILTER_PAIRS, decode_interval_ms=None, order=BANDPASS_ORDER,
                      zero_phase=False):
    """CSP filters and activation patterns of one band fitted on all non-rejected trials."""
    if not isinstance(band, BandSpec):
        band = BandSpec(*band)
    filtered = trialset.replace(trials=bandpass_trials(trialset.trials, band.validate(trialset.fs_hz),
                                                       trialset.fs_hz, order, zero_phase))
    cut = crop(filtered, decode_interval_ms or trialset.interval_ms)
    model = fit_csp(class_covariance(cut, 1), class_covariance(cut, 0))
    return select_filters(model, m)


__all__ = [
    'K_FOLDS', 'INTERVAL_PRESETS', 'N_PERMUTATIONS', 'FoldPlan', 'FoldResult', 'BandResult', 'FbcspResult',
    'resolve_interval', 'make_folds', 'balanced_accuracy', 'class_accuracies', 'band_covariances',
    'run_band_csp', 'run_band_sweep', 'run_fbcsp', 'audit_leakage', 'fit_band_patterns',
]
