"""
Common spatial patterns for two classes.

Filters solve C1 w = lambda (C1 + C2) w. Columns of the filter matrix are
ordered by ascending eigenvalue; the first and last m are the most
discriminative.
"""

from dataclasses import dataclass, replace

import numpy as np
from scipy import linalg

from .errors import ConfigError, DatasetError, NumericalError

N_FILTER_PAIRS = 3
COMPOSITE_EPS = 1e-9
LOG_VARIANCE_EPS = 1e-20
SYMMETRY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class CovEstimate:
    """Trace-normalized class covariance."""

    matrix: np.ndarray
    n_trials: int
    class_id: int

    def to_dict(self):
        return {"class_id": int(self.class_id), "n_trials": int(self.n_trials), "matrix": self.matrix.tolist()}


@dataclass(frozen=True, eq=False)
class CspModel:
    """
    Full CSP solution.

    filters: n x n matrix W, columns are spatial filters.
    eigenvalues: ascending, one per column of W.
    patterns: activation patterns A = (C1 + C2) W, so A^T W = I.
    selected: indices of the retained filters, None for all.
    """

    filters: np.ndarray
    eigenvalues: np.ndarray
    patterns: np.ndarray
    selected: tuple = None

    @property
    def n_channels(self):
        return self.filters.shape[0]

    @property
    def selected_indices(self):
        return tuple(range(self.n_channels)) if self.selected is None else self.selected

    @property
    def selected_filters(self):
        return self.filters[:, list(self.selected_indices)]

    @property
    def selected_patterns(self):
        return self.patterns[:, list(self.selected_indices)]

    def to_dict(self):
        return {
            "filters": self.filters.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "patterns": self.patterns.tolist(),
            "selected": list(self.selected_indices),
        }


def trial_covariances(trials):
    """
    Per-trial sample covariance (mean removed, divided by the sample count).

    Args:
        trials: Array [trial][channel][sample].

    Returns:
        Array [trial][channel][channel].
    """
    trials = np.asarray(trials, dtype=np.float64)
    centered = trials - trials.mean(axis=-1, keepdims=True)
    return np.einsum('tcs,tds->tcd', centered, centered) / trials.shape[-1]


def average_covariance(covariances):
    """Average of trace-normalized covariances, normalized to trace 1."""
    covariances = np.asarray(covariances, dtype=np.float64)
    if len(covariances) == 0:
        raise DatasetError("No trials to estimate a covariance from")
    traces = np.trace(covariances, axis1=1, axis2=2)
    tiny = np.finfo(np.float64).tiny
    normalized = covariances / np.maximum(traces, tiny)[:, None, None]
    mean = normalized.mean(axis=0)
    total = np.trace(mean)
    if not total > 0:
        raise NumericalError("Every trial has zero variance")
    mean = mean / total
    return (mean + mean.T) / 2.0


def class_covariance(trialset, class_id):
    """Covariance of the non-rejected trials of one class."""
    mask = (trialset.labels == class_id) & ~trialset.rejected
    if not mask.any():
        raise DatasetError(f"No non-rejected trials of class {class_id}")
    matrix = average_covariance(trial_covariances(trialset.trials[mask]))
    return CovEstimate(matrix=matrix, n_trials=int(mask.sum()), class_id=int(class_id))


def _matrix(cov):
    matrix = np.asarray(cov.matrix if isinstance(cov, CovEstimate) else cov, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise NumericalError(f"Covariance must be square, got shape {matrix.shape}")
    scale = max(np.abs(matrix).max(), np.finfo(np.float64).tiny)
    if np.abs(matrix - matrix.T).max() > SYMMETRY_TOL * scale:
        raise NumericalError("Covariance matrix is not symmetric")
    return matrix


def fit_csp(c1, c2, eps=COMPOSITE_EPS):
    """
    Solve the symmetric-definite pencil (C1, C1 + C2).

    When the composite is rank deficient (CAR removes one dimension) it
    gets eps * mean(diag) added to its diagonal, half through each class,
    so null directions get eigenvalue 0.5 and are never selected. Each
    filter is signed so the largest-magnitude entry of its pattern is
    positive.
    """
    m1, m2 = _matrix(c1), _matrix(c2)
    if m1.shape != m2.shape:
        raise NumericalError(f"Covariance shapes differ: {m1.shape} vs {m2.shape}")
    composite = m1 + m2
    floor = eps * np.mean(np.diag(composite))
    if not floor > 0:
        raise NumericalError("Composite covariance is zero")
    try:
        if linalg.eigvalsh(composite)[0] <= floor:
            shift = 0.5 * floor * np.eye(len(composite))
            m1 = m1 + shift
            composite = composite + 2.0 * shift
        eigenvalues, filters = linalg.eigh(m1, composite)
    except (linalg.LinAlgError, ValueError) as e:
        raise NumericalError(f"CSP eigendecomposition failed: {e}") from e

    patterns = composite @ filters
    peaks = np.abs(patterns).argmax(axis=0)
    signs = np.sign(patterns[peaks, np.arange(patterns.shape[1])])
    signs[signs == 0] = 1.0
    return CspModel(filters=filters * signs, eigenvalues=eigenvalues, patterns=patterns * signs)


def select_filters(model, m=N_FILTER_PAIRS):
    """Keep the first m and the last m filters in ascending-eigenvalue order."""
    n = model.n_channels
    if m < 1 or 2 * m > n:
        raise ConfigError(f"Cannot select {m} filter pairs from {n} channels")
    return replace(model, selected=tuple(range(m)) + tuple(range(n - m, n)))


def apply_csp(model, trials):
    """Project trials onto the selected filters: W_sel^T x."""
    trials = np.asarray(trials, dtype=np.float64)
    if trials.shape[-2] != model.n_channels:
        raise DatasetError(f"Trials have {trials.shape[-2]} channels, filters expect {model.n_channels}")
    return np.einsum('ck,...cs->...ks', model.selected_filters, trials)


def log_variance(projected, eps=LOG_VARIANCE_EPS):
    """ln(var + eps) of every virtual channel; returns [trial][component]."""
    projected = np.asarray(projected, dtype=np.float64)
    if projected.shape[-1] < 2:
        raise DatasetError("Log-variance needs at least 2 samples per trial")
    return np.log(projected.var(axis=-1) + eps)


def csp_features(model, covariances, eps=LOG_VARIANCE_EPS):
    """
    Log-variance features from precomputed trial covariances.

    Equal to log_variance(apply_csp(model, trials)) when covariances come
    from trial_covariances(trials).
    """
    w = model.selected_filters
    variances = np.einsum('ck,tcd,dk->tk', w, covariances, w)
    return np.log(np.maximum(variances, 0.0) + eps)
