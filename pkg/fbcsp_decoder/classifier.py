"""
Shrinkage-regularized linear discriminant analysis for two classes.
"""

from dataclasses import dataclass

import joblib
import numpy as np
from scipy import linalg
from sklearn.covariance import ledoit_wolf_shrinkage

from .data_loader import binary_labels
from .errors import ConfigError, DatasetError, NumericalError


@dataclass(frozen=True, eq=False)
class RldaModel:
    """
    Linear decision rule score(x) = w^T x + b; class 1 iff score > 0.

    gamma is the shrinkage intensity toward nu * I, where nu is the mean
    of the pooled covariance diagonal.
    """

    w: np.ndarray
    b: float
    gamma: float
    class_means: np.ndarray

    @property
    def n_features(self):
        return len(self.w)

    def to_dict(self):
        return {
            "w": self.w.tolist(),
            "b": float(self.b),
            "gamma": float(self.gamma),
            "class_means": self.class_means.tolist(),
        }


def _check_features(features, labels):
    features = np.asarray(features, dtype=np.float64)
    labels = binary_labels(labels)
    if features.ndim != 2:
        raise DatasetError(f"Features must be 2-D [sample][feature], got shape {features.shape}")
    if len(features) != len(labels):
        raise DatasetError(f"{len(features)} feature rows for {len(labels)} labels")
    return features, labels


def _pooled(features, labels):
    """Class means, class-centered samples and the pooled covariance."""
    means = np.stack([features[labels == c].mean(axis=0) for c in (0, 1)])
    centered = features - means[labels]
    covariance = centered.T @ centered / len(features)
    return means, centered, covariance


def estimate_shrinkage(features, labels):
    """
    Analytic (Ledoit-Wolf) shrinkage intensity of the pooled covariance
    toward nu * I, clipped to [0, 1].

    Returns 1.0 when a class has fewer than 2 samples.
    """
    features, labels = _check_features(features, labels)
    counts = np.bincount(labels, minlength=2)
    if counts.min() < 2:
        return 1.0
    _, centered, covariance = _pooled(features, labels)
    if not np.trace(covariance) > 0:
        return 1.0
    gamma = ledoit_wolf_shrinkage(centered, assume_centered=True)
    return float(np.clip(gamma, 0.0, 1.0))


def fit_rlda(features, labels, gamma='auto'):
    """
    Train the discriminant.

    Args:
        features: Array [sample][feature].
        labels: Binary labels; both classes must be present.
        gamma: 'auto' for the analytic estimate or a fixed value in [0, 1].

    Returns:
        RldaModel with equal-prior bias.
    """
    features, labels = _check_features(features, labels)
    counts = np.bincount(labels, minlength=2)
    if counts.min() == 0:
        raise DatasetError(f"Both classes must be present to train, got counts {counts.tolist()}")

    if gamma == 'auto' or gamma is None:
        gamma = estimate_shrinkage(features, labels)
    else:
        gamma = float(gamma)
        if not 0.0 <= gamma <= 1.0:
            raise ConfigError(f"Shrinkage must lie in [0, 1], got {gamma}")

    means, _, covariance = _pooled(features, labels)
    d = covariance.shape[0]
    nu = np.trace(covariance) / d
    shrunk = (1.0 - gamma) * covariance + gamma * nu * np.eye(d)

    if gamma == 0.0 and np.linalg.matrix_rank(shrunk) < d:
        raise NumericalError("Pooled covariance is rank deficient; use shrinkage > 0")
    try:
        w = linalg.solve(shrunk, means[1] - means[0], assume_a='sym')
    except (linalg.LinAlgError, ValueError) as e:
        raise NumericalError(f"Shrunk covariance is singular: {e}") from e
    if not np.all(np.isfinite(w)):
        raise NumericalError("Discriminant weights are not finite")

    b = -float(w @ (means[0] + means[1])) / 2.0
    return RldaModel(w=w, b=b, gamma=gamma, class_means=means)


def predict_rlda(model, features):
    """
    Labels and scores; score == 0 resolves to class 0.

    Returns:
        Tuple of (labels, scores).
    """
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    if features.shape[1] != model.n_features:
        raise DatasetError(f"Features have {features.shape[1]} columns, model expects {model.n_features}")
    scores = features @ model.w + model.b
    return (scores > 0).astype(np.int64), scores


class RldaClassifier:
    """
    Estimator wrapper around fit_rlda / predict_rlda.
    """

    def __init__(self, gamma='auto'):
        """
        Initialize the classifier.

        Args:
            gamma: 'auto' (analytic shrinkage) or a fixed intensity in [0, 1].
        """
        self.gamma = gamma
        self.model_ = None
        self._is_fitted = False

    def fit(self, features, labels):
        self.model_ = fit_rlda(features, labels, self.gamma)
        self._is_fitted = True
        return self

    def _check_fitted(self):
        if not self._is_fitted:
            raise RuntimeError("Classifier must be fitted before prediction.")

    def decision_function(self, features):
        self._check_fitted()
        return predict_rlda(self.model_, features)[1]

    def predict(self, features):
        self._check_fitted()
        return predict_rlda(self.model_, features)[0]

    def evaluate(self, features, labels):
        """
        Evaluate on held-out data.

        Returns:
            Dictionary with balanced accuracy and per-class accuracies.
        """
        self._check_fitted()
        labels = binary_labels(labels)
        predictions = self.predict(features)
        per_class = [float(np.mean(predictions[labels == c] == c)) for c in (0, 1)]
        return {
            'balanced_accuracy': float(np.mean(per_class)),
            'class_accuracies': per_class,
        }

    def to_dict(self):
        self._check_fitted()
        return self.model_.to_dict()

    def save(self, filepath):
        """Save the trained model with joblib."""
        if not self._is_fitted:
            raise RuntimeError("Cannot save an unfitted classifier.")
        joblib.dump({'model': self.model_, 'config': {'gamma': self.gamma}}, filepath)

    @classmethod
    def load(cls, filepath):
        """Load a model written by save()."""
        data = joblib.load(filepath)
        classifier = cls(**data['config'])
        classifier.model_ = data['model']
        classifier._is_fitted = True
        return classifier
