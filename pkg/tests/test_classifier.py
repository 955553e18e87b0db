import numpy as np
import pytest

from fbcsp_decoder.classifier import RldaClassifier, estimate_shrinkage, fit_rlda, predict_rlda
from fbcsp_decoder.errors import ConfigError, DatasetError, NumericalError


@pytest.fixture
def separable():
    features = np.array([[0.0, 0.0], [1.0, 1.0], [5.0, 1.0], [6.0, 0.0]])
    labels = np.array([0, 0, 1, 1])
    return features, labels


@pytest.fixture
def gaussian_features():
    rng = np.random.default_rng(0)
    x0 = rng.standard_normal((60, 5))
    x1 = rng.standard_normal((60, 5)) + np.array([1.5, 0.0, 0.0, 0.5, 0.0])
    return np.vstack([x0, x1]), np.repeat([0, 1], 60)


def test_unshrunk_discriminant_by_hand(separable):
    features, labels = separable
    model = fit_rlda(features, labels, gamma=0.0)

    np.testing.assert_allclose(model.w, [20.0, 0.0], atol=1e-10)
    assert model.b == pytest.approx(-60.0)
    predicted, scores = predict_rlda(model, features)
    np.testing.assert_array_equal(predicted, labels)
    np.testing.assert_allclose(scores, [-50.0, -40.0, 40.0, 60.0], atol=1e-9)


def test_zero_score_goes_to_class_zero(separable):
    features, labels = separable
    model = fit_rlda(features, labels, gamma=0.0)
    predicted, scores = predict_rlda(model, [[3.0, 7.0]])
    assert scores[0] == pytest.approx(0.0)
    assert predicted[0] == 0


def test_full_shrinkage_uses_mean_variance(separable):
    features, labels = separable
    model = fit_rlda(features, labels, gamma=1.0)
    np.testing.assert_allclose(model.w, [20.0, 0.0], atol=1e-10)


def test_duplicated_feature_without_shrinkage(separable):
    features, labels = separable
    doubled = np.hstack([features, features[:, :1]])
    with pytest.raises(NumericalError):
        fit_rlda(doubled, labels, gamma=0.0)


def test_duplicated_feature_with_shrinkage(separable):
    features, labels = separable
    doubled = np.hstack([features, features[:, :1]])
    model = fit_rlda(doubled, labels, gamma=0.1)
    assert np.all(np.isfinite(model.w))


@pytest.mark.parametrize("gamma", [-0.1, 1.5])
def test_shrinkage_out_of_range(separable, gamma):
    with pytest.raises(ConfigError):
        fit_rlda(*separable, gamma=gamma)


def test_single_class_cannot_be_trained():
    with pytest.raises(DatasetError):
        fit_rlda(np.ones((4, 2)), [1, 1, 1, 1])


def test_non_binary_labels():
    with pytest.raises(DatasetError):
        fit_rlda(np.ones((3, 2)), [0, 1, 2])


def test_fractional_labels_are_not_truncated():
    with pytest.raises(DatasetError, match="binary"):
        fit_rlda(np.arange(8.0).reshape(4, 2), [0, 0.5, 1, 1])


def test_full_shrinkage_is_the_nearest_class_mean_rule(gaussian_features):
    features, labels = gaussian_features
    model = fit_rlda(features, labels, gamma=1.0)

    predicted, _ = predict_rlda(model, features)
    mu0, mu1 = model.class_means
    nearer_one = ((features - mu1) ** 2).sum(axis=1) < ((features - mu0) ** 2).sum(axis=1)

    np.testing.assert_array_equal(predicted, nearer_one.astype(int))
    cosine = model.w @ (mu1 - mu0) / (np.linalg.norm(model.w) * np.linalg.norm(mu1 - mu0))
    assert cosine == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("gamma", [0.0, 0.3, 'auto'])
def test_weights_solve_the_shrunk_system(gaussian_features, gamma):
    features, labels = gaussian_features
    model = fit_rlda(features, labels, gamma=gamma)

    mu0, mu1 = features[labels == 0].mean(axis=0), features[labels == 1].mean(axis=0)
    centered = features - np.where(labels[:, None] == 1, mu1, mu0)
    pooled = centered.T @ centered / len(features)
    nu = np.trace(pooled) / pooled.shape[0]
    shrunk = (1.0 - model.gamma) * pooled + model.gamma * nu * np.eye(pooled.shape[0])

    residual = shrunk @ model.w - (mu1 - mu0)
    assert np.linalg.norm(residual) <= 1e-10 * np.linalg.norm(mu1 - mu0)
    assert model.b == pytest.approx(-model.w @ (mu0 + mu1) / 2.0)


def test_analytic_shrinkage_is_bounded(gaussian_features):
    gamma = estimate_shrinkage(*gaussian_features)
    assert 0.0 <= gamma <= 1.0


def test_analytic_shrinkage_grows_when_samples_are_few():
    rng = np.random.default_rng(1)
    few = rng.standard_normal((12, 30))
    many = rng.standard_normal((2000, 30))
    labels_few = np.repeat([0, 1], 6)
    labels_many = np.repeat([0, 1], 1000)
    assert estimate_shrinkage(few, labels_few) > estimate_shrinkage(many, labels_many)


def test_shrinkage_with_single_sample_class():
    features = np.array([[0.0, 1.0], [1.0, 0.0], [2.0, 2.0]])
    assert estimate_shrinkage(features, [0, 0, 1]) == 1.0


def test_common_shift_leaves_predictions_unchanged(gaussian_features):
    features, labels = gaussian_features
    base = predict_rlda(fit_rlda(features, labels), features)[0]
    shifted = predict_rlda(fit_rlda(features + 1000.0, labels), features + 1000.0)[0]
    np.testing.assert_array_equal(base, shifted)


def test_feature_width_is_checked(separable):
    model = fit_rlda(*separable, gamma=0.5)
    with pytest.raises(DatasetError):
        predict_rlda(model, np.ones((2, 3)))


def test_unfitted_classifier_refuses_to_predict(separable):
    classifier = RldaClassifier()
    with pytest.raises(RuntimeError, match="fitted"):
        classifier.predict(separable[0])


def test_classifier_evaluate(gaussian_features):
    features, labels = gaussian_features
    result = RldaClassifier().fit(features, labels).evaluate(features, labels)
    assert 0.7 < result['balanced_accuracy'] <= 1.0
    assert len(result['class_accuracies']) == 2


def test_save_and_load(tmp_path, gaussian_features):
    features, labels = gaussian_features
    classifier = RldaClassifier(gamma=0.2).fit(features, labels)
    path = tmp_path / "rlda.joblib"
    classifier.save(path)

    loaded = RldaClassifier.load(path)

    assert loaded.gamma == 0.2
    np.testing.assert_array_equal(loaded.predict(features), classifier.predict(features))
    np.testing.assert_allclose(loaded.decision_function(features), classifier.decision_function(features))


def test_save_unfitted(tmp_path):
    with pytest.raises(RuntimeError):
        RldaClassifier().save(tmp_path / "x.joblib")
