import math

import numpy as np
import pytest

from src.errors import ConfigurationError, CoverageError, DimensionError
from src.models.classifiers import GnbModel
from src.models.sample import ActivityLabel, Partition
from src.services.naive_bayes_service import naive_bayes_service
from tests.conftest import make_blobs
from tests.oracles import gaussian_log_density


def _partition(points, labels):
    return Partition.from_arrays(np.asarray(points, dtype=float).reshape(len(labels), -1), labels)


def _direct_log_posterior(model: GnbModel, x) -> list[float]:
    scores = []
    for row, _ in enumerate(model.classes):
        total = float(model.class_log_priors[row])
        for feature, value in enumerate(x):
            total += gaussian_log_density(float(value), float(model.means[row, feature]),
                                          float(model.variances[row, feature]))
        scores.append(total)
    return scores


def _midpoint_model():
    return naive_bayes_service.fit(_partition([-1, 1, 0, 2], [1, 1, 2, 2]), smoothing_epsilon_fraction=0.0)


def test_single_class_moments():
    model = naive_bayes_service.fit(_partition([0, 2], [3, 3]), smoothing_epsilon_fraction=0.0)
    assert model.classes == [ActivityLabel.WALKING_DOWNSTAIRS]
    assert model.means[0, 0] == 1.0
    assert model.variances[0, 0] == 1.0
    assert model.log_prior(ActivityLabel.WALKING_DOWNSTAIRS) == 0.0


def test_identical_classes_differ_only_in_priors():
    points = [[0.1, 0.4], [0.3, -0.2], [0.5, 0.0]]
    train = _partition(points * 3, [1, 1, 1, 2, 2, 2, 2, 2, 2])
    model = naive_bayes_service.fit(train)
    np.testing.assert_allclose(model.means[0], model.means[1], rtol=1e-14, atol=1e-15)
    np.testing.assert_allclose(model.variances[0], model.variances[1], rtol=1e-12)
    assert math.exp(model.log_prior(ActivityLabel.WALKING)) == pytest.approx(1 / 3)


def test_moments_match_two_pass_oracle(rng):
    features = rng.uniform(-1, 1, (100, 5))
    labels = rng.integers(1, 4, 100)
    fraction = 1e-3
    model = naive_bayes_service.fit(_partition(features, labels), smoothing_epsilon_fraction=fraction)
    epsilon = fraction * max(
        sum((v - sum(col) / len(col)) ** 2 for v in col) / len(col) for col in features.T.tolist())
    assert model.smoothing_epsilon == pytest.approx(epsilon, rel=1e-10)
    for row, label in enumerate(model.classes):
        rows = features[labels == label.value].tolist()
        for feature in range(5):
            column = [r[feature] for r in rows]
            mean = sum(column) / len(column)
            variance = sum((v - mean) ** 2 for v in column) / len(column)
            assert model.means[row, feature] == pytest.approx(mean, abs=1e-10)
            assert model.variances[row, feature] == pytest.approx(variance + epsilon, abs=1e-10)


def test_priors_sum_to_one():
    model = naive_bayes_service.fit(make_blobs(5, 4, seed=2))
    assert np.exp(model.class_log_priors).sum() == pytest.approx(1.0, abs=1e-9)
    assert (model.variances > 0).all()


def test_midpoint_query_is_an_even_split():
    model = _midpoint_model()
    posterior = naive_bayes_service.posterior(model, [0.5])
    assert posterior[ActivityLabel.WALKING] == pytest.approx(0.5, abs=1e-12)
    assert posterior[ActivityLabel.WALKING_UPSTAIRS] == pytest.approx(0.5, abs=1e-12)
    assert naive_bayes_service.predict(model, [0.5]) == ActivityLabel.WALKING


def test_likelihood_dominance():
    model = _midpoint_model()
    scores = naive_bayes_service.log_posterior(model, [0.0])
    assert scores[ActivityLabel.WALKING] > scores[ActivityLabel.WALKING_UPSTAIRS]
    assert naive_bayes_service.predict(model, [2.0]) == ActivityLabel.WALKING_UPSTAIRS


def test_log_posterior_matches_direct_density(rng):
    model = naive_bayes_service.fit(_partition(rng.uniform(-1, 1, (60, 7)), rng.integers(1, 7, 60)))
    for query in rng.uniform(-1, 1, (10, 7)):
        expected = _direct_log_posterior(model, query)
        actual = naive_bayes_service.log_posterior(model, query)
        assert list(actual) == model.classes
        np.testing.assert_allclose(list(actual.values()), expected, rtol=1e-12, atol=1e-9)


def test_predictions_agree_with_direct_density_argmax(rng):
    model = naive_bayes_service.fit(_partition(rng.uniform(-1, 1, (90, 4)), rng.integers(1, 7, 90)))
    queries = rng.uniform(-1, 1, (100, 4))
    expected = []
    for query in queries:
        scores = _direct_log_posterior(model, query)
        expected.append(model.classes[scores.index(max(scores))].value)
    assert naive_bayes_service.predict_batch(model, queries).tolist() == expected


def test_posteriors_sum_to_one_even_far_from_data(rng):
    model = naive_bayes_service.fit(make_blobs(6, 561, seed=4))
    for query in rng.uniform(-1, 1, (5, 561)):
        assert sum(naive_bayes_service.posterior(model, query).values()) == pytest.approx(1.0, abs=1e-9)


def test_affine_invariance_without_smoothing(rng):
    features = rng.standard_normal((80, 6))
    labels = rng.integers(1, 7, 80)
    queries = rng.standard_normal((40, 6))
    scale = rng.uniform(0.5, 3.0, 6) * rng.choice([-1.0, 1.0], 6)
    shift = rng.uniform(-2, 2, 6)
    plain = naive_bayes_service.fit(_partition(features, labels), smoothing_epsilon_fraction=0.0)
    moved = naive_bayes_service.fit(_partition(features * scale + shift, labels), smoothing_epsilon_fraction=0.0)
    np.testing.assert_array_equal(naive_bayes_service.predict_batch(plain, queries),
                                  naive_bayes_service.predict_batch(moved, queries * scale + shift))


def test_raising_a_prior_never_lowers_its_posterior(rng):
    base = naive_bayes_service.fit(_partition(rng.uniform(-1, 1, (40, 3)), rng.integers(1, 4, 40)))
    priors = np.exp(base.class_log_priors)
    boosted = priors.copy()
    boosted[0] += 0.2
    boosted /= boosted.sum()
    stronger = base.model_copy(update={'class_log_priors': np.log(boosted)})
    for query in rng.uniform(-1, 1, (25, 3)):
        before = naive_bayes_service.posterior(base, query)[base.classes[0]]
        after = naive_bayes_service.posterior(stronger, query)[base.classes[0]]
        assert after >= before - 1e-15


def test_missing_required_class_is_coverage_error():
    train = make_blobs(3, 2, seed=1, classes=(1, 2, 3, 4, 5))
    with pytest.raises(CoverageError, match='LAYING'):
        naive_bayes_service.fit(train, classes=list(ActivityLabel))


def test_fit_errors():
    with pytest.raises(CoverageError):
        naive_bayes_service.fit(Partition.from_arrays(np.zeros((0, 2)), []))
    with pytest.raises(ConfigurationError):
        naive_bayes_service.fit(make_blobs(2, 2, seed=1), smoothing_epsilon_fraction=-1.0)
    with pytest.raises(ConfigurationError):
        naive_bayes_service.fit(_partition([[0, 1], [0, 2], [1, 1]], [1, 1, 2]), smoothing_epsilon_fraction=0.0)


def test_dimension_mismatch():
    model = _midpoint_model()
    with pytest.raises(DimensionError):
        naive_bayes_service.predict(model, [0.1, 0.2])
    with pytest.raises(DimensionError):
        naive_bayes_service.predict(model, [[0.1], [0.2]])
