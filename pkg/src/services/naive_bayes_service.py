"""
naive_bayes_service.py

Gaussian naive Bayes: per-class feature means and maximum-likelihood
variances, variance smoothing proportional to the largest feature
variance, and all likelihood arithmetic in log space (561 density
factors underflow in linear space).
"""
import logging
from collections.abc import Sequence

import numpy as np
from scipy.special import logsumexp

from src.errors import ConfigurationError, CoverageError, DimensionError
from src.models.classifiers import GnbModel
from src.models.sample import ActivityLabel, Partition
from src.utils.numeric import as_vector

logger = logging.getLogger(__name__)

DEFAULT_SMOOTHING_FRACTION = 1e-9
_BATCH_ROWS = 512


class NaiveBayesService:
    """NaiveBayesService Class"""

    def fit(self, train: Partition, smoothing_epsilon_fraction: float = DEFAULT_SMOOTHING_FRACTION,
            classes: Sequence[ActivityLabel] | None = None) -> GnbModel:
        """
        Estimate class priors, means and smoothed variances.

        epsilon = smoothing_epsilon_fraction * max over features of the
        variance of the whole training set; it is added to every
        per-class variance.

        Args:
            train: Training rows
            smoothing_epsilon_fraction: Non-negative smoothing fraction
            classes: Classes the model must cover; defaults to the labels
                present in train

        Raises:
            CoverageError: train is empty or a required class has no rows
            ConfigurationError: negative smoothing, or a variance is still
                zero after smoothing
        """
        if smoothing_epsilon_fraction < 0:
            raise ConfigurationError("smoothing_epsilon_fraction must be >= 0")
        if len(train) == 0:
            raise CoverageError("cannot fit naive Bayes on an empty training set")
        present = sorted(set(train.labels.tolist()))
        required = sorted(int(label) for label in classes) if classes is not None else present
        missing = [ActivityLabel(code).name for code in required if code not in present]
        if missing:
            raise CoverageError(f"classes absent from training data: {', '.join(missing)}")

        features = train.features
        epsilon = smoothing_epsilon_fraction * float(np.var(features, axis=0).max())
        means, variances, counts = [], [], []
        for code in required:
            rows = features[train.labels == code]
            means.append(rows.mean(axis=0))
            variances.append(rows.var(axis=0) + epsilon)
            counts.append(rows.shape[0])
        variances = np.asarray(variances)
        if not (variances > 0).all():
            raise ConfigurationError("a feature has zero variance within a class; use a positive smoothing fraction")

        counts = np.asarray(counts, dtype=np.float64)
        return GnbModel(
            classes=[ActivityLabel(code) for code in required],
            class_log_priors=np.log(counts / counts.sum()),
            means=np.asarray(means),
            variances=variances,
            smoothing_epsilon=epsilon,
        )

    def joint_log_likelihood(self, model: GnbModel, queries: np.ndarray) -> np.ndarray:
        """
        Unnormalized log posteriors, shape (rows, classes).

        log prior + sum over features of log N(x_f; mean, variance).
        """
        queries = np.atleast_2d(as_vector(queries))
        if queries.shape[1] != model.dimension:
            raise DimensionError(f"query has {queries.shape[1]} features, model expects {model.dimension}")
        normalizer = -0.5 * np.log(2.0 * np.pi * model.variances).sum(axis=1)
        result = np.empty((queries.shape[0], len(model.classes)))
        for start in range(0, queries.shape[0], _BATCH_ROWS):
            block = queries[start:start + _BATCH_ROWS, None, :]
            squared = ((block - model.means) ** 2 / model.variances).sum(axis=2)
            result[start:start + _BATCH_ROWS] = model.class_log_priors + normalizer - 0.5 * squared
        return result

    def log_posterior(self, model: GnbModel, x) -> dict[ActivityLabel, float]:
        """Unnormalized log posterior per class for one query"""
        joint = self.joint_log_likelihood(model, self._single(x))[0]
        return dict(zip(model.classes, joint.tolist()))

    def posterior(self, model: GnbModel, x) -> dict[ActivityLabel, float]:
        """Normalized posterior per class (log-sum-exp), summing to 1"""
        joint = self.joint_log_likelihood(model, self._single(x))[0]
        return dict(zip(model.classes, np.exp(joint - logsumexp(joint)).tolist()))

    def predict(self, model: GnbModel, x) -> ActivityLabel:
        """Class with the largest posterior; ties go to the smaller code"""
        return ActivityLabel(int(self.predict_batch(model, self._single(x))[0]))

    def predict_batch(self, model: GnbModel, queries: np.ndarray) -> np.ndarray:
        joint = self.joint_log_likelihood(model, queries)
        codes = np.asarray([int(label) for label in model.classes], dtype=np.int64)
        return codes[np.argmax(joint, axis=1)]

    def _single(self, x) -> np.ndarray:
        x = as_vector(x)
        if x.ndim != 1:
            raise DimensionError(f"expected one feature vector, got shape {x.shape}")
        return x[None, :]


# Create a singleton instance that will be used throughout the application
naive_bayes_service = NaiveBayesService()
