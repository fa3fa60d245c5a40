"""
knn_service.py

K-nearest-neighbors classification by exact scan, plus the K-sweep.

Neighbor ranking uses Euclidean distance with the key
(distance, label code, canonical rank), so the k-th / (k+1)-th boundary
is resolved by values, never by storage order. Votes are settled by
count; tied classes are separated by their nearest member, then by the
smaller label code.
"""
import logging
from collections.abc import Sequence

import numpy as np
from tqdm import tqdm

from src.errors import ConfigurationError, DimensionError
from src.models.classifiers import KnnModel, KnnSweepResult
from src.models.sample import ActivityLabel, Partition
from src.utils.numeric import as_vector, row_distances

logger = logging.getLogger(__name__)


class KnnService:
    """
    KnnService Class

    Fitting stores the training set; models are immutable, so
    predictions are safe from any number of callers.
    """

    def fit(self, train: Partition, k: int) -> KnnModel:
        """
        Store the training set.

        Raises:
            ConfigurationError: train is empty or k is outside 1..len(train)
        """
        if len(train) == 0:
            raise ConfigurationError("KNN needs at least one training sample")
        if not 1 <= k <= len(train):
            raise ConfigurationError(f"k must be in 1..{len(train)}, got {k}")
        order = np.lexsort(train.features.T[::-1])
        rank = np.empty(len(train), dtype=np.int64)
        rank[order] = np.arange(len(train))
        return KnnModel(k=k, training=train, canonical_rank=rank)

    def predict(self, model: KnnModel, x) -> ActivityLabel:
        """Majority label among the k nearest training samples"""
        labels, _ = self._neighbors(model, as_vector(x), model.k)
        return self._vote(labels)

    def predict_batch(self, model: KnnModel, queries: np.ndarray, show_progress: bool = False) -> np.ndarray:
        """Labels for every row of queries (same result as predict, row by row)"""
        queries = np.atleast_2d(as_vector(queries))
        predictions = np.empty(queries.shape[0], dtype=np.int64)
        for row in tqdm(range(queries.shape[0]), desc=f'knn k={model.k}', disable=not show_progress):
            labels, _ = self._neighbors(model, queries[row], model.k)
            predictions[row] = self._vote(labels)
        return predictions

    def sweep(self, train: Partition, validation: Partition, k_values: Sequence[int],
              show_progress: bool = False) -> KnnSweepResult:
        """
        Validation accuracy for each k.

        Returns:
            Accuracy per k and the best k (smaller k on ties)
        """
        if len(validation) == 0:
            raise ConfigurationError("the validation set is empty")
        predictions = self.predict_for_k_values(train, validation.features, k_values, show_progress)
        accuracies = {k: float((predictions[k] == validation.labels).mean()) for k in k_values}
        best_k = min(k_values, key=lambda k: (-accuracies[k], k))
        logger.info("KNN sweep: best k=%d (validation accuracy %.4f)", best_k, accuracies[best_k])
        return KnnSweepResult(accuracies=accuracies, best_k=best_k)

    def predict_for_k_values(self, train: Partition, queries: np.ndarray, k_values: Sequence[int],
                             show_progress: bool = False) -> dict[int, np.ndarray]:
        """
        Predictions for every k at once.

        Each query's neighbor list is ranked once, to the largest k, and
        every k votes over its prefix.
        """
        if not k_values:
            raise ConfigurationError("no k values to sweep")
        for k in k_values:
            if not 1 <= k <= len(train):
                raise ConfigurationError(f"k must be in 1..{len(train)}, got {k}")
        queries = np.atleast_2d(as_vector(queries))
        depth = max(k_values)
        reference = self.fit(train, depth)
        predictions = {k: np.empty(queries.shape[0], dtype=np.int64) for k in k_values}
        for row in tqdm(range(queries.shape[0]), desc='knn sweep', disable=not show_progress):
            labels, _ = self._neighbors(reference, queries[row], depth)
            for k in k_values:
                predictions[k][row] = self._vote(labels[:k])
        return predictions

    def _neighbors(self, model: KnnModel, x: np.ndarray, depth: int) -> tuple[np.ndarray, np.ndarray]:
        training = model.training
        if x.shape != (training.dimension,):
            raise DimensionError(f"query has shape {x.shape}, training rows have {training.dimension} features")
        distances = row_distances(training.features, x)
        # Keep every row tied with the depth-th distance, then rank exactly.
        threshold = np.partition(distances, depth - 1)[depth - 1]
        candidates = np.flatnonzero(distances <= threshold)
        order = np.lexsort((model.canonical_rank[candidates], training.labels[candidates], distances[candidates]))
        chosen = candidates[order[:depth]]
        return training.labels[chosen], distances[chosen]

    def _vote(self, labels: np.ndarray) -> ActivityLabel:
        codes, counts = np.unique(labels, return_counts=True)
        tied = set(codes[counts == counts.max()].tolist())
        # Neighbors are sorted by (distance, label), so the first tied
        # label met is the one with the nearest member.
        for label in labels.tolist():
            if label in tied:
                return ActivityLabel(label)
        raise AssertionError("unreachable: a tied label always occurs among the neighbors")


# Create a singleton instance that will be used throughout the application
knn_service = KnnService()
