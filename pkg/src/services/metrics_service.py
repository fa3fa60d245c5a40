"""
metrics_service.py

Accuracy, confusion matrices and per-class precision / recall.
Counts are integers throughout; division happens only when a ratio is
reported.
"""
import logging
from collections.abc import Sequence
from typing import Any

import numpy as np

from src.errors import DimensionError, EmptyEvaluationError
from src.models.report import ClassStats, ConfusionMatrix, EvalReport
from src.models.sample import ActivityLabel

logger = logging.getLogger(__name__)


class MetricsService:
    """MetricsService Class"""

    def confusion(self, predictions: Sequence[int], truths: Sequence[int]) -> ConfusionMatrix:
        predicted, truth = self._codes(predictions, truths)
        size = len(ActivityLabel)
        counts = np.zeros((size, size), dtype=np.int64)
        np.add.at(counts, (truth - 1, predicted - 1), 1)
        return ConfusionMatrix(counts=counts)

    def evaluate(self, predictions: Sequence[int], truths: Sequence[int], model_tag: str = 'model',
                 split_tag: str = 'test', config_echo: dict[str, Any] | None = None, seed: int = 0) -> EvalReport:
        """
        Score predictions against truths.

        Precision of class c is column-wise (among rows predicted c),
        recall is row-wise (among rows whose truth is c); either is None
        when its denominator is zero.

        Raises:
            DimensionError: lengths differ
            EmptyEvaluationError: nothing to evaluate
        """
        matrix = self.confusion(predictions, truths)
        counts = matrix.counts
        predicted_totals = counts.sum(axis=0)
        per_class = []
        for label in ActivityLabel:
            index = label - 1
            hits = int(counts[index, index])
            support = int(counts[index].sum())
            column = int(predicted_totals[index])
            per_class.append(ClassStats(
                label=label,
                precision=hits / column if column else None,
                recall=hits / support if support else None,
                support=support,
            ))
        return EvalReport(
            model_tag=model_tag,
            split_tag=split_tag,
            accuracy=matrix.correct / matrix.total,
            confusion=matrix,
            per_class=per_class,
            config_echo=config_echo or {},
            seed=seed,
        )

    def macro_precision(self, report: EvalReport) -> float | None:
        """Mean over classes whose precision is defined"""
        return _mean([entry.precision for entry in report.per_class])

    def macro_recall(self, report: EvalReport) -> float | None:
        return _mean([entry.recall for entry in report.per_class])

    def micro_recall(self, report: EvalReport) -> float:
        """Pooled recall over all classes; identical to accuracy"""
        return report.confusion.correct / report.confusion.total

    def _codes(self, predictions: Sequence[int], truths: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
        predicted = np.asarray([int(p) for p in predictions], dtype=np.int64)
        truth = np.asarray([int(t) for t in truths], dtype=np.int64)
        if predicted.shape != truth.shape:
            raise DimensionError(f"{predicted.shape[0]} predictions but {truth.shape[0]} truths")
        if predicted.size == 0:
            raise EmptyEvaluationError("cannot evaluate zero predictions")
        codes = ActivityLabel.codes()
        if not (np.isin(predicted, codes).all() and np.isin(truth, codes).all()):
            raise DimensionError("predictions and truths must be activity codes 1..6")
        return predicted, truth


def _mean(values: list[float | None]) -> float | None:
    defined = [value for value in values if value is not None]
    return sum(defined) / len(defined) if defined else None


# Create a singleton instance that will be used throughout the application
metrics_service = MetricsService()
