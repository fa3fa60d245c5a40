"""
report.py

Evaluation records: the confusion matrix (rows are the true class,
columns the predicted class, both in label-code order 1..6), per-class
statistics and the full evaluation report.
"""
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator, model_validator

from src.models.arrays import IntArray
from src.models.sample import ActivityLabel

REPORT_FORMAT_VERSION = 1
UNDEFINED = 'n/a'


class ConfusionMatrix(BaseModel):
    """counts[t - 1][p - 1] = number of samples of true class t predicted as p"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    counts: IntArray

    @model_validator(mode='after')
    def _check_counts(self):
        size = len(ActivityLabel)
        if self.counts.shape != (size, size):
            raise ValueError(f"confusion matrix must be {size}x{size}, got {self.counts.shape}")
        if (self.counts < 0).any():
            raise ValueError("confusion counts must be non-negative")
        return self

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def correct(self) -> int:
        return int(np.trace(self.counts))

    def support(self, label: ActivityLabel) -> int:
        return int(self.counts[label - 1].sum())

    def count(self, truth: ActivityLabel, predicted: ActivityLabel) -> int:
        return int(self.counts[truth - 1, predicted - 1])


class ClassStats(BaseModel):
    """
    Precision / recall for one class; None when the denominator is zero
    (serialized as "n/a", never as 0).
    """
    model_config = ConfigDict(frozen=True)

    label: ActivityLabel
    precision: float | None
    recall: float | None
    support: int = Field(..., ge=0)

    @field_validator('precision', 'recall', mode='before')
    @classmethod
    def _parse_undefined(cls, value: Any) -> Any:
        return None if value == UNDEFINED else value

    @field_serializer('precision', 'recall')
    def _serialize_undefined(self, value: float | None) -> float | str:
        return UNDEFINED if value is None else value


class EvalReport(BaseModel):
    """
    Accuracy, confusion matrix and per-class statistics of one model on
    one partition, with the configuration that produced it.

    Invariant: accuracy == trace(confusion) / total within 1e-12.
    """
    model_config = ConfigDict(frozen=True)

    format_version: int = REPORT_FORMAT_VERSION
    model_tag: str
    split_tag: str
    accuracy: float = Field(..., ge=0, le=1)
    confusion: ConfusionMatrix
    per_class: list[ClassStats]
    config_echo: dict[str, Any] = Field(default_factory=dict)
    seed: int = 0

    @model_validator(mode='after')
    def _check_accuracy(self):
        total = self.confusion.total
        if total == 0:
            raise ValueError("a report needs at least one evaluated sample")
        if abs(self.accuracy - self.confusion.correct / total) > 1e-12:
            raise ValueError("accuracy must equal trace(confusion) / total")
        return self

    @property
    def total(self) -> int:
        return self.confusion.total

    @property
    def accuracy_percent(self) -> float:
        return 100.0 * self.accuracy

    def stats(self, label: ActivityLabel) -> ClassStats:
        return next(entry for entry in self.per_class if entry.label == label)
