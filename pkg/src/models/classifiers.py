"""
classifiers.py

Fitted-model records for the instance-based and generative classifiers:
K-nearest neighbors and Gaussian naive Bayes.
"""
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.models.arrays import FloatArray, IntArray
from src.models.sample import ActivityLabel, Partition


class KnnModel(BaseModel):
    """
    A stored training set and k.

    canonical_rank[i] is the position of training row i after sorting all
    rows lexicographically by feature values; it is the last tie-break
    key, so predictions never depend on storage order.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    k: int = Field(..., ge=1)
    training: Partition
    canonical_rank: IntArray

    @model_validator(mode='after')
    def _check_k(self):
        if self.k > len(self.training):
            raise ValueError(f"k={self.k} exceeds the {len(self.training)} training samples")
        return self


class KnnSweepResult(BaseModel):
    """Validation accuracy per k and the best k (ties go to the smaller k)"""
    accuracies: dict[int, float]
    best_k: int


class GnbModel(BaseModel):
    """
    Gaussian naive Bayes parameters, one row per class in `classes`.

    Invariants: exp(class_log_priors) sums to 1 within 1e-9 and every
    smoothed variance is strictly positive.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    classes: list[ActivityLabel]
    class_log_priors: FloatArray
    means: FloatArray
    variances: FloatArray
    smoothing_epsilon: float = Field(..., ge=0)

    @model_validator(mode='after')
    def _check_parameters(self):
        count = len(self.classes)
        if self.class_log_priors.shape != (count,):
            raise ValueError("one log prior per class is required")
        if self.means.ndim != 2 or self.means.shape[0] != count or self.variances.shape != self.means.shape:
            raise ValueError("means and variances must be (classes, features) matrices of equal shape")
        if abs(float(np.exp(self.class_log_priors).sum()) - 1.0) > 1e-9:
            raise ValueError("class priors must sum to 1")
        if not (self.variances > 0).all():
            raise ValueError("smoothed variances must be strictly positive")
        return self

    @property
    def dimension(self) -> int:
        return int(self.means.shape[1])

    def log_prior(self, label: ActivityLabel) -> float:
        return float(self.class_log_priors[self.classes.index(label)])
