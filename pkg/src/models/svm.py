"""
svm.py

Soft-margin kernel SVM records: solver configuration, the binary
machine produced by SMO, and the one-vs-one ensemble.

Both machines serialize to self-describing JSON (kernel spec, C, alphas,
bias, support-vector matrix, class pair) carrying a format_version.
"""
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.models.arrays import FloatArray, IntArray
from src.models.kernel import Kernel
from src.models.sample import ActivityLabel

SVM_FORMAT_VERSION = 1
PUBLISHED_C = 0.5


class SmoConfig(BaseModel):
    """
    Sequential Minimal Optimization settings.

    max_iterations counts accepted pair updates; cache_bytes bounds the
    LRU cache of kernel rows for one binary problem.
    """
    model_config = ConfigDict(frozen=True)

    C: float = Field(PUBLISHED_C, gt=0)
    kkt_tolerance: float = Field(1e-3, gt=0)
    alpha_change_epsilon: float = Field(1e-12, gt=0)
    max_passes_without_progress: int = Field(5, ge=1)
    max_iterations: int = Field(200_000, ge=1)
    cache_bytes: int = Field(256 * 1024 * 1024, ge=0)
    seed: int = 42


class BinarySvm(BaseModel):
    """
    A trained binary machine: f(x) = sum_i alpha_i y_i k(sv_i, x) + bias.

    support_indices are positions in the training set the machine was fit
    on; only alphas above alpha_change_epsilon are kept.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    format_version: int = SVM_FORMAT_VERSION
    kernel: Kernel
    C: float = Field(..., gt=0)
    support_vectors: FloatArray
    support_labels: IntArray
    support_indices: IntArray
    alphas: FloatArray
    bias: float
    converged: bool = True
    iterations: int = 0
    dual_objective: float = 0.0
    max_kkt_violation: float = 0.0
    feature_count: int | None = Field(None, ge=0)
    objective_trace: list[float] = Field(default_factory=list, exclude=True)

    @model_validator(mode='after')
    def _check_support(self):
        count = self.alphas.shape[0]
        if self.support_vectors.ndim == 1 and self.support_vectors.size == 0:
            object.__setattr__(self, 'support_vectors', self.support_vectors.reshape(0, 0))
        if self.feature_count is None:
            object.__setattr__(self, 'feature_count',
                               int(self.support_vectors.shape[1]) if self.support_vectors.ndim == 2 else 0)
        elif count and self.support_vectors.ndim == 2 and self.support_vectors.shape[1] != self.feature_count:
            raise ValueError("support vectors do not match feature_count")
        if self.support_vectors.shape[0] != count or self.support_labels.shape != (count,) \
                or self.support_indices.shape != (count,):
            raise ValueError("support vectors, labels, indices and alphas must align")
        if count and not np.isin(self.support_labels, (-1, 1)).all():
            raise ValueError("support labels must be -1 or +1")
        if count and ((self.alphas < 0).any() or (self.alphas > self.C).any()):
            raise ValueError("alphas must lie in [0, C]")
        return self

    @property
    def dimension(self) -> int:
        """Query width; 0 when unknown (no support vectors and no feature_count)"""
        return self.feature_count or 0


class PairMachine(BaseModel):
    """One pairwise machine: class_a is the -1 side, class_b the +1 side"""
    model_config = ConfigDict(frozen=True)

    class_a: ActivityLabel
    class_b: ActivityLabel
    model: BinarySvm

    @model_validator(mode='after')
    def _check_order(self):
        if self.class_a >= self.class_b:
            raise ValueError("class_a must have the smaller label code")
        return self


class MulticlassSvm(BaseModel):
    """One-vs-one ensemble: one machine per unordered class pair"""
    model_config = ConfigDict(frozen=True)

    format_version: int = SVM_FORMAT_VERSION
    kernel: Kernel
    config: SmoConfig
    machines: list[PairMachine]

    @property
    def classes(self) -> list[ActivityLabel]:
        return sorted({machine.class_a for machine in self.machines} | {machine.class_b for machine in self.machines})
