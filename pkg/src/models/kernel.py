"""
kernel.py

Closed-form kernel specification (linear, polynomial, sigmoid).
Evaluation lives in src.utils.numeric; this model only carries the
variant and its hyperparameters and validates them.
"""
from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.models.sample import FEATURE_COUNT

DEFAULT_GAMMA = 1.0 / FEATURE_COUNT
DEFAULT_COEF0 = 0.0
DEFAULT_DEGREE = 3


class KernelKind(str, Enum):
    LINEAR = 'linear'
    POLYNOMIAL = 'polynomial'
    SIGMOID = 'sigmoid'


class Kernel(BaseModel):
    """
    Kernel variant with its hyperparameters.

    linear:      <x, y>
    polynomial:  (gamma * <x, y> + coef0) ** degree
    sigmoid:     tanh(gamma * <x, y> + coef0)

    gamma/coef0/degree are ignored by the linear kernel; degree only
    applies to the polynomial kernel.
    """
    model_config = ConfigDict(frozen=True)

    kind: KernelKind
    gamma: float = Field(DEFAULT_GAMMA, gt=0)
    coef0: float = DEFAULT_COEF0
    degree: int = Field(DEFAULT_DEGREE, ge=1)

    @model_validator(mode='after')
    def _check_finite(self):
        if not (abs(self.gamma) < float('inf') and abs(self.coef0) < float('inf')):
            raise ValueError("kernel hyperparameters must be finite")
        return self

    @classmethod
    def linear(cls) -> 'Kernel':
        return cls(kind=KernelKind.LINEAR)

    @classmethod
    def polynomial(cls, gamma: float = DEFAULT_GAMMA, coef0: float = DEFAULT_COEF0,
                   degree: int = DEFAULT_DEGREE) -> 'Kernel':
        return cls(kind=KernelKind.POLYNOMIAL, gamma=gamma, coef0=coef0, degree=degree)

    @classmethod
    def sigmoid(cls, gamma: float = DEFAULT_GAMMA, coef0: float = DEFAULT_COEF0) -> 'Kernel':
        return cls(kind=KernelKind.SIGMOID, gamma=gamma, coef0=coef0)

    @property
    def tag(self) -> str:
        return self.kind.value

    def describe(self) -> str:
        if self.kind is KernelKind.LINEAR:
            return 'linear'
        if self.kind is KernelKind.POLYNOMIAL:
            return f'polynomial(gamma={self.gamma:g}, coef0={self.coef0:g}, degree={self.degree})'
        return f'sigmoid(gamma={self.gamma:g}, coef0={self.coef0:g})'
