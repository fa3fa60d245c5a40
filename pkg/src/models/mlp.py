"""
mlp.py

Feed-forward network records: training configuration, the trained
parameters and the per-epoch history.
"""
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.models.arrays import FloatArray
from src.models.sample import FEATURE_COUNT, ActivityLabel

MLP_FORMAT_VERSION = 1
PUBLISHED_HIDDEN_LAYERS = (100, 65)


class Optimizer(str, Enum):
    SGD = 'sgd'
    ADAM = 'adam'


class TrainConfig(BaseModel):
    """
    MLP training settings.

    Adam moments use beta1/beta2/adam_epsilon; plain SGD ignores them.
    Validation accuracy is recorded every epoch but never stops training.
    """
    model_config = ConfigDict(frozen=True)

    input_size: int = Field(FEATURE_COUNT, ge=1)
    hidden_layers: tuple[int, ...] = PUBLISHED_HIDDEN_LAYERS
    output_size: int = Field(len(ActivityLabel), ge=2)
    learning_rate: float = Field(0.001, gt=0)
    epochs: int = Field(1000, ge=1)
    batch_size: int = Field(200, ge=1)
    optimizer: Optimizer = Optimizer.ADAM
    beta1: float = Field(0.9, ge=0, lt=1)
    beta2: float = Field(0.999, ge=0, lt=1)
    adam_epsilon: float = Field(1e-8, gt=0)
    seed: int = Field(42, ge=0)
    init_scheme: str = 'glorot-uniform'

    @field_validator('hidden_layers')
    @classmethod
    def _positive_widths(cls, widths: tuple[int, ...]) -> tuple[int, ...]:
        if any(width < 1 for width in widths):
            raise ValueError("hidden layer widths must be positive")
        return widths

    @property
    def layer_sizes(self) -> list[int]:
        return [self.input_size, *self.hidden_layers, self.output_size]


class MlpModel(BaseModel):
    """
    Trained network. weights[l] has shape (layer_sizes[l+1], layer_sizes[l])
    and biases[l] has shape (layer_sizes[l+1],). Hidden layers use ReLU,
    the output layer softmax; output index i is activity code i + 1.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    format_version: int = MLP_FORMAT_VERSION
    layer_sizes: list[int]
    weights: list[FloatArray]
    biases: list[FloatArray]
    config: TrainConfig

    @model_validator(mode='after')
    def _check_shapes(self):
        if len(self.layer_sizes) < 2:
            raise ValueError("a network needs an input and an output layer")
        layers = len(self.layer_sizes) - 1
        if len(self.weights) != layers or len(self.biases) != layers:
            raise ValueError(f"expected {layers} weight matrices and bias vectors")
        for index, (weight, bias) in enumerate(zip(self.weights, self.biases)):
            shape = (self.layer_sizes[index + 1], self.layer_sizes[index])
            if weight.shape != shape or bias.shape != (shape[0],):
                raise ValueError(f"layer {index}: expected weight {shape} and bias ({shape[0]},), "
                                 f"got {weight.shape} and {bias.shape}")
        return self

    @property
    def input_size(self) -> int:
        return self.layer_sizes[0]

    def is_finite(self) -> bool:
        return all(np.isfinite(w).all() for w in self.weights) and all(np.isfinite(b).all() for b in self.biases)


class EpochRecord(BaseModel):
    epoch: int
    train_loss: float
    val_accuracy: float


class TrainingHistory(BaseModel):
    """Per-epoch training loss and validation accuracy, epoch 1 first"""
    seed: int
    records: list[EpochRecord] = Field(default_factory=list)

    @property
    def losses(self) -> list[float]:
        return [record.train_loss for record in self.records]
