"""
mlp_service.py

Multi-layer perceptron: ReLU hidden layers, softmax output, mean
cross-entropy loss, backpropagation and mini-batch training with plain
SGD or Adam.

Parameters are laid out as (out, in) weight matrices and (out,) bias
vectors; a batch X is (rows, in), so a layer computes Z = X W^T + b.
Softmax and cross-entropy are fused at the output: dL/dZ = (p - onehot) / n.
"""
import logging
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.special import log_softmax, softmax
from tqdm import tqdm

from src.errors import ConfigurationError, CorruptionError, DimensionError, DivergenceError
from src.models.mlp import MLP_FORMAT_VERSION, EpochRecord, MlpModel, Optimizer, TrainConfig, TrainingHistory
from src.models.sample import ActivityLabel, Partition
from src.utils.files import read_model, write_model
from src.utils.numeric import SeededRng, as_vector

logger = logging.getLogger(__name__)


class Gradients(NamedTuple):
    weights: list[np.ndarray]
    biases: list[np.ndarray]


class _Sgd:
    def __init__(self, config: TrainConfig):
        self.learning_rate = config.learning_rate

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        for param, grad in zip(params, grads):
            param -= self.learning_rate * grad


class _Adam:
    """Adam with bias-corrected moment estimates"""

    def __init__(self, config: TrainConfig, params: list[np.ndarray]):
        self.learning_rate = config.learning_rate
        self.beta1 = config.beta1
        self.beta2 = config.beta2
        self.epsilon = config.adam_epsilon
        self.first = [np.zeros_like(p) for p in params]
        self.second = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        self.t += 1
        rate = self.learning_rate * np.sqrt(1.0 - self.beta2 ** self.t) / (1.0 - self.beta1 ** self.t)
        for param, grad, m, v in zip(params, grads, self.first, self.second):
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad * grad
            param -= rate * m / (np.sqrt(v) + self.epsilon)


def _layer_outputs(weights: list[np.ndarray], biases: list[np.ndarray],
                   inputs: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Activations per layer (inputs first) and pre-activations per layer"""
    activations = [inputs]
    pre_activations = []
    last = len(weights) - 1
    for index, (weight, bias) in enumerate(zip(weights, biases)):
        z = activations[-1] @ weight.T + bias
        pre_activations.append(z)
        if index < last:
            activations.append(np.maximum(z, 0.0))
    return activations, pre_activations


def _loss_and_gradients(weights: list[np.ndarray], biases: list[np.ndarray], inputs: np.ndarray,
                        targets: np.ndarray) -> tuple[float, Gradients]:
    """targets are output indices (activity code - 1)"""
    rows = inputs.shape[0]
    activations, pre_activations = _layer_outputs(weights, biases, inputs)
    logits = pre_activations[-1]
    log_probs = log_softmax(logits, axis=1)
    loss = -float(log_probs[np.arange(rows), targets].mean())

    delta = np.exp(log_probs)
    delta[np.arange(rows), targets] -= 1.0
    delta /= rows
    weight_grads: list[np.ndarray] = [np.empty(0)] * len(weights)
    bias_grads: list[np.ndarray] = [np.empty(0)] * len(weights)
    for index in range(len(weights) - 1, -1, -1):
        weight_grads[index] = delta.T @ activations[index]
        bias_grads[index] = delta.sum(axis=0)
        if index:
            # ReLU derivative is 0 at exactly 0
            delta = (delta @ weights[index]) * (pre_activations[index - 1] > 0)
    return loss, Gradients(weight_grads, bias_grads)


class MlpService:
    """
    MlpService Class

    Training is single-threaded: (seed, config, data) fully determine the
    final parameters. Trained models are frozen.
    """

    def initialize(self, config: TrainConfig) -> MlpModel:
        """
        Weights and biases uniform in +-sqrt(6 / (fan_in + fan_out)),
        drawn layer by layer from the seeded generator.
        """
        return self._initialize(config, SeededRng(config.seed))

    def forward(self, model: MlpModel, x) -> np.ndarray:
        """Class probabilities for one feature vector (index i is code i + 1)"""
        x = as_vector(x)
        if x.ndim != 1:
            raise DimensionError(f"expected one feature vector, got shape {x.shape}")
        return self.forward_batch(model, x[None, :])[0]

    def forward_batch(self, model: MlpModel, queries: np.ndarray) -> np.ndarray:
        queries = self._check_inputs(model, queries)
        if not model.is_finite():
            raise CorruptionError("model parameters contain NaN or infinity")
        _, pre_activations = _layer_outputs(model.weights, model.biases, queries)
        return softmax(pre_activations[-1], axis=1)

    def loss_and_gradients(self, model: MlpModel, features: np.ndarray, labels) -> tuple[float, Gradients]:
        """
        Mean cross-entropy over a batch and its gradient for every parameter.

        Args:
            model: Network to differentiate
            features: (rows, inputs) batch
            labels: Activity codes, one per row

        Raises:
            DimensionError: shapes do not match the network
            ConfigurationError: empty batch
        """
        features = self._check_inputs(model, features)
        if features.shape[0] == 0:
            raise ConfigurationError("the batch is empty")
        targets = self._targets(model, labels, features.shape[0])
        return _loss_and_gradients(list(model.weights), list(model.biases), features, targets)

    def train(self, train: Partition, validation: Partition, config: TrainConfig,
              show_progress: bool = False) -> tuple[MlpModel, TrainingHistory]:
        """
        Mini-batch training for config.epochs epochs.

        The rows are reshuffled every epoch by the seeded generator that
        also drew the initial parameters. The recorded train_loss of an
        epoch is the row-weighted mean of its batch losses.

        Raises:
            ConfigurationError: an empty partition
            DimensionError: rows do not match config.input_size
            DivergenceError: the loss became NaN or infinite
        """
        if len(train) == 0 or len(validation) == 0:
            raise ConfigurationError("MLP training needs non-empty train and validation sets")
        if train.dimension != config.input_size or validation.dimension != config.input_size:
            raise DimensionError(f"rows have {train.dimension} features, the network expects {config.input_size}")

        rng = SeededRng(config.seed)
        initial = self._initialize(config, rng)
        weights = [np.array(w) for w in initial.weights]
        biases = [np.array(b) for b in initial.biases]
        params = weights + biases
        optimizer = _Adam(config, params) if config.optimizer is Optimizer.ADAM else _Sgd(config)

        targets = self._targets(initial, train.labels, len(train))
        features = train.features
        history = TrainingHistory(seed=config.seed)
        logger.info("Training MLP %s with %s (lr=%g, %d epochs, batch %d, seed %d)",
                    'x'.join(map(str, config.layer_sizes)), config.optimizer.value, config.learning_rate,
                    config.epochs, config.batch_size, config.seed)
        epochs = tqdm(range(1, config.epochs + 1), desc=f'mlp seed={config.seed}', disable=not show_progress)
        for epoch in epochs:
            order = rng.permutation(len(train))
            total = 0.0
            for start in range(0, len(train), config.batch_size):
                batch = order[start:start + config.batch_size]
                loss, grads = _loss_and_gradients(weights, biases, features[batch], targets[batch])
                if not np.isfinite(loss):
                    raise DivergenceError(f"training loss is {loss}", epoch)
                total += loss * batch.size
                optimizer.step(params, grads.weights + grads.biases)
            epoch_loss = total / len(train)
            if not all(np.isfinite(p).all() for p in params):
                raise DivergenceError("parameters became non-finite", epoch)
            current = MlpModel(layer_sizes=config.layer_sizes, weights=weights, biases=biases, config=config)
            accuracy = float((self.predict_batch(current, validation.features) == validation.labels).mean())
            history.records.append(EpochRecord(epoch=epoch, train_loss=epoch_loss, val_accuracy=accuracy))
            epochs.set_postfix(loss=f'{epoch_loss:.4f}', val=f'{accuracy:.4f}')
            logger.debug("epoch %d: loss %.6f, validation accuracy %.4f", epoch, epoch_loss, accuracy)

        model = MlpModel(layer_sizes=config.layer_sizes, weights=weights, biases=biases, config=config)
        logger.info("MLP seed %d: final loss %.4f, validation accuracy %.4f",
                    config.seed, history.records[-1].train_loss, history.records[-1].val_accuracy)
        return model, history

    def predict(self, model: MlpModel, x) -> ActivityLabel:
        """Most probable class; ties go to the smaller code"""
        return ActivityLabel(int(np.argmax(self.forward(model, x))) + 1)

    def predict_batch(self, model: MlpModel, queries: np.ndarray) -> np.ndarray:
        return np.argmax(self.forward_batch(model, queries), axis=1).astype(np.int64) + 1

    def save(self, model: MlpModel, path: Path) -> Path:
        return write_model(model, path)

    def load(self, path: Path) -> MlpModel:
        return read_model(MlpModel, path, MLP_FORMAT_VERSION)

    def _initialize(self, config: TrainConfig, rng: SeededRng) -> MlpModel:
        sizes = config.layer_sizes
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-bound, bound, (fan_out, fan_in)))
            biases.append(rng.uniform(-bound, bound, fan_out))
        return MlpModel(layer_sizes=sizes, weights=weights, biases=biases, config=config)

    def _check_inputs(self, model: MlpModel, queries) -> np.ndarray:
        queries = np.atleast_2d(as_vector(queries))
        if queries.ndim != 2 or queries.shape[1] != model.input_size:
            raise DimensionError(f"input has shape {queries.shape}, the network expects {model.input_size} features")
        return queries

    def _targets(self, model: MlpModel, labels, rows: int) -> np.ndarray:
        codes = np.asarray(labels, dtype=np.int64).reshape(-1)
        if codes.shape != (rows,):
            raise DimensionError(f"{rows} rows but {codes.shape[0]} labels")
        outputs = model.layer_sizes[-1]
        if codes.size and (codes.min() < 1 or codes.max() > outputs):
            raise DimensionError(f"labels must be codes 1..{outputs}")
        return codes - 1


# Create a singleton instance that will be used throughout the application
mlp_service = MlpService()
