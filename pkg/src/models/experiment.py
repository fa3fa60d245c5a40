"""
experiment.py

Experiment configuration, the published reference numbers every result
is compared against, and the run-artifact record the harness writes.

ExperimentConfig accepts list-valued settings either as lists or as the
comma-separated strings found in key=value files and on the command line
(hidden layer stacks use "x": "100x65").
"""
from enum import Enum
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.models.kernel import DEFAULT_COEF0, DEFAULT_DEGREE, Kernel, KernelKind
from src.models.mlp import PUBLISHED_HIDDEN_LAYERS, Optimizer, TrainConfig, TrainingHistory
from src.models.report import EvalReport
from src.models.sample import DatasetSummary
from src.models.svm import PUBLISHED_C, SmoConfig

ARTIFACT_SCHEMA_VERSION = 1


class ExperimentName(str, Enum):
    KNN_SWEEP = 'knn_sweep'
    SVM_KERNELS = 'svm_kernels'
    NAIVE_BAYES = 'naive_bayes'
    MLP = 'mlp'
    MLP_SEARCH = 'mlp_search'
    ALL = 'all'


# What "all" expands to; the architecture search only runs when named.
ALL_EXPERIMENTS = (ExperimentName.KNN_SWEEP, ExperimentName.SVM_KERNELS, ExperimentName.NAIVE_BAYES,
                   ExperimentName.MLP)


class PublishedTarget(BaseModel):
    """A published accuracy with the tolerance band a reproduction must hit"""
    model_config = ConfigDict(frozen=True)

    model_tag: str
    label: str
    accuracy_percent: float
    band_pp: float
    reconstructed: bool = False


PUBLISHED_TARGETS: dict[str, PublishedTarget] = {
    target.model_tag: target for target in (
        PublishedTarget(model_tag='knn', label='K Nearest Neighbors Classifiers', accuracy_percent=90.43, band_pp=2.5),
        PublishedTarget(model_tag='mlp', label='Multi-layer Perceptron', accuracy_percent=94.23, band_pp=2.5),
        PublishedTarget(model_tag='naive_bayes', label='Naïve Bayesian Classifier', accuracy_percent=77.02,
                        band_pp=4.0),
        PublishedTarget(model_tag='svm_linear', label='SVM with Linear Kernel', accuracy_percent=96.26, band_pp=2.0),
        PublishedTarget(model_tag='svm_polynomial', label='SVM with Polynomial Kernel', accuracy_percent=90.12,
                        band_pp=4.0, reconstructed=True),
        PublishedTarget(model_tag='svm_sigmoid', label='SVM with Sigmoid Kernel', accuracy_percent=91.75,
                        band_pp=4.0, reconstructed=True),
    )
}

PUBLISHED_KNN_VALIDATION = {1: 87.78, 2: 86.12, 3: 89.00, 4: 89.13, 5: 89.88, 6: 90.32, 7: 90.76, 8: 91.3, 9: 91.03}


def _split_list(value: Any) -> Any:
    if isinstance(value, str):
        return [item.strip() for item in value.split(',') if item.strip()]
    return value


def _parse_layers(value: Any) -> Any:
    if isinstance(value, str):
        return tuple(int(width) for width in value.lower().split('x') if width.strip())
    return value


class ExperimentConfig(BaseModel):
    """
    Every knob of a run, with the defaults that reproduce the published
    setup. A run artifact embeds this record, so re-running from it
    repeats the run.
    """
    model_config = ConfigDict(frozen=True)

    dataset_root: Path | None = None
    seed: int = Field(42, ge=0)
    experiments: list[ExperimentName] = Field(default_factory=lambda: [ExperimentName.ALL])
    output_directory: Path = Path('results')

    knn_k_values: list[int] = Field(default_factory=lambda: list(range(1, 10)))
    knn_final_k: int = Field(5, ge=1)

    svm_c: float = Field(PUBLISHED_C, gt=0)
    svm_kernels: list[KernelKind] = Field(
        default_factory=lambda: [KernelKind.LINEAR, KernelKind.SIGMOID, KernelKind.POLYNOMIAL])
    svm_kkt_tolerance: float = Field(1e-3, gt=0)
    svm_max_iterations: int = Field(200_000, ge=1)
    svm_max_passes_without_progress: int = Field(5, ge=1)
    svm_cache_bytes: int = Field(256 * 1024 * 1024, ge=0)
    kernel_gamma: float | None = Field(None, gt=0)
    kernel_coef0: float = DEFAULT_COEF0
    kernel_degree: int = Field(DEFAULT_DEGREE, ge=1)

    gnb_smoothing: float = Field(1e-9, ge=0)

    mlp_hidden_layers: tuple[int, ...] = PUBLISHED_HIDDEN_LAYERS
    mlp_learning_rate: float = Field(0.001, gt=0)
    mlp_epochs: int = Field(1000, ge=1)
    mlp_batch_size: int = Field(200, ge=1)
    mlp_optimizer: Optimizer = Optimizer.ADAM
    mlp_seed_count: int = Field(3, ge=1)
    mlp_search_candidates: list[tuple[int, ...]] = Field(
        default_factory=lambda: [(50,), (100,), (200,), (100, 30), (100, 65), (100, 100)])
    mlp_search_epochs: int = Field(100, ge=1)

    workers: int = Field(1, ge=1)
    save_models: bool = False
    show_progress: bool = True

    @field_validator('experiments', 'knn_k_values', 'svm_kernels', mode='before')
    @classmethod
    def _comma_lists(cls, value: Any) -> Any:
        return _split_list(value)

    @field_validator('mlp_hidden_layers', mode='before')
    @classmethod
    def _layers(cls, value: Any) -> Any:
        value = _parse_layers(value)
        if isinstance(value, list):
            value = tuple(value)
        return value

    @field_validator('mlp_search_candidates', mode='before')
    @classmethod
    def _candidates(cls, value: Any) -> Any:
        return [_parse_layers(item) for item in _split_list(value)]

    @field_validator('kernel_gamma', mode='before')
    @classmethod
    def _auto_gamma(cls, value: Any) -> Any:
        return None if value in ('', 'auto') else value

    @model_validator(mode='after')
    def _check(self):
        if not self.experiments:
            raise ValueError("at least one experiment must be selected")
        if not self.knn_k_values or min(self.knn_k_values) < 1:
            raise ValueError("knn_k_values must be positive integers")
        if not self.svm_kernels:
            raise ValueError("svm_kernels must name at least one kernel")
        if any(width < 1 for width in self.mlp_hidden_layers):
            raise ValueError("mlp_hidden_layers widths must be positive")
        if not self.mlp_search_candidates or any(not layers or min(layers) < 1
                                                 for layers in self.mlp_search_candidates):
            raise ValueError("mlp_search_candidates must be non-empty layer stacks like 100x65")
        return self

    def selected(self) -> list[ExperimentName]:
        """Experiments to run, in canonical order, with "all" expanded"""
        chosen = set(self.experiments)
        if ExperimentName.ALL in chosen:
            chosen |= set(ALL_EXPERIMENTS)
        order = [*ALL_EXPERIMENTS, ExperimentName.MLP_SEARCH]
        return [name for name in order if name in chosen]

    def smo_config(self) -> SmoConfig:
        return SmoConfig(
            C=self.svm_c,
            kkt_tolerance=self.svm_kkt_tolerance,
            max_iterations=self.svm_max_iterations,
            max_passes_without_progress=self.svm_max_passes_without_progress,
            cache_bytes=self.svm_cache_bytes,
            seed=self.seed,
        )

    def kernel(self, kind: KernelKind, feature_count: int) -> Kernel:
        """Kernel of the given kind; gamma defaults to 1 / feature_count"""
        gamma = self.kernel_gamma if self.kernel_gamma is not None else 1.0 / feature_count
        return Kernel(kind=kind, gamma=gamma, coef0=self.kernel_coef0, degree=self.kernel_degree)

    def train_config(self, seed: int, feature_count: int, hidden_layers: tuple[int, ...] | None = None,
                     epochs: int | None = None) -> TrainConfig:
        return TrainConfig(
            input_size=feature_count,
            hidden_layers=hidden_layers if hidden_layers is not None else self.mlp_hidden_layers,
            learning_rate=self.mlp_learning_rate,
            epochs=epochs if epochs is not None else self.mlp_epochs,
            batch_size=self.mlp_batch_size,
            optimizer=self.mlp_optimizer,
            seed=seed,
        )

    def mlp_seeds(self) -> list[int]:
        return [self.seed + offset for offset in range(self.mlp_seed_count)]


class KnnSweepSection(BaseModel):
    """Validation report per k, plus test reports at the fixed and the best k"""
    validation: dict[int, EvalReport]
    best_k: int
    final_k: int
    test_at_final_k: EvalReport
    test_at_best_k: EvalReport


class MachineDiagnostic(BaseModel):
    """Solver outcome of one pairwise machine"""
    class_a: int
    class_b: int
    converged: bool
    iterations: int
    max_kkt_violation: float
    dual_objective: float
    support_vectors: int


class SvmKernelRun(BaseModel):
    model_tag: str
    kernel: Kernel
    report: EvalReport
    machines: list[MachineDiagnostic]

    @property
    def all_converged(self) -> bool:
        return all(machine.converged for machine in self.machines)


class NaiveBayesSection(BaseModel):
    smoothing_epsilon: float
    validation: EvalReport
    test: EvalReport


class MlpSeedRun(BaseModel):
    seed: int
    test: EvalReport
    final_train_loss: float
    final_val_accuracy: float
    history: TrainingHistory


class MlpSection(BaseModel):
    """
    One run per seed. The comparison row uses the mean test accuracy;
    the confusion matrix shown for the MLP is the first seed's.
    """
    hidden_layers: tuple[int, ...]
    runs: list[MlpSeedRun]

    @property
    def mean_test_accuracy(self) -> float:
        return sum(run.test.accuracy for run in self.runs) / len(self.runs)


class MlpCandidate(BaseModel):
    hidden_layers: tuple[int, ...]
    validation: EvalReport


class MlpSearchSection(BaseModel):
    """Architecture search scored on validation accuracy with a reduced epoch budget"""
    epochs: int
    candidates: list[MlpCandidate]
    best_hidden_layers: tuple[int, ...]


class ComparisonRow(BaseModel):
    """One row of the final comparison, tied to the reports it was computed from"""
    model_tag: str
    label: str
    accuracy_percent: float
    published_percent: float
    delta_pp: float
    band_pp: float
    within_band: bool
    sources: list[str]


class RankingCheck(BaseModel):
    top_model: str
    bottom_model: str
    linear_is_top: bool
    naive_bayes_is_bottom: bool


class HyperparameterGap(BaseModel):
    """A model whose accuracy missed the published band"""
    model_tag: str
    label: str
    accuracy_percent: float
    published_percent: float
    band_pp: float
    reconstructed: bool
    parameters: dict[str, Any]


class FailureRecord(BaseModel):
    experiment: str
    model_tag: str
    error_type: str
    message: str


class RunArtifact(BaseModel):
    """
    Everything one run produced. Tables and figures are regenerated from
    this record alone.
    """
    schema_version: int = ARTIFACT_SCHEMA_VERSION
    config: ExperimentConfig
    dataset: DatasetSummary
    knn: KnnSweepSection | None = None
    svm: list[SvmKernelRun] = Field(default_factory=list)
    naive_bayes: NaiveBayesSection | None = None
    mlp: MlpSection | None = None
    mlp_search: MlpSearchSection | None = None
    comparison: list[ComparisonRow] = Field(default_factory=list)
    ranking: RankingCheck | None = None
    hyperparameter_gaps: list[HyperparameterGap] = Field(default_factory=list)
    failures: list[FailureRecord] = Field(default_factory=list)
    timings: dict[str, float] = Field(default_factory=dict)

    def headline_reports(self) -> dict[str, EvalReport]:
        """The test report behind each comparison row, keyed by model tag"""
        reports: dict[str, EvalReport] = {}
        if self.knn is not None:
            reports['knn'] = self.knn.test_at_final_k
        if self.mlp is not None and self.mlp.runs:
            reports['mlp'] = self.mlp.runs[0].test
        if self.naive_bayes is not None:
            reports['naive_bayes'] = self.naive_bayes.test
        for run in self.svm:
            reports[run.model_tag] = run.report
        return reports
