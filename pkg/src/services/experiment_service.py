"""
experiment_service.py

The experiment harness: loads the split, trains and evaluates each
configured model, compares the results with the published numbers and
writes every table, figure and the JSON run artifact.

A failing model is recorded in the artifact and the remaining models
still run. Emitted files are written atomically.
"""
import logging
import time
from collections.abc import Callable
from pathlib import Path
from typing import Any, TypeVar

from pydantic import ValidationError

from src.config import Config, load_key_value_file
from src.errors import AcquisitionError, ConfigurationError
from src.models.experiment import (
    PUBLISHED_TARGETS,
    ComparisonRow,
    ExperimentConfig,
    ExperimentName,
    FailureRecord,
    HyperparameterGap,
    KnnSweepSection,
    MachineDiagnostic,
    MlpCandidate,
    MlpSearchSection,
    MlpSection,
    MlpSeedRun,
    NaiveBayesSection,
    RankingCheck,
    RunArtifact,
    SvmKernelRun,
)
from src.models.sample import ActivityLabel, DatasetSummary, DataSplit
from src.services.dataset_service import dataset_service
from src.services.knn_service import knn_service
from src.services.metrics_service import metrics_service
from src.services.mlp_service import mlp_service
from src.services.naive_bayes_service import naive_bayes_service
from src.services.svm_service import svm_service
from src.utils.files import atomic_write_text, read_model, write_model
from src.utils.formatters import (
    ReportFormat,
    comparison_table_csv,
    history_csv,
    hyperparameter_gaps_markdown,
    knn_table_csv,
    render_report,
    svm_table_csv,
)

logger = logging.getLogger(__name__)

T = TypeVar('T')

ARTIFACT_FILE = 'artifact.json'


class ExperimentService:
    """
    ExperimentService Class

    Each run method takes the experiment configuration and, optionally,
    an already loaded split; without one the split is built from
    config.dataset_root.
    """

    def build_config(self, config_file: Path | None = None, base: ExperimentConfig | None = None,
                     **overrides: Any) -> ExperimentConfig:
        """
        Resolve the experiment configuration.

        Precedence, lowest first: defaults plus environment variables
        (or, instead, base: the config embedded in an earlier artifact),
        the key=value file, then overrides. None-valued overrides are
        ignored.

        Raises:
            ConfigurationError: unknown key or invalid value
        """
        if base is not None:
            values: dict[str, Any] = base.model_dump()
        else:
            environment = Config()
            values = {'output_directory': environment.output.folder}
            if environment.dataset.root is not None:
                values['dataset_root'] = environment.dataset.root
        if config_file is not None:
            values.update(load_key_value_file(Path(config_file), set(ExperimentConfig.model_fields)))
        values.update({key: value for key, value in overrides.items() if value is not None})
        try:
            return ExperimentConfig(**values)
        except ValidationError as error:
            raise ConfigurationError(f"invalid experiment configuration: {error}") from error

    def summarize_data(self, dataset_root: Path, seed: int) -> DatasetSummary:
        """Load the dataset, split the held-out partition and summarize all partitions"""
        train, heldout = dataset_service.load_uci_har(self._check_root(dataset_root))
        validation, test = dataset_service.split_heldout(heldout, seed)
        split = DataSplit(train=train, validation=validation, test=test, seed=seed)
        return dataset_service.summarize(split, heldout)

    def load_split(self, config: ExperimentConfig) -> DataSplit:
        return dataset_service.build_split(self._check_root(config.dataset_root), config.seed)

    def run(self, config: ExperimentConfig, split: DataSplit | None = None) -> RunArtifact:
        """
        Run every selected experiment and assemble the artifact.

        Returns:
            The artifact, with the comparison table, ranking check and
            hyperparameter gaps filled in from whatever models succeeded
        """
        split = split if split is not None else self.load_split(config)
        artifact = RunArtifact(config=config, dataset=dataset_service.summarize(split))
        selected = config.selected()
        logger.info("Running %s with seed %d", ', '.join(name.value for name in selected), config.seed)

        if ExperimentName.KNN_SWEEP in selected:
            artifact.knn = self._safe_run(artifact, 'knn_sweep', 'knn', lambda: self.run_knn_sweep(config, split))
        if ExperimentName.SVM_KERNELS in selected:
            artifact.svm = self.run_svm_kernels(config, split, artifact)
        if ExperimentName.NAIVE_BAYES in selected:
            artifact.naive_bayes = self._safe_run(artifact, 'naive_bayes', 'naive_bayes',
                                                  lambda: self.run_naive_bayes(config, split))
        if ExperimentName.MLP in selected:
            artifact.mlp = self.run_mlp(config, split, artifact)
        if ExperimentName.MLP_SEARCH in selected:
            artifact.mlp_search = self._safe_run(artifact, 'mlp_search', 'mlp_search',
                                                 lambda: self.run_mlp_search(config, split))

        self.compare(artifact)
        return artifact

    def run_all(self, config: ExperimentConfig, split: DataSplit | None = None) -> RunArtifact:
        """All six classifier configurations, whatever config.experiments says"""
        return self.run(config.model_copy(update={'experiments': [ExperimentName.ALL]}), split)

    def run_knn_sweep(self, config: ExperimentConfig, split: DataSplit) -> KnnSweepSection:
        """
        Validation accuracy for every k, then test accuracy at the fixed
        final k and at the best validation k.
        """
        k_values = sorted(set(config.knn_k_values))
        validation_predictions = knn_service.predict_for_k_values(
            split.train, split.validation.features, k_values, config.show_progress)
        validation = {
            k: metrics_service.evaluate(validation_predictions[k], split.validation.labels, model_tag='knn',
                                        split_tag='validation', config_echo={'k': k}, seed=config.seed)
            for k in k_values
        }
        best_k = min(k_values, key=lambda k: (-validation[k].accuracy, k))

        test_ks = sorted({config.knn_final_k, best_k})
        test_predictions = knn_service.predict_for_k_values(split.train, split.test.features, test_ks,
                                                            config.show_progress)
        test = {
            k: metrics_service.evaluate(test_predictions[k], split.test.labels, model_tag='knn', split_tag='test',
                                        config_echo={'k': k}, seed=config.seed)
            for k in test_ks
        }
        logger.info("KNN: best validation k=%d; test accuracy %.4f at k=%d", best_k,
                    test[config.knn_final_k].accuracy, config.knn_final_k)
        return KnnSweepSection(validation=validation, best_k=best_k, final_k=config.knn_final_k,
                               test_at_final_k=test[config.knn_final_k], test_at_best_k=test[best_k])

    def run_svm_kernels(self, config: ExperimentConfig, split: DataSplit,
                        artifact: RunArtifact | None = None) -> list[SvmKernelRun]:
        """One one-vs-one SVM per configured kernel, scored on test"""
        artifact = artifact or RunArtifact(config=config, dataset=dataset_service.summarize(split))
        runs = []
        for kind in config.svm_kernels:
            model_tag = f'svm_{kind.value}'
            run = self._safe_run(artifact, 'svm_kernels', model_tag,
                                 lambda kind=kind, tag=model_tag: self._run_svm(config, split, kind, tag))
            if run is not None:
                runs.append(run)
        return runs

    def _run_svm(self, config: ExperimentConfig, split: DataSplit, kind, model_tag: str) -> SvmKernelRun:
        kernel = config.kernel(kind, split.train.dimension)
        smo = config.smo_config()
        model = svm_service.ovo_train(split.train, kernel, smo, classes=list(ActivityLabel), workers=config.workers,
                                      show_progress=config.show_progress)
        predictions = svm_service.ovo_predict_batch(model, split.test.features)
        report = metrics_service.evaluate(predictions, split.test.labels, model_tag=model_tag, split_tag='test',
                                          config_echo={'kernel': kernel.model_dump(mode='json'),
                                                       **smo.model_dump(mode='json')},
                                          seed=config.seed)
        machines = [
            MachineDiagnostic(
                class_a=int(machine.class_a),
                class_b=int(machine.class_b),
                converged=machine.model.converged,
                iterations=machine.model.iterations,
                max_kkt_violation=machine.model.max_kkt_violation,
                dual_objective=machine.model.dual_objective,
                support_vectors=int(machine.model.alphas.shape[0]),
            )
            for machine in model.machines
        ]
        if not all(machine.converged for machine in machines):
            logger.warning("%s: %d of %d machines did not converge", model_tag,
                           sum(not machine.converged for machine in machines), len(machines))
        if config.save_models:
            svm_service.save(model, config.output_directory / 'models' / f'{model_tag}.json')
        logger.info("%s: test accuracy %.4f", model_tag, report.accuracy)
        return SvmKernelRun(model_tag=model_tag, kernel=kernel, report=report, machines=machines)

    def run_naive_bayes(self, config: ExperimentConfig, split: DataSplit) -> NaiveBayesSection:
        """Gaussian naive Bayes scored on validation and on test"""
        model = naive_bayes_service.fit(split.train, config.gnb_smoothing, classes=list(ActivityLabel))
        echo = {'smoothing_fraction': config.gnb_smoothing, 'smoothing_epsilon': model.smoothing_epsilon}
        reports = {
            name: metrics_service.evaluate(naive_bayes_service.predict_batch(model, part.features), part.labels,
                                           model_tag='naive_bayes', split_tag=name, config_echo=echo,
                                           seed=config.seed)
            for name, part in (('validation', split.validation), ('test', split.test))
        }
        if config.save_models:
            write_model(model, config.output_directory / 'models' / 'naive_bayes.json')
        logger.info("Naive Bayes: validation %.4f, test %.4f", reports['validation'].accuracy,
                    reports['test'].accuracy)
        return NaiveBayesSection(smoothing_epsilon=model.smoothing_epsilon, validation=reports['validation'],
                                 test=reports['test'])

    def run_mlp(self, config: ExperimentConfig, split: DataSplit,
                artifact: RunArtifact | None = None) -> MlpSection | None:
        """The published architecture trained once per seed"""
        artifact = artifact or RunArtifact(config=config, dataset=dataset_service.summarize(split))
        runs = []
        for seed in config.mlp_seeds():
            run = self._safe_run(artifact, 'mlp', f'mlp_seed{seed}',
                                 lambda seed=seed: self._run_mlp_seed(config, split, seed))
            if run is not None:
                runs.append(run)
        if not runs:
            return None
        section = MlpSection(hidden_layers=config.mlp_hidden_layers, runs=runs)
        logger.info("MLP: mean test accuracy %.4f over %d seeds", section.mean_test_accuracy, len(runs))
        return section

    def _run_mlp_seed(self, config: ExperimentConfig, split: DataSplit, seed: int) -> MlpSeedRun:
        train_config = config.train_config(seed, split.train.dimension)
        model, history = mlp_service.train(split.train, split.validation, train_config, config.show_progress)
        report = metrics_service.evaluate(mlp_service.predict_batch(model, split.test.features), split.test.labels,
                                          model_tag='mlp', split_tag='test',
                                          config_echo=train_config.model_dump(mode='json'), seed=seed)
        if config.save_models:
            mlp_service.save(model, config.output_directory / 'models' / f'mlp_seed{seed}.json')
        last = history.records[-1]
        return MlpSeedRun(seed=seed, test=report, final_train_loss=last.train_loss,
                          final_val_accuracy=last.val_accuracy, history=history)

    def run_mlp_search(self, config: ExperimentConfig, split: DataSplit) -> MlpSearchSection:
        """
        Architecture search: each candidate hidden-layer stack is trained
        with the reduced epoch budget and scored on validation. Ties go
        to the earlier candidate.
        """
        candidates = []
        for layers in config.mlp_search_candidates:
            train_config = config.train_config(config.seed, split.train.dimension, hidden_layers=layers,
                                               epochs=config.mlp_search_epochs)
            model, _ = mlp_service.train(split.train, split.validation, train_config, config.show_progress)
            report = metrics_service.evaluate(
                mlp_service.predict_batch(model, split.validation.features), split.validation.labels,
                model_tag='mlp_search', split_tag='validation', config_echo=train_config.model_dump(mode='json'),
                seed=config.seed)
            logger.info("MLP search %s: validation accuracy %.4f", 'x'.join(map(str, layers)), report.accuracy)
            candidates.append(MlpCandidate(hidden_layers=layers, validation=report))
        best = max(candidates, key=lambda candidate: candidate.validation.accuracy)
        return MlpSearchSection(epochs=config.mlp_search_epochs, candidates=candidates,
                                best_hidden_layers=best.hidden_layers)

    def compare(self, artifact: RunArtifact) -> None:
        """Fill in the comparison rows, the ranking check and the hyperparameter gaps"""
        measured: dict[str, tuple[float, list[str]]] = {}
        if artifact.knn is not None:
            measured['knn'] = (artifact.knn.test_at_final_k.accuracy, ['knn.test_at_final_k'])
        if artifact.mlp is not None:
            measured['mlp'] = (artifact.mlp.mean_test_accuracy,
                               [f'mlp.runs[{index}].test' for index in range(len(artifact.mlp.runs))])
        if artifact.naive_bayes is not None:
            measured['naive_bayes'] = (artifact.naive_bayes.test.accuracy, ['naive_bayes.test'])
        for index, run in enumerate(artifact.svm):
            measured[run.model_tag] = (run.report.accuracy, [f'svm[{index}].report'])

        rows, gaps = [], []
        for tag, target in PUBLISHED_TARGETS.items():
            if tag not in measured:
                continue
            accuracy, sources = measured[tag]
            percent = 100.0 * accuracy
            delta = percent - target.accuracy_percent
            within = abs(delta) <= target.band_pp + 1e-9
            rows.append(ComparisonRow(model_tag=tag, label=target.label, accuracy_percent=percent,
                                      published_percent=target.accuracy_percent, delta_pp=delta,
                                      band_pp=target.band_pp, within_band=within, sources=sources))
            if not within:
                logger.warning("%s: %.2f %% is outside %.2f +- %.1f", target.label, percent,
                               target.accuracy_percent, target.band_pp)
                gaps.append(HyperparameterGap(model_tag=tag, label=target.label, accuracy_percent=percent,
                                              published_percent=target.accuracy_percent, band_pp=target.band_pp,
                                              reconstructed=target.reconstructed,
                                              parameters=self._parameters(artifact, tag)))
        artifact.comparison = rows
        artifact.hyperparameter_gaps = gaps
        artifact.ranking = None
        if len(rows) >= 2:
            top = max(rows, key=lambda row: row.accuracy_percent)
            bottom = min(rows, key=lambda row: row.accuracy_percent)
            artifact.ranking = RankingCheck(top_model=top.model_tag, bottom_model=bottom.model_tag,
                                            linear_is_top=top.model_tag == 'svm_linear',
                                            naive_bayes_is_bottom=bottom.model_tag == 'naive_bayes')

    def write_outputs(self, artifact: RunArtifact, directory: Path) -> list[Path]:
        """
        Write the artifact and everything derived from it: the KNN, SVM
        and comparison tables, a CSV and an SVG confusion matrix per
        model, the MLP training histories and, when a model missed its
        band, hyperparameter_gaps.md.
        """
        directory = Path(directory)
        written = [write_model(artifact, directory / ARTIFACT_FILE)]
        if artifact.knn is not None:
            written.append(atomic_write_text(directory / 'table_knn.csv', knn_table_csv(artifact.knn)))
        if artifact.svm:
            written.append(atomic_write_text(directory / 'table_svm.csv', svm_table_csv(artifact.svm)))
        written.append(atomic_write_text(directory / 'table_comparison.csv',
                                         comparison_table_csv(artifact.comparison)))
        for tag, report in artifact.headline_reports().items():
            for output_format in (ReportFormat.CSV, ReportFormat.SVG):
                path = directory / f'confusion_{tag}.{output_format.value}'
                written.append(atomic_write_text(path, render_report(report, output_format)))
        if artifact.mlp is not None:
            for run in artifact.mlp.runs:
                written.append(atomic_write_text(directory / f'mlp_history_seed{run.seed}.csv',
                                                 history_csv(run.history)))
        if artifact.hyperparameter_gaps:
            written.append(atomic_write_text(directory / 'hyperparameter_gaps.md',
                                             hyperparameter_gaps_markdown(artifact.hyperparameter_gaps)))
        logger.info("Wrote %d files to %s", len(written), directory)
        return written

    def load_artifact(self, path: Path) -> RunArtifact:
        path = Path(path)
        if path.is_dir():
            path = path / ARTIFACT_FILE
        return read_model(RunArtifact, path)

    def render(self, artifact_path: Path, directory: Path | None = None) -> list[Path]:
        """Regenerate tables and figures from a stored artifact"""
        artifact = self.load_artifact(artifact_path)
        target = Path(directory) if directory is not None else Path(artifact_path)
        if target.suffix == '.json':
            target = target.parent
        return self.write_outputs(artifact, target)

    def _safe_run(self, artifact: RunArtifact, experiment: str, model_tag: str, operation: Callable[[], T]) -> T | None:
        """
        Run one model, timing it; a failure is logged and recorded in the
        artifact instead of ending the run.
        """
        start = time.perf_counter()
        try:
            return operation()
        except Exception as error:
            logger.error("%s/%s failed: %s", experiment, model_tag, error)
            artifact.failures.append(FailureRecord(experiment=experiment, model_tag=model_tag,
                                                   error_type=type(error).__name__, message=str(error)))
            return None
        finally:
            artifact.timings[model_tag] = time.perf_counter() - start

    def _parameters(self, artifact: RunArtifact, tag: str) -> dict[str, Any]:
        config = artifact.config
        if tag.startswith('svm_'):
            kernel = config.kernel(next(kind for kind in config.svm_kernels if f'svm_{kind.value}' == tag),
                                   artifact.dataset.feature_count)
            return {'C': config.svm_c, **kernel.model_dump(mode='json')}
        if tag == 'mlp':
            return {'hidden_layers': 'x'.join(map(str, config.mlp_hidden_layers)),
                    'learning_rate': config.mlp_learning_rate, 'epochs': config.mlp_epochs,
                    'batch_size': config.mlp_batch_size, 'optimizer': config.mlp_optimizer.value,
                    'seeds': config.mlp_seeds()}
        if tag == 'knn':
            return {'k': config.knn_final_k}
        return {'smoothing_fraction': config.gnb_smoothing}

    def _check_root(self, dataset_root: Path | None) -> Path:
        if dataset_root is None:
            raise ConfigurationError("no dataset root configured (set HAR_DATASET_ROOT or pass --dataset-root)")
        root = Path(dataset_root)
        if not root.exists():
            raise AcquisitionError(f"dataset root does not exist: {root}")
        return root


# Create a singleton instance that will be used throughout the application
experiment_service = ExperimentService()
