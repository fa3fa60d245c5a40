"""
Full-dataset reproduction checks.

These train every model on the official UCI HAR data and take a long
time; they only run when HAR_DATASET_ROOT points at the dataset:

    HAR_DATASET_ROOT=/data/UCI\\ HAR\\ Dataset pytest -m slow
"""
import os
from pathlib import Path

import pytest

from src.models.experiment import ExperimentConfig, RunArtifact
from src.services.experiment_service import experiment_service

DATASET_ROOT = os.getenv('HAR_DATASET_ROOT')

pytestmark = [
    pytest.mark.slow,
    pytest.mark.skipif(not DATASET_ROOT, reason='HAR_DATASET_ROOT is not set'),
]


@pytest.fixture(scope='module')
def artifact() -> RunArtifact:
    config = ExperimentConfig(dataset_root=Path(DATASET_ROOT), seed=42, show_progress=False)
    return experiment_service.run(config)


def _row(artifact: RunArtifact, tag: str):
    return next(row for row in artifact.comparison if row.model_tag == tag)


def test_partition_sizes(artifact):
    partitions = artifact.dataset.partitions
    assert partitions['train'].size == 7352
    assert partitions['validation'].size + partitions['test'].size == 2947
    assert abs(partitions['validation'].size - partitions['test'].size) <= 1
    assert artifact.failures == []


def test_knn_curve(artifact):
    validation = artifact.knn.validation
    assert sorted(validation) == list(range(1, 10))
    assert all(0.80 <= report.accuracy <= 0.95 for report in validation.values())
    assert validation[9].accuracy_percent == pytest.approx(91.03, abs=2.5)


@pytest.mark.parametrize('tag', ['knn', 'mlp', 'naive_bayes', 'svm_linear'])
def test_headline_accuracy_within_band(artifact, tag):
    row = _row(artifact, tag)
    assert row.within_band, f'{tag}: {row.accuracy_percent:.2f} % vs {row.published_percent:.2f} %'


@pytest.mark.parametrize('tag', ['svm_polynomial', 'svm_sigmoid'])
def test_reconstructed_kernels_hit_the_band_or_report_a_gap(artifact, tag):
    row = _row(artifact, tag)
    gaps = [gap.model_tag for gap in artifact.hyperparameter_gaps]
    assert row.within_band or tag in gaps


def test_ranking(artifact):
    assert artifact.ranking.top_model == 'svm_linear'
    assert artifact.ranking.bottom_model == 'naive_bayes'
